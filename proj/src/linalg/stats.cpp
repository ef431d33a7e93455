#include <algorithm>
#include <cmath>

#include "rmpm/error.hpp"
#include "rmpm/linalg/linalg.hpp"

namespace rmpm::linalg {

std::size_t truncate_by_variance(std::span<const double> s, double fraction) {
  require(!s.empty(), Errc::empty_input, "no singular values");
  require(fraction > 0.0 && fraction <= 1.0, Errc::invalid_argument,
          "variance fraction must lie in (0, 1]");
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    require(std::isfinite(s[i]) && s[i] >= 0.0, Errc::invalid_argument,
            "singular values must be finite and non-negative");
    require(i == 0 || s[i] <= s[i - 1], Errc::invalid_argument,
            "singular values must be non-increasing");
    total += s[i] * s[i];
  }
  require(total > 0.0, Errc::no_variance, "all singular values are zero");

  // Accumulate in the same order as `total` so the final ratio is exactly 1.
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    acc += s[i] * s[i];
    if (acc / total >= fraction) return i + 1;
  }
  return s.size();
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(Errc::length_mismatch, "pearson inputs have lengths " + std::to_string(x.size()) +
                                    " and " + std::to_string(y.size()));
  }
  require(x.size() >= 2, Errc::length_mismatch, "pearson needs at least two points");
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  require(!constant(x) && !constant(y), Errc::constant_series,
          "correlation is undefined for a constant series");

  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace rmpm::linalg
