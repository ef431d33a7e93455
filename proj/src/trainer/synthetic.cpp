#include "rmpm/trainer/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "rmpm/error.hpp"
#include "rmpm/rng.hpp"

namespace rmpm::trainer {
namespace {

std::vector<double> prototype(std::size_t cls, std::size_t classes, std::size_t size) {
  const double pi = std::numbers::pi;
  const double theta = pi * static_cast<double>(cls) / static_cast<double>(classes);
  const double freq = 2.0 * pi / (3.0 + static_cast<double>(cls % 3));
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  const double orbit = 0.3 * static_cast<double>(size);
  const double phi = 2.0 * pi * static_cast<double>(cls) / static_cast<double>(classes);
  const double bx = c + orbit * std::cos(phi);
  const double by = c + orbit * std::sin(phi);
  const double sigma2 = std::pow(0.12 * static_cast<double>(size), 2);

  std::vector<double> img(size * size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double u = static_cast<double>(x) - c;
      const double v = static_cast<double>(y) - c;
      const double stripe = 0.5 + 0.5 * std::cos(freq * (u * std::cos(theta) + v * std::sin(theta)));
      const double dx = static_cast<double>(x) - bx;
      const double dy = static_cast<double>(y) - by;
      const double blob = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma2));
      img[y * size + x] = std::clamp(0.45 * stripe + 0.55 * blob, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed, Split split) {
  require(spec.classes >= 2, Errc::invalid_argument, "synthetic data needs at least 2 classes");
  require(spec.image_size >= 4, Errc::invalid_argument, "synthetic images need size >= 4");
  require(spec.samples >= 1, Errc::invalid_argument, "synthetic data needs samples");
  require(spec.noise >= 0.0, Errc::invalid_argument, "noise must be non-negative");

  const std::size_t s = spec.image_size;
  std::vector<std::vector<double>> protos;
  for (std::size_t c = 0; c < spec.classes; ++c) protos.push_back(prototype(c, spec.classes, s));

  Rng rng(derive_seed(seed, "synthetic"));
  Dataset d;
  d.shape = Shape{1, s, s};
  d.classes = spec.classes;
  d.split = split;
  d.labels.resize(spec.samples);
  d.pixels.assign(spec.samples * s * s, 0.0);

  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t cls = i % spec.classes;
    d.labels[i] = cls;
    const double amplitude = rng.uniform(0.6, 1.0);
    std::size_t other = cls;
    double blend = 0.0;
    long shift_x = 0, shift_y = 0;
    if (spec.noise > 0.0) {
      other = (cls + 1 + rng.below(spec.classes - 1)) % spec.classes;
      blend = rng.uniform(0.0, spec.noise);
      shift_x = static_cast<long>(rng.below(3)) - 1;
      shift_y = static_cast<long>(rng.below(3)) - 1;
    }
    auto img = d.image(i);
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) {
        const long sx = std::clamp(static_cast<long>(x) - shift_x, 0L, static_cast<long>(s) - 1);
        const long sy = std::clamp(static_cast<long>(y) - shift_y, 0L, static_cast<long>(s) - 1);
        const std::size_t src = static_cast<std::size_t>(sy) * s + static_cast<std::size_t>(sx);
        double v = amplitude * ((1.0 - blend) * protos[cls][src] + blend * protos[other][src]);
        if (spec.noise > 0.0) v += 0.5 * spec.noise * rng.normal();
        img[y * s + x] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  d.fingerprint = d.content_hash();
  return d;
}

}  // namespace rmpm::trainer
