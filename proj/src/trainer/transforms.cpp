#include "rmpm/trainer/transforms.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string>

#include "rmpm/error.hpp"
#include "rmpm/rng.hpp"

namespace rmpm::trainer {
namespace {

std::vector<std::string_view> split_colon(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(':', start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_number(std::string_view s, std::string_view context) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail(Errc::unknown_transform, "bad number '" + std::string(s) + "' in " + std::string(context));
  }
  return v;
}

std::string format_degrees(double d) {
  if (d == std::floor(d)) return std::to_string(static_cast<long long>(d));
  std::string s = std::to_string(d);
  s.erase(s.find_last_not_of('0') + 1);
  return s;
}

void flip_horizontal(std::span<double> img, const Shape& sh) {
  for (std::size_t c = 0; c < sh.channels; ++c) {
    for (std::size_t y = 0; y < sh.height; ++y) {
      double* row = img.data() + (c * sh.height + y) * sh.width;
      std::reverse(row, row + sh.width);
    }
  }
}

void pixelate(std::span<double> img, const Shape& sh, std::size_t f) {
  for (std::size_t c = 0; c < sh.channels; ++c) {
    double* plane = img.data() + c * sh.height * sh.width;
    for (std::size_t by = 0; by < sh.height; by += f) {
      for (std::size_t bx = 0; bx < sh.width; bx += f) {
        const std::size_t ye = std::min(by + f, sh.height);
        const std::size_t xe = std::min(bx + f, sh.width);
        // Offsets from the first pixel keep constant blocks bit-exact.
        const double first = plane[by * sh.width + bx];
        double acc = 0.0;
        for (std::size_t y = by; y < ye; ++y)
          for (std::size_t x = bx; x < xe; ++x) acc += plane[y * sh.width + x] - first;
        const double mean = first + acc / static_cast<double>((ye - by) * (xe - bx));
        for (std::size_t y = by; y < ye; ++y)
          for (std::size_t x = bx; x < xe; ++x) plane[y * sh.width + x] = mean;
      }
    }
  }
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r) h = (g - b) / d;
  else if (mx == g) h = 2.0 + (b - r) / d;
  else h = 4.0 + (r - g) / d;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = (h - std::floor(h)) * 6.0;
  const int i = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

void jitter(std::span<double> img, const Shape& sh, double factor, double hue_shift) {
  for (double& p : img) p = std::clamp(p * factor, 0.0, 1.0);
  if (sh.channels != 3 || hue_shift == 0.0) return;
  const std::size_t plane = sh.height * sh.width;
  for (std::size_t i = 0; i < plane; ++i) {
    double h, s, v;
    rgb_to_hsv(img[i], img[plane + i], img[2 * plane + i], h, s, v);
    hsv_to_rgb(h + hue_shift, s, v, img[i], img[plane + i], img[2 * plane + i]);
  }
}

void rotate(std::span<double> img, const Shape& sh, double degrees) {
  if (degrees == 0.0) return;
  const double a = degrees * std::numbers::pi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double cx = (static_cast<double>(sh.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(sh.height) - 1.0) / 2.0;
  const std::vector<double> src(img.begin(), img.end());
  const auto h = static_cast<long>(sh.height), w = static_cast<long>(sh.width);
  for (std::size_t c = 0; c < sh.channels; ++c) {
    const double* in = src.data() + c * sh.height * sh.width;
    double* out = img.data() + c * sh.height * sh.width;
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        // Inverse map: output pixel samples the source rotated by -angle.
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        const double sx = ca * dx + sa * dy + cx;
        const double sy = -sa * dx + ca * dy + cy;
        const long x0 = static_cast<long>(std::floor(sx)), y0 = static_cast<long>(std::floor(sy));
        const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
        auto at = [&](long yy, long xx) {
          return (yy < 0 || yy >= h || xx < 0 || xx >= w) ? 0.0 : in[yy * w + xx];
        };
        const double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                         fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
        out[y * w + x] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
}

}  // namespace

std::string OodTransform::name() const {
  switch (kind) {
    case Kind::xflip: return "xflip";
    case Kind::pixelate: return "pixelate";
    case Kind::color_jitter: return "jitter";
    case Kind::rotation: return "rot" + format_degrees(min_degrees) + "-" + format_degrees(max_degrees);
  }
  return "unknown";
}

OodTransform OodTransform::parse(std::string_view text) {
  const auto parts = split_colon(text);
  OodTransform t;
  const auto head = parts[0];
  if (head == "xflip" && parts.size() <= 2) {
    t.kind = Kind::xflip;
    if (parts.size() == 2) t.flip_probability = parse_number(parts[1], text);
    if (t.flip_probability < 0.0 || t.flip_probability > 1.0)
      fail(Errc::unknown_transform, "flip probability outside [0, 1]");
  } else if (head == "pixelate" && parts.size() <= 2) {
    t.kind = Kind::pixelate;
    if (parts.size() == 2) {
      const double f = parse_number(parts[1], text);
      if (f < 1.0 || f != std::floor(f)) fail(Errc::unknown_transform, "pixelate factor must be a positive integer");
      t.factor = static_cast<std::size_t>(f);
    }
  } else if (head == "jitter" && parts.size() <= 3) {
    t.kind = Kind::color_jitter;
    if (parts.size() >= 2) t.brightness = parse_number(parts[1], text);
    if (parts.size() == 3) t.hue = parse_number(parts[2], text);
    if (t.brightness < 0.0 || t.hue < 0.0 || t.hue > 0.5)
      fail(Errc::unknown_transform, "jitter needs brightness >= 0 and hue in [0, 0.5]");
  } else if (head == "rot" && parts.size() == 3) {
    t.kind = Kind::rotation;
    t.min_degrees = parse_number(parts[1], text);
    t.max_degrees = parse_number(parts[2], text);
    if (t.min_degrees > t.max_degrees) fail(Errc::unknown_transform, "rotation range is reversed");
  } else {
    fail(Errc::unknown_transform, std::string(text));
  }
  return t;
}

std::vector<OodTransform> rotation_family() {
  std::vector<OodTransform> out;
  auto add = [&](double lo, double hi) {
    OodTransform t;
    t.kind = OodTransform::Kind::rotation;
    t.min_degrees = lo;
    t.max_degrees = hi;
    out.push_back(t);
  };
  add(0, 20);
  for (int lo = 20; lo < 110; lo += 10) add(lo, lo + 10);
  return out;
}

Dataset apply_ood_transform(const Dataset& d, const OodTransform& t, std::uint64_t seed) {
  Dataset out = d;
  Rng rng(derive_seed(seed, t.name()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto img = out.image(i);
    switch (t.kind) {
      case OodTransform::Kind::xflip:
        if (rng.uniform() < t.flip_probability) flip_horizontal(img, out.shape);
        break;
      case OodTransform::Kind::pixelate:
        pixelate(img, out.shape, t.factor);
        break;
      case OodTransform::Kind::color_jitter: {
        const double factor = rng.uniform(std::max(0.0, 1.0 - t.brightness), 1.0 + t.brightness);
        const double hue = rng.uniform(-t.hue, t.hue);
        jitter(img, out.shape, factor, hue);
        break;
      }
      case OodTransform::Kind::rotation:
        rotate(img, out.shape, rng.uniform(t.min_degrees, t.max_degrees));
        break;
    }
  }
  out.split = Split::test;
  out.fingerprint = mix64(d.fingerprint ^ fnv1a64(t.name()) ^ seed);
  return out;
}

}  // namespace rmpm::trainer
