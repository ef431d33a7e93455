#include "rmpm/trainer/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "rmpm/error.hpp"
#include "rmpm/rng.hpp"

namespace rmpm::trainer {

std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

void Dataset::validate() const {
  require(shape.size() > 0, Errc::shape_mismatch, "dataset has an empty image shape");
  require(pixels.size() == labels.size() * shape.size(), Errc::shape_mismatch,
          "pixel buffer does not match sample count");
  for (std::size_t l : labels) {
    if (l >= classes) {
      fail(Errc::invalid_argument,
           "label " + std::to_string(l) + " outside " + std::to_string(classes) + " classes");
    }
  }
  for (double p : pixels) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) fail(Errc::invalid_argument, "pixel outside [0, 1]");
  }
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  feed(shape.channels);
  feed(shape.height);
  feed(shape.width);
  feed(classes);
  for (double p : pixels) {
    std::uint64_t bits;
    std::memcpy(&bits, &p, sizeof bits);
    feed(bits);
  }
  for (std::size_t l : labels) feed(l);
  return h;
}

Dataset Dataset::head(std::size_t count) const {
  Dataset out;
  out.shape = shape;
  out.classes = classes;
  out.split = split;
  count = std::min(count, size());
  out.pixels.assign(pixels.begin(),
                    pixels.begin() + static_cast<std::ptrdiff_t>(count * shape.size()));
  out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(count));
  out.fingerprint = count == size() ? fingerprint : mix64(fingerprint ^ count);
  return out;
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

}  // namespace rmpm::trainer
