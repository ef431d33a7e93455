#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rmpm::trainer {

struct Shape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const noexcept { return channels * height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

enum class Split { train, test };

// Images in [0, 1], stored sample-major as channels x height x width.
struct Dataset {
  Shape shape;
  std::size_t classes = 0;
  std::vector<double> pixels;
  std::vector<std::size_t> labels;
  Split split = Split::train;
  std::uint64_t fingerprint = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> image(std::size_t i) const noexcept {
    return {pixels.data() + i * shape.size(), shape.size()};
  }
  std::span<double> image(std::size_t i) noexcept {
    return {pixels.data() + i * shape.size(), shape.size()};
  }

  // Checks labels < classes and pixels finite in [0, 1].
  void validate() const;
  // Content hash over pixels, labels and shape.
  std::uint64_t content_hash() const;
  Dataset head(std::size_t count) const;
};

std::string fingerprint_hex(std::uint64_t fp);

}  // namespace rmpm::trainer
