#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rmpm/trainer/dataset.hpp"

namespace rmpm::trainer {

// Evaluation-time perturbation used to build out-of-distribution test sets.
struct OodTransform {
  enum class Kind { xflip, pixelate, color_jitter, rotation };

  Kind kind = Kind::xflip;
  double flip_probability = 0.9;
  std::size_t factor = 2;
  double brightness = 0.3;  // multiplicative factor drawn from [1 - b, 1 + b]
  double hue = 0.1;         // hue shift drawn from [-hue, hue] (fraction of a turn)
  double min_degrees = 0.0;
  double max_degrees = 20.0;

  // Stable identifier used for file and column names, e.g. "xflip", "rot20-30".
  std::string name() const;

  // "xflip[:p]", "pixelate[:factor]", "jitter[:brightness[:hue]]", "rot:lo:hi".
  static OodTransform parse(std::string_view text);
};

// The ten rotation ranges 0-20, 20-30, ..., 100-110 degrees.
std::vector<OodTransform> rotation_family();

// Same shapes and labels; pixels clamped to [0, 1]. Stochastic transforms draw
// from a stream derived from `seed` and the transform name. On one-channel
// images hue jitter has nothing to rotate and reduces to brightness.
Dataset apply_ood_transform(const Dataset& d, const OodTransform& t, std::uint64_t seed);

}  // namespace rmpm::trainer
