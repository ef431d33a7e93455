#pragma once

#include <cstddef>
#include <cstdint>

#include "rmpm/trainer/dataset.hpp"

namespace rmpm::trainer {

struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t samples = 2000;
  std::size_t image_size = 16;
  // 0 gives clean, linearly separable class prototypes; larger values add
  // pixel noise, a blend with a random other class and one-pixel jitter.
  double noise = 0.3;
};

// Class-conditional stripe + blob images. Prototypes depend only on the class
// index and image size, so train and test sets drawn with different seeds
// share one distribution. Labels cycle 0..C-1.
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                           Split split = Split::train);

}  // namespace rmpm::trainer
