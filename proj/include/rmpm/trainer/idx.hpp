#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>

#include "rmpm/trainer/dataset.hpp"

namespace rmpm::trainer {

// Big-endian IDX headers as used by the MNIST family of datasets.
inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Loads an unsigned-byte image file (N x rows x cols) and its label file.
// Pixels are scaled to [0, 1]; the fingerprint hashes the raw bytes of both
// files. `classes` defaults to max label + 1.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::optional<std::size_t> classes = std::nullopt, Split split = Split::train);

// Writes single-channel datasets, quantizing pixels to round(255 * p).
void write_idx(const Dataset& d, const std::filesystem::path& images,
               const std::filesystem::path& labels);

}  // namespace rmpm::trainer
