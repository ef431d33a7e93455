#pragma once

#include <cstdint>
#include <filesystem>

#include "rmpm/linalg/matrix.hpp"

namespace rmpm::io {

// "MTX1", u8 version (1), u8 dtype, u32 LE rows, u32 LE cols, row-major payload.
enum class Dtype : std::uint8_t { f32 = 1, f64 = 2 };

inline constexpr std::size_t kMtx1HeaderBytes = 14;

void write_matrix(const linalg::Matrix& m, const std::filesystem::path& path, Dtype dtype = Dtype::f64);

// f32 payloads are widened to double. Errors: Errc::io, bad_magic,
// unsupported_dtype, payload_length.
linalg::Matrix read_matrix(const std::filesystem::path& path);

}  // namespace rmpm::io
