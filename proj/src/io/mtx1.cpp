#include "rmpm/io/mtx1.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "rmpm/error.hpp"

namespace rmpm::io {
namespace {

void put_le32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

template <typename U>
void put_le(std::vector<unsigned char>& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void write_matrix(const linalg::Matrix& m, const std::filesystem::path& path, Dtype dtype) {
  constexpr auto max32 = std::numeric_limits<std::uint32_t>::max();
  require(m.rows() <= max32 && m.cols() <= max32, Errc::invalid_argument, "matrix too large for MTX1");
  require(dtype == Dtype::f32 || dtype == Dtype::f64, Errc::unsupported_dtype, "unknown MTX1 dtype");
  std::vector<unsigned char> bytes{'M', 'T', 'X', '1', 1, static_cast<unsigned char>(dtype)};
  put_le32(bytes, static_cast<std::uint32_t>(m.rows()));
  put_le32(bytes, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.values()) {
    if (dtype == Dtype::f64) {
      put_le(bytes, std::bit_cast<std::uint64_t>(v));
    } else {
      put_le(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io, "write failed for " + path.string());
}

linalg::Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  const std::vector<unsigned char> b{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (b.size() < 4 || std::memcmp(b.data(), "MTX1", 4) != 0) fail(Errc::bad_magic, path.string());
  if (b.size() < kMtx1HeaderBytes) fail(Errc::payload_length, path.string() + ": header truncated");
  if (b[4] != 1) fail(Errc::unsupported_dtype, path.string() + ": version " + std::to_string(b[4]));
  const auto dtype = b[5];
  if (dtype != 1 && dtype != 2) fail(Errc::unsupported_dtype, path.string() + ": dtype " + std::to_string(dtype));
  const std::size_t rows = get_le<std::uint32_t>(b.data() + 6);
  const std::size_t cols = get_le<std::uint32_t>(b.data() + 10);
  const std::size_t width = dtype == 1 ? 4 : 8;
  const std::size_t expected = kMtx1HeaderBytes + rows * cols * width;
  if (b.size() != expected) {
    fail(Errc::payload_length, path.string() + ": " + std::to_string(b.size()) + " bytes, expected " +
                                   std::to_string(expected));
  }
  std::vector<double> data(rows * cols);
  const unsigned char* p = b.data() + kMtx1HeaderBytes;
  for (std::size_t i = 0; i < data.size(); ++i, p += width) {
    data[i] = dtype == 2 ? std::bit_cast<double>(get_le<std::uint64_t>(p))
                         : static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
  }
  return linalg::Matrix(rows, cols, std::move(data));
}

}  // namespace rmpm::io
