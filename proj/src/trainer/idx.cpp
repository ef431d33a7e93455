#include "rmpm/trainer/idx.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "rmpm/error.hpp"

namespace rmpm::trainer {
namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(bytes, 4);
}

std::uint64_t hash_bytes(const std::vector<unsigned char>& b, std::uint64_t h) {
  for (unsigned char c : b) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::optional<std::size_t> classes, Split split) {
  const auto img = read_all(images);
  const auto lab = read_all(labels);

  if (img.size() < 4) fail(Errc::truncated_payload, images.string() + ": header truncated");
  if (be32(img, 0) != kIdxImagesMagic) fail(Errc::bad_magic, images.string());
  if (img.size() < 16) fail(Errc::truncated_payload, images.string() + ": header truncated");
  if (lab.size() < 4) fail(Errc::truncated_payload, labels.string() + ": header truncated");
  if (be32(lab, 0) != kIdxLabelsMagic) fail(Errc::bad_magic, labels.string());
  if (lab.size() < 8) fail(Errc::truncated_payload, labels.string() + ": header truncated");

  const std::size_t n = be32(img, 4);
  const std::size_t rows = be32(img, 8);
  const std::size_t cols = be32(img, 12);
  const std::size_t n_labels = be32(lab, 4);
  if (img.size() < 16 + n * rows * cols) {
    fail(Errc::truncated_payload, images.string() + ": expected " +
                                      std::to_string(n * rows * cols) + " pixel bytes");
  }
  if (lab.size() < 8 + n_labels) {
    fail(Errc::truncated_payload,
         labels.string() + ": expected " + std::to_string(n_labels) + " label bytes");
  }
  if (n != n_labels) {
    fail(Errc::count_mismatch,
         std::to_string(n) + " images vs " + std::to_string(n_labels) + " labels");
  }

  Dataset d;
  d.shape = Shape{1, rows, cols};
  d.split = split;
  d.pixels.resize(n * rows * cols);
  for (std::size_t i = 0; i < d.pixels.size(); ++i) d.pixels[i] = img[16 + i] / 255.0;
  d.labels.resize(n);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = lab[8 + i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.classes = classes.value_or(n ? max_label + 1 : 0);
  d.fingerprint = hash_bytes(lab, hash_bytes(img, 0xcbf29ce484222325ULL));
  d.validate();
  return d;
}

void write_idx(const Dataset& d, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
  require(d.shape.channels == 1, Errc::invalid_argument, "IDX export supports one channel");
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img) fail(Errc::io, "cannot write " + images.string());
  if (!lab) fail(Errc::io, "cannot write " + labels.string());

  put_be32(img, kIdxImagesMagic);
  put_be32(img, static_cast<std::uint32_t>(d.size()));
  put_be32(img, static_cast<std::uint32_t>(d.shape.height));
  put_be32(img, static_cast<std::uint32_t>(d.shape.width));
  std::vector<char> bytes(d.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double q = std::round(std::clamp(d.pixels[i], 0.0, 1.0) * 255.0);
    bytes[i] = static_cast<char>(static_cast<unsigned char>(q));
  }
  img.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));

  put_be32(lab, kIdxLabelsMagic);
  put_be32(lab, static_cast<std::uint32_t>(d.size()));
  for (std::size_t l : d.labels) lab.put(static_cast<char>(static_cast<unsigned char>(l)));
  if (!img || !lab) fail(Errc::io, "write failed for " + images.string());
}

}  // namespace rmpm::trainer
