#pragma once

// Byte-level helpers shared by the model file, the matrix cache and the CLI.

#include "crc/types.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crc::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written in host order and assume little-endian");

/// zlib CRC-32 of `bytes`.
std::uint32_t crc32(std::span<const std::uint8_t> bytes);
std::uint32_t crc32(std::string_view text);

/// Writes to a temporary file next to `path`, then renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

class ByteWriter {
 public:
  void raw(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + size);
  }
  template <class T>
  void put(T v) {
    raw(&v, sizeof v);
  }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(v); }
  void f64s(const double* data, std::size_t count) { raw(data, count * sizeof(double)); }
  void string(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }

  std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked reader; running off the end raises `on_short`.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, ErrorKind on_short)
      : bytes_(bytes), on_short_(on_short) {}

  void raw(void* out, std::size_t size) {
    if (size > bytes_.size() - pos_) fail(on_short_, "unexpected end of data");
    std::memcpy(out, bytes_.data() + pos_, size);
    pos_ += size;
  }
  template <class T>
  T get() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return get<double>(); }
  void f64s(double* out, std::size_t count) {
    if (count > (bytes_.size() - pos_) / sizeof(double)) fail(on_short_, "unexpected end of data");
    raw(out, count * sizeof(double));
  }
  /// A count that must fit in the remaining bytes at `unit` bytes each.
  std::uint64_t count(std::size_t unit) {
    const std::uint64_t c = u64();
    if (unit > 0 && c > (bytes_.size() - pos_) / unit) fail(on_short_, "length field exceeds data");
    return c;
  }
  std::string string() {
    const auto len = count(1);
    std::string s(len, '\0');
    raw(s.data(), len);
    return s;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  ErrorKind on_short_;
};

}  // namespace crc::io
