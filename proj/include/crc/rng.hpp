#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11) with
// Box-Muller normals. Every draw is a pure function of (seed, stream, row,
// index), so any partition of the work across threads yields the same bits.
// The standard library distributions are implementation defined and would
// not reproduce across platforms.

#include <array>
#include <cstdint>

namespace crc::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

Counter philox4x32_10(Counter ctr, Key key) noexcept;

inline constexpr const char* kGeneratorName = "philox4x32-10/box-muller";

/// Uniform on the open interval (0, 1) from 52 random bits. With 53 the top
/// value rounds to exactly 1.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

/// Addressable normal and uniform draws for one (seed, stream).
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint32_t stream) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

  /// Two standard normals for pair `pair` of row `row`.
  std::array<double, 2> normal_pair(std::uint32_t row, std::uint64_t pair) const noexcept;
  double normal(std::uint32_t row, std::uint64_t index) const noexcept {
    return normal_pair(row, index / 2)[index % 2];
  }
  /// Two uniforms on (0, 1) for pair `pair` of row `row`.
  std::array<double, 2> uniform_pair(std::uint32_t row, std::uint64_t pair) const noexcept;
  double uniform(std::uint32_t row, std::uint64_t index) const noexcept {
    return uniform_pair(row, index / 2)[index % 2];
  }

  /// out[k] = normal(row, k) for k < count.
  void fill_normal_serial(std::uint32_t row, double* out, std::uint64_t count) const noexcept;
  void fill_normal_parallel(std::uint32_t row, double* out, std::uint64_t count) const;

 private:
  Counter block(std::uint32_t row, std::uint64_t pair) const noexcept {
    return philox4x32_10({static_cast<std::uint32_t>(pair), static_cast<std::uint32_t>(pair >> 32), row, stream_},
                         key_);
  }

  Key key_;
  std::uint32_t stream_;
};

/// splitmix64 finalizer; derives independent seeds from structured inputs.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace crc::rng
