#include "crc/rng.hpp"

#include "crc/kernels.hpp"

#include <cmath>
#include <numbers>

namespace crc::rng {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Counter philox4x32_10(Counter c, Key k) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

std::array<double, 2> Stream::uniform_pair(std::uint32_t row, std::uint64_t pair) const noexcept {
  const Counter b = block(row, pair);
  return {to_unit(b[0], b[1]), to_unit(b[2], b[3])};
}

std::array<double, 2> Stream::normal_pair(std::uint32_t row, std::uint64_t pair) const noexcept {
  const auto u = uniform_pair(row, pair);
  const double r = std::sqrt(-2.0 * std::log(u[0]));
  const double theta = 2.0 * std::numbers::pi * u[1];
  return {r * std::cos(theta), r * std::sin(theta)};
}

void Stream::fill_normal_serial(std::uint32_t row, double* out, std::uint64_t count) const noexcept {
  for (std::uint64_t k = 0; k < count; k += 2) {
    const auto z = normal_pair(row, k / 2);
    out[k] = z[0];
    if (k + 1 < count) out[k + 1] = z[1];
  }
}

void Stream::fill_normal_parallel(std::uint32_t row, double* out, std::uint64_t count) const {
  const auto pairs = static_cast<std::int64_t>((count + 1) / 2);
#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
  for (std::int64_t q = 0; q < pairs; ++q) {
    const auto z = normal_pair(row, static_cast<std::uint64_t>(q));
    const auto k = static_cast<std::uint64_t>(q) * 2;
    out[k] = z[0];
    if (k + 1 < count) out[k + 1] = z[1];
  }
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace crc::rng
