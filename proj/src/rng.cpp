#include "acfclust/rng.hpp"

#include <cmath>
#include <numbers>

namespace acfclust {

namespace {

constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;
constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

inline double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
  // 53 random bits, shifted half an ulp off zero so log() never sees 0.
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kMulA, ctr[0], lo0, hi0);
    mulhilo(kMulB, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeylA;
    key[1] += kWeylB;
  }
  return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_lo_(static_cast<std::uint32_t>(stream)),
      stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

std::array<double, 2> CounterRng::uniform_pair(std::uint64_t pos) const noexcept {
  const auto r = Philox4x32::block({static_cast<std::uint32_t>(pos),
                                    static_cast<std::uint32_t>(pos >> 32), stream_lo_, stream_hi_},
                                   key_);
  return {to_unit_open(r[0], r[1]), to_unit_open(r[2], r[3])};
}

std::array<double, 2> CounterRng::normal_pair(std::uint64_t pos) const noexcept {
  const auto u = uniform_pair(pos);
  const double radius = std::sqrt(-2.0 * std::log(u[0]));
  const double theta = 2.0 * std::numbers::pi * u[1];
  return {radius * std::cos(theta), radius * std::sin(theta)};
}

void CounterRng::fill_normal(std::span<double> out, std::uint64_t first_block) const noexcept {
  const std::size_t n = out.size();
  std::uint64_t pos = first_block;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2, ++pos) {
    const auto z = normal_pair(pos);
    out[i] = z[0];
    out[i + 1] = z[1];
  }
  if (i < n) out[i] = normal_pair(pos)[0];
}

}  // namespace acfclust
