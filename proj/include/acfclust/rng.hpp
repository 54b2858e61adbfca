#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace acfclust {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A block is a
// pure function of (counter, key), so any realization can be generated
// independently of any other and of the order work is scheduled in.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) noexcept;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Child seed for work item `index` under `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

// Stream of uniforms/normals for one 64-bit key. Blocks are addressed by a
// 64-bit position, so fill_* calls with an explicit offset are reproducible.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  // Uniform in the open interval (0, 1), 53-bit resolution; block `pos` gives two.
  std::array<double, 2> uniform_pair(std::uint64_t pos) const noexcept;
  // Box-Muller pair from block `pos`.
  std::array<double, 2> normal_pair(std::uint64_t pos) const noexcept;

  // Fills `out` with N(0,1) deviates using blocks [first_block, first_block + ceil(n/2)).
  void fill_normal(std::span<double> out, std::uint64_t first_block = 0) const noexcept;

 private:
  Philox4x32::Key key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
};

}  // namespace acfclust
