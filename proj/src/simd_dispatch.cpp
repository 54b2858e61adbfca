#include "acfclust/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "acfclust/error.hpp"

namespace acfclust::simd {

namespace {

struct KernelTable {
  void (*axpy)(std::span<double>, std::span<const double>, double);
  double (*dot)(std::span<const double>, std::span<const double>);
  Moments (*moments)(std::span<const double>);
  std::size_t (*threshold_in_mask)(std::span<const double>, std::span<const std::uint8_t>, double,
                                   bool, std::span<std::uint8_t>);
  void (*accumulate_power)(std::span<double>, std::span<const std::complex<double>>);
  void (*scale_complex)(std::span<std::complex<float>>, std::span<const float>);
  void (*normal_complex)(std::uint64_t, std::uint64_t, std::uint64_t, std::span<std::complex<float>>);
};

constexpr KernelTable kScalar{scalar::axpy,          scalar::dot,
                              scalar::moments,       scalar::threshold_in_mask,
                              scalar::accumulate_power, scalar::scale_complex,
                              scalar::normal_complex};
constexpr KernelTable kAvx2{avx2::axpy,          avx2::dot,
                            avx2::moments,       avx2::threshold_in_mask,
                            avx2::accumulate_power, avx2::scale_complex,
                            avx2::normal_complex};

bool cpu_has_avx2() noexcept {
#if defined(ACFCLUST_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() noexcept {
  // ACFCLUST_SIMD=scalar pins the reference kernels for a whole process.
  if (const char* env = std::getenv("ACFCLUST_SIMD"); env && std::strcmp(env, "scalar") == 0) {
    return Isa::Scalar;
  }
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

const KernelTable& table() noexcept {
  return current().load(std::memory_order_relaxed) == Isa::Avx2 ? kAvx2 : kScalar;
}

}  // namespace

const char* isa_name(Isa isa) noexcept { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) noexcept { return isa == Isa::Scalar || cpu_has_avx2(); }

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  require(isa_supported(isa), ErrorKind::Precondition,
          std::string("instruction set not supported on this CPU: ") + isa_name(isa));
  current().store(isa, std::memory_order_relaxed);
}

void axpy(std::span<double> y, std::span<const double> x, double a) { table().axpy(y, x, a); }

double dot(std::span<const double> x, std::span<const double> y) { return table().dot(x, y); }

Moments moments(std::span<const double> x) { return table().moments(x); }

std::size_t threshold_in_mask(std::span<const double> x, std::span<const std::uint8_t> mask,
                              double thr, bool two_sided, std::span<std::uint8_t> out) {
  return table().threshold_in_mask(x, mask, thr, two_sided, out);
}

void accumulate_power(std::span<double> acc, std::span<const std::complex<double>> z) {
  table().accumulate_power(acc, z);
}

void scale_complex(std::span<std::complex<float>> z, std::span<const float> gain) {
  table().scale_complex(z, gain);
}

}  // namespace acfclust::simd

namespace acfclust::simd {

void normal_complex(std::uint64_t seed, std::uint64_t stream, std::uint64_t first_block,
                    std::span<std::complex<float>> out) {
  table().normal_complex(seed, stream, first_block, out);
}

}  // namespace acfclust::simd
