#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference version and,
// on x86-64, an AVX2+FMA version; the dispatched entry points pick one at
// runtime. Results of the two variants agree to rounding (see tests).

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>

namespace acfclust::simd {

enum class Isa { Scalar, Avx2 };

const char* isa_name(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;
Isa active_isa() noexcept;
// Override the runtime choice (tests, benchmarking). Throws if unsupported.
void force_isa(Isa isa);

struct Moments {
  double sum = 0.0;
  double sumsq = 0.0;
};

// y += a*x
void axpy(std::span<double> y, std::span<const double> x, double a);
double dot(std::span<const double> x, std::span<const double> y);
Moments moments(std::span<const double> x);
// out[i] = mask[i] && (two_sided ? |x[i]| >= thr : x[i] >= thr); returns the count set.
std::size_t threshold_in_mask(std::span<const double> x, std::span<const std::uint8_t> mask,
                              double thr, bool two_sided, std::span<std::uint8_t> out);
// acc[i] += |z[i]|^2
void accumulate_power(std::span<double> acc, std::span<const std::complex<double>> z);
// z[i] *= gain[i]
void scale_complex(std::span<std::complex<float>> z, std::span<const float> gain);
// out[i] = CounterRng(seed, stream).normal_pair(first_block + i), rounded to float.
void normal_complex(std::uint64_t seed, std::uint64_t stream, std::uint64_t first_block,
                    std::span<std::complex<float>> out);

namespace scalar {
void axpy(std::span<double> y, std::span<const double> x, double a);
double dot(std::span<const double> x, std::span<const double> y);
Moments moments(std::span<const double> x);
std::size_t threshold_in_mask(std::span<const double> x, std::span<const std::uint8_t> mask,
                              double thr, bool two_sided, std::span<std::uint8_t> out);
void accumulate_power(std::span<double> acc, std::span<const std::complex<double>> z);
void scale_complex(std::span<std::complex<float>> z, std::span<const float> gain);
void normal_complex(std::uint64_t seed, std::uint64_t stream, std::uint64_t first_block,
                    std::span<std::complex<float>> out);
}  // namespace scalar

namespace avx2 {
void axpy(std::span<double> y, std::span<const double> x, double a);
double dot(std::span<const double> x, std::span<const double> y);
Moments moments(std::span<const double> x);
std::size_t threshold_in_mask(std::span<const double> x, std::span<const std::uint8_t> mask,
                              double thr, bool two_sided, std::span<std::uint8_t> out);
void accumulate_power(std::span<double> acc, std::span<const std::complex<double>> z);
void scale_complex(std::span<std::complex<float>> z, std::span<const float> gain);
void normal_complex(std::uint64_t seed, std::uint64_t stream, std::uint64_t first_block,
                    std::span<std::complex<float>> out);
}  // namespace avx2

}  // namespace acfclust::simd
