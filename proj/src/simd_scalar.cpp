#include "acfclust/simd.hpp"

#include "acfclust/rng.hpp"

#include <cmath>

namespace acfclust::simd::scalar {

void axpy(std::span<double> y, std::span<const double> x, double a) {
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

Moments moments(std::span<const double> x) {
  Moments m;
  for (double v : x) {
    m.sum += v;
    m.sumsq += v * v;
  }
  return m;
}

std::size_t threshold_in_mask(std::span<const double> x, std::span<const std::uint8_t> mask,
                              double thr, bool two_sided, std::span<std::uint8_t> out) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = two_sided ? std::fabs(x[i]) : x[i];
    const std::uint8_t hit = (mask[i] != 0 && v >= thr) ? 1 : 0;
    out[i] = hit;
    count += hit;
  }
  return count;
}

void accumulate_power(std::span<double> acc, std::span<const std::complex<double>> z) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double re = z[i].real();
    const double im = z[i].imag();
    acc[i] += re * re + im * im;
  }
}

void scale_complex(std::span<std::complex<float>> z, std::span<const float> gain) {
  for (std::size_t i = 0; i < z.size(); ++i) z[i] *= gain[i];
}

void normal_complex(std::uint64_t seed, std::uint64_t stream, std::uint64_t first_block,
                    std::span<std::complex<float>> out) {
  const CounterRng rng(seed, stream);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto z = rng.normal_pair(first_block + i);
    out[i] = {static_cast<float>(z[0]), static_cast<float>(z[1])};
  }
}

}  // namespace acfclust::simd::scalar
