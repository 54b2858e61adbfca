#include "acfclust/simd.hpp"

#include <cmath>

#if defined(ACFCLUST_HAVE_AVX2)
#include <immintrin.h>

// glibc libmvec AVX2 variants (vector ABI names).
extern "C" {
__m256d _ZGVdN4v_log(__m256d);
__m256d _ZGVdN4v_sin(__m256d);
__m256d _ZGVdN4v_cos(__m256d);
}
#endif

namespace acfclust::simd::avx2 {

#if defined(ACFCLUST_HAVE_AVX2)

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void axpy(std::span<double> y, std::span<const double> x, double a) {
  const std::size_t n = y.size();
  double* yp = y.data();
  const double* xp = x.data();
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d y0 = _mm256_loadu_pd(yp + i);
    __m256d y1 = _mm256_loadu_pd(yp + i + 4);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(xp + i), y0);
    y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(xp + i + 4), y1);
    _mm256_storeu_pd(yp + i, y0);
    _mm256_storeu_pd(yp + i + 4, y1);
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(yp + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(xp + i), _mm256_loadu_pd(yp + i)));
  }
  for (; i < n; ++i) yp[i] = std::fma(a, xp[i], yp[i]);
}

double dot(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const double* xp = x.data();
  const double* yp = y.data();
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(xp + i), _mm256_loadu_pd(yp + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(xp + i + 4), _mm256_loadu_pd(yp + i + 4), s1);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(xp + i), _mm256_loadu_pd(yp + i), s0);
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s = std::fma(xp[i], yp[i], s);
  return s;
}

Moments moments(std::span<const double> x) {
  const std::size_t n = x.size();
  const double* xp = x.data();
  __m256d s = _mm256_setzero_pd();
  __m256d q = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(xp + i);
    s = _mm256_add_pd(s, v);
    q = _mm256_fmadd_pd(v, v, q);
  }
  Moments m{hsum(s), hsum(q)};
  for (; i < n; ++i) {
    m.sum += xp[i];
    m.sumsq = std::fma(xp[i], xp[i], m.sumsq);
  }
  return m;
}

std::size_t threshold_in_mask(std::span<const double> x, std::span<const std::uint8_t> mask,
                              double thr, bool two_sided, std::span<std::uint8_t> out) {
  const std::size_t n = x.size();
  const double* xp = x.data();
  const std::uint8_t* mp = mask.data();
  std::uint8_t* op = out.data();
  const __m256d vthr = _mm256_set1_pd(thr);
  const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(xp + i);
    if (two_sided) v = _mm256_and_pd(v, abs_mask);
    const int bits = _mm256_movemask_pd(_mm256_cmp_pd(v, vthr, _CMP_GE_OQ));
    for (int j = 0; j < 4; ++j) {
      const std::uint8_t hit = static_cast<std::uint8_t>(((bits >> j) & 1) & (mp[i + j] != 0));
      op[i + j] = hit;
      count += hit;
    }
  }
  for (; i < n; ++i) {
    const double v = two_sided ? std::fabs(xp[i]) : xp[i];
    const std::uint8_t hit = (mp[i] != 0 && v >= thr) ? 1 : 0;
    op[i] = hit;
    count += hit;
  }
  return count;
}

void accumulate_power(std::span<double> acc, std::span<const std::complex<double>> z) {
  const std::size_t n = acc.size();
  double* ap = acc.data();
  const double* zp = reinterpret_cast<const double*>(z.data());
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(zp + 2 * i);      // re0 im0 re1 im1
    const __m256d b = _mm256_loadu_pd(zp + 2 * i + 4);  // re2 im2 re3 im3
    const __m256d h = _mm256_hadd_pd(_mm256_mul_pd(a, a), _mm256_mul_pd(b, b));
    const __m256d p = _mm256_permute4x64_pd(h, 0b11011000);
    _mm256_storeu_pd(ap + i, _mm256_add_pd(_mm256_loadu_pd(ap + i), p));
  }
  for (; i < n; ++i) {
    const double re = zp[2 * i];
    const double im = zp[2 * i + 1];
    ap[i] += re * re + im * im;
  }
}

void scale_complex(std::span<std::complex<float>> z, std::span<const float> gain) {
  const std::size_t n = z.size();
  float* zp = reinterpret_cast<float*>(z.data());
  const float* gp = gain.data();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m128 g = _mm_loadu_ps(gp + i);
    const __m256 gg = _mm256_set_m128(_mm_unpackhi_ps(g, g), _mm_unpacklo_ps(g, g));
    _mm256_storeu_ps(zp + 2 * i, _mm256_mul_ps(_mm256_loadu_ps(zp + 2 * i), gg));
  }
  for (; i < n; ++i) {
    zp[2 * i] *= gp[i];
    zp[2 * i + 1] *= gp[i];
  }
}

namespace {

constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;
constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;

inline void mulhilo8(__m256i m, __m256i x, __m256i& lo, __m256i& hi) {
  const __m256i even = _mm256_mul_epu32(m, x);
  const __m256i odd = _mm256_mul_epu32(m, _mm256_srli_epi64(x, 32));
  lo = _mm256_blend_epi32(even, _mm256_slli_epi64(odd, 32), 0b10101010);
  hi = _mm256_blend_epi32(_mm256_srli_epi64(even, 32), odd, 0b10101010);
}

// (hi * 2^21 + (lo >> 11) + 0.5) * 2^-53 for four lanes.
inline __m256d unit_open(__m128i hi, __m128i lo) {
  const __m256d two31 = _mm256_set1_pd(2147483648.0);
  const __m256d h = _mm256_add_pd(
      _mm256_cvtepi32_pd(_mm_xor_si128(hi, _mm_set1_epi32(static_cast<int>(0x80000000u)))), two31);
  const __m256d l = _mm256_cvtepi32_pd(_mm_srli_epi32(lo, 11));
  const __m256d bits = _mm256_add_pd(_mm256_mul_pd(h, _mm256_set1_pd(0x1.0p21)), l);
  return _mm256_mul_pd(_mm256_add_pd(bits, _mm256_set1_pd(0.5)), _mm256_set1_pd(0x1.0p-53));
}

inline void box_muller_store(__m256d u1, __m256d u2, float* dst) {
  const __m256d radius = _mm256_sqrt_pd(_mm256_mul_pd(_mm256_set1_pd(-2.0), _ZGVdN4v_log(u1)));
  const __m256d theta = _mm256_mul_pd(_mm256_set1_pd(2.0 * 3.141592653589793), u2);
  const __m128 re = _mm256_cvtpd_ps(_mm256_mul_pd(radius, _ZGVdN4v_cos(theta)));
  const __m128 im = _mm256_cvtpd_ps(_mm256_mul_pd(radius, _ZGVdN4v_sin(theta)));
  _mm_storeu_ps(dst, _mm_unpacklo_ps(re, im));
  _mm_storeu_ps(dst + 4, _mm_unpackhi_ps(re, im));
}

}  // namespace

void normal_complex(std::uint64_t seed, std::uint64_t stream, std::uint64_t first_block,
                    std::span<std::complex<float>> out) {
  const std::size_t n = out.size();
  float* op = reinterpret_cast<float*>(out.data());
  const __m256i ma = _mm256_set1_epi32(static_cast<int>(kMulA));
  const __m256i mb = _mm256_set1_epi32(static_cast<int>(kMulB));
  const auto k0 = static_cast<std::uint32_t>(seed);
  const auto k1 = static_cast<std::uint32_t>(seed >> 32);
  const __m256i c2init = _mm256_set1_epi32(static_cast<int>(static_cast<std::uint32_t>(stream)));
  const __m256i c3init = _mm256_set1_epi32(static_cast<int>(static_cast<std::uint32_t>(stream >> 32)));
  alignas(32) std::uint32_t lo_words[8], hi_words[8];
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int j = 0; j < 8; ++j) {
      const std::uint64_t pos = first_block + i + static_cast<std::uint64_t>(j);
      lo_words[j] = static_cast<std::uint32_t>(pos);
      hi_words[j] = static_cast<std::uint32_t>(pos >> 32);
    }
    __m256i c0 = _mm256_load_si256(reinterpret_cast<const __m256i*>(lo_words));
    __m256i c1 = _mm256_load_si256(reinterpret_cast<const __m256i*>(hi_words));
    __m256i c2 = c2init;
    __m256i c3 = c3init;
    std::uint32_t key0 = k0, key1 = k1;
    for (int round = 0; round < 10; ++round) {
      __m256i lo0, hi0, lo1, hi1;
      mulhilo8(ma, c0, lo0, hi0);
      mulhilo8(mb, c2, lo1, hi1);
      c0 = _mm256_xor_si256(_mm256_xor_si256(hi1, c1), _mm256_set1_epi32(static_cast<int>(key0)));
      c1 = lo1;
      c2 = _mm256_xor_si256(_mm256_xor_si256(hi0, c3), _mm256_set1_epi32(static_cast<int>(key1)));
      c3 = lo0;
      key0 += kWeylA;
      key1 += kWeylB;
    }
    box_muller_store(unit_open(_mm256_castsi256_si128(c0), _mm256_castsi256_si128(c1)),
                     unit_open(_mm256_castsi256_si128(c2), _mm256_castsi256_si128(c3)), op + 2 * i);
    box_muller_store(unit_open(_mm256_extracti128_si256(c0, 1), _mm256_extracti128_si256(c1, 1)),
                     unit_open(_mm256_extracti128_si256(c2, 1), _mm256_extracti128_si256(c3, 1)),
                     op + 2 * i + 8);
  }
  if (i < n) scalar::normal_complex(seed, stream, first_block + i, out.subspan(i));
}

#else

void axpy(std::span<double> y, std::span<const double> x, double a) { scalar::axpy(y, x, a); }
double dot(std::span<const double> x, std::span<const double> y) { return scalar::dot(x, y); }
Moments moments(std::span<const double> x) { return scalar::moments(x); }
std::size_t threshold_in_mask(std::span<const double> x, std::span<const std::uint8_t> mask,
                              double thr, bool two_sided, std::span<std::uint8_t> out) {
  return scalar::threshold_in_mask(x, mask, thr, two_sided, out);
}
void accumulate_power(std::span<double> acc, std::span<const std::complex<double>> z) {
  scalar::accumulate_power(acc, z);
}
void scale_complex(std::span<std::complex<float>> z, std::span<const float> gain) {
  scalar::scale_complex(z, gain);
}
void normal_complex(std::uint64_t seed, std::uint64_t stream, std::uint64_t first_block,
                    std::span<std::complex<float>> out) {
  scalar::normal_complex(seed, stream, first_block, out);
}

#endif

}  // namespace acfclust::simd::avx2
