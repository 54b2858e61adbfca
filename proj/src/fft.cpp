#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <new>
#include <tuple>

namespace acfclust::fft {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

enum class Kind { C2cInverseF, R2cD, C2rD };

using PlanKey = std::tuple<Kind, int, int, int>;

// Plans live for the process lifetime; the planner needs scratch arrays of the
// right shape, which are allocated once and released after planning.
void* plan_for(Kind kind, const Index3& dims) {
  std::lock_guard lock(planner_mutex());
  static std::map<PlanKey, void*> cache;
  const PlanKey key{kind, dims[0], dims[1], dims[2]};
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  // FFTW is row-major with the last index fastest; our x-fastest layout maps
  // to (nz, ny, nx).
  const int n0 = dims[2], n1 = dims[1], n2 = dims[0];
  const std::size_t real_n = static_cast<std::size_t>(n0) * n1 * n2;
  const std::size_t half_n = static_cast<std::size_t>(n0) * n1 * (n2 / 2 + 1);
  void* plan = nullptr;
  switch (kind) {
    case Kind::C2cInverseF: {
      auto* buf = fftwf_alloc_complex(real_n);
      plan = fftwf_plan_dft_3d(n0, n1, n2, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
      fftwf_free(buf);
      break;
    }
    case Kind::R2cD: {
      auto* in = fftw_alloc_real(real_n);
      auto* out = fftw_alloc_complex(half_n);
      plan = fftw_plan_dft_r2c_3d(n0, n1, n2, in, out, FFTW_ESTIMATE);
      fftw_free(in);
      fftw_free(out);
      break;
    }
    case Kind::C2rD: {
      auto* in = fftw_alloc_complex(half_n);
      auto* out = fftw_alloc_real(real_n);
      plan = fftw_plan_dft_c2r_3d(n0, n1, n2, in, out, FFTW_ESTIMATE);
      fftw_free(in);
      fftw_free(out);
      break;
    }
  }
  if (!plan) throw std::bad_alloc();
  cache.emplace(key, plan);
  return plan;
}

}  // namespace

void FreeDeleter::operator()(void* p) const noexcept { fftw_free(p); }

void* aligned_alloc_bytes(std::size_t bytes) {
  void* p = fftw_malloc(bytes == 0 ? 1 : bytes);
  if (!p) throw std::bad_alloc();
  return p;
}

int good_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

std::size_t half_spectrum_size(const Index3& dims) {
  return static_cast<std::size_t>(dims[2]) * dims[1] * (dims[0] / 2 + 1);
}

void inverse_c2c(const Index3& dims, std::complex<float>* data) {
  auto plan = static_cast<fftwf_plan>(plan_for(Kind::C2cInverseF, dims));
  auto* p = reinterpret_cast<fftwf_complex*>(data);
  fftwf_execute_dft(plan, p, p);
}

void forward_r2c(const Index3& dims, double* in, std::complex<double>* out) {
  auto plan = static_cast<fftw_plan>(plan_for(Kind::R2cD, dims));
  fftw_execute_dft_r2c(plan, in, reinterpret_cast<fftw_complex*>(out));
}

void inverse_c2r(const Index3& dims, std::complex<double>* in, double* out) {
  auto plan = static_cast<fftw_plan>(plan_for(Kind::C2rD, dims));
  fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(in), out);
}

}  // namespace acfclust::fft
