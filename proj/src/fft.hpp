#pragma once

// Thin FFTW wrappers. Plans are created once per shape under a global lock
// (FFTW's planner is not thread-safe) and executed with the new-array API,
// which is. FFTW_ESTIMATE keeps plans, and therefore results, reproducible.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

#include "acfclust/volgrid.hpp"

namespace acfclust::fft {

struct FreeDeleter {
  void operator()(void* p) const noexcept;
};

void* aligned_alloc_bytes(std::size_t bytes);

template <class T>
class Buffer {
 public:
  Buffer() = default;
  explicit Buffer(std::size_t n)
      : data_(static_cast<T*>(aligned_alloc_bytes(n * sizeof(T)))), size_(n) {}

  T* data() noexcept { return data_.get(); }
  const T* data() const noexcept { return data_.get(); }
  std::size_t size() const noexcept { return size_; }
  std::span<T> span() noexcept { return {data_.get(), size_}; }
  std::span<const T> span() const noexcept { return {data_.get(), size_}; }
  T& operator[](std::size_t i) noexcept { return data_.get()[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_.get()[i]; }

 private:
  std::unique_ptr<T, FreeDeleter> data_;
  std::size_t size_ = 0;
};

// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
int good_size(int n);

// Number of complex bins of a real-to-complex transform of `dims` (x fastest).
std::size_t half_spectrum_size(const Index3& dims);

// In-place unnormalized inverse (e^{+i}) complex transform, single precision.
void inverse_c2c(const Index3& dims, std::complex<float>* data);

// Unnormalized forward real-to-complex / inverse complex-to-real, double
// precision. The c2r transform overwrites its input.
void forward_r2c(const Index3& dims, double* in, std::complex<double>* out);
void inverse_c2r(const Index3& dims, std::complex<double>* in, double* out);

}  // namespace acfclust::fft
