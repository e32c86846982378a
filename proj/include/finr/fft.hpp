#pragma once

#include <fftw3.h>

#include <complex>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <vector>

namespace finr {

/// 64-byte aligned allocator so std::vector buffers satisfy the
/// alignment the FFTW plans were created with.
template <typename T>
struct AlignedAlloc {
  using value_type = T;
  AlignedAlloc() = default;
  template <class U>
  AlignedAlloc(const AlignedAlloc<U>&) {}
  T* allocate(std::size_t n) {
    void* p = std::aligned_alloc(64, ((n * sizeof(T) + 63) / 64) * 64);
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) { std::free(p); }
  template <class U>
  bool operator==(const AlignedAlloc<U>&) const {
    return true;
  }
};

template <typename T>
using aligned_vector = std::vector<T, AlignedAlloc<T>>;

/// Cached FFTW plans for N x N real-to-complex transforms. Plans use
/// FFTW_ESTIMATE so the chosen algorithm depends only on the size,
/// keeping results reproducible run to run. Execution goes through the
/// new-array interface and is safe from multiple threads; planning is
/// serialized by a global mutex.
class Fft2 {
 public:
  int n() const { return n_; }
  std::size_t complex_size() const { return static_cast<std::size_t>(n_) * (static_cast<std::size_t>(n_) / 2 + 1); }

  /// DFT of a real n x n row-major array; out has n*(n/2+1) entries,
  /// unnormalized (no 1/N^2).
  void forward(double* in, std::complex<double>* out) const {
    fftw_execute_dft_r2c(fwd_, in, reinterpret_cast<fftw_complex*>(out));
  }

  /// Inverse transform of a half spectrum into a real n x n array,
  /// unnormalized; the input buffer is destroyed.
  void inverse(std::complex<double>* in, double* out) const {
    fftw_execute_dft_c2r(bwd_, reinterpret_cast<fftw_complex*>(in), out);
  }

  static const Fft2& get(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<Fft2>> cache;
    std::scoped_lock lk(mu);
    auto& slot = cache[n];
    if (!slot) slot.reset(new Fft2(n));
    return *slot;
  }

  ~Fft2() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

 private:
  explicit Fft2(int n) : n_(n) {
    aligned_vector<double> re(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    aligned_vector<std::complex<double>> cx(complex_size());
    fwd_ = fftw_plan_dft_r2c_2d(n, n, re.data(), reinterpret_cast<fftw_complex*>(cx.data()), FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_2d(n, n, reinterpret_cast<fftw_complex*>(cx.data()), re.data(), FFTW_ESTIMATE);
  }

  int n_;
  fftw_plan fwd_;
  fftw_plan bwd_;
};

}  // namespace finr
