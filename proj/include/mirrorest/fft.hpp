#pragma once

// Thin RAII wrapper over FFTW complex transforms. Planning is serialised
// (FFTW's planner is not thread-safe); execution on distinct objects is not.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "mirrorest/errors.hpp"

namespace mirrorest {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// In-place complex FFT of fixed length. forward(): sum x_n e^{-2 pi i kn/N};
/// inverse(): the normalised inverse (includes 1/N).
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n), data_(fftw_alloc_complex(n)) {
    if (n == 0) throw DomainError("FFT length must be positive");
    if (!data_) throw std::bad_alloc();
    std::lock_guard lock(detail::fftw_planner_mutex());
    const int len = static_cast<int>(n);
    fwd_ = fftw_plan_dft_1d(len, data_, data_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(len, data_, data_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  Fft(Fft&& o) noexcept : n_(o.n_), data_(o.data_), fwd_(o.fwd_), bwd_(o.bwd_) {
    o.data_ = nullptr;
    o.fwd_ = o.bwd_ = nullptr;
  }
  Fft& operator=(Fft&&) = delete;
  ~Fft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (fwd_) fftw_destroy_plan(fwd_);
    if (bwd_) fftw_destroy_plan(bwd_);
    if (data_) fftw_free(data_);
  }

  std::size_t size() const { return n_; }

  std::span<std::complex<double>> buffer() {
    return {reinterpret_cast<std::complex<double>*>(data_), n_};
  }

  /// Loads a real signal, zero-padding to the transform length.
  void load_real(std::span<const double> x) {
    if (x.size() > n_) throw GridMismatchError("signal longer than FFT length");
    auto buf = buffer();
    for (std::size_t i = 0; i < n_; ++i) buf[i] = i < x.size() ? x[i] : 0.0;
  }

  void forward() { fftw_execute(fwd_); }

  void inverse() {
    fftw_execute(bwd_);
    const double s = 1.0 / static_cast<double>(n_);
    for (auto& v : buffer()) v *= s;
  }

 private:
  std::size_t n_;
  fftw_complex* data_;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

/// Angular frequency of FFT bin k on a grid of n samples spaced dt apart
/// (bins above n/2 are negative frequencies; the Nyquist bin is +pi/dt).
inline double bin_frequency(std::size_t k, std::size_t n, double dt) {
  const double base = 2.0 * std::numbers::pi / (static_cast<double>(n) * dt);
  const auto kk = static_cast<long long>(k);
  const auto nn = static_cast<long long>(n);
  return base * static_cast<double>(2 * kk <= nn ? kk : kk - nn);
}

/// Samples a response H(w) on the FFT grid with exact Hermitian symmetry:
/// negative bins are conjugates of positive ones, DC and Nyquist are real.
template <class F>
std::vector<std::complex<double>> hermitian_response(std::size_t n, double dt, F&& response) {
  std::vector<std::complex<double>> h(n);
  for (std::size_t k = 0; 2 * k <= n; ++k) {
    const std::complex<double> v = response(bin_frequency(k, n, dt));
    if (k == 0 || 2 * k == n) {
      h[k] = v.real();
    } else {
      h[k] = v;
      h[n - k] = std::conj(v);
    }
  }
  return h;
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace mirrorest
