#pragma once

// Wiener smoothing of the homodyne record, analytic minimum MSEs, waveform
// QCRBs and empirical MSE scoring.

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

#include "mirrorest/errors.hpp"
#include "mirrorest/fft.hpp"
#include "mirrorest/model.hpp"
#include "mirrorest/probe.hpp"
#include "mirrorest/quadrature.hpp"
#include "mirrorest/sim.hpp"

namespace mirrorest {

/// Optimal smoothing filter conj(g_phi_x) S_x / (|g_phi_x|^2 S_x + S_z) for a
/// measurement with white noise PSD S_z >= 0. The numerator comes from
/// Priors::phase_cross_spectrum, so no 1/w appears and J_p(0) = 0.
inline cplx optimal_filter(Var x, double w, const Priors& priors, double noise_psd) {
  if (!(noise_psd >= 0.0)) throw DomainError("measurement noise PSD must be non-negative");
  const double s_phi = priors.psd(Var::phase, w);
  const double den = s_phi + noise_psd;
  if (den == 0.0) return {0.0, 0.0};
  return priors.phase_cross_spectrum(x, w) / den;
}

inline cplx optimal_filter(Var x, double w, const Priors& priors, const ProbeState& probe) {
  return optimal_filter(x, w, priors, measurement_noise_psd(probe));
}

/// Optimal filters for q, p and f sampled on an FFT grid of n_fft points.
class FilterBank {
 public:
  static FilterBank build(const Priors& priors, double noise_psd, std::size_t n_fft, double dt) {
    require(n_fft >= 2 && dt > 0.0, "filter bank needs a positive grid");
    FilterBank b;
    b.n_fft_ = n_fft;
    b.dt_ = dt;
    b.noise_psd_ = noise_psd;
    for (Var x : kEstimatedVars)
      b.responses_[index(x)] = hermitian_response(n_fft, dt, [&](double w) { return optimal_filter(x, w, priors, noise_psd); });
    return b;
  }

  static FilterBank build(const Priors& priors, const ProbeState& probe, std::size_t n_fft, double dt) {
    return build(priors, measurement_noise_psd(probe), n_fft, dt);
  }

  /// Grid sized for records of `cfg.n_samples` with the configured zero padding.
  static FilterBank for_records(const Priors& priors, double noise_psd, const SimConfig& cfg) {
    return build(priors, noise_psd, next_pow2(cfg.n_samples + cfg.pad_samples(priors.force)), cfg.dt);
  }

  std::span<const cplx> response(Var x) const { return responses_[index(x)]; }
  std::size_t fft_size() const { return n_fft_; }
  double dt() const { return dt_; }
  double noise_psd() const { return noise_psd_; }

 private:
  static std::size_t index(Var x) {
    switch (x) {
      case Var::position: return 0;
      case Var::momentum: return 1;
      case Var::force: return 2;
      case Var::phase: break;
    }
    throw DomainError("filter bank holds q, p and f filters only");
  }

  std::size_t n_fft_ = 0;
  double dt_ = 0.0;
  double noise_psd_ = 0.0;
  std::vector<cplx> responses_[3];
};

/// Non-causal Wiener smoothing x' = IFFT(J_x FFT y) of one record. Keeps an
/// FFT plan; one instance per thread.
class Smoother {
 public:
  explicit Smoother(const FilterBank& bank) : bank_(&bank), fft_(bank.fft_size()) {}

  std::vector<double> operator()(std::span<const double> y, Var x, const SimConfig& cfg) {
    check_grid(y.size(), cfg);
    fft_.load_real(y);
    fft_.forward();
    spectrum_.assign(fft_.buffer().begin(), fft_.buffer().end());
    return filter(y.size(), x);
  }

  /// Estimates of q, p and f from one forward transform.
  std::array<std::vector<double>, 3> all(std::span<const double> y, const SimConfig& cfg) {
    check_grid(y.size(), cfg);
    fft_.load_real(y);
    fft_.forward();
    spectrum_.assign(fft_.buffer().begin(), fft_.buffer().end());
    return {filter(y.size(), Var::position), filter(y.size(), Var::momentum), filter(y.size(), Var::force)};
  }

 private:
  void check_grid(std::size_t n, const SimConfig& cfg) const {
    if (std::abs(cfg.dt - bank_->dt()) > 1e-12 * bank_->dt())
      throw GridMismatchError("record sample period differs from the filter bank grid");
    if (n > bank_->fft_size())
      throw GridMismatchError("record longer than the filter bank grid");
  }

  std::vector<double> filter(std::size_t n, Var x) {
    const auto h = bank_->response(x);
    auto buf = fft_.buffer();
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = spectrum_[k] * h[k];
    fft_.inverse();
    std::vector<double> out(n);
    double re2 = 0.0, im_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = buf[i].real();
      re2 += out[i] * out[i];
      im_max = std::max(im_max, std::abs(buf[i].imag()));
    }
    if (im_max > 1e-10 * std::sqrt(re2 / static_cast<double>(n)) + 1e-300)
      throw Error("smoothing left a non-negligible imaginary residue");
    return out;
  }

  const FilterBank* bank_;
  Fft fft_;
  std::vector<cplx> spectrum_;
};

inline std::vector<double> smooth(std::span<const double> y, Var x, const FilterBank& bank, const SimConfig& cfg) {
  Smoother s(bank);
  return s(y, x, cfg);
}

namespace detail {

// int dw/2pi (1/S_x + S_phi/S_x * info)^{-1} = int dw/2pi S_x / (1 + S_phi info),
// using |g_phi_x|^2 S_x = S_phi for every x. `info` is 1/S_z or 4 S_dI.
inline double wiener_bound(Var x, const Priors& priors, double info, const SpectralGrid& grid) {
  const auto res = grid.integrate_with_tail([&](double w) {
    const double sx = priors.psd(x, w);
    if (sx == 0.0) return 0.0;
    const double sphi = priors.psd(Var::phase, w);
    if (sphi == 0.0) return sx;
    return sx / (1.0 + sphi * info);
  });
  if (!(res.tail <= 1e-3 * res.value)) {
    std::ostringstream msg;
    msg << "spectral integral for " << symbol(x) << " has estimated tail " << res.tail << " beyond omega_max = "
        << grid.omega_max() << " (integral " << res.value << "); extend the grid";
    throw TailDominanceError(msg.str());
  }
  // even integrand: 2 * int_0^inf / (2 pi), with the estimated mass beyond omega_max
  return (res.value + res.tail) / std::numbers::pi;
}

}  // namespace detail

/// Prior variance int S_x dw/2pi.
inline double prior_variance(Var x, const Priors& priors, const SpectralGrid& grid) {
  return detail::wiener_bound(x, priors, 0.0, grid);
}

/// Minimum MSE of linear smoothing for white measurement noise of PSD S_z.
inline double analytic_mmse(Var x, const Priors& priors, double noise_psd, const SpectralGrid& grid) {
  if (!(noise_psd >= 0.0)) throw DomainError("measurement noise PSD must be non-negative");
  const double info = noise_psd == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / noise_psd;
  return detail::wiener_bound(x, priors, info, grid);
}

inline double analytic_mmse(Var x, const Priors& priors, const ProbeState& probe, const SpectralGrid& grid) {
  return analytic_mmse(x, priors, measurement_noise_psd(probe), grid);
}

/// Waveform QCRB with the broadband flux spectrum of the lossless probe,
/// 4 S_dI = 4 |alpha|^2 e^{2 r_p}.
inline double qcrb(Var x, const Priors& priors, const ProbeState& probe, const SpectralGrid& grid) {
  return detail::wiener_bound(x, priors, 4.0 * photon_flux_psd_broadband(probe.lossless()), grid);
}

/// QCRB with the exact finite-bandwidth flux spectrum S_dI(w), for diagnostics.
inline double qcrb_finite_bandwidth(Var x, const Priors& priors, const ProbeState& probe,
                                    const SqueezingBandwidth& bw, const SpectralGrid& grid) {
  const ProbeState ideal = probe.lossless();
  const auto res = grid.integrate_with_tail([&](double w) {
    const double sx = priors.psd(x, w);
    if (sx == 0.0) return 0.0;
    return sx / (1.0 + priors.psd(Var::phase, w) * 4.0 * photon_flux_psd_exact(w, ideal, bw));
  });
  if (!(res.tail <= 1e-3 * res.value)) throw TailDominanceError("finite-bandwidth QCRB integral tail too large");
  return (res.value + res.tail) / std::numbers::pi;
}

struct MseEstimate {
  double mse = 0.0;
  double stderr_ = 0.0;  // standard error from the spread of per-trial means
  std::size_t trials = 0;
};

/// Mean squared error of one trial over the scored window [edge, n - edge).
inline double trial_mse(std::span<const double> estimate, std::span<const double> truth, const SimConfig& cfg) {
  if (estimate.size() != truth.size()) throw GridMismatchError("estimate and truth lengths differ");
  const std::size_t edge = cfg.edge_samples();
  const std::size_t n = truth.size();
  if (2 * edge >= n) throw DomainError("edge discard leaves an empty scoring window");
  double s = 0.0;
  for (std::size_t i = edge; i < n - edge; ++i) {
    const double d = estimate[i] - truth[i];
    s += d * d;
  }
  return s / static_cast<double>(n - 2 * edge);
}

/// Combines per-trial MSEs (equal window length) into mean and standard error.
inline MseEstimate combine_trials(std::span<const double> per_trial) {
  if (per_trial.size() < 2) throw DomainError("empirical MSE needs at least two trials");
  MseEstimate out;
  out.trials = per_trial.size();
  double mean = 0.0;
  for (double v : per_trial) mean += v;
  mean /= static_cast<double>(per_trial.size());
  double var = 0.0;
  for (double v : per_trial) var += (v - mean) * (v - mean);
  var /= static_cast<double>(per_trial.size() - 1);
  out.mse = mean;
  out.stderr_ = std::sqrt(var / static_cast<double>(per_trial.size()));
  return out;
}

/// Time-and-trial averaged squared error over the retained window.
inline MseEstimate empirical_mse(std::span<const std::vector<double>> estimates,
                                 std::span<const std::vector<double>> truths, const SimConfig& cfg) {
  if (estimates.size() != truths.size()) throw GridMismatchError("estimate and truth trial counts differ");
  std::vector<double> per_trial;
  per_trial.reserve(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) per_trial.push_back(trial_mse(estimates[i], truths[i], cfg));
  return combine_trials(per_trial);
}

}  // namespace mirrorest
