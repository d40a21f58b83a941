#pragma once

// Time-domain Monte Carlo: OU force, mirror response, phase-tracked homodyne
// measurement with a steady-state Kalman tracker in the feedback loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mirrorest/errors.hpp"
#include "mirrorest/fft.hpp"
#include "mirrorest/model.hpp"
#include "mirrorest/probe.hpp"
#include "mirrorest/state_space.hpp"

namespace mirrorest {

enum class MeasurementMode { linearized, nonlinear };

inline std::string to_string(MeasurementMode m) { return m == MeasurementMode::linearized ? "linearized" : "nonlinear"; }

inline MeasurementMode parse_mode(std::string_view s) {
  if (s == "linearized") return MeasurementMode::linearized;
  if (s == "nonlinear") return MeasurementMode::nonlinear;
  throw ParseError("unknown measurement mode '" + std::string(s) + "'");
}

struct SimConfig {
  double dt = 1e-7;                 // s (10 MHz sampling)
  std::size_t n_samples = 10000;    // 1 ms record
  std::size_t n_trials = 300;
  std::uint64_t seed = 20131021;
  MeasurementMode mode = MeasurementMode::nonlinear;
  std::size_t feedback_delay_samples = 4;  // 400 ns
  double edge_discard = 1e-4;       // s trimmed from each end before scoring
  double warmup = -1.0;             // s of force simulated before the record; < 0 selects automatically

  void validate(const ForceParams& force) const {
    require(dt > 0.0, "sample period must be positive");
    require(n_samples >= 2, "need at least two samples");
    require(static_cast<double>(n_samples) * dt >= 10.0 / force.lambda,
            "record must span at least 10 force correlation times");
    require(edge_discard >= 0.0, "edge discard must be non-negative");
    require(2 * edge_samples() < n_samples, "edge discard leaves no samples to score");
  }

  std::size_t edge_samples() const { return static_cast<std::size_t>(std::llround(edge_discard / dt)); }

  /// Zero padding appended before FFT convolution: 10 force correlation times.
  std::size_t pad_samples(const ForceParams& force) const {
    return static_cast<std::size_t>(std::ceil(10.0 / (force.lambda * dt)));
  }

  /// Force history simulated before the record so the mirror starts in its
  /// stationary state: 10 force correlation times or 8 amplitude ring-down
  /// times 2/gamma, whichever is longer.
  std::size_t warmup_samples(const MirrorParams& mirror, const ForceParams& force) const {
    double t = warmup;
    if (t < 0.0) {
      t = 10.0 / force.lambda;
      if (mirror.gamma > 0.0) t = std::max(t, 16.0 / mirror.gamma);
    }
    return static_cast<std::size_t>(std::ceil(t / dt));
  }

  bool operator==(const SimConfig&) const = default;
};

using Rng = std::mt19937_64;

/// Independent RNG stream for trial `index` of a run seeded with `seed`.
inline Rng trial_rng(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  const std::uint64_t s = mix(seed ^ mix(index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

/// Exact discretisation of the OU force on n samples: stationary start, then
/// f_{k+1} = e^{-lambda dt} f_k + N(0, kappa (1 - e^{-2 lambda dt}) / (2 lambda)).
inline std::vector<double> simulate_ou(const ForceParams& force, double dt, std::size_t n, Rng& rng) {
  force.validate();
  require(dt > 0.0, "sample period must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double decay = std::exp(-force.lambda * dt);
  const double step_sd = std::sqrt(-force.kappa * std::expm1(-2.0 * force.lambda * dt) / (2.0 * force.lambda));
  std::vector<double> f(n);
  if (n == 0) return f;
  f[0] = std::sqrt(force.stationary_variance()) * normal(rng);
  for (std::size_t k = 1; k < n; ++k) f[k] = decay * f[k - 1] + step_sd * normal(rng);
  return f;
}

inline std::vector<double> simulate_ou(const ForceParams& force, const SimConfig& cfg, Rng& rng) {
  cfg.validate(force);
  return simulate_ou(force, cfg.dt, cfg.n_samples, rng);
}

struct MirrorResponse {
  std::vector<double> q;
  std::vector<double> p;
  std::vector<double> phi;
};

/// FFT convolution of force records with g_qf (position) and i m w g_qf
/// (momentum) on a fixed zero-padded grid. Holds its FFT plan, so one instance
/// per thread.
class MirrorResponder {
 public:
  MirrorResponder(const TransferFunction& tf, const MirrorParams& params, double dt, std::size_t n, std::size_t pad)
      : n_(n), phase_gain_(params.phase_gain()), fft_(next_pow2(n + pad)) {
    params.validate();
    const std::size_t nfft = fft_.size();
    const double nyquist = bin_frequency(nfft / 2, nfft, dt);
    if (!tf.covers(nyquist) || !tf.covers(bin_frequency(1, nfft, dt)))
      log::warn("tabulated transfer function does not cover the simulation band; clamping at the table ends");
    position_ = hermitian_response(nfft, dt, [&](double w) { return tf(w); });
    momentum_ = hermitian_response(nfft, dt, [&](double w) { return cplx(0.0, params.mass * w) * tf(w); });
  }

  std::size_t size() const { return n_; }

  MirrorResponse operator()(std::span<const double> f) {
    if (f.size() != n_) throw GridMismatchError("force record length does not match the responder grid");
    MirrorResponse r;
    fft_.load_real(f);
    fft_.forward();
    const std::vector<cplx> spectrum(fft_.buffer().begin(), fft_.buffer().end());
    r.q = apply(spectrum, position_);
    r.p = apply(spectrum, momentum_);
    r.phi.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) r.phi[i] = phase_gain_ * r.q[i];
    return r;
  }

 private:
  std::vector<double> apply(const std::vector<cplx>& spectrum, const std::vector<cplx>& h) {
    auto buf = fft_.buffer();
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = spectrum[k] * h[k];
    fft_.inverse();
    std::vector<double> out(n_);
    double re2 = 0.0, im_max = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      out[i] = buf[i].real();
      re2 += out[i] * out[i];
      im_max = std::max(im_max, std::abs(buf[i].imag()));
    }
    if (im_max > 1e-10 * std::sqrt(re2 / static_cast<double>(n_)) + 1e-300)
      throw Error("FFT convolution left a non-negligible imaginary residue");
    return out;
  }

  std::size_t n_;
  double phase_gain_;
  Fft fft_;
  std::vector<cplx> position_;
  std::vector<cplx> momentum_;
};

/// q = IFFT(g_qf FFT f), p = IFFT(i m w g_qf FFT f), phi = 2 k0 cos(theta) q.
inline MirrorResponse mirror_response(std::span<const double> f, const TransferFunction& tf,
                                      const MirrorParams& params, double dt, std::size_t pad) {
  MirrorResponder responder(tf, params, dt, f.size(), pad);
  return responder(f);
}

/// Steady-state Kalman tracker of the nominal (q, p, f) model, measuring
/// phi = 2 k0 cos(theta) q in white noise of PSD S_z.
///
/// With a loop delay of d samples the phase fed back at sample k can only use
/// data up to k - d - 1; it is the model prediction H F^d x(k-d | k-d-1).
class KalmanTracker {
 public:
  static KalmanTracker design(const MirrorParams& mirror, const ForceParams& force, double noise_psd, double dt,
                              std::size_t delay = 0) {
    require(noise_psd >= 0.0 && std::isfinite(noise_psd), "measurement noise PSD must be finite and non-negative");
    const ContinuousModel c = mirror_state_model(mirror, force);
    const DiscreteModel d = discretize(c, dt);
    const Mat3 stationary = stationary_covariance(c);
    RowVec3 h(mirror.phase_gain(), 0.0, 0.0);
    RiccatiSolution sol = solve_filter_riccati(d, stationary, h, noise_psd / dt);
    return KalmanTracker(d, h, std::move(sol), delay);
  }

  /// Prediction of phi at the current sample from data before it.
  double predicted_phase() const { return h_.dot(state_); }

  /// Phase applied to the local oscillator at the current sample.
  double feedback_phase() const { return history_.front(); }

  /// Consumes measurement y at the current sample and advances one sample.
  void step(double y) {
    const double innovation = y - h_.dot(state_);
    state_ = transition_ * (state_ + riccati_.gain * innovation);
    history_.pop_front();
    history_.push_back(lead_.dot(state_));
  }

  void reset() {
    state_.setZero();
    history_.assign(delay_ + 1, 0.0);
  }

  /// Steady-state MSE of the feedback phase: H P H^T with P the covariance of
  /// the (delay + 1)-step prediction.
  double sigma_phi_sq() const { return h_ * delayed_prior_ * h_.transpose(); }

  const RiccatiSolution& riccati() const { return riccati_; }
  std::size_t delay() const { return delay_; }
  const Vec3& state() const { return state_; }

 private:
  KalmanTracker(const DiscreteModel& d, const RowVec3& h, RiccatiSolution sol, std::size_t delay)
      : transition_(d.transition), h_(h), riccati_(std::move(sol)), delay_(delay) {
    Mat3 fd = Mat3::Identity();
    delayed_prior_ = riccati_.prior;
    for (std::size_t i = 0; i < delay; ++i) {
      fd = transition_ * fd;
      delayed_prior_ = transition_ * delayed_prior_ * transition_.transpose() + d.noise;
    }
    lead_ = h_ * fd;
    reset();
  }

  Mat3 transition_;
  RowVec3 h_;
  RowVec3 lead_;
  RiccatiSolution riccati_;
  Mat3 delayed_prior_;
  std::size_t delay_;
  Vec3 state_ = Vec3::Zero();
  std::deque<double> history_;
};

/// Steady-state tracking MSE of the Kalman tracker for a probe whose S_z is
/// computed with its current sigma_phi_sq. Uses the prediction covariance at
/// the loop delay, since that is the error of the phase actually fed back.
inline double riccati_sigma_phi(const ProbeState& probe, const ForceParams& force, const MirrorParams& mirror,
                                const SimConfig& cfg) {
  probe.validate();
  return KalmanTracker::design(mirror, force, measurement_noise_psd(probe), cfg.dt, cfg.feedback_delay_samples)
      .sigma_phi_sq();
}

/// Fixed point sigma^2 = riccati_sigma_phi(probe with sigma^2): S_z depends on
/// the tracking error through R_sq-bar and vice versa.
inline double self_consistent_sigma_phi(const ProbeState& probe, const ForceParams& force,
                                        const MirrorParams& mirror, const SimConfig& cfg) {
  double s = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double next = riccati_sigma_phi(probe.with_sigma_phi_sq(s), force, mirror, cfg);
    if (!(next < 1.0)) throw ConvergenceError("tracking error reached 1 rad^2; the tracker cannot lock");
    if (std::abs(next - s) <= 1e-12 * next) return next;
    s = next;
  }
  throw ConvergenceError("self-consistent tracking error did not converge");
}

struct TrackingResult {
  std::vector<double> y;       // phi + z, the record handed to the smoother
  std::vector<double> phi_fb;  // feedback phase phi'
  double sigma_phi_sq = 0.0;   // mean (phi - phi')^2 over the scored window
  bool diverged = false;       // |phi - phi'| exceeded pi/2 somewhere (nonlinear mode)
};

/// Closes the homodyne feedback loop over a phase record.
///
/// Linearized: y = phi + z, z white with PSD S_z of the probe.
/// Nonlinear: eta = sin(phi - phi') + v sqrt(R_sq(phi - phi')) / (2 |alpha| sqrt(dt))
/// with detected quadrature variances and flux, and y = eta + phi'.
inline TrackingResult run_tracking(std::span<const double> phi, const ProbeState& probe, KalmanTracker& tracker,
                                   const SimConfig& cfg, Rng& rng) {
  probe.validate();
  const std::size_t n = phi.size();
  const std::size_t edge = cfg.edge_samples();
  TrackingResult out;
  out.y.resize(n);
  out.phi_fb.resize(n);
  tracker.reset();
  std::normal_distribution<double> normal(0.0, 1.0);
  const DetectedProbe det = detected(probe);
  const double lin_sd = std::sqrt(measurement_noise_psd(probe) / cfg.dt);
  const double nl_scale = 1.0 / (2.0 * std::sqrt(det.alpha_sq * cfg.dt));
  double err2 = 0.0;
  std::size_t scored = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double fb = tracker.feedback_phase();
    const double e = phi[k] - fb;
    const double v = normal(rng);
    double y;
    if (cfg.mode == MeasurementMode::linearized) {
      y = phi[k] + lin_sd * v;
    } else {
      if (std::abs(e) > std::numbers::pi / 2.0) out.diverged = true;
      y = std::sin(e) + v * std::sqrt(instantaneous_squeezing_factor(det, e)) * nl_scale + fb;
    }
    out.y[k] = y;
    out.phi_fb[k] = fb;
    if (k >= edge && k + edge < n) {
      err2 += e * e;
      ++scored;
    }
    tracker.step(y);
  }
  out.sigma_phi_sq = scored ? err2 / static_cast<double>(scored) : 0.0;
  return out;
}

struct Trajectory {
  std::vector<double> t, f, q, p, phi, phi_fb, y;
  double sigma_phi_sq = 0.0;
  bool diverged = false;

  std::size_t size() const { return t.size(); }

  void write_csv(std::ostream& out) const {
    const auto old = out.precision(17);
    out << "t,f,q,p,phi,phi_fb,y\n";
    for (std::size_t i = 0; i < t.size(); ++i)
      out << t[i] << ',' << f[i] << ',' << q[i] << ',' << p[i] << ',' << phi[i] << ',' << phi_fb[i] << ',' << y[i]
          << '\n';
    out.precision(old);
  }
};

/// One Monte Carlo trial: stationary force and mirror truth on the record,
/// then the tracked measurement. The force history before the record
/// (warm-up) is simulated and discarded.
class TrialSimulator {
 public:
  TrialSimulator(const Priors& priors, const ProbeState& probe, const SimConfig& cfg)
      : priors_(priors),
        probe_(probe),
        cfg_(cfg),
        warmup_(cfg.warmup_samples(priors.mirror, priors.force)),
        responder_(priors.tf, priors.mirror, cfg.dt, cfg.n_samples + warmup_, cfg.pad_samples(priors.force)),
        tracker_(KalmanTracker::design(priors.mirror, priors.force, measurement_noise_psd(probe), cfg.dt,
                                       cfg.feedback_delay_samples)) {
    cfg.validate(priors.force);
    probe.validate();
  }

  Trajectory operator()(std::uint64_t trial_index) {
    Rng rng = trial_rng(cfg_.seed, trial_index);
    const std::size_t n = cfg_.n_samples;
    const std::vector<double> f_ext = simulate_ou(priors_.force, cfg_.dt, n + warmup_, rng);
    MirrorResponse resp = responder_(f_ext);
    Trajectory tr;
    tr.t.resize(n);
    for (std::size_t i = 0; i < n; ++i) tr.t[i] = static_cast<double>(i) * cfg_.dt;
    tr.f.assign(f_ext.begin() + static_cast<std::ptrdiff_t>(warmup_), f_ext.end());
    auto tail = [&](const std::vector<double>& v) {
      return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(warmup_), v.end());
    };
    tr.q = tail(resp.q);
    tr.p = tail(resp.p);
    tr.phi = tail(resp.phi);
    TrackingResult track = run_tracking(tr.phi, probe_, tracker_, cfg_, rng);
    tr.y = std::move(track.y);
    tr.phi_fb = std::move(track.phi_fb);
    tr.sigma_phi_sq = track.sigma_phi_sq;
    tr.diverged = track.diverged;
    return tr;
  }

  const KalmanTracker& tracker() const { return tracker_; }

 private:
  Priors priors_;
  ProbeState probe_;
  SimConfig cfg_;
  std::size_t warmup_;
  MirrorResponder responder_;
  KalmanTracker tracker_;
};

}  // namespace mirrorest
