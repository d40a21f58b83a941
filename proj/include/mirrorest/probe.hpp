#pragma once

// Probe-beam statistics: effective squeezing factor, measurement-noise PSD,
// photon-flux fluctuation spectra and the QCRB attainability diagnostics.
//
// Quadrature variances are normalised so that vacuum is 1: the squeezed
// quadrature has variance e^{-2 r_m}, the anti-squeezed one e^{2 r_p}.

#include <algorithm>
#include <cmath>
#include <string>

#include "mirrorest/errors.hpp"

namespace mirrorest {

struct ProbeState {
  double alpha_sq = 1.0e6;     // mean coherent photon flux |alpha|^2, 1/s
  double r_m = 0.0;            // squeezing parameter
  double r_p = 0.0;            // anti-squeezing parameter
  double sigma_phi_sq = 0.0;   // steady-state tracking MSE, rad^2
  double eta_det = 1.0;        // overall detection efficiency

  static ProbeState coherent(double alpha_sq, double eta_det = 1.0) {
    return {alpha_sq, 0.0, 0.0, 0.0, eta_det};
  }

  /// Squeezing levels in dB as quoted by a homodyne spectrum (-3.62, +6.00).
  static ProbeState squeezed_db(double alpha_sq, double squeezing_db, double antisqueezing_db,
                                double sigma_phi_sq = 0.0, double eta_det = 1.0) {
    return {alpha_sq, -squeezing_db * std::log(10.0) / 20.0, antisqueezing_db * std::log(10.0) / 20.0,
            sigma_phi_sq, eta_det};
  }

  void validate() const {
    require(alpha_sq > 0.0 && std::isfinite(alpha_sq), "probe flux |alpha|^2 must be positive");
    require(r_m >= 0.0 && r_m <= r_p && std::isfinite(r_p), "squeezing parameters need 0 <= r_m <= r_p");
    require(sigma_phi_sq >= 0.0 && sigma_phi_sq < 1.0, "tracking MSE sigma_phi^2 must lie in [0, 1)");
    require(eta_det > 0.0 && eta_det <= 1.0, "detection efficiency must lie in (0, 1]");
  }

  bool is_coherent() const { return r_m == 0.0 && r_p == 0.0; }

  ProbeState lossless() const {
    ProbeState p = *this;
    p.eta_det = 1.0;
    return p;
  }
  ProbeState with_sigma_phi_sq(double s) const {
    ProbeState p = *this;
    p.sigma_phi_sq = s;
    return p;
  }
  ProbeState with_alpha_sq(double a) const {
    ProbeState p = *this;
    p.alpha_sq = a;
    return p;
  }

  bool operator==(const ProbeState&) const = default;
};

/// Squeezing / anti-squeezing bandwidths of the Lorentzian spectra, rad/s.
struct SqueezingBandwidth {
  double dw_minus = 1.0;
  double dw_plus = 1.0;

  void validate() const {
    require(dw_minus > 0.0 && dw_plus > 0.0, "squeezing bandwidths must be positive");
  }

  /// Bandwidth ratio dw_plus/dw_minus for which R+ R- = 1/16 at every frequency.
  static double pure_ratio(const ProbeState& p) {
    const double rm0 = std::exp(-2.0 * p.r_m);
    const double rp0 = std::exp(2.0 * p.r_p);
    if (p.is_coherent()) return 1.0;
    return std::sqrt((1.0 - rm0) / (rp0 - 1.0));
  }

  /// From the averaged bandwidth (dw_minus + dw_plus)/2 and the ratio dw_plus/dw_minus.
  static SqueezingBandwidth from_average(double dw0, double ratio) {
    require(dw0 > 0.0 && ratio > 0.0, "average bandwidth and ratio must be positive");
    const double minus = 2.0 * dw0 / (1.0 + ratio);
    return {minus, ratio * minus};
  }

  double average() const { return 0.5 * (dw_minus + dw_plus); }

  bool operator==(const SqueezingBandwidth&) const = default;
};

/// Quadrature variances and flux after a beam-splitter loss of transmissivity eta.
struct DetectedProbe {
  double squeezed_var;      // eta e^{-2 r_m} + 1 - eta
  double antisqueezed_var;  // eta e^{2 r_p} + 1 - eta
  double alpha_sq;          // eta |alpha|^2
};

inline DetectedProbe detected(const ProbeState& p) {
  const double eta = p.eta_det;
  return {eta * std::exp(-2.0 * p.r_m) + (1.0 - eta), eta * std::exp(2.0 * p.r_p) + (1.0 - eta), eta * p.alpha_sq};
}

/// Noise factor of the tracked homodyne output at phase error e:
/// sin^2(e) V+ + cos^2(e) V-, with detected quadrature variances.
inline double instantaneous_squeezing_factor(const DetectedProbe& d, double phase_error) {
  const double s = std::sin(phase_error);
  const double s2 = s * s;
  return s2 * d.antisqueezed_var + (1.0 - s2) * d.squeezed_var;
}

/// R_sq-bar = sigma^2 V+ + (1 - sigma^2) V-, using loss-transformed variances.
inline double effective_squeezing_factor(const ProbeState& p) {
  p.validate();
  const DetectedProbe d = detected(p);
  return p.sigma_phi_sq * d.antisqueezed_var + (1.0 - p.sigma_phi_sq) * d.squeezed_var;
}

/// White measurement-noise PSD S_z = R_sq-bar / (4 eta |alpha|^2), rad^2 s.
inline double measurement_noise_psd(const ProbeState& p) {
  return effective_squeezing_factor(p) / (4.0 * p.eta_det * p.alpha_sq);
}

inline double to_db(double factor) { return 10.0 * std::log10(factor); }
inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

enum class Quadrature { squeezed, antisqueezed };

/// Lorentzian quadrature spectrum R-(w) (squeezed) or R+(w) (anti-squeezed),
/// relaxing to the vacuum level 1/4 outside the bandwidth.
inline double squeezing_spectrum(Quadrature which, double w, const ProbeState& p, const SqueezingBandwidth& bw) {
  p.validate();
  bw.validate();
  const bool plus = which == Quadrature::antisqueezed;
  const double r0 = plus ? 0.25 * std::exp(2.0 * p.r_p) : 0.25 * std::exp(-2.0 * p.r_m);
  const double dw = plus ? bw.dw_plus : bw.dw_minus;
  return 0.25 + (r0 - 0.25) * dw * dw / (w * w + dw * dw);
}

/// Mean photon flux carried by the squeezing, I_sq = int R^I_sq dw/2pi.
inline double mean_squeezing_flux(const ProbeState& p, const SqueezingBandwidth& bw) {
  p.validate();
  bw.validate();
  return 0.125 * (std::expm1(2.0 * p.r_p) * bw.dw_plus + std::expm1(-2.0 * p.r_m) * bw.dw_minus);
}

/// Scale factor xi of the broadband photon-flux spectrum,
/// S_dI ~ (|alpha|^2 + xi I_sq) e^{2 r_p}.
///
/// Evaluated as e^{-2 r_p} (1 + (a+b)^2 (A + B - ab) / (4 (A - B))) with
/// A = e^{2r_p} - 1, B = 1 - e^{-2r_m}, a = sqrt(A), b = sqrt(B): algebraically
/// the (a^3 + b^3)/(a - b) form, without its cancellation. A - B vanishes only
/// for the coherent state, where 1 is returned.
inline double xi_factor(const ProbeState& p) {
  p.validate();
  if (p.is_coherent()) return 1.0;
  const double A = std::expm1(2.0 * p.r_p);
  const double B = -std::expm1(-2.0 * p.r_m);
  const double diff = A - B;  // e^{2r_p} + e^{-2r_m} - 2 >= 0
  if (!(diff > 0.0)) throw SingularityError("xi_factor: squeezed and anti-squeezed photon contributions cancel");
  const double a = std::sqrt(A);
  const double b = std::sqrt(B);
  return std::exp(-2.0 * p.r_p) * (1.0 + 0.25 * (a + b) * (a + b) * (A + B - a * b) / diff);
}

/// Exact photon-flux fluctuation spectrum for Lorentzian squeezing of finite bandwidth.
inline double photon_flux_psd_exact(double w, const ProbeState& p, const SqueezingBandwidth& bw) {
  const double rplus = squeezing_spectrum(Quadrature::antisqueezed, w, p, bw);
  const double isq = mean_squeezing_flux(p, bw);
  const double ap = std::expm1(2.0 * p.r_p);
  const double am = -std::expm1(-2.0 * p.r_m);
  const double dp = bw.dw_plus, dm = bw.dw_minus;
  const double corr = 0.125 * (ap * ap * dp * dp * dp / (w * w + 4.0 * dp * dp) +
                               am * am * dm * dm * dm / (w * w + 4.0 * dm * dm));
  return 4.0 * p.alpha_sq * rplus + isq + corr;
}

/// Broadband approximation S_dI = |alpha|^2 e^{2 r_p}.
inline double photon_flux_psd_broadband(const ProbeState& p) {
  p.validate();
  return p.alpha_sq * std::exp(2.0 * p.r_p);
}

/// 4 S_dI S_z: 1 when the QCRB is attainable, larger otherwise. S_dI is the
/// lossless broadband flux spectrum; S_z includes detection loss.
inline double attainability_gap(const ProbeState& p) {
  return 4.0 * photon_flux_psd_broadband(p.lossless()) * measurement_noise_psd(p);
}

struct BroadbandThresholds {
  double min_bandwidth_ratio = 10.0;  // dw0 / max(Omega, lambda) must reach this
  double max_flux_ratio = 0.1;        // xi I_sq / |alpha|^2 must stay below this

  bool operator==(const BroadbandThresholds&) const = default;
};

enum class Verdict { pass, marginal, fail };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::marginal: return "marginal";
    case Verdict::fail: return "fail";
  }
  return "?";
}

struct BroadbandReport {
  double bandwidth_ratio;  // dw0 / max(Omega, lambda)
  double flux_ratio;       // xi I_sq / |alpha|^2
  Verdict bandwidth;
  Verdict flux;

  bool passes() const { return bandwidth != Verdict::fail && flux != Verdict::fail; }
  Verdict overall() const {
    if (!passes()) return Verdict::fail;
    return bandwidth == Verdict::pass && flux == Verdict::pass ? Verdict::pass : Verdict::marginal;
  }
};

/// Checks dw0 >> Omega, lambda and xi I_sq << |alpha|^2. A ratio within a factor
/// two of its threshold is reported as marginal rather than failed.
inline BroadbandReport validate_broadband(const SqueezingBandwidth& bw, double omega, double lambda,
                                          const ProbeState& p, const BroadbandThresholds& th = {}) {
  const double bw_ratio = bw.average() / std::max(omega, lambda);
  const double flux_ratio = xi_factor(p) * mean_squeezing_flux(p, bw) / p.alpha_sq;
  auto grade_min = [](double value, double threshold) {
    if (value >= threshold) return Verdict::pass;
    return value >= 0.5 * threshold ? Verdict::marginal : Verdict::fail;
  };
  auto grade_max = [](double value, double threshold) {
    if (value <= threshold) return Verdict::pass;
    return value <= 2.0 * threshold ? Verdict::marginal : Verdict::fail;
  };
  return {bw_ratio, flux_ratio, grade_min(bw_ratio, th.min_bandwidth_ratio), grade_max(flux_ratio, th.max_flux_ratio)};
}

}  // namespace mirrorest
