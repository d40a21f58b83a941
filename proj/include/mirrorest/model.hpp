#pragma once

// Mirror/PZT mechanics: physical parameters, mirror-motion functions g_ij(w)
// and the prior spectral densities of force, position and momentum.
//
// Fourier convention: x~(w) = int x(t) e^{-iwt} dt, so d/dt <-> iw and
// p~ = i m w q~. Every spectral density is two-sided in angular frequency,
// with variance = int S(w) dw / 2pi.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mirrorest/errors.hpp"

namespace mirrorest {

using cplx = std::complex<double>;

/// Signal variables linked by the mirror-motion functions.
enum class Var { phase, position, momentum, force };

inline constexpr Var kEstimatedVars[] = {Var::position, Var::momentum, Var::force};

inline std::string_view symbol(Var v) {
  switch (v) {
    case Var::phase: return "phi";
    case Var::position: return "q";
    case Var::momentum: return "p";
    case Var::force: return "f";
  }
  return "?";
}

inline Var parse_var(std::string_view s) {
  if (s == "phi") return Var::phase;
  if (s == "q") return Var::position;
  if (s == "p") return Var::momentum;
  if (s == "f") return Var::force;
  throw ParseError("unknown variable '" + std::string(s) + "' (expected phi, q, p or f)");
}

struct MirrorParams {
  double mass = 5.88e-4;              // kg
  double omega = 1.76e5;              // resonance, rad/s
  double gamma = 7.66e3;              // damping, rad/s
  double k0 = 2.0 * std::numbers::pi / 860e-9;  // optical wavenumber, rad/m
  double theta = std::numbers::pi / 4.0;        // reflection angle, rad
  double detector_gain = 6.96e7;      // G, V/m
  double force_per_volt = 2.04e-1;    // beta, N/V

  void validate() const {
    require(mass > 0.0, "mirror mass must be positive");
    require(omega > 0.0, "resonance frequency must be positive");
    require(gamma >= 0.0, "damping must be non-negative");
    require(k0 > 0.0, "optical wavenumber must be positive");
    require(theta >= 0.0 && theta < std::numbers::pi / 2.0, "reflection angle must lie in [0, pi/2)");
    require(detector_gain > 0.0, "detector gain must be positive");
    require(force_per_volt > 0.0, "force calibration must be positive");
  }

  /// g_phi_q = 2 k0 cos(theta), rad per metre.
  double phase_gain() const { return 2.0 * k0 * std::cos(theta); }

  bool operator==(const MirrorParams&) const = default;
};

/// Ornstein-Uhlenbeck force df/dt = -lambda f + w, <w w> = kappa delta.
struct ForceParams {
  double lambda = 5.84e4;  // rad/s
  double kappa = 1.67e3;   // N^2/s

  void validate() const {
    require(lambda > 0.0, "OU cutoff lambda must be positive");
    require(kappa > 0.0, "OU intensity kappa must be positive");
  }

  double stationary_variance() const { return kappa / (2.0 * lambda); }

  bool operator==(const ForceParams&) const = default;
};

/// Effective mass of a mirror glued on a uniform PZT stack.
inline double effective_mass(double mirror_mass, double pzt_mass) {
  if (!(mirror_mass > 0.0) || !(pzt_mass >= 0.0))
    throw DomainError("effective_mass: masses must be positive (mirror) and non-negative (PZT)");
  return mirror_mass + pzt_mass / 3.0;
}

/// Position response to force, g_qf(w) in m/N.
///
/// The nominal variant is the mass-spring-damper 1/(m(Omega^2 - w^2 + i gamma w)).
/// The tabulated variant interpolates measured samples (positive frequencies,
/// linear in real and imaginary parts) and mirrors them to negative frequencies
/// by conjugation. Queries outside the table clamp to the nearest endpoint;
/// the first such query on a table logs a warning.
class TransferFunction {
 public:
  struct Nominal {
    MirrorParams params;
  };
  struct Tabulated {
    std::vector<double> omega;  // rad/s, strictly increasing, > 0
    std::vector<cplx> values;   // m/N
    std::shared_ptr<std::atomic<bool>> warned = std::make_shared<std::atomic<bool>>(false);
  };

  static TransferFunction nominal(const MirrorParams& params) {
    params.validate();
    return TransferFunction(Nominal{params});
  }

  static TransferFunction tabulated(std::vector<double> omega, std::vector<cplx> values) {
    if (omega.empty() || omega.size() != values.size())
      throw DomainError("tabulated transfer function needs equal, non-empty frequency and value arrays");
    for (std::size_t i = 0; i < omega.size(); ++i) {
      if (!(omega[i] > 0.0) || !std::isfinite(omega[i]))
        throw DomainError("tabulated frequencies must be positive and finite");
      if (i > 0 && !(omega[i] > omega[i - 1]))
        throw DomainError("tabulated frequencies must be strictly increasing");
      if (!std::isfinite(values[i].real()) || !std::isfinite(values[i].imag()))
        throw DomainError("tabulated transfer function values must be finite");
    }
    return TransferFunction(Tabulated{std::move(omega), std::move(values)});
  }

  /// Reads `freq_hz,gqf_real,gqf_imag` rows (header line optional, '#' comments).
  static TransferFunction load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open transfer function file " + path.string());
    std::vector<double> omega;
    std::vector<cplx> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      if (line.find_first_of("abcdefghijklmnopqrstuvwxyz_") != std::string::npos &&
          line.find("freq") != std::string::npos)
        continue;  // header
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      double hz = 0, re = 0, im = 0;
      if (!(row >> hz >> re >> im))
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected freq_hz,gqf_real,gqf_imag");
      omega.push_back(2.0 * std::numbers::pi * hz);
      values.emplace_back(re, im);
    }
    return tabulated(std::move(omega), std::move(values));
  }

  void save_csv(const std::filesystem::path& path) const {
    const auto* tab = std::get_if<Tabulated>(&model_);
    if (!tab) throw DomainError("only tabulated transfer functions can be written to CSV");
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << "freq_hz,gqf_real,gqf_imag\n" << std::setprecision(17);
    for (std::size_t i = 0; i < tab->omega.size(); ++i)
      out << tab->omega[i] / (2.0 * std::numbers::pi) << ',' << tab->values[i].real() << ','
          << tab->values[i].imag() << '\n';
  }

  /// Samples any transfer function (typically the nominal one) into a table.
  static TransferFunction sampled(const TransferFunction& tf, const std::vector<double>& omega) {
    std::vector<cplx> v;
    v.reserve(omega.size());
    for (double w : omega) v.push_back(tf(w));
    return tabulated(omega, std::move(v));
  }

  cplx operator()(double w) const {
    if (!std::isfinite(w)) throw DomainError("transfer function queried at non-finite frequency");
    if (const auto* nom = std::get_if<Nominal>(&model_)) {
      const auto& p = nom->params;
      return 1.0 / cplx(p.mass * (p.omega * p.omega - w * w), p.mass * p.gamma * w);
    }
    const auto& tab = std::get<Tabulated>(model_);
    if (w < 0.0) return std::conj(eval_positive(tab, -w));
    cplx v = eval_positive(tab, w);
    return w == 0.0 ? cplx(v.real(), 0.0) : v;
  }

  /// 1/g_qf(w), the force needed per unit displacement. Finite everywhere for
  /// the nominal model; throws where a tabulated value vanishes.
  cplx inverse(double w) const {
    if (const auto* nom = std::get_if<Nominal>(&model_)) {
      const auto& p = nom->params;
      return cplx(p.mass * (p.omega * p.omega - w * w), p.mass * p.gamma * w);
    }
    cplx g = (*this)(w);
    if (g == cplx(0.0, 0.0)) throw SingularityError("transfer function vanishes; g_fq is singular");
    return 1.0 / g;
  }

  /// |g_qf(w)|^2, computed without forming the complex reciprocal.
  double power(double w) const {
    if (const auto* nom = std::get_if<Nominal>(&model_)) {
      const auto& p = nom->params;
      const double re = p.mass * (p.omega * p.omega - w * w);
      const double im = p.mass * p.gamma * w;
      return 1.0 / (re * re + im * im);
    }
    return std::norm((*this)(w));
  }

  bool is_nominal() const { return std::holds_alternative<Nominal>(model_); }

  /// Largest tabulated angular frequency; 0 for the nominal model.
  double max_tabulated_omega() const {
    const auto* tab = std::get_if<Tabulated>(&model_);
    return tab ? tab->omega.back() : 0.0;
  }

  /// True if |w| needs no clamping.
  bool covers(double w) const {
    const auto* tab = std::get_if<Tabulated>(&model_);
    if (!tab) return true;
    const double a = std::abs(w);
    return a >= tab->omega.front() && a <= tab->omega.back();
  }

 private:
  explicit TransferFunction(std::variant<Nominal, Tabulated> m) : model_(std::move(m)) {}

  static cplx eval_positive(const Tabulated& tab, double w) {
    const auto& x = tab.omega;
    if (w <= x.front() || w >= x.back()) {
      if ((w < x.front() || w > x.back()) && !tab.warned->exchange(true)) {
        std::ostringstream msg;
        msg << "transfer function queried at " << w << " rad/s outside tabulated range [" << x.front() << ", "
            << x.back() << "]; clamping to the nearest endpoint";
        log::warn(msg.str());
      }
      return w <= x.front() ? tab.values.front() : tab.values.back();
    }
    const auto it = std::upper_bound(x.begin(), x.end(), w);
    const std::size_t hi = static_cast<std::size_t>(it - x.begin());
    const std::size_t lo = hi - 1;
    const double s = (w - x[lo]) / (x[hi] - x[lo]);
    return tab.values[lo] + s * (tab.values[hi] - tab.values[lo]);
  }

  std::variant<Nominal, Tabulated> model_;
};

namespace detail {

// Relation of each variable to position: x~ = g_xq q~.
inline cplx relative_to_position(Var x, double w, const TransferFunction& tf, const MirrorParams& params) {
  switch (x) {
    case Var::phase: return {params.phase_gain(), 0.0};
    case Var::position: return {1.0, 0.0};
    case Var::momentum: return {0.0, params.mass * w};
    case Var::force: return tf.inverse(w);
  }
  return {};
}

}  // namespace detail

/// Mirror-motion function g_ij(w), defined by i~ = g_ij j~.
///
/// Throws SingularityError where g_ij has a pole (e.g. g_qp or g_phi_p at w = 0).
/// Products that cancel such poles (S_p, the momentum filter) are evaluated in
/// factored form elsewhere and never go through this function.
inline cplx motion_function(Var i, Var j, double w, const TransferFunction& tf, const MirrorParams& params) {
  if (!std::isfinite(w)) throw DomainError("motion_function: frequency must be finite");
  const cplx num = detail::relative_to_position(i, w, tf, params);
  const cplx den = detail::relative_to_position(j, w, tf, params);
  if (den == cplx(0.0, 0.0)) {
    std::ostringstream msg;
    msg << "g_" << symbol(i) << symbol(j) << " has a pole at w = " << w;
    throw SingularityError(msg.str());
  }
  return num / den;
}

/// Everything the prior signal statistics depend on.
struct Priors {
  MirrorParams mirror;
  ForceParams force;
  TransferFunction tf;

  static Priors nominal(const MirrorParams& m, const ForceParams& f) {
    m.validate();
    f.validate();
    return {m, f, TransferFunction::nominal(m)};
  }

  double force_psd(double w) const { return force.kappa / (w * w + force.lambda * force.lambda); }

  /// Two-sided prior PSD of x. Momentum uses (m w)^2 |g_qf|^2 S_f, so S_p(0) = 0
  /// exactly; phase is (2 k0 cos theta)^2 S_q.
  double psd(Var x, double w) const {
    const double sf = force_psd(w);
    switch (x) {
      case Var::force: return sf;
      case Var::position: return tf.power(w) * sf;
      case Var::momentum: {
        const double mw = mirror.mass * w;
        return mw * mw * tf.power(w) * sf;
      }
      case Var::phase: {
        const double g = mirror.phase_gain();
        return g * g * tf.power(w) * sf;
      }
    }
    return 0.0;
  }

  /// conj(g_phi_x(w)) S_x(w) without any 1/w: the numerator of the Wiener filter.
  cplx phase_cross_spectrum(Var x, double w) const {
    const double g = mirror.phase_gain();
    const double sq = tf.power(w) * force_psd(w);
    switch (x) {
      case Var::phase: return {g * g * sq, 0.0};
      case Var::position: return {g * sq, 0.0};
      case Var::momentum: return {0.0, g * mirror.mass * w * sq};
      case Var::force: return g * std::conj(tf(w)) * force_psd(w);
    }
    return {};
  }
};

/// Prior PSD of x in {f, q, p} (phase accepted too).
inline double prior_psd(Var x, double w, const ForceParams& force, const TransferFunction& tf,
                        const MirrorParams& params) {
  force.validate();
  params.validate();
  if (!std::isfinite(w)) throw DomainError("prior_psd: frequency must be finite");
  return Priors{params, force, tf}.psd(x, w);
}

}  // namespace mirrorest
