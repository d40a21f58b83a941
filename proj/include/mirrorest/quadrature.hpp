#pragma once

// Composite Gauss-Legendre grids on [0, omega_max] for even spectral integrands.

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

#include "mirrorest/errors.hpp"
#include "mirrorest/model.hpp"

namespace mirrorest {

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1] (Golub-Welsch).
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  nodes.resize(n);
  weights.resize(n);
  for (int k = 0; k < n; ++k) {
    nodes[k] = es.eigenvalues()(k);
    const double v = es.eigenvectors()(0, k);
    weights[k] = 2.0 * v * v;
  }
}

struct QuadratureResult {
  double value;  // integral over [0, omega_max]
  double tail;   // extrapolated contribution beyond omega_max
};

struct SpectralGridOptions {
  int order = 16;              // Gauss-Legendre points per sub-panel
  int subdivisions = 4;        // sub-panels per breakpoint interval
  int octave_subdivisions = 2; // sub-panels per octave
};

/// Frequency nodes and weights over [0, omega_max].
///
/// Breakpoints below the last one are user-chosen panels; above it the grid
/// continues in octaves up to omega_max. The last two octaves give a geometric
/// estimate of the integral beyond omega_max.
class SpectralGrid {
 public:
  using Options = SpectralGridOptions;

  /// `breakpoints` must include 0; omega_max is rounded up to a whole number of
  /// octaves above the largest breakpoint (at least two).
  static SpectralGrid build(std::vector<double> breakpoints, double omega_max, Options opt) {
    require(opt.order >= 2 && opt.subdivisions >= 1 && opt.octave_subdivisions >= 1, "invalid quadrature options");
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    require(!breakpoints.empty() && breakpoints.front() == 0.0, "spectral grid breakpoints must start at 0");
    require(breakpoints.size() >= 2, "spectral grid needs at least one positive breakpoint");

    SpectralGrid g;
    g.opt_ = opt;
    g.breakpoints_ = breakpoints;
    std::vector<double> x, w;
    gauss_legendre(opt.order, x, w);

    auto add_panel = [&](double a, double b, int parts) {
      const double h = (b - a) / parts;
      for (int s = 0; s < parts; ++s) {
        const double lo = a + s * h;
        for (int k = 0; k < opt.order; ++k) {
          g.nodes_.push_back(lo + 0.5 * h * (x[k] + 1.0));
          g.weights_.push_back(0.5 * h * w[k]);
        }
      }
    };
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
      add_panel(breakpoints[i], breakpoints[i + 1], opt.subdivisions);

    double lo = breakpoints.back();
    int octaves = 0;
    while (octaves < 2 || lo < omega_max) {
      g.octave_starts_.push_back(g.nodes_.size());
      add_panel(lo, 2.0 * lo, opt.octave_subdivisions);
      lo *= 2.0;
      ++octaves;
    }
    g.omega_max_ = lo;
    return g;
  }

  /// Default grid for a mirror system: panels resolving the OU corner and the
  /// mechanical resonance, then octaves until omega_max >= max(50 Omega,
  /// 50 lambda, 5 x last tabulated frequency) and the Lorentzian force tail
  /// beyond omega_max is below 1e-5 of the force variance.
  static SpectralGrid for_system(const Priors& priors, Options opt = {}) {
    const double lam = priors.force.lambda;
    const double om = priors.mirror.omega;
    const double gam = std::max(priors.mirror.gamma, 1e-3 * om);
    std::vector<double> bp{0.0, 0.25 * lam, 0.5 * lam, lam, 2.0 * lam, 4.0 * lam, om, 2.0 * om, 4.0 * om};
    for (double k : {1.0 / 3.0, 1.0, 3.0, 8.0, 20.0, 50.0}) {
      if (om - k * gam > 0.0) bp.push_back(om - k * gam);
      bp.push_back(om + k * gam);
    }
    const double table_max = priors.tf.max_tabulated_omega();
    if (table_max > 0.0) bp.push_back(table_max);
    const double tail_limit = priors.force.kappa / (std::numbers::pi * 1e-5 * priors.force.stationary_variance());
    const double wmax = std::max({50.0 * om, 50.0 * lam, 5.0 * table_max, tail_limit});
    return build(std::move(bp), wmax, opt);
  }

  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }
  double omega_max() const { return omega_max_; }
  std::size_t size() const { return nodes_.size(); }

  /// Same breakpoints and omega_max, twice the nodes per sub-panel.
  SpectralGrid refined() const {
    Options o = opt_;
    o.order *= 2;
    return build(breakpoints_, omega_max_, o);
  }

  /// Same panels, omega_max doubled.
  SpectralGrid extended() const { return build(breakpoints_, 2.0 * omega_max_, opt_); }

  /// int_0^omega_max f(w) dw.
  template <class F>
  double integrate(F&& f) const {
    return integrate_with_tail(f).value;
  }

  template <class F>
  QuadratureResult integrate_with_tail(F&& f) const {
    const std::size_t n_oct = octave_starts_.size();
    double total = 0.0, last = 0.0, prev = 0.0;
    const std::size_t last_start = octave_starts_[n_oct - 1];
    const std::size_t prev_start = octave_starts_[n_oct - 2];
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const double v = weights_[i] * f(nodes_[i]);
      total += v;
      if (i >= last_start)
        last += v;
      else if (i >= prev_start)
        prev += v;
    }
    double tail;
    if (last == 0.0)
      tail = 0.0;
    else if (prev > 0.0 && last / prev < 1.0) {
      const double r = last / prev;
      tail = last * r / (1.0 - r);
    } else
      tail = std::numeric_limits<double>::infinity();
    return {total, tail};
  }

 private:
  Options opt_;
  std::vector<double> breakpoints_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<std::size_t> octave_starts_;
  double omega_max_ = 0.0;
};

}  // namespace mirrorest
