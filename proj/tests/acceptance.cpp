// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance                 run every criterion
//   acceptance --criterion N   run criterion N only (repeatable)
//
// Exit status is 0 only if every selected criterion passes.

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mirrorest/experiment.hpp"
#include "oracles.hpp"

using namespace mirrorest;

namespace {

// Tolerances, fixed here and nowhere else.
constexpr double kAttainTol = 1e-9;        // 1: relative
constexpr double kMcLow = 0.95;            // 2: empirical / analytic
constexpr double kMcHigh = 1.05;
constexpr double kEnhanceLow = 0.05;       // 3: 1 - mse_sq / qcrb_coh
constexpr double kEnhanceHigh = 0.25;
constexpr double kExcessLow = 0.05;        // 4: mse_coh / qcrb_coh - 1
constexpr double kExcessHigh = 0.45;
constexpr double kXi = 0.61;               // 5
constexpr double kXiTol = 0.005;
constexpr double kXiIsq = 1.37e5;          // s^-1
constexpr double kXiIsqRelTol = 0.02;
constexpr double kOracleRelTol = 0.03;     // 6
constexpr int kOracleSamples = 256;
constexpr double kOracleDt = 1.2e-6;       // s: record of 0.3 ms, ~18 force correlation times
constexpr std::size_t kOuSamples = 10'000'000;  // 7
constexpr double kOuDt = 1e-5;             // s: lambda dt = 0.58, lag-1 correlation 0.56
constexpr double kOuRelTol = 0.01;
constexpr double kChainTol = 1e-9;         // 8: relative slack on bound inequalities
constexpr double kUncertaintyTol = 1e-13;
constexpr int kPropertyDraws = 200;

const double kSweepAlphaSq[] = {1.02e6, 1.88e6, 2.87e6, 6.24e6};

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> notes;  // per-point lines printed under the verdict

  void require(bool ok, const std::string& why) {
    if (!ok) {
      if (pass) detail = why;
      pass = false;
    }
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

Priors nominal_priors() { return Priors::nominal(MirrorParams{}, ForceParams{}); }

const SpectralGrid& nominal_grid() {
  static const SpectralGrid g = SpectralGrid::for_system(nominal_priors());
  return g;
}

// The Monte Carlo sweep at the configured defaults, shared by criteria 2-4.
const std::vector<PointResult>& default_sweep() {
  static const std::vector<PointResult> results = [] {
    std::vector<PointResult> r;
    std::ostringstream sink;
    cmd_sweep(ExperimentConfig{}, sink, &r);
    return r;
  }();
  return results;
}

const PointResult* find_point(ProbeKind kind, double alpha) {
  for (const auto& r : default_sweep())
    if (r.kind == kind && r.alpha_sq == alpha) return &r;
  return nullptr;
}

Outcome coherent_attainability() {
  Outcome o;
  double worst = 0.0;
  for (double a : kSweepAlphaSq) {
    const auto p = ProbeState::coherent(a, 1.0);
    for (Var x : kEstimatedVars)
      worst = std::max(worst, rel(qcrb(x, nominal_priors(), p, nominal_grid()),
                                  analytic_mmse(x, nominal_priors(), p, nominal_grid())));
  }
  o.require(worst <= kAttainTol, "QCRB and MMSE differ");
  o.detail = fmt("worst |qcrb/mmse - 1| = %.2e over q, p, f and four amplitudes (tol %.0e)", worst, kAttainTol);
  return o;
}

Outcome monte_carlo_consistency() {
  Outcome o;
  const ExperimentConfig c;
  double lo = 1e300, hi = 0.0;
  std::size_t rows = 0;
  for (const auto& r : default_sweep()) {
    std::string line = fmt("%-8s alpha_sq %.3g:", to_string(r.kind).c_str(), r.alpha_sq);
    for (int i = 0; i < 3; ++i) {
      const double ratio = r.empirical[i].mse / r.mmse[i];
      const double se = r.empirical[i].stderr_ / r.mmse[i];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      ++rows;
      line += fmt("  %s %.4f +- %.4f", std::string(symbol(kEstimatedVars[i])).c_str(), ratio, se);
      o.require(ratio >= kMcLow && ratio <= kMcHigh, fmt("ratio %.4f outside range", ratio));
    }
    o.notes.push_back(line);
  }
  o.require(rows == 3 * 2 * std::size(kSweepAlphaSq), "sweep incomplete");
  o.detail = fmt("%zu ratios empirical/mmse in [%.4f, %.4f], required [%.2f, %.2f], %zu trials each", rows, lo, hi,
                 kMcLow, kMcHigh, c.sim.n_trials);
  return o;
}

Outcome quantum_enhancement() {
  Outcome o;
  double sum[2] = {0, 0};
  int n = 0;
  for (double a : kSweepAlphaSq) {
    const PointResult* r = find_point(ProbeKind::squeezed, a);
    if (!r) {
      o.require(false, "missing sweep point");
      continue;
    }
    std::string line = fmt("alpha_sq %.3g:", a);
    for (int i = 0; i < 2; ++i) {  // position and momentum
      const double e = 1.0 - r->empirical[i].mse / r->qcrb_coherent[i];
      sum[i] += e;
      line += fmt("  %s %.1f%%", std::string(symbol(kEstimatedVars[i])).c_str(), 100 * e);
      o.require(e >= kEnhanceLow && e <= kEnhanceHigh, "enhancement outside range");
    }
    ++n;
    o.notes.push_back(line);
  }
  o.detail = fmt("squeezed MSE below coherent QCRB by q %.1f%%, p %.1f%% on average; required %.0f-%.0f%% at every point",
                 100 * sum[0] / n, 100 * sum[1] / n, 100 * kEnhanceLow, 100 * kEnhanceHigh);
  return o;
}

Outcome coherent_closeness() {
  Outcome o;
  double sum[3] = {0, 0, 0};
  int n = 0;
  for (double a : kSweepAlphaSq) {
    const PointResult* r = find_point(ProbeKind::coherent, a);
    if (!r) {
      o.require(false, "missing sweep point");
      continue;
    }
    std::string line = fmt("alpha_sq %.3g:", a);
    for (int i = 0; i < 3; ++i) {
      const double e = r->empirical[i].mse / r->qcrb_coherent[i] - 1.0;
      sum[i] += e;
      line += fmt("  %s %.1f%%", std::string(symbol(kEstimatedVars[i])).c_str(), 100 * e);
      o.require(e >= kExcessLow && e <= kExcessHigh, "excess outside range");
    }
    ++n;
    o.notes.push_back(line);
  }
  o.detail = fmt("coherent MSE above coherent QCRB by q %.1f%%, p %.1f%%, f %.1f%% on average; required %.0f-%.0f%%",
                 100 * sum[0] / n, 100 * sum[1] / n, 100 * sum[2] / n, 100 * kExcessLow, 100 * kExcessHigh);
  return o;
}

Outcome xi_anchors() {
  Outcome o;
  const ExperimentConfig c;
  const ProbeState p = c.probe;
  const double xi = xi_factor(p);
  const auto bw = SqueezingBandwidth::from_average(10.0 * c.mirror.omega, c.bandwidth.dw_plus / c.bandwidth.dw_minus);
  const double xi_isq = xi * mean_squeezing_flux(p, bw);
  o.require(std::abs(xi - kXi) <= kXiTol, "xi off");
  o.require(rel(xi_isq, kXiIsq) <= kXiIsqRelTol, "xi I_sq off");
  o.detail = fmt("xi = %.4f (%.2f +- %.3f), xi I_sq at 10 Omega = %.4g /s (%.3g +- %.0f%%)", xi, kXi, kXiTol, xi_isq,
                 kXiIsq, 100 * kXiIsqRelTol);
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  const ExperimentConfig c;
  const MirrorParams& m = c.mirror;
  const oracle::System sys{m.mass, m.omega, m.gamma, c.force.lambda, c.force.kappa, m.phase_gain()};
  double worst = 0.0;
  for (double a : {kSweepAlphaSq[0], kSweepAlphaSq[3]}) {
    for (ProbeKind kind : {ProbeKind::coherent, ProbeKind::squeezed}) {
      const ProbeState p = sweep_probe(c, kind, a);
      const double sz = measurement_noise_psd(p);
      const auto post = oracle::centre_posterior_mse(sys, kOracleSamples, kOracleDt, sz / kOracleDt);
      std::string line = fmt("%-8s alpha_sq %.3g:", to_string(kind).c_str(), a);
      for (int i = 0; i < 3; ++i) {
        const double r = analytic_mmse(kEstimatedVars[i], nominal_priors(), sz, nominal_grid()) / post[i];
        worst = std::max(worst, std::abs(r - 1.0));
        line += fmt("  %s %.4f", std::string(symbol(kEstimatedVars[i])).c_str(), r);
      }
      o.notes.push_back(line);
    }
  }
  o.require(worst <= kOracleRelTol, "oracle mismatch");
  o.detail = fmt("worst |mmse/posterior - 1| = %.4f over %d-sample records (tol %.2f)", worst, kOracleSamples,
                 kOracleRelTol);
  return o;
}

Outcome ou_statistics() {
  Outcome o;
  const ForceParams f;
  auto rng = trial_rng(SimConfig{}.seed, 0);
  const auto x = simulate_ou(f, kOuDt, kOuSamples, rng);
  double s0 = 0.0, s1 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s0 += x[i] * x[i];
    if (i + 1 < x.size()) s1 += x[i] * x[i + 1];
  }
  const double var = s0 / static_cast<double>(x.size());
  const double lag1 = s1 / (s0 - x.back() * x.back());
  const double var_err = rel(var, f.stationary_variance());
  const double lag_err = rel(lag1, std::exp(-f.lambda * kOuDt));
  o.require(var_err <= kOuRelTol, "variance off");
  o.require(lag_err <= kOuRelTol, "lag-1 autocorrelation off");
  o.detail = fmt("variance rel err %.2e, lag-1 rel err %.2e over %zu samples (tol %.0e)", var_err, lag_err, kOuSamples,
                 kOuRelTol);
  return o;
}

// Random probe with r_m <= r_p, arbitrary tracking error and loss.
ProbeState draw_probe(oracle::Gen& g, double alpha_sq) {
  ProbeState p;
  p.alpha_sq = alpha_sq;
  p.r_p = g.uniform(0.0, 1.5);
  p.r_m = g.uniform(0, 1) < 0.2 ? p.r_p : g.uniform(0.0, p.r_p);
  p.sigma_phi_sq = g.uniform(0, 1) < 0.2 ? 0.0 : g.uniform(0.0, 0.2);
  p.eta_det = g.uniform(0, 1) < 0.3 ? 1.0 : g.uniform(0.3, 1.0);
  return p;
}

Outcome invariant_suites() {
  Outcome o;
  const Priors pr = nominal_priors();
  const SpectralGrid& grid = nominal_grid();
  oracle::Gen g(2024);
  int fails[5] = {0, 0, 0, 0, 0};
  const char* names[5] = {"ordering chain", "integrand dominance", "filter Hermitian symmetry", "monotonicity",
                          "uncertainty relation"};

  for (int n = 0; n < kPropertyDraws / 4; ++n) {
    const ProbeState p = draw_probe(g, g.log_uniform(1e4, 1e9));
    ProbeState coh = ProbeState::coherent(p.alpha_sq, p.eta_det);
    for (Var x : kEstimatedVars) {
      const double q_sq = qcrb(x, pr, p, grid), q_coh = qcrb(x, pr, coh, grid);
      const double mmse = analytic_mmse(x, pr, p, grid), prior = prior_variance(x, pr, grid);
      if (!(q_sq <= q_coh * (1 + kChainTol) && q_sq <= mmse * (1 + kChainTol) && mmse <= prior * (1 + kChainTol)))
        ++fails[0];
    }
    const double gap = attainability_gap(p);
    const double info_q = 4.0 * photon_flux_psd_broadband(p.lossless()), info_m = 1.0 / measurement_noise_psd(p);
    // pure lossless probes with perfect tracking sit exactly on gap = 1
    if (gap >= 1.0 - kChainTol) {
      for (double w : grid.nodes()) {
        const double sphi = pr.psd(Var::phase, w);
        for (Var x : kEstimatedVars) {
          const double sx = pr.psd(x, w);
          if (sx / (1.0 + sphi * info_q) > sx / (1.0 + sphi * info_m) * (1 + kChainTol)) ++fails[1];
        }
      }
    } else {
      ++fails[1];  // every valid probe should satisfy the attainability inequality
    }
  }

  for (int n = 0; n < 8; ++n) {
    SimConfig cfg;
    cfg.n_samples = static_cast<std::size_t>(g.integer(3000, 12000));
    const double sz = g.log_uniform(1e-9, 1e-5);
    const auto bank = FilterBank::for_records(pr, sz, cfg);
    const std::size_t nf = bank.fft_size();
    for (Var x : kEstimatedVars) {
      const auto h = bank.response(x);
      if (h[0].imag() != 0.0 || h[nf / 2].imag() != 0.0) ++fails[2];
      for (std::size_t k = 1; k < nf / 2; ++k)
        if (h[k] != std::conj(h[nf - k])) {
          ++fails[2];
          break;
        }
    }
    Smoother sm(bank);
    std::vector<double> y(cfg.n_samples);
    for (auto& v : y) v = g.normal();
    try {
      sm.all(y, cfg);  // throws on an imaginary residue above 1e-10 of the RMS
    } catch (const Error&) {
      ++fails[2];
    }
  }

  for (int n = 0; n < kPropertyDraws / 10; ++n) {
    const ProbeState base = draw_probe(g, 1.0);
    std::vector<double> alphas(6);
    for (auto& a : alphas) a = g.log_uniform(1e4, 1e9);
    std::sort(alphas.begin(), alphas.end());
    for (Var x : kEstimatedVars) {
      double last_m = std::numeric_limits<double>::infinity(), last_q = last_m;
      for (double a : alphas) {
        const ProbeState p = base.with_alpha_sq(a);
        const double m = analytic_mmse(x, pr, p, grid), q = qcrb(x, pr, p, grid);
        if (!(m < last_m && q < last_q)) ++fails[3];
        last_m = m;
        last_q = q;
      }
    }
  }

  for (int n = 0; n < kPropertyDraws * 5; ++n) {
    const ProbeState p = draw_probe(g, 1e6);
    const double dm = g.log_uniform(1e3, 1e8);
    const double ratio = SqueezingBandwidth::pure_ratio(p);
    const double stretch = g.uniform(0, 1) < 0.3 ? 1.0 : g.uniform(1.0, 3.0);
    const SqueezingBandwidth bw{dm, ratio > 0.0 ? ratio * stretch * dm : stretch * dm};
    const double w = g.uniform(0, 1) < 0.1 ? 0.0 : g.log_uniform(1.0, 1e10);
    const double prod =
        squeezing_spectrum(Quadrature::squeezed, w, p, bw) * squeezing_spectrum(Quadrature::antisqueezed, w, p, bw);
    if (prod < (1.0 - kUncertaintyTol) / 16.0) ++fails[4];
  }

  for (int i = 0; i < 5; ++i) {
    o.notes.push_back(fmt("%-26s %s (%d violations)", names[i], fails[i] ? "FAIL" : "ok", fails[i]));
    o.require(fails[i] == 0, std::string(names[i]) + " violated");
  }
  o.detail = o.pass ? "all five property suites hold" : o.detail;
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {1, "coherent-state attainability", coherent_attainability},
      {2, "Monte Carlo consistency", monte_carlo_consistency},
      {3, "quantum enhancement", quantum_enhancement},
      {4, "coherent closeness", coherent_closeness},
      {5, "xi and photon-flux anchors", xi_anchors},
      {6, "oracle equivalence", oracle_equivalence},
      {7, "OU statistics", ou_statistics},
      {8, "invariant suites", invariant_suites},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      selected.push_back(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]...\n", argv[0]);
      return 2;
    }
  }
  // sweep warnings go to stderr, keeping stdout to the verdict lines
  log::set_warning_handler([](const std::string& m) { std::fprintf(stderr, "warning: %s\n", m.c_str()); });

  int failed = 0;
  for (const auto& c : criteria()) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    for (const auto& n : o.notes) std::printf("         %s\n", n.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
