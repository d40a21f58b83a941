#pragma once

// Batch experiments: configuration files, amplitude sweeps, bound curves and
// diagnostic reports.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mirrorest/errors.hpp"
#include "mirrorest/est.hpp"
#include "mirrorest/model.hpp"
#include "mirrorest/probe.hpp"
#include "mirrorest/quadrature.hpp"
#include "mirrorest/sim.hpp"

namespace mirrorest {

enum class ProbeKind { coherent, squeezed };

inline std::string to_string(ProbeKind k) { return k == ProbeKind::coherent ? "coherent" : "squeezed"; }

inline ProbeKind parse_probe_kind(std::string_view s) {
  if (s == "coherent") return ProbeKind::coherent;
  if (s == "squeezed") return ProbeKind::squeezed;
  throw ParseError("unknown probe kind '" + std::string(s) + "'");
}

struct ExperimentConfig {
  MirrorParams mirror;
  ForceParams force;
  std::string transfer = "nominal";  // "nominal" or a CSV path
  ProbeState probe = ProbeState::squeezed_db(1.02e6, -3.62, 6.00, 0.0, 0.871);
  std::optional<double> sigma_phi_sq;  // unset: self-consistent Riccati value per point
  SqueezingBandwidth bandwidth = SqueezingBandwidth::from_average(10.0 * 1.76e5, 0.435);
  BroadbandThresholds broadband;
  SimConfig sim;
  std::vector<double> alpha_sq{1.02e6, 1.88e6, 2.87e6, 6.24e6};
  std::size_t bounds_points = 64;
  std::string output_dir = "out";
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const {
    mirror.validate();
    force.validate();
    sim.validate(force);
    bandwidth.validate();
    ProbeState p = probe;
    if (sigma_phi_sq) p.sigma_phi_sq = *sigma_phi_sq;
    p.validate();
    require(!alpha_sq.empty(), "alpha_sq list must not be empty");
    for (double a : alpha_sq) require(a > 0.0 && std::isfinite(a), "alpha_sq values must be positive");
    require(bounds_points >= 2, "bounds.points must be at least 2");
    if (transfer != "nominal" && !std::filesystem::exists(transfer))
      throw DomainError("transfer function file '" + transfer + "' does not exist");
  }

  TransferFunction transfer_function() const {
    return transfer == "nominal" ? TransferFunction::nominal(mirror) : TransferFunction::load_csv(transfer);
  }

  Priors priors() const { return {mirror, force, transfer_function()}; }

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ParseError("key '" + key + "': '" + v + "' is not a number");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ParseError("key '" + key + "': '" + v + "' is not a non-negative integer");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ParseError("key '" + key + "': '" + v + "' is out of range");
  }
}

}  // namespace detail

/// Reads a flat `section.key = value` file. Blank lines and `#` comments are
/// ignored; unknown keys are errors. Relative transfer-function paths resolve
/// against the directory of `origin`.
inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& origin = {}) {
  using detail::parse_double;
  using detail::parse_uint;
  ExperimentConfig c;
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) throw ParseError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }

  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto num = [&](const std::string& key, double& dst) {
    if (auto v = take(key)) dst = parse_double(key, *v);
  };

  num("mirror.mass", c.mirror.mass);
  num("mirror.omega", c.mirror.omega);
  num("mirror.gamma", c.mirror.gamma);
  num("mirror.k0", c.mirror.k0);
  if (auto v = take("mirror.wavelength")) c.mirror.k0 = 2.0 * std::numbers::pi / parse_double("mirror.wavelength", *v);
  num("mirror.theta", c.mirror.theta);
  num("mirror.detector_gain", c.mirror.detector_gain);
  num("mirror.force_per_volt", c.mirror.force_per_volt);
  num("force.lambda", c.force.lambda);
  num("force.kappa", c.force.kappa);

  if (auto v = take("transfer.source")) {
    c.transfer = *v;
    if (c.transfer != "nominal") {
      std::filesystem::path p(c.transfer);
      if (p.is_relative() && !origin.empty()) p = origin.parent_path() / p;
      c.transfer = std::filesystem::absolute(p).lexically_normal().string();
    }
  }

  num("probe.r_m", c.probe.r_m);
  num("probe.r_p", c.probe.r_p);
  if (auto v = take("probe.squeezing_db")) c.probe.r_m = -parse_double("probe.squeezing_db", *v) * std::log(10.0) / 20.0;
  if (auto v = take("probe.antisqueezing_db"))
    c.probe.r_p = parse_double("probe.antisqueezing_db", *v) * std::log(10.0) / 20.0;
  num("probe.eta_det", c.probe.eta_det);
  if (auto v = take("probe.sigma_phi_sq")) {
    if (*v == "auto")
      c.sigma_phi_sq.reset();
    else
      c.sigma_phi_sq = parse_double("probe.sigma_phi_sq", *v);
  }

  num("bandwidth.dw_minus", c.bandwidth.dw_minus);
  num("bandwidth.dw_plus", c.bandwidth.dw_plus);
  {
    auto avg = take("bandwidth.average");
    auto ratio = take("bandwidth.ratio");
    if (avg || ratio) {
      if (!avg || !ratio) throw ParseError("bandwidth.average and bandwidth.ratio must be given together");
      c.bandwidth = SqueezingBandwidth::from_average(parse_double("bandwidth.average", *avg),
                                                     parse_double("bandwidth.ratio", *ratio));
    }
  }
  num("broadband.min_bandwidth_ratio", c.broadband.min_bandwidth_ratio);
  num("broadband.max_flux_ratio", c.broadband.max_flux_ratio);

  num("sim.dt", c.sim.dt);
  if (auto v = take("sim.n_samples")) c.sim.n_samples = parse_uint("sim.n_samples", *v);
  if (auto v = take("sim.n_trials")) c.sim.n_trials = parse_uint("sim.n_trials", *v);
  if (auto v = take("sim.seed")) c.sim.seed = parse_uint("sim.seed", *v);
  if (auto v = take("sim.mode")) c.sim.mode = parse_mode(*v);
  if (auto v = take("sim.feedback_delay_samples"))
    c.sim.feedback_delay_samples = parse_uint("sim.feedback_delay_samples", *v);
  num("sim.edge_discard", c.sim.edge_discard);
  if (auto v = take("sim.warmup")) c.sim.warmup = *v == "auto" ? -1.0 : parse_double("sim.warmup", *v);
  if (auto v = take("sim.threads")) c.threads = static_cast<unsigned>(parse_uint("sim.threads", *v));

  if (auto v = take("sweep.alpha_sq")) {
    c.alpha_sq.clear();
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) c.alpha_sq.push_back(parse_double("sweep.alpha_sq", detail::trim(item)));
  }
  if (auto v = take("bounds.points")) c.bounds_points = parse_uint("bounds.points", *v);
  if (auto v = take("output.dir")) c.output_dir = *v;

  if (!kv.empty()) throw ParseError("unknown configuration key '" + kv.begin()->first + "'");
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open configuration file '" + path.string() + "'");
  return parse_config(in, path);
}

/// Canonical form: every key, full precision, so that parse(write(c)) == c.
inline void write_config(std::ostream& out, const ExperimentConfig& c) {
  using detail::format_double;
  out << "mirror.mass = " << format_double(c.mirror.mass) << '\n'
      << "mirror.omega = " << format_double(c.mirror.omega) << '\n'
      << "mirror.gamma = " << format_double(c.mirror.gamma) << '\n'
      << "mirror.k0 = " << format_double(c.mirror.k0) << '\n'
      << "mirror.theta = " << format_double(c.mirror.theta) << '\n'
      << "mirror.detector_gain = " << format_double(c.mirror.detector_gain) << '\n'
      << "mirror.force_per_volt = " << format_double(c.mirror.force_per_volt) << '\n'
      << "force.lambda = " << format_double(c.force.lambda) << '\n'
      << "force.kappa = " << format_double(c.force.kappa) << '\n'
      << "transfer.source = " << c.transfer << '\n'
      << "probe.r_m = " << format_double(c.probe.r_m) << '\n'
      << "probe.r_p = " << format_double(c.probe.r_p) << '\n'
      << "probe.eta_det = " << format_double(c.probe.eta_det) << '\n'
      << "probe.sigma_phi_sq = " << (c.sigma_phi_sq ? format_double(*c.sigma_phi_sq) : std::string("auto")) << '\n'
      << "bandwidth.dw_minus = " << format_double(c.bandwidth.dw_minus) << '\n'
      << "bandwidth.dw_plus = " << format_double(c.bandwidth.dw_plus) << '\n'
      << "broadband.min_bandwidth_ratio = " << format_double(c.broadband.min_bandwidth_ratio) << '\n'
      << "broadband.max_flux_ratio = " << format_double(c.broadband.max_flux_ratio) << '\n'
      << "sim.dt = " << format_double(c.sim.dt) << '\n'
      << "sim.n_samples = " << c.sim.n_samples << '\n'
      << "sim.n_trials = " << c.sim.n_trials << '\n'
      << "sim.seed = " << c.sim.seed << '\n'
      << "sim.mode = " << to_string(c.sim.mode) << '\n'
      << "sim.feedback_delay_samples = " << c.sim.feedback_delay_samples << '\n'
      << "sim.edge_discard = " << format_double(c.sim.edge_discard) << '\n'
      << "sim.warmup = " << (c.sim.warmup < 0.0 ? std::string("auto") : format_double(c.sim.warmup)) << '\n'
      << "sim.threads = " << c.threads << '\n'
      << "sweep.alpha_sq = ";
  for (std::size_t i = 0; i < c.alpha_sq.size(); ++i) out << (i ? ", " : "") << format_double(c.alpha_sq[i]);
  out << '\n'
      << "bounds.points = " << c.bounds_points << '\n'
      << "output.dir = " << c.output_dir << '\n';
}

inline std::string to_string(const ExperimentConfig& c) {
  std::ostringstream s;
  write_config(s, c);
  return s.str();
}

/// Runs body(state, i) for i in [0, n) on a pool of threads, each with its own
/// state from init(). The first exception stops the pool and is rethrown.
template <class Init, class Body>
void parallel_for(std::size_t n, unsigned threads, Init init, Body body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    try {
      auto state = init();
      for (std::size_t i; !stop && (i = next++) < n;) body(state, i);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      stop = true;
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

/// Probe for one sweep point. The squeezed kind keeps the configured
/// squeezing; the coherent kind zeroes it. Either way sigma_phi^2 is the
/// configured override or the self-consistent tracking error.
inline ProbeState sweep_probe(const ExperimentConfig& c, ProbeKind kind, double alpha_sq) {
  ProbeState p = c.probe.with_alpha_sq(alpha_sq);
  if (kind == ProbeKind::coherent) p.r_m = p.r_p = 0.0;
  if (c.sigma_phi_sq) return p.with_sigma_phi_sq(*c.sigma_phi_sq);
  return p.with_sigma_phi_sq(self_consistent_sigma_phi(p, c.force, c.mirror, c.sim));
}

struct PointResult {
  ProbeKind kind;
  double alpha_sq;
  ProbeState probe;
  std::array<MseEstimate, 3> empirical;  // q, p, f
  std::array<double, 3> mmse;
  std::array<double, 3> qcrb_coherent;
  std::array<double, 3> qcrb_squeezed;
  double sigma_phi_sq_empirical = 0.0;
  std::size_t diverged_trials = 0;
};

/// Simulates, smooths and scores n_trials records for one probe. Per-trial
/// results are stored by trial index, so the reduction does not depend on the
/// thread schedule.
inline PointResult run_point(const ExperimentConfig& c, const Priors& priors, const SpectralGrid& grid, ProbeKind kind,
                             double alpha_sq) {
  PointResult r{};
  r.kind = kind;
  r.alpha_sq = alpha_sq;
  r.probe = sweep_probe(c, kind, alpha_sq);
  const ProbeState coherent = ProbeState::coherent(alpha_sq, c.probe.eta_det);
  const ProbeState squeezed = c.probe.with_alpha_sq(alpha_sq);
  for (std::size_t i = 0; i < 3; ++i) {
    const Var x = kEstimatedVars[i];
    r.mmse[i] = analytic_mmse(x, priors, r.probe, grid);
    r.qcrb_coherent[i] = qcrb(x, priors, coherent, grid);
    r.qcrb_squeezed[i] = qcrb(x, priors, squeezed, grid);
  }

  const std::size_t n = c.sim.n_trials;
  const FilterBank bank = FilterBank::for_records(priors, measurement_noise_psd(r.probe), c.sim);
  std::vector<std::array<double, 3>> per_trial(n);
  std::vector<double> sigma(n);
  std::vector<char> diverged(n);
  struct Worker {
    TrialSimulator sim;
    Smoother smoother;
  };
  parallel_for(
      n, c.threads, [&] { return Worker{TrialSimulator(priors, r.probe, c.sim), Smoother(bank)}; },
      [&](Worker& w, std::size_t t) {
        const Trajectory tr = w.sim(t);
        const auto est = w.smoother.all(tr.y, c.sim);
        per_trial[t] = {trial_mse(est[0], tr.q, c.sim), trial_mse(est[1], tr.p, c.sim), trial_mse(est[2], tr.f, c.sim)};
        sigma[t] = tr.sigma_phi_sq;
        diverged[t] = tr.diverged;
      });

  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> v(n);
    for (std::size_t t = 0; t < n; ++t) v[t] = per_trial[t][i];
    r.empirical[i] = combine_trials(v);
  }
  for (std::size_t t = 0; t < n; ++t) {
    r.sigma_phi_sq_empirical += sigma[t] / static_cast<double>(n);
    r.diverged_trials += diverged[t] ? 1 : 0;
  }
  if (r.diverged_trials > 0)
    log::warn(std::to_string(r.diverged_trials) + " of " + std::to_string(n) + " " + to_string(kind) +
              " trials at alpha_sq = " + detail::format_double(alpha_sq) + " lost phase lock");
  return r;
}

inline constexpr const char* kSweepHeader = "var,probe,alpha_sq,mse_emp,mse_stderr,mmse,qcrb_coh,qcrb_sq";
inline constexpr const char* kBoundsHeader = "var,alpha_sq,mmse_coh,mmse_sq,qcrb_coh,qcrb_sq";

namespace detail {
inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}
}  // namespace detail

/// Coherent and squeezed probes at every configured amplitude. Writes one row
/// per (var, probe, alpha_sq) as soon as a point finishes; a failing point is
/// logged and skipped. Returns the number of rows written.
inline std::size_t cmd_sweep(const ExperimentConfig& c, std::ostream& csv, std::vector<PointResult>* results = nullptr) {
  c.validate();
  const Priors priors = c.priors();
  const SpectralGrid grid = SpectralGrid::for_system(priors);
  csv << kSweepHeader << '\n' << std::flush;
  std::size_t rows = 0;
  for (ProbeKind kind : {ProbeKind::coherent, ProbeKind::squeezed}) {
    for (double a : c.alpha_sq) {
      PointResult r;
      try {
        r = run_point(c, priors, grid, kind, a);
      } catch (const Error& e) {
        log::warn("sweep point " + to_string(kind) + " alpha_sq = " + detail::format_double(a) + " aborted: " + e.what());
        continue;
      }
      for (std::size_t i = 0; i < 3; ++i) {
        csv << symbol(kEstimatedVars[i]) << ',' << to_string(kind) << ',' << detail::csv_number(a) << ','
            << detail::csv_number(r.empirical[i].mse) << ',' << detail::csv_number(r.empirical[i].stderr_) << ','
            << detail::csv_number(r.mmse[i]) << ',' << detail::csv_number(r.qcrb_coherent[i]) << ','
            << detail::csv_number(r.qcrb_squeezed[i]) << '\n';
        ++rows;
      }
      csv << std::flush;
      if (results) results->push_back(std::move(r));
    }
  }
  return rows;
}

/// Amplitudes for the bound curves: bounds_points values spaced evenly in log
/// between the smallest and largest configured amplitude.
inline std::vector<double> bounds_grid(const ExperimentConfig& c) {
  const auto [lo, hi] = std::minmax_element(c.alpha_sq.begin(), c.alpha_sq.end());
  std::vector<double> a(c.bounds_points);
  const double l0 = std::log(*lo), l1 = std::log(*hi);
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] = std::exp(l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(a.size() - 1));
  a.front() = *lo;
  a.back() = *hi;
  return a;
}

/// Analytic MMSE (lossy probe) and QCRB (lossless probe) curves for both
/// probe kinds, no simulation. Returns the number of rows written.
inline std::size_t cmd_bounds(const ExperimentConfig& c, std::ostream& csv) {
  c.validate();
  const Priors priors = c.priors();
  const SpectralGrid grid = SpectralGrid::for_system(priors);
  csv << kBoundsHeader << '\n';
  std::size_t rows = 0;
  for (Var x : kEstimatedVars) {
    for (double a : bounds_grid(c)) {
      try {
        const ProbeState coh = sweep_probe(c, ProbeKind::coherent, a);
        const ProbeState sq = sweep_probe(c, ProbeKind::squeezed, a);
        const double v[4] = {analytic_mmse(x, priors, coh, grid), analytic_mmse(x, priors, sq, grid),
                             qcrb(x, priors, coh, grid), qcrb(x, priors, sq, grid)};
        csv << symbol(x) << ',' << detail::csv_number(a);
        for (double b : v) csv << ',' << detail::csv_number(b);
        csv << '\n';
        ++rows;
      } catch (const Error& e) {
        log::warn("bounds point " + std::string(symbol(x)) + " alpha_sq = " + detail::format_double(a) +
                  " failed: " + e.what());
      }
    }
  }
  return rows;
}

struct Diagnosis {
  double alpha_sq;
  ProbeState probe;                  // squeezed probe with its tracking error
  double riccati_sigma_phi_sq;
  double attainability_gap;
  BroadbandReport broadband;
  double squeezing_db;               // R-bar after detection loss
  double squeezing_db_lossless;      // R-bar of the ideal beam
  double linearization;              // sigma_phi^2 e^{2 r_p}
};

inline std::vector<Diagnosis> diagnose(const ExperimentConfig& c) {
  c.validate();
  std::vector<Diagnosis> out;
  for (double a : c.alpha_sq) {
    Diagnosis d{};
    d.alpha_sq = a;
    d.probe = sweep_probe(c, ProbeKind::squeezed, a);
    d.riccati_sigma_phi_sq = riccati_sigma_phi(d.probe, c.force, c.mirror, c.sim);
    d.attainability_gap = attainability_gap(d.probe);
    d.broadband = validate_broadband(c.bandwidth, c.mirror.omega, c.force.lambda, d.probe, c.broadband);
    d.squeezing_db = to_db(effective_squeezing_factor(d.probe));
    d.squeezing_db_lossless = to_db(effective_squeezing_factor(d.probe.lossless()));
    d.linearization = d.probe.sigma_phi_sq * std::exp(2.0 * d.probe.r_p);
    out.push_back(d);
  }
  return out;
}

inline void cmd_diagnose(const ExperimentConfig& c, std::ostream& out) {
  const auto rows = diagnose(c);
  char buf[256];
  std::snprintf(buf, sizeof buf, "probe: squeezing %.3f dB, anti-squeezing %.3f dB, detection efficiency %.3f\n",
                to_db(std::exp(-2.0 * c.probe.r_m)), to_db(std::exp(2.0 * c.probe.r_p)), c.probe.eta_det);
  out << buf;
  std::snprintf(buf, sizeof buf, "bandwidth: dw- = %.4g rad/s, dw+ = %.4g rad/s (pure-state ratio %.4g)\n",
                c.bandwidth.dw_minus, c.bandwidth.dw_plus, SqueezingBandwidth::pure_ratio(c.probe));
  out << buf;
  out << "sigma_phi^2: " << (c.sigma_phi_sq ? "configured" : "self-consistent Riccati steady state") << '\n';
  out << "QCRB columns bound the lossless beam; MMSE columns include detection loss\n\n";
  for (const auto& d : rows) {
    std::snprintf(buf, sizeof buf, "alpha_sq = %.4g /s\n", d.alpha_sq);
    out << buf;
    std::snprintf(buf, sizeof buf, "  sigma_phi^2 (used / Riccati)   %.5g / %.5g rad^2\n", d.probe.sigma_phi_sq,
                  d.riccati_sigma_phi_sq);
    out << buf;
    std::snprintf(buf, sizeof buf, "  R_sq effective                 %.3f dB (lossless %.3f dB)\n", d.squeezing_db,
                  d.squeezing_db_lossless);
    out << buf;
    std::snprintf(buf, sizeof buf, "  attainability gap              %.4f\n", d.attainability_gap);
    out << buf;
    std::snprintf(buf, sizeof buf, "  bandwidth ratio                %.3g (%s)\n", d.broadband.bandwidth_ratio,
                  to_string(d.broadband.bandwidth).c_str());
    out << buf;
    std::snprintf(buf, sizeof buf, "  xi I_sq / alpha_sq             %.3g (%s)\n", d.broadband.flux_ratio,
                  to_string(d.broadband.flux).c_str());
    out << buf;
    std::snprintf(buf, sizeof buf, "  broadband approximation        %s\n", to_string(d.broadband.overall()).c_str());
    out << buf;
    std::snprintf(buf, sizeof buf, "  linearization sigma^2 e^{2r_p}  %.4g (%s)\n", d.linearization,
                  d.linearization < 0.1 ? "ok" : "large");
    out << buf;
  }
}

struct SimulateSummary {
  PointResult point;
  std::size_t dumped = 0;
};

/// Runs the configured trials for one probe and amplitude. With `dump_dir`
/// set, each trajectory is written to <dump_dir>/trial_NNNNN.csv.
inline SimulateSummary cmd_simulate(const ExperimentConfig& c, ProbeKind kind, double alpha_sq,
                                    const std::optional<std::filesystem::path>& dump_dir) {
  c.validate();
  const Priors priors = c.priors();
  const SpectralGrid grid = SpectralGrid::for_system(priors);
  SimulateSummary s;
  s.point = run_point(c, priors, grid, kind, alpha_sq);
  if (dump_dir) {
    std::filesystem::create_directories(*dump_dir);
    std::mutex count_mutex;
    parallel_for(
        c.sim.n_trials, c.threads, [&] { return TrialSimulator(priors, s.point.probe, c.sim); },
        [&](TrialSimulator& sim, std::size_t t) {
          char name[32];
          std::snprintf(name, sizeof name, "trial_%05zu.csv", t);
          std::ofstream f(*dump_dir / name);
          if (!f) throw Error("cannot write trajectory file in '" + dump_dir->string() + "'");
          sim(t).write_csv(f);
          std::lock_guard lock(count_mutex);
          ++s.dumped;
        });
  }
  return s;
}

}  // namespace mirrorest
