// mirrorest command-line harness: sweep, bounds, diagnose, simulate.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "mirrorest/experiment.hpp"

namespace fs = std::filesystem;
using namespace mirrorest;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> trials;
  std::optional<unsigned> threads;
};

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) c.sim.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.trials) c.sim.n_trials = *o.trials;
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  return f;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "configuration file (flat key = value)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "override sim.seed");
  cmd->add_option("--out", o.out, "override output.dir");
  cmd->add_option("--trials", o.trials, "override sim.n_trials")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", o.threads, "worker threads, 0 = all cores");
}

int run_sweep(const CommonOptions& o) {
  const ExperimentConfig c = resolve(o);
  const fs::path dir(c.output_dir);
  {
    auto meta = open_output(dir / "sweep_config.conf");
    meta << "# configuration used for sweep.csv; mmse uses the detected (lossy) probe,\n"
            "# qcrb_coh and qcrb_sq bound the lossless beam\n";
    write_config(meta, c);
  }
  auto csv = open_output(dir / "sweep.csv");
  const std::size_t rows = cmd_sweep(c, csv);
  const std::size_t expected = 6 * c.alpha_sq.size();
  std::cout << "wrote " << rows << " of " << expected << " rows to " << (dir / "sweep.csv").string() << '\n';
  return rows == expected ? 0 : 1;
}

int run_bounds(const CommonOptions& o) {
  const ExperimentConfig c = resolve(o);
  const fs::path path = fs::path(c.output_dir) / "bounds.csv";
  auto csv = open_output(path);
  const std::size_t rows = cmd_bounds(c, csv);
  std::cout << "wrote " << rows << " rows to " << path.string() << '\n';
  return rows == 3 * c.bounds_points ? 0 : 1;
}

int run_diagnose(const CommonOptions& o) {
  cmd_diagnose(resolve(o), std::cout);
  return 0;
}

int run_simulate(const CommonOptions& o, const std::string& probe, std::optional<double> alpha, bool dump) {
  const ExperimentConfig c = resolve(o);
  const ProbeKind kind = parse_probe_kind(probe);
  const double a = alpha.value_or(c.alpha_sq.front());
  std::optional<fs::path> dir;
  if (dump) dir = fs::path(c.output_dir) / "trajectories";
  const SimulateSummary s = cmd_simulate(c, kind, a, dir);
  const PointResult& r = s.point;
  std::printf("%s probe, alpha_sq = %.4g, %zu trials, %s mode\n", to_string(kind).c_str(), a, c.sim.n_trials,
              to_string(c.sim.mode).c_str());
  std::printf("sigma_phi^2: model %.5g, simulated %.5g; %zu trials lost lock\n", r.probe.sigma_phi_sq,
              r.sigma_phi_sq_empirical, r.diverged_trials);
  std::printf("%-4s %-14s %-12s %-14s %-8s\n", "var", "mse_emp", "stderr", "mmse", "ratio");
  for (std::size_t i = 0; i < 3; ++i)
    std::printf("%-4s %-14.6e %-12.3e %-14.6e %-8.4f\n", std::string(symbol(kEstimatedVars[i])).c_str(),
                r.empirical[i].mse, r.empirical[i].stderr_, r.mmse[i], r.empirical[i].mse / r.mmse[i]);
  if (dir) std::printf("dumped %zu trajectories to %s\n", s.dumped, dir->string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum-limited mirror motion estimation: simulation, smoothing and bounds"};
  app.require_subcommand(1);

  CommonOptions sweep_o, bounds_o, diag_o, sim_o;
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep over amplitudes and probes, writes sweep.csv");
  add_common(sweep, sweep_o);
  auto* bounds = app.add_subcommand("bounds", "analytic MMSE and QCRB curves, writes bounds.csv");
  add_common(bounds, bounds_o);
  auto* diag = app.add_subcommand("diagnose", "probe and tracking diagnostics");
  add_common(diag, diag_o);
  auto* simulate = app.add_subcommand("simulate", "simulate one probe and amplitude");
  add_common(simulate, sim_o);
  std::string probe = "squeezed";
  std::optional<double> alpha;
  bool dump = false;
  simulate->add_option("--probe", probe, "coherent or squeezed")->check(CLI::IsMember({"coherent", "squeezed"}));
  simulate->add_option("--alpha-sq", alpha, "probe flux (default: first sweep value)")->check(CLI::PositiveNumber);
  simulate->add_flag("--dump-trajectories", dump, "write t,f,q,p,phi,phi_fb,y per trial under <out>/trajectories");
  auto* defaults = app.add_subcommand("defaults", "print the default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;  // --help exits 0
  }

  try {
    if (*sweep) return run_sweep(sweep_o);
    if (*bounds) return run_bounds(bounds_o);
    if (*diag) return run_diagnose(diag_o);
    if (*simulate) return run_simulate(sim_o, probe, alpha, dump);
    if (*defaults) {
      write_config(std::cout, ExperimentConfig{});
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
