// Command-line front end: solve | verify | sweep | converge | simulate.

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "relperf/relperf.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::string> seed;
  std::optional<std::string> preset;
  std::string format = "json";
};

relperf::RunConfig load(const CommonOptions& opt) {
  relperf::RunConfig cfg = relperf::load_run_config(opt.config_path);
  if (opt.seed) {
    cfg.sim.seed = relperf::detail::parse_seed(relperf::json(*opt.seed));
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& opt, bool config_required) {
  auto* config = cmd->add_option("--config", opt.config_path,
                                 "run configuration (JSON)");
  if (config_required) config->required();
  cmd->add_option("--out", opt.out_dir, "output directory");
  cmd->add_option("--seed", opt.seed, "seed override (decimal string)");
  cmd->add_option("--format", opt.format, "report format")
      ->check(CLI::IsMember({"json", "csv"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constant equilibria of competitive CARA/CRRA portfolio games"};
  app.require_subcommand(1);

  CommonOptions solve_opt, verify_opt, sweep_opt, converge_opt, simulate_opt;

  CLI::App* solve = app.add_subcommand("solve", "compute the constant equilibrium");
  add_common(solve, solve_opt, true);

  CLI::App* verify = app.add_subcommand(
      "verify", "best-response and consistency verification");
  add_common(verify, verify_opt, true);

  CLI::App* sweep = app.add_subcommand("sweep", "parameter sweep to CSV");
  add_common(sweep, sweep_opt, false);
  sweep->add_option("--preset", sweep_opt.preset, "built-in grid")
      ->check(CLI::IsMember({"fig1", "fig2", "fig3"}));

  CLI::App* converge = app.add_subcommand(
      "converge", "n-agent to mean-field convergence study");
  add_common(converge, converge_opt, true);

  CLI::App* simulate = app.add_subcommand(
      "simulate", "terminal-wealth simulation and payoff estimates");
  add_common(simulate, simulate_opt, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return relperf::run_solve(load(solve_opt), solve_opt.out_dir);
    if (verify->parsed())
      return relperf::run_verify(load(verify_opt), verify_opt.out_dir);
    if (sweep->parsed()) {
      if (!sweep_opt.preset && sweep_opt.config_path.empty())
        throw relperf::ConfigError("sweep needs --preset or --config");
      relperf::RunConfig cfg;
      if (!sweep_opt.config_path.empty()) {
        cfg = load(sweep_opt);
        return relperf::run_sweep(cfg, sweep_opt.out_dir, sweep_opt.preset);
      }
      relperf::SweepResult result = relperf::run_sweep_preset(*sweep_opt.preset);
      std::filesystem::create_directories(sweep_opt.out_dir);
      relperf::write_file(std::filesystem::path(sweep_opt.out_dir) / "sweep.csv",
                          relperf::sweep_csv(result));
      return relperf::kExitOk;
    }
    if (converge->parsed())
      return relperf::run_converge(load(converge_opt), converge_opt.out_dir);
    if (simulate->parsed())
      return relperf::run_simulate(load(simulate_opt), simulate_opt.out_dir);
  } catch (const relperf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return relperf::kExitError;
  } catch (const relperf::DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return relperf::kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return relperf::kExitError;
  }
  return relperf::kExitError;
}
