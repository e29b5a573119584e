// evasion run --config PATH [--algorithm pc|gp|both] [--seed N] [--episodes N]
//             [--output-dir PATH] [--obs-grid N] [--pde-grid N]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure
// (partial outputs are written first), 1 anything else.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "evasion/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct RunArgs {
  std::string config;
  std::string algorithm = "gp";
  std::optional<std::uint64_t> seed;
  std::optional<long long> episodes;
  std::string output_dir = "out";
  std::optional<int> obs_grid;
  std::optional<int> pde_grid;
  bool quiet = false;
};

void print_summary(const evasion::ExperimentResult& r) {
  std::cout << "Q* = " << r.optimal << '\n';
  const auto line = [&](const char* name, const evasion::EpisodeLog& log,
                        const std::optional<std::string>& failure) {
    std::cout << name << ": " << log.size() << '/' << log.planned_episodes << " episodes";
    if (log.size() > 0) {
      const evasion::MetricSeries m = evasion::compute_metrics(log, r.optimal);
      std::cout << ", R_T = " << m.excess_risk.back() << ", S_T = " << m.capture_rate.back();
    }
    if (failure) std::cout << ", stopped: " << *failure;
    std::cout << '\n';
  };
  if (r.gp) line("gp", r.gp->log, r.gp->failure);
  if (r.pc) line("pc", r.pc->log, r.pc->failure);
  std::cout << r.files.size() << " files written\n";
}

int run(const RunArgs& args) {
  evasion::Scenario s;
  try {
    s = evasion::load_scenario(args.config);
    if (args.seed) s.seed = *args.seed;
    if (args.episodes) s.episodes = *args.episodes;
    if (args.obs_grid) s.obs_cells = *args.obs_grid;
    if (args.pde_grid) s.pde_nodes = *args.pde_grid;
    evasion::validate(s);
  } catch (const evasion::ConfigError& e) {
    std::cerr << args.config << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const evasion::ContractViolation& e) {
    std::cerr << "invalid override: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto algorithm = evasion::parse_algorithm(args.algorithm);
  if (!algorithm) {
    std::cerr << "unknown algorithm '" << args.algorithm << "'\n";
    return kExitConfig;
  }

  try {
    const evasion::ExperimentResult r = evasion::run_experiment(
        s, *algorithm, args.output_dir, args.quiet ? nullptr : &std::cerr);
    print_summary(r);
    if (r.failed()) {
      std::cerr << "numerical failure; partial results written to " << args.output_dir << '\n';
      return kExitNumerical;
    }
  } catch (const evasion::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning to evade observers: episodic path planning experiments"};
  app.require_subcommand(1);
  RunArgs args;
  CLI::App* cmd = app.add_subcommand("run", "Run Alg-PC and/or Alg-GP on a scenario");
  cmd->add_option("--config", args.config, "Scenario file")->required();
  cmd->add_option("--algorithm", args.algorithm, "pc, gp or both")
      ->check(CLI::IsMember({"pc", "gp", "both"}));
  cmd->add_option("--seed", args.seed, "Override the scenario seed");
  cmd->add_option("--episodes", args.episodes, "Override the episode count T");
  cmd->add_option("--output-dir", args.output_dir, "Directory for CSV and SVG outputs");
  cmd->add_option("--obs-grid", args.obs_grid, "Observation cells per side");
  cmd->add_option("--pde-grid", args.pde_grid, "PDE nodes per side");
  cmd->add_flag("--quiet", args.quiet, "No progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  return run(args);
}
