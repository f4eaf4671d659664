#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "acceptance.hpp"
#include "plot.hpp"
#include "pdafpf/config.hpp"
#include "pdafpf/errors.hpp"
#include "pdafpf/harness.hpp"

namespace {

using pdafpf::ExitCode;

struct RunArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<long> particles;
  std::optional<double> dt;
  std::string out = "out";
  std::optional<std::string> assoc_mode;
  std::optional<std::string> gain;
  std::vector<std::string> oracles;
  int batch = 1;
  unsigned threads = 1;
};

pdafpf::ScenarioConfig resolve(const RunArgs& args) {
  pdafpf::ScenarioConfig cfg = pdafpf::resolve_scenario(args.scenario);
  if (args.seed) cfg.seed = *args.seed;
  if (args.particles) cfg.particles = *args.particles;
  if (args.dt) cfg.dt = *args.dt;
  if (args.assoc_mode) cfg.association = pdafpf::parse_association_mode(*args.assoc_mode);
  if (args.gain) cfg.gain = pdafpf::parse_gain_mode(*args.gain);
  for (const auto& o : args.oracles) {
    if (o == "kalman") cfg.oracles.kalman = true;
    else if (o == "grid") cfg.oracles.grid = true;
    else if (o == "wonham") cfg.oracles.wonham = true;
    else if (o == "bayes") cfg.oracles.bayes = true;
    else throw pdafpf::ConfigError("unknown oracle '" + o + "' (expected kalman|grid|wonham|bayes)");
  }
  cfg.threads = args.threads;
  cfg.validate();
  return cfg;
}

void summarize(const pdafpf::RunRecord& rec, std::ostream& out) {
  out << "seed " << rec.config.seed << ": " << rec.rows.size() << " rows";
  if (rec.config.two_target()) {
    const auto metric = pdafpf::coalescence_metric(rec);
    const auto& last = rec.rows.back();
    out << ", identity " << (metric.identity_correct ? "correct" : "swapped") << ", min track distance "
        << metric.min_distance << ", pi(T) = (" << last[rec.column("pi_1")] << ", " << last[rec.column("pi_2")]
        << ")";
  } else if (!rec.rows.empty()) {
    const double t0 = rec.config.horizon >= 1.0 ? 0.2 : 0.0;
    out << ", position RMSE[" << t0 << "," << rec.config.horizon
        << "] = " << pdafpf::compute_rmse(rec, t0, rec.config.horizon);
  }
  out << '\n';
}

int run_command(const RunArgs& args) {
  const pdafpf::ScenarioConfig cfg = resolve(args);
  const auto records = pdafpf::run_batch(cfg, args.batch);
  for (const auto& rec : records) {
    const std::filesystem::path dir =
        args.batch == 1 ? std::filesystem::path(args.out)
                        : std::filesystem::path(args.out) / ("seed_" + std::to_string(rec.config.seed));
    pdafpf::emit_outputs(rec, dir);
    summarize(rec, std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PDA-FPF / JPDA-FPF simulation and verification"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Simulate a scenario and write run.csv");
  run_cmd->add_option("--scenario", run.scenario, "Bundled scenario name or JSON config path")->required();
  run_cmd->add_option("--seed", run.seed, "Random seed (first seed in batch mode)");
  run_cmd->add_option("--particles", run.particles, "Particles per target");
  run_cmd->add_option("--dt", run.dt, "Time step");
  run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
  run_cmd->add_option("--assoc-mode", run.assoc_mode, "Association filter")
      ->check(CLI::IsMember({"sde", "bayes", "known"}));
  run_cmd->add_option("--gain", run.gain, "Gain solver")
      ->check(CLI::IsMember({"linear", "integral-1d", "constant-approx"}));
  run_cmd->add_option("--oracle", run.oracles, "Oracles to run alongside (kalman, grid, wonham, bayes)")
      ->check(CLI::IsMember({"kalman", "grid", "wonham", "bayes"}));
  run_cmd->add_option("--batch", run.batch, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  run_cmd->add_option("--threads", run.threads, "Worker threads for the particle update")
      ->check(CLI::PositiveNumber);

  std::string plot_in, plot_out;
  pdafpf::PlotOptions plot_options;
  auto* plot_cmd = app.add_subcommand("plot", "Render an SVG line plot from run.csv");
  plot_cmd->add_option("--in", plot_in, "Input CSV")->required();
  plot_cmd->add_option("--out", plot_out, "Output SVG")->required();
  plot_cmd->add_option("--columns", plot_options.columns, "Columns to plot")->delimiter(',');

  std::vector<int> criteria;
  pdafpf::acceptance::Options verify_options;
  auto* verify_cmd = app.add_subcommand("verify", "Run the acceptance suite");
  verify_cmd->add_option("--criterion", criteria, "Criteria to run (default all)");
  verify_cmd->add_option("--seeds", verify_options.seeds, "Seeds per statistical criterion")
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--base-seed", verify_options.base_seed, "First seed");
  verify_cmd->add_option("--threads", verify_options.threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string show_name;
  auto* show_cmd = app.add_subcommand("show-config", "Print the resolved JSON config of a scenario");
  show_cmd->add_option("--scenario", show_name, "Bundled scenario name or JSON config path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*run_cmd) return run_command(run);
    if (*plot_cmd) {
      pdafpf::plot_csv(plot_in, plot_out, plot_options);
      return 0;
    }
    if (*verify_cmd) {
      return pdafpf::acceptance::run_suite(criteria, verify_options, std::cout)
                 ? 0
                 : static_cast<int>(ExitCode::kFailure);
    }
    if (*show_cmd) {
      std::cout << pdafpf::config_to_json(pdafpf::resolve_scenario(show_name));
      return 0;
    }
  } catch (const pdafpf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kConfig);
  } catch (const pdafpf::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kNumerical);
  } catch (const pdafpf::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kIo);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kFailure);
  }
  return 0;
}
