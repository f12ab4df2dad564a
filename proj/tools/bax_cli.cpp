#include "bax/errors.hpp"
#include "bax/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

namespace {

// Exit codes: 0 ok, 1 a run failed or results could not be written, 2 bad usage or config.
constexpr int kRunFailed = 1;
constexpr int kBadInput = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian algorithm execution experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::vector<std::string> plots;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "Run an experiment config and write its results");
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (default: $BAX_OUT_DIR or ./results)");
  run->add_option("--seed", seed, "Override base_seed");
  run->add_option("--trials", trials, "Override the number of trials")->check(CLI::PositiveNumber);
  run->add_option("--plot", plots, "Write <out>/<METRIC>.svg for this metric (repeatable)");
  run->add_flag("-q,--quiet", quiet, "No progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kBadInput;
  }

  if (out_dir.empty()) {
    const char* env = std::getenv("BAX_OUT_DIR");
    out_dir = env && *env ? env : "results";
  }

  bax::ExperimentConfig config;
  try {
    config = bax::load_config(config_path);
    if (seed) config.base_seed = *seed;
    if (trials) config.trials = *trials;
    config.validate();
  } catch (const std::exception& e) {
    std::cerr << "bax: invalid config: " << e.what() << '\n';
    return kBadInput;
  }

  bax::ResultsTable table;
  try {
    bax::ProgressFn progress;
    if (!quiet) progress = [](const std::string& msg) { std::cerr << msg << '\n'; };
    table = bax::execute_experiment(config, progress);
  } catch (const std::exception& e) {
    std::cerr << "bax: experiment failed: " << e.what() << '\n';
    return kRunFailed;
  }

  try {
    for (const auto& path : bax::write_results(table, out_dir)) {
      if (!quiet) std::cerr << "wrote " << path << '\n';
    }
    for (const auto& metric : plots) {
      const auto path = (std::filesystem::path(out_dir) / (metric + ".svg")).string();
      bax::emit_plot(table, metric, path);
      if (!quiet) std::cerr << "wrote " << path << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "bax: " << e.what() << '\n';
    return kRunFailed;
  }

  if (!table.all_valid()) {
    for (const auto& r : table.runs) {
      if (!r.valid) std::cerr << "bax: " << r.method << " trial " << r.trial << " failed: " << r.error << '\n';
    }
    return kRunFailed;
  }
  return 0;
}
