#pragma once

#include "bax/loop.hpp"
#include "bax/problems.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bax {

enum class ProblemKind { TopK, Graph, LocalOpt };

std::string to_string(ProblemKind kind);

struct ProblemSpec {
  ProblemKind kind = ProblemKind::TopK;
  std::string objective;  // benchmark name
  Eigen::Index dimension = 2;
  Box domain;

  // top-k
  std::size_t num_points = 150;
  std::size_t k = 10;
  std::uint64_t set_seed = 0;

  // graph: an nx-by-ny grid over `domain`, or an edge-list file
  int nx = 10;
  int ny = 10;
  std::string edge_file;
  int source = 0;
  int dest = 0;
  double cost_offset = 0.1;

  // local optimization
  ESConfig es;
};

enum class CandidateMode { Support, Uniform };

struct ExperimentConfig {
  std::string name = "experiment";
  ProblemSpec problem;
  std::vector<std::string> methods;  // acquisition names or "FullAlgorithm"
  GPModel model;
  BaxConfig loop;  // candidates filled in per problem
  CandidateMode candidates = CandidateMode::Support;
  std::size_t num_candidates = 1000;
  std::size_t trials = 5;
  std::uint64_t base_seed = 0;

  void validate() const;
};

/// Strict JSON parsing: unknown keys, missing required fields and type mismatches raise
/// ParseError naming the key path. Every default is filled in.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
/// Fully resolved JSON document; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const ExperimentConfig& config);

/// A problem instance ready to run: the true function in modeling space, the algorithm,
/// its output on the noiseless truth, and the per-iteration metrics.
struct ProblemInstance {
  Problem problem;
  std::shared_ptr<const Algorithm> algorithm;
  AlgorithmRun truth;
  std::shared_ptr<const Graph> graph;  // graph problems
  std::optional<double> optimum;       // local optimization: true minimum value
  PointList support;                   // finite candidate set, when the algorithm has one

  /// Metrics named "<base>_medoid", "<base>_mean" (and "regret_posterior_mean" for local
  /// optimization), evaluated on the bundle in `state`.
  std::vector<MetricValue> metrics(const IterationState& state) const;
  /// Metrics of a single output against the truth (same names as `metrics`).
  std::vector<MetricValue> output_metrics(const AlgorithmOutput& output, int iteration) const;
};

/// `seed` drives the evolution strategy for local optimization problems.
ProblemInstance build_problem(const ExperimentConfig& config, std::uint64_t seed);

struct ResultRow {
  std::string method;
  std::size_t trial = 0;
  int iteration = 0;
  std::string metric;
  double value = 0.0;
};

struct TrialRun {
  std::string method;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool valid = true;
  std::string error;
  std::optional<RunRecord> record;  // absent for FullAlgorithm
  std::size_t queries = 0;
};

struct SummaryRow {
  std::string method;
  int iteration = 0;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
};

struct ResultsTable {
  ExperimentConfig config;
  std::vector<ResultRow> rows;
  std::vector<TrialRun> runs;

  bool all_valid() const;
  std::vector<std::string> metric_names() const;
  /// Mean and standard error across trials, per (method, iteration, metric). NaN values
  /// (failure rows) are skipped.
  std::vector<SummaryRow> summarize() const;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Runs every method for every trial (seed = base_seed + trial). Failed runs keep their
/// completed iterations and add a row with metric "failed" and a NaN value.
ResultsTable execute_experiment(const ExperimentConfig& config, const ProgressFn& progress = {});

/// Writes results.csv, summary.csv, config.json and runs/<method>_trial<k>.json under
/// `out_dir`. Returns the written paths. Throws InputError naming the path on I/O failure.
std::vector<std::string> write_results(const ResultsTable& table, const std::string& out_dir);
void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out);
std::vector<ResultRow> read_results_csv(std::istream& in);
std::string run_record_json(const RunRecord& record);

/// SVG with one mean polyline per method and a ±1 standard error band when a method has
/// more than one trial. Each polyline carries its (iteration, mean) pairs in `data-values`
/// and the axis ranges are on the root element. Throws InputError if no row carries `metric`.
void emit_plot(const ResultsTable& table, const std::string& metric, std::ostream& out);
void emit_plot(const ResultsTable& table, const std::string& metric, const std::string& path);

}  // namespace bax
