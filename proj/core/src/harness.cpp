#include "bax/harness.hpp"

#include "bax/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace bax {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kFullAlgorithm = "FullAlgorithm";

std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

std::string type_name(const json& j) { return j.type_name(); }

// Strict view of one JSON object: typed getters record the keys they touch and finish()
// rejects the rest.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ParseError(path_.empty() ? "<root>" : path_, "expected an object, got " + type_name(j_));
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  ObjectReader child(const std::string& key) {
    static const json empty = json::object();
    if (!has(key)) return ObjectReader(empty, join_path(path_, key));
    return ObjectReader(raw(key), join_path(path_, key));
  }

  double number(const std::string& key, double fallback) {
    return has(key) ? as_number(raw(key), join_path(path_, key)) : fallback;
  }
  std::size_t count(const std::string& key, std::size_t fallback) {
    return has(key) ? as_count(raw(key), join_path(path_, key)) : fallback;
  }
  std::size_t required_count(const std::string& key) {
    require(key);
    return as_count(raw(key), join_path(path_, key));
  }
  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw mismatch(key, "an integer", v);
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
      throw ParseError(join_path(path_, key), "integer out of range");
    }
    return static_cast<int>(x);
  }
  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) throw mismatch(key, "a non-negative integer", v);
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) throw mismatch(key, "a boolean", v);
    return v.get<bool>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) throw mismatch(key, "a string", v);
    return v.get<std::string>();
  }
  std::string required_string(const std::string& key) {
    require(key);
    return string(key, "");
  }
  /// A number (broadcast to `size`) or an array of numbers.
  std::optional<Vector> vector(const std::string& key, Eigen::Index size) {
    if (!has(key)) return std::nullopt;
    const json& v = raw(key);
    const std::string p = join_path(path_, key);
    if (v.is_number()) return Vector::Constant(size, as_number(v, p));
    if (!v.is_array()) throw mismatch(key, "a number or an array of numbers", v);
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      out[static_cast<Eigen::Index>(i)] = as_number(v[i], p + "[" + std::to_string(i) + "]");
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ParseError(join_path(path_, key), "unknown key");
    }
  }

  const std::string& path() const { return path_; }

 private:
  void require(const std::string& key) const {
    if (!has(key)) throw ParseError(join_path(path_, key), "missing required field");
  }
  ParseError mismatch(const std::string& key, const std::string& want, const json& got) const {
    return ParseError(join_path(path_, key), "expected " + want + ", got " + type_name(got));
  }
  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ParseError(path, "expected a number, got " + type_name(v));
    return v.get<double>();
  }
  static std::size_t as_count(const json& v, const std::string& path) {
    if (!v.is_number_unsigned()) {
      throw ParseError(path, "expected a non-negative integer, got " + type_name(v));
    }
    return v.get<std::size_t>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

ProblemKind parse_problem_kind(const std::string& name, const std::string& path) {
  if (name == "topk") return ProblemKind::TopK;
  if (name == "graph") return ProblemKind::Graph;
  if (name == "local_opt") return ProblemKind::LocalOpt;
  throw ParseError(path, "unknown problem type '" + name + "' (valid: topk, graph, local_opt)");
}

std::string kernel_name(KernelKind k) { return k == KernelKind::Matern52 ? "matern52" : "se"; }

KernelKind parse_kernel(const std::string& name, const std::string& path) {
  if (name == "se") return KernelKind::SquaredExponential;
  if (name == "matern52") return KernelKind::Matern52;
  throw ParseError(path, "unknown kernel '" + name + "' (valid: se, matern52)");
}

Box graph_bounding_box(const Graph& g) {
  Box box{Vector::Constant(2, std::numeric_limits<double>::infinity()),
          Vector::Constant(2, -std::numeric_limits<double>::infinity())};
  for (const auto& v : g.vertices()) {
    box.lower = box.lower.cwiseMin(v.position);
    box.upper = box.upper.cwiseMax(v.position);
  }
  return box;
}

Box parse_domain(ObjectReader& r, const Box& fallback) {
  if (!r.has("domain")) return fallback;
  ObjectReader d = r.child("domain");
  const auto lower = d.vector("lower", fallback.dimension());
  const auto upper = d.vector("upper", fallback.dimension());
  d.finish();
  if (!lower || !upper) throw ParseError(d.path(), "needs both lower and upper");
  Box box{*lower, *upper};
  if (box.lower.size() != box.upper.size()) throw ParseError(d.path(), "lower/upper size mismatch");
  try {
    box.validate();
  } catch (const InputError& e) {
    throw ParseError(d.path(), e.what());
  }
  return box;
}

ProblemSpec parse_problem(ObjectReader r, const fs::path& base_dir) {
  ProblemSpec p;
  p.kind = parse_problem_kind(r.required_string("type"), join_path(r.path(), "type"));
  switch (p.kind) {
    case ProblemKind::TopK: {
      p.objective = r.string("objective", "skewed_sin");
      p.dimension = r.integer("dimension", 2);
      p.num_points = r.count("num_points", 150);
      p.k = r.count("k", 10);
      p.set_seed = r.seed("set_seed", 0);
      break;
    }
    case ProblemKind::Graph: {
      p.objective = r.string("objective", "rosenbrock_scaled");
      p.edge_file = r.string("edge_file", "");
      if (!p.edge_file.empty() && fs::path(p.edge_file).is_relative()) {
        p.edge_file = (base_dir / p.edge_file).lexically_normal().string();
      }
      p.nx = r.integer("nx", 10);
      p.ny = r.integer("ny", 10);
      if (p.edge_file.empty()) {
        p.source = r.integer("source", p.nx * (p.ny - 1));
        p.dest = r.integer("dest", p.nx * p.ny - 1);
      } else {
        if (!r.has("source") || !r.has("dest")) {
          throw ParseError(r.path(), "source and dest are required with edge_file");
        }
        p.source = r.integer("source", 0);
        p.dest = r.integer("dest", 0);
      }
      p.cost_offset = r.number("cost_offset", 0.1);
      break;
    }
    case ProblemKind::LocalOpt: {
      p.objective = r.string("objective", "branin");
      break;
    }
  }

  BenchmarkFn fn;
  try {
    fn = make_benchmark(p.objective, p.dimension);
  } catch (const InputError& e) {
    throw ParseError(join_path(r.path(), "objective"), e.what());
  }
  p.dimension = fn.dimension();
  Box fallback = fn.domain;
  if (p.kind == ProblemKind::Graph) {
    Vector lo(2), hi(2);
    lo << -2.0, -1.0;
    hi << 2.0, 4.0;
    fallback = Box{lo, hi};
    if (!p.edge_file.empty()) fallback = graph_bounding_box(load_graph(p.edge_file));
  }
  p.domain = parse_domain(r, fallback);

  if (p.kind == ProblemKind::LocalOpt) {
    p.es.population = r.count("population", 15);
    p.es.generations = r.count("generations", 14);
    p.es.proposal_std = r.number("proposal_std", 0.05 * p.domain.side_lengths().minCoeff());
    p.es.elite_frac = r.number("elite_frac", 0.33);
  }
  r.finish();
  return p;
}

std::size_t default_posterior_samples(ProblemKind kind) { return kind == ProblemKind::Graph ? 20 : 100; }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::TopK: return "topk";
    case ProblemKind::Graph: return "graph";
    case ProblemKind::LocalOpt: return "local_opt";
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("methods is empty");
  for (const auto& m : methods) {
    if (m != kFullAlgorithm) parse_acquisition(m);
  }
  if (trials < 1) throw ConfigError("trials must be >= 1");
  model.validate();
  problem.domain.validate();
  model.kernel.check_dimension(problem.dimension);
  if (problem.kind == ProblemKind::TopK && (problem.k < 1 || problem.k > problem.num_points)) {
    throw ConfigError("top-k needs 1 <= k <= num_points");
  }
  if (problem.kind == ProblemKind::Graph && problem.dimension != 2) {
    throw ConfigError("graph problems need a 2-d objective");
  }
  if (problem.kind == ProblemKind::LocalOpt) problem.es.validate();
  BaxConfig probe = loop;
  probe.candidates.kind = CandidateSource::Kind::UniformRandom;
  probe.candidates.count = std::max<std::size_t>(num_candidates, 1);
  for (const auto& m : methods) {
    if (m == kFullAlgorithm) continue;
    probe.acquisition = parse_acquisition(m);
    probe.validate();
  }
  if (candidates == CandidateMode::Uniform && num_candidates < 1) {
    throw ConfigError("num_candidates must be >= 1");
  }
  if (candidates == CandidateMode::Support && problem.kind == ProblemKind::LocalOpt) {
    throw ConfigError("local optimization has no finite support; use uniform candidates");
  }
}

ExperimentConfig parse_config_at(std::istream& in, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("<document>", e.what());
  }
  ObjectReader root(doc, "");
  ExperimentConfig c;
  c.name = root.string("name", "experiment");
  if (!root.has("problem")) throw ParseError("problem", "missing required field");
  c.problem = parse_problem(root.child("problem"), base_dir);

  if (!root.has("methods")) throw ParseError("methods", "missing required field");
  const json& methods = root.raw("methods");
  if (!methods.is_array()) throw ParseError("methods", "expected an array, got " + type_name(methods));
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const std::string path = "methods[" + std::to_string(i) + "]";
    if (!methods[i].is_string()) throw ParseError(path, "expected a string");
    const auto name = methods[i].get<std::string>();
    if (name != kFullAlgorithm) {
      try {
        parse_acquisition(name);
      } catch (const ConfigError& e) {
        throw ParseError(path, std::string(e.what()) + " or FullAlgorithm");
      }
    }
    c.methods.push_back(name);
  }

  {
    ObjectReader m = root.child("model");
    c.model.kernel.kind = parse_kernel(m.string("kernel", "se"), join_path(m.path(), "kernel"));
    c.model.kernel.lengthscale = m.vector("lengthscale", c.problem.dimension)
                                     .value_or(Vector(0.1 * c.problem.domain.side_lengths()));
    c.model.kernel.signal_variance = m.number("signal_variance", 1.0);
    c.model.noise_variance = m.number("noise_variance", 1e-2);
    c.model.prior_mean = m.number("prior_mean", 0.0);
    m.finish();
  }
  {
    if (!root.has("loop")) throw ParseError("loop", "missing required field");
    ObjectReader l = root.child("loop");
    c.loop.budget = l.required_count("budget");
    c.loop.num_posterior_samples =
        l.count("num_posterior_samples", default_posterior_samples(c.problem.kind));
    const std::string fallback = c.problem.kind == ProblemKind::LocalOpt ? "uniform" : "support";
    const std::string mode = l.string("candidates", fallback);
    if (mode == "support") {
      c.candidates = CandidateMode::Support;
    } else if (mode == "uniform") {
      c.candidates = CandidateMode::Uniform;
    } else {
      throw ParseError(join_path(l.path(), "candidates"),
                       "unknown candidate mode '" + mode + "' (valid: support, uniform)");
    }
    c.num_candidates = l.count("num_candidates", 1000);
    c.loop.abc.min_ball_size = l.count("min_ball_size", 30);
    c.loop.abc.entropy_mc_draws = l.count("entropy_mc_draws", 512);
    c.loop.n_init = l.count("n_init", 0);
    c.loop.record_acquisition_values = l.boolean("record_acquisition_values", false);
    l.finish();
  }
  c.trials = root.count("trials", 5);
  c.base_seed = root.seed("base_seed", 0);
  root.finish();

  try {
    c.validate();
  } catch (const Error& e) {
    throw ParseError("<config>", e.what());
  }
  return c;
}

ExperimentConfig parse_config(std::istream& in) { return parse_config_at(in, fs::current_path()); }

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  try {
    return parse_config_at(in, fs::absolute(path).parent_path());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.where(), e.what());
  }
}

std::string serialize_config(const ExperimentConfig& c) {
  json problem = {{"type", to_string(c.problem.kind)},
                  {"objective", c.problem.objective},
                  {"domain", {{"lower", to_json(c.problem.domain.lower)},
                              {"upper", to_json(c.problem.domain.upper)}}}};
  switch (c.problem.kind) {
    case ProblemKind::TopK:
      problem["dimension"] = c.problem.dimension;
      problem["num_points"] = c.problem.num_points;
      problem["k"] = c.problem.k;
      problem["set_seed"] = c.problem.set_seed;
      break;
    case ProblemKind::Graph:
      if (!c.problem.edge_file.empty()) problem["edge_file"] = c.problem.edge_file;
      problem["nx"] = c.problem.nx;
      problem["ny"] = c.problem.ny;
      problem["source"] = c.problem.source;
      problem["dest"] = c.problem.dest;
      problem["cost_offset"] = c.problem.cost_offset;
      break;
    case ProblemKind::LocalOpt:
      problem["population"] = c.problem.es.population;
      problem["generations"] = c.problem.es.generations;
      problem["proposal_std"] = c.problem.es.proposal_std;
      problem["elite_frac"] = c.problem.es.elite_frac;
      break;
  }
  json doc = {
      {"name", c.name},
      {"problem", problem},
      {"methods", c.methods},
      {"model",
       {{"kernel", kernel_name(c.model.kernel.kind)},
        {"lengthscale", to_json(c.model.kernel.lengthscale)},
        {"signal_variance", c.model.kernel.signal_variance},
        {"noise_variance", c.model.noise_variance},
        {"prior_mean", c.model.prior_mean}}},
      {"loop",
       {{"budget", c.loop.budget},
        {"num_posterior_samples", c.loop.num_posterior_samples},
        {"candidates", c.candidates == CandidateMode::Support ? "support" : "uniform"},
        {"num_candidates", c.num_candidates},
        {"min_ball_size", c.loop.abc.min_ball_size},
        {"entropy_mc_draws", c.loop.abc.entropy_mc_draws},
        {"n_init", c.loop.n_init},
        {"record_acquisition_values", c.loop.record_acquisition_values}}},
      {"trials", c.trials},
      {"base_seed", c.base_seed}};
  return doc.dump(2);
}

// ---------------------------------------------------------------------------------------
// Problems

ProblemInstance build_problem(const ExperimentConfig& config, std::uint64_t seed) {
  const ProblemSpec& spec = config.problem;
  auto fn = std::make_shared<BenchmarkFn>(make_benchmark(spec.objective, spec.dimension));
  fn->domain = spec.domain;
  ProblemInstance inst;
  inst.problem.name = to_string(spec.kind) + ":" + spec.objective;
  inst.problem.domain = spec.domain;

  switch (spec.kind) {
    case ProblemKind::TopK: {
      Rng rng(spec.set_seed);
      PointList xs(spec.num_points, Point(spec.dimension));
      for (auto& x : xs) {
        for (Eigen::Index d = 0; d < x.size(); ++d) {
          x[d] = std::uniform_real_distribution<double>(spec.domain.lower[d], spec.domain.upper[d])(rng);
        }
      }
      inst.problem.true_function = [fn](const Point& x) { return eval_benchmark(*fn, x); };
      inst.algorithm = std::make_shared<TopKAlgorithm>(xs, spec.k);
      inst.support = xs;
      break;
    }
    case ProblemKind::Graph: {
      auto graph = std::make_shared<const Graph>(
          spec.edge_file.empty() ? make_grid_graph(spec.nx, spec.ny, spec.domain) : load_graph(spec.edge_file));
      double scale = 0.0;
      for (const auto& m : graph->unique_midpoints()) scale = std::max(scale, eval_benchmark(*fn, m));
      if (!(scale > 0.0)) throw ConfigError("graph costs need a positive maximum for normalization");
      const PositivityTransform pt{scale, spec.cost_offset};
      inst.problem.true_function = [fn, pt](const Point& x) {
        return pt.inverse(pt.normalize(eval_benchmark(*fn, x)));
      };
      inst.algorithm = std::make_shared<DijkstraAlgorithm>(graph, spec.source, spec.dest,
                                                           [](double u) { return softplus(u); });
      inst.graph = graph;
      inst.support = graph->unique_midpoints();
      break;
    }
    case ProblemKind::LocalOpt: {
      inst.problem.true_function = [fn](const Point& x) { return eval_benchmark(*fn, x); };
      inst.algorithm = std::make_shared<EvolutionStrategyAlgorithm>(spec.es, spec.domain, seed);
      inst.optimum = fn->known_minimum();
      if (!inst.optimum) throw ConfigError("local optimization needs an objective with a known minimum");
      break;
    }
  }
  inst.truth = inst.algorithm->run(inst.problem.true_function);
  return inst;
}

std::vector<MetricValue> ProblemInstance::output_metrics(const AlgorithmOutput& output, int iteration) const {
  std::vector<MetricValue> out;
  auto both = [&](const std::string& base, double v) {
    out.push_back({base + "_medoid", v, iteration});
    out.push_back({base + "_mean", v, iteration});
  };
  if (const auto* topk = std::get_if<TopKOutput>(&output)) {
    both("jaccard", jaccard_distance(topk->indices, std::get<TopKOutput>(truth.output).indices));
  } else if (const auto* path = std::get_if<GraphPathOutput>(&output)) {
    both("area", path_area_error(*graph, *path, std::get<GraphPathOutput>(truth.output)));
  } else {
    const auto& lo = std::get<LocalOptOutput>(output);
    const double r = simple_regret(problem.true_function(lo.x_star), *optimum);
    both("regret", r);
    out.push_back({"regret_posterior_mean", r, iteration});
  }
  return out;
}

std::vector<MetricValue> ProblemInstance::metrics(const IterationState& state) const {
  const auto outputs = state.bundle->outputs();
  const int it = state.iteration;
  std::vector<double> per_sample;
  std::string base;
  for (const auto& o : outputs) {
    const auto m = output_metrics(o, it);
    base = m.front().name.substr(0, m.front().name.rfind('_'));
    per_sample.push_back(m.front().value);
  }
  const std::size_t medoid = medoid_index(outputs, OutputDistance::for_outputs(outputs));
  std::vector<MetricValue> out = {{base + "_medoid", per_sample[medoid], it},
                                  {base + "_mean", mean_of(per_sample), it}};
  if (const auto* es = dynamic_cast<const EvolutionStrategyAlgorithm*>(algorithm.get())) {
    const auto refined = refine_on_posterior_mean(*state.posterior, *es);
    out.push_back({"regret_posterior_mean", simple_regret(problem.true_function(refined.x_star), *optimum), it});
  }
  return out;
}

// ---------------------------------------------------------------------------------------
// Execution

bool ResultsTable::all_valid() const {
  return std::all_of(runs.begin(), runs.end(), [](const TrialRun& r) { return r.valid; });
}

std::vector<std::string> ResultsTable::metric_names() const {
  std::vector<std::string> names;
  for (const auto& r : rows) {
    if (r.metric != "failed" && std::find(names.begin(), names.end(), r.metric) == names.end()) {
      names.push_back(r.metric);
    }
  }
  return names;
}

std::vector<SummaryRow> ResultsTable::summarize() const {
  std::map<std::tuple<std::string, std::string, int>, std::vector<double>> groups;
  std::vector<std::tuple<std::string, std::string, int>> order;
  for (const auto& r : rows) {
    if (std::isnan(r.value)) continue;
    const auto key = std::make_tuple(r.method, r.metric, r.iteration);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(r.value);
  }
  std::map<std::string, std::size_t> method_rank, metric_rank;
  for (const auto& r : rows) {
    method_rank.try_emplace(r.method, method_rank.size());
    metric_rank.try_emplace(r.metric, metric_rank.size());
  }
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    return std::make_tuple(method_rank.at(std::get<0>(a)), metric_rank.at(std::get<1>(a)), std::get<2>(a)) <
           std::make_tuple(method_rank.at(std::get<0>(b)), metric_rank.at(std::get<1>(b)), std::get<2>(b));
  });
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    const auto& v = groups.at(key);
    SummaryRow s{std::get<0>(key), std::get<2>(key), std::get<1>(key), mean_of(v), 0.0, v.size()};
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    }
    out.push_back(s);
  }
  return out;
}

namespace {

TrialRun run_full_algorithm(const ExperimentConfig& config, const ProblemInstance& inst,
                            std::size_t trial, std::uint64_t seed, std::vector<ResultRow>& rows) {
  TrialRun run{kFullAlgorithm, trial, seed, true, "", std::nullopt, inst.truth.path.size()};
  const int q = static_cast<int>(inst.truth.path.size());
  if (config.problem.kind == ProblemKind::LocalOpt) {
    // Best true value found after each query.
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < q; ++i) {
      best = std::min(best, inst.truth.path.steps[static_cast<std::size_t>(i)].value);
      const double r = simple_regret(best, *inst.optimum);
      for (const char* name : {"regret_medoid", "regret_mean", "regret_posterior_mean"}) {
        rows.push_back({kFullAlgorithm, trial, i + 1, name, r});
      }
    }
    return run;
  }
  for (const auto& m : inst.output_metrics(inst.truth.output, q)) {
    rows.push_back({kFullAlgorithm, trial, q, m.name, m.value});
  }
  return run;
}

}  // namespace

ResultsTable execute_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
  config.validate();
  ResultsTable table;
  table.config = config;
  for (const auto& method : config.methods) {
    for (std::size_t trial = 0; trial < config.trials; ++trial) {
      const std::uint64_t seed = config.base_seed + trial;
      const auto start = std::chrono::steady_clock::now();
      TrialRun run{method, trial, seed, true, "", std::nullopt, 0};
      try {
        const ProblemInstance inst = build_problem(config, seed);
        if (method == kFullAlgorithm) {
          run = run_full_algorithm(config, inst, trial, seed, table.rows);
        } else {
          BaxConfig bc = config.loop;
          bc.acquisition = parse_acquisition(method);
          bc.seed = seed;
          if (config.candidates == CandidateMode::Support) {
            bc.candidates.kind = CandidateSource::Kind::FixedSet;
            bc.candidates.fixed = inst.support;
          } else {
            bc.candidates.kind = CandidateSource::Kind::UniformRandom;
            bc.candidates.count = config.num_candidates;
          }
          RunRecord rec = run_infobax(bc, config.model, inst.problem, *inst.algorithm,
                                      [&inst](const IterationState& s) { return inst.metrics(s); });
          for (const auto& it : rec.iterations) {
            for (const auto& m : it.metrics) table.rows.push_back({method, trial, it.t, m.name, m.value});
          }
          run.valid = rec.valid;
          run.error = rec.error;
          run.queries = rec.true_evaluations;
          if (!rec.valid) {
            table.rows.push_back({method, trial, static_cast<int>(rec.iterations.size()), "failed",
                                  std::numeric_limits<double>::quiet_NaN()});
          }
          run.record = std::move(rec);
        }
      } catch (const std::exception& e) {
        run.valid = false;
        run.error = e.what();
        table.rows.push_back({method, trial, 0, "failed", std::numeric_limits<double>::quiet_NaN()});
      }
      if (progress) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ostringstream msg;
        msg << method << " trial " << trial << " (seed " << seed << "): "
            << (run.valid ? "ok" : "FAILED: " + run.error) << ", " << std::fixed
            << std::setprecision(1) << secs << " s";
        progress(msg.str());
      }
      table.runs.push_back(std::move(run));
    }
  }
  return table;
}

// ---------------------------------------------------------------------------------------
// Persistence

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "method,trial,iteration,metric,value\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.trial << ',' << r.iteration << ',' << r.metric << ','
        << format_double(r.value) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "method,trial,iteration,metric,value") {
    throw ParseError("line 1", "expected header method,trial,iteration,metric,value");
  }
  std::vector<ResultRow> rows;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    const std::string where = "line " + std::to_string(lineno);
    if (f.size() != 5) throw ParseError(where, "expected 5 fields");
    ResultRow r;
    r.method = f[0];
    r.metric = f[3];
    auto parse = [&](const std::string& s, auto& v) {
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError(where, "bad number '" + s + "'");
    };
    parse(f[1], r.trial);
    parse(f[2], r.iteration);
    parse(f[4], r.value);
    rows.push_back(r);
  }
  return rows;
}

std::string run_record_json(const RunRecord& rec) {
  auto point = [](const Point& p) { return to_json(p); };
  json data = json::array();
  for (const auto& o : rec.initial_data) data.push_back({{"x", point(o.x)}, {"y", o.y}});
  json iters = json::array();
  for (const auto& it : rec.iterations) {
    json metrics = json::object();
    for (const auto& m : it.metrics) metrics[m.name] = m.value;
    json j = {{"t", it.t},
              {"x", point(it.x)},
              {"y", it.y},
              {"candidate_index", it.candidate_index},
              {"acquisition_max", it.acquisition_max},
              {"metrics", metrics}};
    if (!it.acquisition_values.empty()) j["acquisition_values"] = it.acquisition_values;
    iters.push_back(j);
  }
  const json doc = {
      {"problem", rec.problem},
      {"algorithm", rec.algorithm},
      {"acquisition", to_string(rec.config.acquisition)},
      {"seed", rec.config.seed},
      {"budget", rec.config.budget},
      {"num_posterior_samples", rec.config.num_posterior_samples},
      {"abc", {{"min_ball_size", rec.config.abc.min_ball_size},
               {"entropy_mc_draws", rec.config.abc.entropy_mc_draws}}},
      {"model",
       {{"kernel", kernel_name(rec.model.kernel.kind)},
        {"lengthscale", to_json(rec.model.kernel.lengthscale)},
        {"signal_variance", rec.model.kernel.signal_variance},
        {"noise_variance", rec.model.noise_variance},
        {"prior_mean", rec.model.prior_mean}}},
      {"initial_data", data},
      {"iterations", iters},
      {"true_evaluations", rec.true_evaluations},
      {"valid", rec.valid},
      {"error", rec.error}};
  return doc.dump(2);
}

std::vector<std::string> write_results(const ResultsTable& table, const std::string& out_dir) {
  std::vector<std::string> written;
  auto open = [&](const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw InputError("cannot write " + p.string());
    written.push_back(p.string());
    return out;
  };
  auto close = [](std::ofstream& out, const fs::path& p) {
    out.close();
    if (!out) throw InputError("write failed for " + p.string());
  };
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "runs", ec);
  if (ec) throw InputError("cannot create " + out_dir + ": " + ec.message());

  {
    const fs::path p = fs::path(out_dir) / "results.csv";
    auto out = open(p);
    write_results_csv(table.rows, out);
    close(out, p);
  }
  {
    const fs::path p = fs::path(out_dir) / "summary.csv";
    auto out = open(p);
    out << "method,iteration,metric,mean,stderr,n\n";
    for (const auto& s : table.summarize()) {
      out << s.method << ',' << s.iteration << ',' << s.metric << ',' << format_double(s.mean) << ','
          << format_double(s.stderr_) << ',' << s.count << '\n';
    }
    close(out, p);
  }
  {
    const fs::path p = fs::path(out_dir) / "config.json";
    auto out = open(p);
    out << serialize_config(table.config) << '\n';
    close(out, p);
  }
  for (const auto& run : table.runs) {
    const fs::path p = fs::path(out_dir) / "runs" / (run.method + "_trial" + std::to_string(run.trial) + ".json");
    auto out = open(p);
    if (run.record) {
      out << run_record_json(*run.record) << '\n';
    } else {
      out << json{{"method", run.method}, {"seed", run.seed}, {"queries", run.queries},
                  {"valid", run.valid}, {"error", run.error}}.dump(2)
          << '\n';
    }
    close(out, p);
  }
  return written;
}

// ---------------------------------------------------------------------------------------
// Plotting

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void emit_plot(const ResultsTable& table, const std::string& metric, std::ostream& out) {
  std::vector<std::string> methods;
  std::map<std::string, std::vector<SummaryRow>> series;
  for (const auto& s : table.summarize()) {
    if (s.metric != metric) continue;
    if (!series.count(s.method)) methods.push_back(s.method);
    series[s.method].push_back(s);
  }
  if (methods.empty()) throw InputError("no results for metric '" + metric + "'");

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& [m, rows] : series) {
    for (const auto& s : rows) {
      x0 = std::min(x0, double(s.iteration));
      x1 = std::max(x1, double(s.iteration));
      y0 = std::min(y0, s.mean - s.stderr_);
      y1 = std::max(y1, s.mean + s.stderr_);
    }
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double left = 70, top = 30, w = 520, h = 340, width = 760, height = 430;
  const double sx = w / (x1 - x0), sy = h / (y1 - y0);
  auto px = [&](double x) { return left + (x - x0) * sx; };
  auto py = [&](double y) { return top + h - (y - y0) * sy; };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

  out << std::setprecision(10);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" data-x-range=\"" << x0 << ',' << x1 << "\" data-y-range=\"" << y0 << ',' << y1 << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left + w / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(table.config.name + ": " + metric) << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w << "\" height=\"" << h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0, yv = y0 + (y1 - y0) * i / 5.0;
    out << "<line x1=\"" << px(xv) << "\" y1=\"" << top + h << "\" x2=\"" << px(xv) << "\" y2=\""
        << top + h + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px(xv) << "\" y=\"" << top + h + 18 << "\" text-anchor=\"middle\">"
        << std::setprecision(4) << xv << std::setprecision(10) << "</text>\n";
    out << "<line x1=\"" << left - 5 << "\" y1=\"" << py(yv) << "\" x2=\"" << left << "\" y2=\""
        << py(yv) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left - 8 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
        << std::setprecision(3) << yv << std::setprecision(10) << "</text>\n";
  }
  out << "<text x=\"" << left + w / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">iteration</text>\n";
  out << "<text transform=\"translate(16," << top + h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << xml_escape(metric) << "</text>\n";

  // Pixel coordinates in `points`; the plotted (iteration, value) pairs in `data-values`.
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const auto& rows = series[methods[mi]];
    const char* color = palette[mi % std::size(palette)];
    const bool band = std::any_of(rows.begin(), rows.end(), [](const SummaryRow& s) { return s.count > 1; });
    if (band) {
      out << "<polygon class=\"band\" data-method=\"" << xml_escape(methods[mi]) << "\" fill=\"" << color
          << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (const auto& s : rows) out << px(s.iteration) << ',' << py(s.mean + s.stderr_) << ' ';
      for (auto it = rows.rbegin(); it != rows.rend(); ++it) out << px(it->iteration) << ',' << py(it->mean - it->stderr_) << ' ';
      out << "\"/>\n";
    }
    out << "<polyline class=\"mean\" data-method=\"" << xml_escape(methods[mi]) << "\" data-values=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out << (i ? " " : "") << rows[i].iteration << ',' << std::setprecision(17) << rows[i].mean << std::setprecision(10);
    }
    out << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) out << (i ? " " : "") << px(rows[i].iteration) << ',' << py(rows[i].mean);
    out << "\"/>\n";
  }
  // Markers for single-point series, in pixel space so they stay round.
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const auto& rows = series[methods[mi]];
    if (rows.size() != 1) continue;
    out << "<circle cx=\"" << px(rows[0].iteration) << "\" cy=\"" << py(rows[0].mean) << "\" r=\"4\" fill=\""
        << palette[mi % std::size(palette)] << "\"/>\n";
  }
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const double ly = top + 10 + 20.0 * static_cast<double>(mi);
    out << "<g class=\"legend\"><line x1=\"" << left + w + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + w + 40
        << "\" y2=\"" << ly << "\" stroke=\"" << palette[mi % std::size(palette)] << "\" stroke-width=\"2\"/>"
        << "<text x=\"" << left + w + 46 << "\" y=\"" << ly + 4 << "\">" << xml_escape(methods[mi])
        << "</text></g>\n";
  }
  out << "</svg>\n";
}

void emit_plot(const ResultsTable& table, const std::string& metric, const std::string& path) {
  std::ostringstream buf;
  emit_plot(table, metric, buf);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << buf.str();
  if (!out) throw InputError("write failed for " + path);
}

}  // namespace bax
