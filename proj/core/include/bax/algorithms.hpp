#pragma once

#include "bax/gp.hpp"
#include "bax/point.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace bax {

/// Queryable black-box function (true objective, a posterior sample, a posterior mean...).
using Objective = std::function<double(const Point&)>;

struct PathStep {
  Point z;
  double value = 0.0;
};

/// Every (input, value) query an algorithm issued, in order.
struct ExecutionPath {
  std::vector<PathStep> steps;

  std::size_t size() const { return steps.size(); }
  std::vector<Observation> as_observations() const;
};

struct TopKOutput {
  std::vector<std::size_t> indices;  // positions in the scanned list
  PointList elements;
  std::vector<double> values;
};

struct GraphPathOutput {
  std::vector<int> vertices;
  PointList edge_points;           // edge midpoints, in path order
  std::vector<double> edge_values;  // objective values at the midpoints (model space)
  std::vector<double> edge_costs;   // costs Dijkstra used (after the cost transform)
  double total_cost = 0.0;
};

struct LocalOptOutput {
  Point x_star;
  double f_star = 0.0;
};

using AlgorithmOutput = std::variant<TopKOutput, GraphPathOutput, LocalOptOutput>;

struct AlgorithmRun {
  ExecutionPath path;
  AlgorithmOutput output;
};

/// The (z, value) pairs the output pins down exactly: the top-k pairs, the path's edge
/// midpoints with their values, or the single optimum pair.
std::vector<Observation> extract_subsequence_values(const AlgorithmOutput& output);

// ---------------------------------------------------------------------------------------
// Graphs

struct Vertex {
  int id = 0;
  Eigen::Vector2d position;
};

struct Edge {
  int from = 0;
  int to = 0;
  Point midpoint;  // average of endpoint positions
};

/// Directed graph with planar vertex positions; undirected links are stored as two edges.
class Graph {
 public:
  Graph() = default;
  Graph(std::vector<Vertex> vertices, std::vector<Edge> edges);

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  bool has_vertex(int id) const;
  std::size_t index_of(int id) const;
  const Vertex& vertex(int id) const { return vertices_[index_of(id)]; }
  /// Indices into edges() leaving vertex `id`, in insertion order.
  const std::vector<std::size_t>& out_edges(int id) const { return out_[index_of(id)]; }
  /// Distinct edge midpoints in first-seen edge order.
  PointList unique_midpoints() const;
  /// Polyline through the vertex positions of `vertices`.
  std::vector<Eigen::Vector2d> polyline(const std::vector<int>& vertices) const;
  /// Area of the bounding box of all vertex positions.
  double bounding_box_area() const;

 private:
  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::unordered_map<int, std::size_t> id_to_index_;
  std::vector<std::vector<std::size_t>> out_;
};

// ---------------------------------------------------------------------------------------
// Algorithms

/// Scans `elements` in order and returns the k highest-valued, descending; ties keep the
/// earlier element first.
AlgorithmRun run_topk(const PointList& elements, std::size_t k, const Objective& f);

using CostTransform = std::function<double(double)>;

/// Dijkstra from `source` to `dest`. Queries `f` at edge midpoints (memoized per midpoint)
/// and uses `transform(f(midpoint))` as the edge cost. The execution path records the
/// untransformed values. Throws ContractError on a negative cost and NoPathError if `dest`
/// is unreachable.
AlgorithmRun run_dijkstra(const Graph& graph, int source, int dest, const Objective& f,
                          const CostTransform& transform = {});

struct ESConfig {
  std::size_t population = 15;
  std::size_t generations = 14;
  double proposal_std = 0.1;
  double elite_frac = 0.33;
  bool minimize = true;

  std::size_t survivors() const;
  std::size_t total_queries() const { return 1 + generations * population; }
  void validate() const;
};

/// Mutation-based evolution strategy. The whole population starts at one uniform draw from
/// `domain`; each generation perturbs survivors (cycled to fill the population) with
/// N(0, proposal_std^2) noise clipped to the box, queries every mutant and keeps the elite
/// fraction. Returns the best queried point over the run.
AlgorithmRun run_evolution_strategy(const ESConfig& config, const Box& domain, const Objective& f,
                                    std::uint64_t seed);

/// Property-computing algorithm with a fixed configuration, so its output is a
/// deterministic function of the objective.
class Algorithm {
 public:
  virtual ~Algorithm() = default;
  virtual AlgorithmRun run(const Objective& f) const = 0;
  virtual std::string name() const = 0;
  /// Finite set containing every point the algorithm can query, when one exists.
  virtual std::optional<PointList> finite_support() const { return std::nullopt; }
};

class TopKAlgorithm final : public Algorithm {
 public:
  TopKAlgorithm(PointList elements, std::size_t k);
  AlgorithmRun run(const Objective& f) const override { return run_topk(elements_, k_, f); }
  std::string name() const override { return "topk"; }
  std::optional<PointList> finite_support() const override { return elements_; }
  const PointList& elements() const { return elements_; }
  std::size_t k() const { return k_; }

 private:
  PointList elements_;
  std::size_t k_;
};

class DijkstraAlgorithm final : public Algorithm {
 public:
  DijkstraAlgorithm(std::shared_ptr<const Graph> graph, int source, int dest,
                    CostTransform transform = {});
  AlgorithmRun run(const Objective& f) const override {
    return run_dijkstra(*graph_, source_, dest_, f, transform_);
  }
  std::string name() const override { return "dijkstra"; }
  std::optional<PointList> finite_support() const override { return graph_->unique_midpoints(); }
  const Graph& graph() const { return *graph_; }
  int source() const { return source_; }
  int dest() const { return dest_; }

 private:
  std::shared_ptr<const Graph> graph_;
  int source_;
  int dest_;
  CostTransform transform_;
};

class EvolutionStrategyAlgorithm final : public Algorithm {
 public:
  EvolutionStrategyAlgorithm(ESConfig config, Box domain, std::uint64_t seed);
  AlgorithmRun run(const Objective& f) const override {
    return run_evolution_strategy(config_, domain_, f, seed_);
  }
  std::string name() const override { return "evolution_strategy"; }
  const ESConfig& config() const { return config_; }
  const Box& domain() const { return domain_; }
  std::uint64_t seed() const { return seed_; }

 private:
  ESConfig config_;
  Box domain_;
  std::uint64_t seed_;
};

}  // namespace bax
