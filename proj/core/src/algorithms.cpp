#include "bax/algorithms.hpp"

#include "bax/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>

namespace bax {

std::vector<Observation> ExecutionPath::as_observations() const {
  std::vector<Observation> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back({s.z, s.value});
  return out;
}

std::vector<Observation> extract_subsequence_values(const AlgorithmOutput& output) {
  std::vector<Observation> out;
  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, TopKOutput>) {
          for (std::size_t i = 0; i < o.elements.size(); ++i) out.push_back({o.elements[i], o.values[i]});
        } else if constexpr (std::is_same_v<T, GraphPathOutput>) {
          for (std::size_t i = 0; i < o.edge_points.size(); ++i) {
            out.push_back({o.edge_points[i], o.edge_values[i]});
          }
        } else {
          out.push_back({o.x_star, o.f_star});
        }
      },
      output);
  return out;
}

// ---------------------------------------------------------------------------------------
// Graph

Graph::Graph(std::vector<Vertex> vertices, std::vector<Edge> edges)
    : vertices_(std::move(vertices)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (!id_to_index_.emplace(vertices_[i].id, i).second) {
      throw InputError("duplicate vertex id " + std::to_string(vertices_[i].id));
    }
  }
  out_.resize(vertices_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    auto& edge = edges_[e];
    if (!has_vertex(edge.from) || !has_vertex(edge.to)) {
      throw InputError("edge " + std::to_string(edge.from) + "->" + std::to_string(edge.to) +
                       " references a missing vertex");
    }
    edge.midpoint = 0.5 * (vertex(edge.from).position + vertex(edge.to).position);
    out_[index_of(edge.from)].push_back(e);
  }
}

bool Graph::has_vertex(int id) const { return id_to_index_.count(id) != 0; }

std::size_t Graph::index_of(int id) const {
  auto it = id_to_index_.find(id);
  if (it == id_to_index_.end()) throw InputError("unknown vertex id " + std::to_string(id));
  return it->second;
}

PointList Graph::unique_midpoints() const {
  PointList out;
  std::unordered_map<Point, std::size_t, PointHash, PointEqual> seen;
  for (const auto& e : edges_) {
    if (seen.emplace(e.midpoint, out.size()).second) out.push_back(e.midpoint);
  }
  return out;
}

std::vector<Eigen::Vector2d> Graph::polyline(const std::vector<int>& vertices) const {
  std::vector<Eigen::Vector2d> out;
  out.reserve(vertices.size());
  for (int v : vertices) out.push_back(vertex(v).position);
  return out;
}

double Graph::bounding_box_area() const {
  if (vertices_.empty()) return 0.0;
  Eigen::Vector2d lo = vertices_.front().position;
  Eigen::Vector2d hi = lo;
  for (const auto& v : vertices_) {
    lo = lo.cwiseMin(v.position);
    hi = hi.cwiseMax(v.position);
  }
  return (hi - lo).prod();
}

// ---------------------------------------------------------------------------------------
// Top-k

AlgorithmRun run_topk(const PointList& elements, std::size_t k, const Objective& f) {
  if (k < 1 || k > elements.size()) {
    throw InputError("top-k requires 1 <= k <= |X|, got k = " + std::to_string(k) +
                     " with |X| = " + std::to_string(elements.size()));
  }
  AlgorithmRun run;
  std::vector<double> values;
  values.reserve(elements.size());
  for (const auto& x : elements) {
    const double v = f(x);
    run.path.steps.push_back({x, v});
    values.push_back(v);
  }
  std::vector<std::size_t> order(elements.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  TopKOutput out;
  for (std::size_t i = 0; i < k; ++i) {
    out.indices.push_back(order[i]);
    out.elements.push_back(elements[order[i]]);
    out.values.push_back(values[order[i]]);
  }
  run.output = std::move(out);
  return run;
}

// ---------------------------------------------------------------------------------------
// Dijkstra

AlgorithmRun run_dijkstra(const Graph& graph, int source, int dest, const Objective& f,
                          const CostTransform& transform) {
  const std::size_t src = graph.index_of(source);
  const std::size_t dst = graph.index_of(dest);
  if (src == dst) throw InputError("source and destination must differ");

  const std::size_t n = graph.vertex_count();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<std::size_t> via(n, std::numeric_limits<std::size_t>::max());
  std::vector<bool> done(n, false);
  std::unordered_map<Point, double, PointHash, PointEqual> memo;

  AlgorithmRun run;
  auto edge_value = [&](const Edge& e) {
    if (auto it = memo.find(e.midpoint); it != memo.end()) return it->second;
    const double v = f(e.midpoint);
    run.path.steps.push_back({e.midpoint, v});
    memo.emplace(e.midpoint, v);
    return v;
  };
  auto edge_cost = [&](double value) { return transform ? transform(value) : value; };

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  dist[src] = 0.0;
  queue.emplace(0.0, src);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (done[u]) continue;
    done[u] = true;
    if (u == dst) break;
    for (std::size_t ei : graph.out_edges(graph.vertices()[u].id)) {
      const Edge& e = graph.edges()[ei];
      const std::size_t v = graph.index_of(e.to);
      if (done[v]) continue;
      const double cost = edge_cost(edge_value(e));
      if (!(cost >= 0.0)) {
        throw ContractError("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                            " has negative or NaN cost " + std::to_string(cost));
      }
      if (d + cost < dist[v]) {
        dist[v] = d + cost;
        via[v] = ei;
        queue.emplace(dist[v], v);
      }
    }
  }
  if (!done[dst]) {
    throw NoPathError("vertex " + std::to_string(dest) + " is unreachable from " +
                      std::to_string(source));
  }

  GraphPathOutput out;
  std::vector<std::size_t> edges;
  for (std::size_t v = dst; v != src;) {
    const std::size_t ei = via[v];
    edges.push_back(ei);
    v = graph.index_of(graph.edges()[ei].from);
  }
  std::reverse(edges.begin(), edges.end());
  out.vertices.push_back(source);
  for (std::size_t ei : edges) {
    const Edge& e = graph.edges()[ei];
    const double value = memo.at(e.midpoint);
    out.vertices.push_back(e.to);
    out.edge_points.push_back(e.midpoint);
    out.edge_values.push_back(value);
    out.edge_costs.push_back(edge_cost(value));
  }
  out.total_cost = dist[dst];
  run.output = std::move(out);
  return run;
}

// ---------------------------------------------------------------------------------------
// Evolution strategy

std::size_t ESConfig::survivors() const {
  return static_cast<std::size_t>(std::ceil(elite_frac * static_cast<double>(population) - 1e-12));
}

void ESConfig::validate() const {
  if (population < 1) throw InputError("evolution strategy population must be >= 1");
  if (!(proposal_std > 0.0) || !std::isfinite(proposal_std)) {
    throw InputError("evolution strategy proposal_std must be positive");
  }
  if (!(elite_frac >= 0.0 && elite_frac <= 1.0)) {
    throw InputError("evolution strategy elite_frac must lie in [0, 1]");
  }
  if (survivors() < 1) throw InputError("evolution strategy keeps no survivors: raise elite_frac");
}

AlgorithmRun run_evolution_strategy(const ESConfig& config, const Box& domain, const Objective& f,
                                    std::uint64_t seed) {
  config.validate();
  domain.validate();
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const auto dim = domain.dimension();

  Point start(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    start[i] = std::uniform_real_distribution<double>(domain.lower[i], domain.upper[i])(rng);
  }
  auto better = [&](double a, double b) { return config.minimize ? a < b : a > b; };

  AlgorithmRun run;
  const double start_value = f(start);
  run.path.steps.push_back({start, start_value});
  LocalOptOutput best{start, start_value};

  PointList survivors{start};
  const std::size_t keep = std::min(config.survivors(), config.population);
  PointList mutants(config.population);
  std::vector<double> values(config.population);
  std::vector<std::size_t> order(config.population);
  for (std::size_t g = 0; g < config.generations; ++g) {
    for (std::size_t i = 0; i < config.population; ++i) {
      Point m = survivors[i % survivors.size()];
      for (Eigen::Index d = 0; d < dim; ++d) m[d] += config.proposal_std * normal(rng);
      mutants[i] = domain.clip(m);
      values[i] = f(mutants[i]);
      run.path.steps.push_back({mutants[i], values[i]});
      if (better(values[i], best.f_star)) best = {mutants[i], values[i]};
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return better(values[a], values[b]); });
    survivors.clear();
    for (std::size_t i = 0; i < keep; ++i) survivors.push_back(mutants[order[i]]);
  }
  run.output = std::move(best);
  return run;
}

// ---------------------------------------------------------------------------------------

TopKAlgorithm::TopKAlgorithm(PointList elements, std::size_t k)
    : elements_(std::move(elements)), k_(k) {
  if (k_ < 1 || k_ > elements_.size()) throw InputError("top-k requires 1 <= k <= |X|");
}

DijkstraAlgorithm::DijkstraAlgorithm(std::shared_ptr<const Graph> graph, int source, int dest,
                                     CostTransform transform)
    : graph_(std::move(graph)), source_(source), dest_(dest), transform_(std::move(transform)) {
  graph_->index_of(source_);
  graph_->index_of(dest_);
}

EvolutionStrategyAlgorithm::EvolutionStrategyAlgorithm(ESConfig config, Box domain,
                                                       std::uint64_t seed)
    : config_(config), domain_(std::move(domain)), seed_(seed) {
  config_.validate();
  domain_.validate();
}

}  // namespace bax
