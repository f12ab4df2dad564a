#pragma once

#include "bax/algorithms.hpp"
#include "bax/point.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace bax {

enum class BenchmarkKind { RosenbrockScaled, Branin, Hartmann6, Ackley10, SkewedSin };

struct BenchmarkFn {
  BenchmarkKind kind = BenchmarkKind::Branin;
  Box domain;
  /// RosenbrockScaled only: use (a - x1)^2 instead of the (a - x2)^2 first term.
  bool classical_rosenbrock = false;

  Eigen::Index dimension() const { return domain.dimension(); }
  std::string name() const;
  /// Global minimum value when known (all except SkewedSin).
  std::optional<double> known_minimum() const;
};

/// Looks up a benchmark by name ("rosenbrock_scaled", "branin", "hartmann6", "ackley10",
/// "skewed_sin") with its standard domain. `dimension` applies to skewed_sin only.
BenchmarkFn make_benchmark(std::string_view name, Eigen::Index dimension = 2);

double eval_benchmark(const BenchmarkFn& fn, const Point& x);

/// nx-by-ny lattice over `domain`, 8-connected, both directions of each link stored.
/// Vertex id = row * nx + column, row 0 at the lower bound of the second coordinate.
Graph make_grid_graph(int nx, int ny, const Box& domain);

double softplus(double u);
/// Throws InputError for c <= 0.
double inverse_softplus(double c);

/// Maps raw nonnegative costs to positive costs raw / scale + offset, and back and forth
/// between cost space and the unconstrained modeling space via softplus.
struct PositivityTransform {
  double scale = 1.0;
  double offset = 0.0;

  double normalize(double raw) const { return raw / scale + offset; }
  double forward(double u) const { return softplus(u); }
  double inverse(double c) const { return inverse_softplus(c); }
};

/// c(x) = softplus(g(x)).
Objective wrap_positive_cost(Objective g);

/// Edge-list format: header line then rows `from_id,to_id,x_from,y_from,x_to,y_to`.
/// Each row is a directed edge; a missing reverse direction is added after parsing.
Graph read_graph(std::istream& in);
Graph load_graph(const std::string& path);
void write_graph(const Graph& graph, std::ostream& out);
void save_graph(const Graph& graph, const std::string& path);

}  // namespace bax
