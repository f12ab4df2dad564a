#pragma once

#include "bax/algorithms.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <string>
#include <vector>

namespace bax {

struct MetricValue {
  std::string name;
  double value = 0.0;
  int iteration = 0;
};

/// 1 - |a ∩ b| / |a ∪ b| over the distinct elements of each list; two empty sets give 0.
template <typename T>
double jaccard_distance(std::vector<T> a, std::vector<T> b) {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end() && ib != b.end();) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  const std::size_t unite = a.size() + b.size() - common;
  return 1.0 - static_cast<double>(common) / static_cast<double>(unite);
}

using Polyline = std::vector<Eigen::Vector2d>;

/// Signed shoelace area of a closed polygon (counter-clockwise positive).
double shoelace_area(const Polyline& polygon);

/// True if no two non-adjacent edges of the closed polygon touch.
bool is_simple_polygon(const Polyline& polygon);

/// Integral of |winding number| over the plane for a closed polygon. Equals
/// |shoelace_area| for simple polygons and stays exact for self-intersecting ones.
double enclosed_area(const Polyline& polygon);

/// Area enclosed between two planar curves sharing their endpoints, divided by
/// `normalizer`. The region is split at the points where the curves meet; each piece is
/// the polygon (inferred forward, truth reversed). Throws InputError on endpoint mismatch.
double path_area_error(const Polyline& inferred, const Polyline& truth, double normalizer = 1.0);

/// Graph-path overload, normalized by the graph's vertex bounding-box area.
double path_area_error(const Graph& graph, const GraphPathOutput& inferred,
                       const GraphPathOutput& truth);

/// f(x_hat) - f(x*) when minimizing, f(x*) - f(x_hat) when maximizing.
double simple_regret(double f_at_estimate, double f_at_optimum, bool minimize = true);

}  // namespace bax
