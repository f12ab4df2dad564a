#include "bax/metrics.hpp"

#include "bax/errors.hpp"

#include <cmath>
#include <numeric>

namespace bax {

namespace {

constexpr double kParamEps = 1e-12;

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

struct Hit {
  double t = 0.0;  // parameter along the first segment, in [0, 1]
  double u = 0.0;  // parameter along the second segment
};

// All contact points between segments [p, p2] and [q, q2]: one for a crossing or touch,
// up to two for collinear overlap.
std::vector<Hit> segment_contacts(const Eigen::Vector2d& p, const Eigen::Vector2d& p2,
                                  const Eigen::Vector2d& q, const Eigen::Vector2d& q2) {
  std::vector<Hit> hits;
  const Eigen::Vector2d r = p2 - p;
  const Eigen::Vector2d s = q2 - q;
  const Eigen::Vector2d qp = q - p;
  const double denom = cross(r, s);
  const double scale = std::max({r.norm(), s.norm(), 1e-300});
  if (std::abs(denom) > kParamEps * scale * scale) {
    const double t = cross(qp, s) / denom;
    const double u = cross(qp, r) / denom;
    if (t >= -kParamEps && t <= 1 + kParamEps && u >= -kParamEps && u <= 1 + kParamEps) {
      hits.push_back({std::clamp(t, 0.0, 1.0), std::clamp(u, 0.0, 1.0)});
    }
    return hits;
  }
  if (std::abs(cross(qp, r)) > kParamEps * scale * scale) return hits;  // parallel, apart
  const double rr = r.squaredNorm();
  const double ss = s.squaredNorm();
  if (rr == 0.0 || ss == 0.0) return hits;
  auto on_first = [&](const Eigen::Vector2d& x) { return (x - p).dot(r) / rr; };
  auto on_second = [&](const Eigen::Vector2d& x) { return (x - q).dot(s) / ss; };
  auto consider = [&](double t, double u) {
    if (t >= -kParamEps && t <= 1 + kParamEps && u >= -kParamEps && u <= 1 + kParamEps) {
      hits.push_back({std::clamp(t, 0.0, 1.0), std::clamp(u, 0.0, 1.0)});
    }
  };
  consider(0.0, on_second(p));
  consider(1.0, on_second(p2));
  consider(on_first(q), 0.0);
  consider(on_first(q2), 1.0);
  return hits;
}

}  // namespace

double shoelace_area(const Polyline& polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) twice += cross(polygon[i], polygon[(i + 1) % n]);
  return 0.5 * twice;
}

bool is_simple_polygon(const Polyline& polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      const auto hits = segment_contacts(polygon[i], polygon[(i + 1) % n], polygon[j], polygon[(j + 1) % n]);
      if (!adjacent && !hits.empty()) return false;
      if (adjacent && hits.size() > 1) return false;  // folded back onto itself
    }
  }
  return true;
}

double enclosed_area(const Polyline& input) {
  Polyline polygon;
  for (const auto& p : input) {
    if (polygon.empty() || polygon.back() != p) polygon.push_back(p);
  }
  while (polygon.size() > 1 && polygon.back() == polygon.front()) polygon.pop_back();
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  if (is_simple_polygon(polygon)) return std::abs(shoelace_area(polygon));

  // Vertical slab decomposition: no edges cross strictly inside a slab, so edges there are
  // ordered by height and the winding number is constant between neighbours.
  std::vector<double> xs;
  for (const auto& p : polygon) xs.push_back(p.x());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = polygon[i];
      const auto& a2 = polygon[(i + 1) % n];
      for (const auto& h : segment_contacts(a, a2, polygon[j], polygon[(j + 1) % n])) {
        xs.push_back(a.x() + h.t * (a2.x() - a.x()));
      }
    }
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  struct Cut {
    double y0, y1, ym;
    int dir;
  };
  double total = 0.0;
  std::vector<Cut> cuts;
  for (std::size_t s = 0; s + 1 < xs.size(); ++s) {
    const double x0 = xs[s];
    const double x1 = xs[s + 1];
    if (x1 - x0 <= 0.0) continue;
    const double xm = 0.5 * (x0 + x1);
    cuts.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = polygon[i];
      const auto& b = polygon[(i + 1) % n];
      const double lo = std::min(a.x(), b.x());
      const double hi = std::max(a.x(), b.x());
      if (!(lo < xm && xm < hi)) continue;
      auto y_at = [&](double x) { return a.y() + (b.y() - a.y()) * (x - a.x()) / (b.x() - a.x()); };
      cuts.push_back({y_at(x0), y_at(x1), y_at(xm), b.x() > a.x() ? 1 : -1});
    }
    std::sort(cuts.begin(), cuts.end(), [](const Cut& a, const Cut& b) { return a.ym < b.ym; });
    int winding = 0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      winding += cuts[k].dir;
      if (winding == 0) continue;
      const double h0 = cuts[k + 1].y0 - cuts[k].y0;
      const double h1 = cuts[k + 1].y1 - cuts[k].y1;
      total += std::abs(winding) * 0.5 * (h0 + h1) * (x1 - x0);
    }
  }
  return total;
}

double path_area_error(const Polyline& inferred, const Polyline& truth, double normalizer) {
  if (inferred.empty() || truth.empty()) throw InputError("path_area_error needs non-empty paths");
  if (!(normalizer > 0.0)) throw InputError("path_area_error normalizer must be positive");
  const double scale = 1.0 + std::max(inferred.front().norm(), truth.front().norm());
  if ((inferred.front() - truth.front()).norm() > 1e-9 * scale ||
      (inferred.back() - truth.back()).norm() > 1e-9 * scale) {
    throw InputError("paths must share start and end points");
  }
  if (inferred.size() < 2 || truth.size() < 2) return 0.0;

  // Contact points as (arc parameter along inferred, arc parameter along truth).
  struct Event {
    double a, b;
  };
  std::vector<Event> events;
  const double end_a = static_cast<double>(inferred.size() - 1);
  const double end_b = static_cast<double>(truth.size() - 1);
  events.push_back({0.0, 0.0});
  for (std::size_t i = 0; i + 1 < inferred.size(); ++i) {
    for (std::size_t j = 0; j + 1 < truth.size(); ++j) {
      for (const auto& h : segment_contacts(inferred[i], inferred[i + 1], truth[j], truth[j + 1])) {
        events.push_back({static_cast<double>(i) + h.t, static_cast<double>(j) + h.u});
      }
    }
  }
  events.push_back({end_a, end_b});
  std::sort(events.begin(), events.end(),
            [](const Event& x, const Event& y) { return x.a < y.a || (x.a == y.a && x.b < y.b); });
  // Split points must advance along both curves.
  std::vector<Event> splits{events.front()};
  for (const auto& e : events) {
    const auto& last = splits.back();
    if (e.a >= last.a && e.b >= last.b && (e.a > last.a || e.b > last.b)) splits.push_back(e);
  }
  if (splits.back().a != end_a || splits.back().b != end_b) splits.push_back({end_a, end_b});

  auto point_at = [](const Polyline& line, double s) -> Eigen::Vector2d {
    const auto i = std::min(static_cast<std::size_t>(std::floor(s)), line.size() - 2);
    const double t = s - static_cast<double>(i);
    return line[i] + t * (line[i + 1] - line[i]);
  };

  double total = 0.0;
  Polyline piece;
  for (std::size_t k = 0; k + 1 < splits.size(); ++k) {
    const auto& from = splits[k];
    const auto& to = splits[k + 1];
    piece.clear();
    piece.push_back(point_at(inferred, from.a));
    for (double v = std::floor(from.a) + 1; v < to.a; v += 1.0) piece.push_back(inferred[static_cast<std::size_t>(v)]);
    piece.push_back(point_at(inferred, to.a));
    std::vector<Eigen::Vector2d> back;
    for (double v = std::floor(from.b) + 1; v < to.b; v += 1.0) back.push_back(truth[static_cast<std::size_t>(v)]);
    piece.insert(piece.end(), back.rbegin(), back.rend());
    total += enclosed_area(piece);
  }
  return total / normalizer;
}

double path_area_error(const Graph& graph, const GraphPathOutput& inferred,
                       const GraphPathOutput& truth) {
  return path_area_error(graph.polyline(inferred.vertices), graph.polyline(truth.vertices),
                         graph.bounding_box_area());
}

double simple_regret(double f_at_estimate, double f_at_optimum, bool minimize) {
  return minimize ? f_at_estimate - f_at_optimum : f_at_optimum - f_at_estimate;
}

}  // namespace bax
