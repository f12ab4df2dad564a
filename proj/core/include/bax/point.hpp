#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <vector>

namespace bax {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A point in the input domain.
using Point = Eigen::VectorXd;
using PointList = std::vector<Point>;

/// Bitwise hash over coordinates; pairs with PointEqual for exact-match lookup tables.
struct PointHash {
  std::size_t operator()(const Point& p) const noexcept {
    std::size_t h = static_cast<std::size_t>(p.size()) * 0x9e3779b97f4a7c15ULL;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      double v = p[i] == 0.0 ? 0.0 : p[i];  // fold -0.0 into +0.0
      std::uint64_t bits = 0;
      std::memcpy(&bits, &v, sizeof bits);
      h ^= std::hash<std::uint64_t>{}(bits) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

struct PointEqual {
  bool operator()(const Point& a, const Point& b) const noexcept {
    return a.size() == b.size() && (a.array() == b.array()).all();
  }
};

/// Axis-aligned box domain.
struct Box {
  Vector lower;
  Vector upper;

  Eigen::Index dimension() const { return lower.size(); }
  bool contains(const Point& x) const {
    return x.size() == lower.size() && (x.array() >= lower.array()).all() &&
           (x.array() <= upper.array()).all();
  }
  Point clip(const Point& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
  Vector side_lengths() const { return upper - lower; }
  /// Throws InputError for empty, inverted, non-finite or degenerate boxes.
  void validate() const;
};

}  // namespace bax
