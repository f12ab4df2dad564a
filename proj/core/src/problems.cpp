#include "bax/problems.hpp"

#include "bax/errors.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <limits>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace bax {

namespace {

Box make_box(std::initializer_list<std::pair<double, double>> bounds) {
  Box b{Vector(static_cast<Eigen::Index>(bounds.size())), Vector(static_cast<Eigen::Index>(bounds.size()))};
  Eigen::Index i = 0;
  for (auto [lo, hi] : bounds) {
    b.lower[i] = lo;
    b.upper[i++] = hi;
  }
  return b;
}

Box uniform_box(Eigen::Index dim, double lo, double hi) {
  return Box{Vector::Constant(dim, lo), Vector::Constant(dim, hi)};
}

constexpr std::array<double, 4> kHartmannAlpha{1.0, 1.2, 3.0, 3.2};
constexpr double kHartmannA[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                     {0.05, 10, 17, 0.1, 8, 14},
                                     {3, 3.5, 1.7, 10, 17, 8},
                                     {17, 8, 0.05, 10, 0.1, 14}};
constexpr double kHartmannB[4][6] = {{1312, 1696, 5569, 124, 8283, 5886},
                                     {2329, 4135, 8307, 3736, 1004, 9991},
                                     {2348, 1451, 3522, 2883, 3047, 6650},
                                     {4047, 8828, 8732, 5743, 1091, 381}};

}  // namespace

std::string BenchmarkFn::name() const {
  switch (kind) {
    case BenchmarkKind::RosenbrockScaled: return "rosenbrock_scaled";
    case BenchmarkKind::Branin: return "branin";
    case BenchmarkKind::Hartmann6: return "hartmann6";
    case BenchmarkKind::Ackley10: return "ackley10";
    case BenchmarkKind::SkewedSin: return "skewed_sin";
  }
  return "unknown";
}

std::optional<double> BenchmarkFn::known_minimum() const {
  switch (kind) {
    case BenchmarkKind::RosenbrockScaled: return 0.0;
    case BenchmarkKind::Branin: return 0.39788735772973816;
    case BenchmarkKind::Hartmann6: return -3.3223680114155147;
    case BenchmarkKind::Ackley10: return 0.0;
    case BenchmarkKind::SkewedSin: return std::nullopt;
  }
  return std::nullopt;
}

BenchmarkFn make_benchmark(std::string_view name, Eigen::Index dimension) {
  if (name == "rosenbrock_scaled") {
    return {BenchmarkKind::RosenbrockScaled, make_box({{-2.0, 2.0}, {-1.0, 4.0}})};
  }
  if (name == "branin") return {BenchmarkKind::Branin, make_box({{-5.0, 10.0}, {0.0, 15.0}})};
  if (name == "hartmann6") return {BenchmarkKind::Hartmann6, uniform_box(6, 0.0, 1.0)};
  if (name == "ackley10") return {BenchmarkKind::Ackley10, uniform_box(10, -32.768, 32.768)};
  if (name == "skewed_sin") {
    if (dimension < 1) throw InputError("skewed_sin dimension must be >= 1");
    return {BenchmarkKind::SkewedSin, uniform_box(dimension, -10.0, 10.0)};
  }
  throw InputError("unknown benchmark '" + std::string(name) +
                   "' (valid: rosenbrock_scaled, branin, hartmann6, ackley10, skewed_sin)");
}

double eval_benchmark(const BenchmarkFn& fn, const Point& x) {
  if (x.size() != fn.dimension()) {
    throw InputError(fn.name() + " expects dimension " + std::to_string(fn.dimension()) +
                     ", got " + std::to_string(x.size()));
  }
  using std::numbers::pi;
  switch (fn.kind) {
    case BenchmarkKind::RosenbrockScaled: {
      constexpr double a = 1.0;
      constexpr double b = 100.0;
      const double first = fn.classical_rosenbrock ? a - x[0] : a - x[1];
      const double second = x[1] - x[0] * x[0];
      return 1e-2 * (first * first + b * second * second);
    }
    case BenchmarkKind::Branin: {
      const double t = x[1] - 5.1 / (4.0 * pi * pi) * x[0] * x[0] + 5.0 / pi * x[0] - 6.0;
      return t * t + 10.0 * (1.0 - 1.0 / (8.0 * pi)) * std::cos(x[0]) + 10.0;
    }
    case BenchmarkKind::Hartmann6: {
      double sum = 0.0;
      for (int i = 0; i < 4; ++i) {
        double inner = 0.0;
        for (int j = 0; j < 6; ++j) {
          const double d = x[j] - kHartmannB[i][j] * 1e-4;
          inner += kHartmannA[i][j] * d * d;
        }
        sum += kHartmannAlpha[static_cast<std::size_t>(i)] * std::exp(-inner);
      }
      return -sum;
    }
    case BenchmarkKind::Ackley10: {
      const double n = static_cast<double>(x.size());
      const double sq = x.squaredNorm() / n;
      const double cs = (2.0 * pi * x.array()).cos().sum() / n;
      return -20.0 * std::exp(-0.2 * std::sqrt(sq)) - std::exp(cs) + 20.0 + std::numbers::e;
    }
    case BenchmarkKind::SkewedSin: {
      return (2.0 * x.array().abs() * x.array().sin()).sum();
    }
  }
  return 0.0;
}

Graph make_grid_graph(int nx, int ny, const Box& domain) {
  if (nx < 2 || ny < 2) throw InputError("grid graph needs nx, ny >= 2");
  domain.validate();
  if (domain.dimension() != 2) throw InputError("grid graph domain must be two-dimensional");
  std::vector<Vertex> vertices;
  vertices.reserve(static_cast<std::size_t>(nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      Eigen::Vector2d p(domain.lower[0] + (domain.upper[0] - domain.lower[0]) * i / (nx - 1),
                        domain.lower[1] + (domain.upper[1] - domain.lower[1]) * j / (ny - 1));
      vertices.push_back({j * nx + i, p});
    }
  }
  constexpr int kOffsets[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, 1}, {1, -1}, {-1, -1}};
  std::vector<Edge> edges;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      for (const auto& o : kOffsets) {
        const int ni = i + o[0];
        const int nj = j + o[1];
        if (ni < 0 || ni >= nx || nj < 0 || nj >= ny) continue;
        edges.push_back({j * nx + i, nj * nx + ni, Point()});
      }
    }
  }
  return Graph(std::move(vertices), std::move(edges));
}

double softplus(double u) {
  // log1p(exp(u)) without overflow for large u
  const double v = u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
  return std::max(v, std::numeric_limits<double>::denorm_min());  // exp underflows below -745
}

double inverse_softplus(double c) {
  if (!(c > 0.0)) throw InputError("inverse softplus requires a positive argument");
  // log(exp(c) - 1) = c + log(1 - exp(-c))
  return c + std::log(-std::expm1(-c));
}

Objective wrap_positive_cost(Objective g) {
  return [g = std::move(g)](const Point& x) { return softplus(g(x)); };
}

// ---------------------------------------------------------------------------------------
// Edge-list I/O

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_field(const std::string& text, std::size_t line_no, const char* what) {
  const auto first = text.find_first_not_of(" \t");
  const auto last = text.find_last_not_of(" \t");
  T value{};
  const char* begin = first == std::string::npos ? text.data() : text.data() + first;
  const char* end = first == std::string::npos ? text.data() : text.data() + last + 1;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || begin == end) {
    throw ParseError("line " + std::to_string(line_no),
                     std::string("cannot parse ") + what + " from '" + text + "'");
  }
  return value;
}

}  // namespace

Graph read_graph(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("line 1", "missing header");
  ++line_no;

  std::vector<Vertex> vertices;
  std::unordered_map<int, std::size_t> vindex;
  std::vector<Edge> edges;
  std::unordered_set<long long> seen;
  auto key = [](int a, int b) { return (static_cast<long long>(a) << 32) ^ static_cast<unsigned>(b); };

  auto add_vertex = [&](int id, double x, double y, std::size_t ln) {
    Eigen::Vector2d p(x, y);
    auto it = vindex.find(id);
    if (it == vindex.end()) {
      vindex.emplace(id, vertices.size());
      vertices.push_back({id, p});
    } else if (vertices[it->second].position != p) {
      throw ParseError("line " + std::to_string(ln),
                       "vertex " + std::to_string(id) + " has inconsistent coordinates");
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 6) {
      throw ParseError("line " + std::to_string(line_no),
                       "expected 6 comma-separated fields, got " + std::to_string(fields.size()));
    }
    const int from = parse_field<int>(fields[0], line_no, "from_id");
    const int to = parse_field<int>(fields[1], line_no, "to_id");
    add_vertex(from, parse_field<double>(fields[2], line_no, "x_from"),
               parse_field<double>(fields[3], line_no, "y_from"), line_no);
    add_vertex(to, parse_field<double>(fields[4], line_no, "x_to"),
               parse_field<double>(fields[5], line_no, "y_to"), line_no);
    if (from == to) throw ParseError("line " + std::to_string(line_no), "self-loop edge");
    if (seen.insert(key(from, to)).second) edges.push_back({from, to, Point()});
  }
  if (edges.empty()) throw ParseError("line " + std::to_string(line_no), "edge list is empty");
  const std::size_t listed = edges.size();
  for (std::size_t e = 0; e < listed; ++e) {
    if (seen.insert(key(edges[e].to, edges[e].from)).second) {
      edges.push_back({edges[e].to, edges[e].from, Point()});
    }
  }
  return Graph(std::move(vertices), std::move(edges));
}

Graph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open graph file '" + path + "'");
  try {
    return read_graph(in);
  } catch (const ParseError& e) {
    throw ParseError(path, e.what());
  }
}

void write_graph(const Graph& graph, std::ostream& out) {
  out << "from_id,to_id,x_from,y_from,x_to,y_to\n";
  out << std::setprecision(17);
  for (const auto& e : graph.edges()) {
    const auto& a = graph.vertex(e.from).position;
    const auto& b = graph.vertex(e.to).position;
    out << e.from << ',' << e.to << ',' << a.x() << ',' << a.y() << ',' << b.x() << ',' << b.y()
        << '\n';
  }
}

void save_graph(const Graph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write graph file '" + path + "'");
  write_graph(graph, out);
  if (!out) throw InputError("failed writing graph file '" + path + "'");
}

}  // namespace bax
