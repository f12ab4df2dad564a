#include "bax/acquisition.hpp"

#include "bax/errors.hpp"
#include "bax/metrics.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <random>

namespace bax {

std::vector<AlgorithmOutput> SampleBundle::outputs() const {
  std::vector<AlgorithmOutput> out;
  out.reserve(draws.size());
  for (const auto& d : draws) out.push_back(d.output);
  return out;
}

// ---------------------------------------------------------------------------------------
// Output distances

namespace {

Vector optimum_features(const AlgorithmOutput& o) {
  const auto* lo = std::get_if<LocalOptOutput>(&o);
  if (!lo) throw InputError("Euclidean output distance requires local-optimum outputs");
  Vector f(lo->x_star.size() + 1);
  f.head(lo->x_star.size()) = lo->x_star;
  f[lo->x_star.size()] = lo->f_star;
  return f;
}

std::vector<std::pair<int, int>> directed_edges(const GraphPathOutput& p) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i + 1 < p.vertices.size(); ++i) out.emplace_back(p.vertices[i], p.vertices[i + 1]);
  return out;
}

}  // namespace

OutputDistance OutputDistance::euclidean_on_optimum(Vector scale) {
  if ((scale.array() <= 0.0).any()) throw InputError("distance scales must be positive");
  return OutputDistance(DistanceKind::EuclideanOnOptimum, std::move(scale));
}

OutputDistance OutputDistance::euclidean_on_optimum(const std::vector<AlgorithmOutput>& outputs) {
  if (outputs.empty()) throw InputError("cannot fit a distance scale on zero outputs");
  const Vector first = optimum_features(outputs.front());
  Vector mean = Vector::Zero(first.size());
  std::vector<Vector> features;
  for (const auto& o : outputs) {
    features.push_back(optimum_features(o));
    mean += features.back();
  }
  mean /= static_cast<double>(outputs.size());
  Vector var = Vector::Zero(first.size());
  for (const auto& f : features) var += (f - mean).array().square().matrix();
  Vector scale = Vector::Ones(first.size());
  if (outputs.size() > 1) {
    var /= static_cast<double>(outputs.size() - 1);
    for (Eigen::Index i = 0; i < scale.size(); ++i) {
      if (var[i] > 0.0) scale[i] = std::sqrt(var[i]);
    }
  }
  return OutputDistance(DistanceKind::EuclideanOnOptimum, scale);
}

OutputDistance OutputDistance::for_outputs(const std::vector<AlgorithmOutput>& outputs) {
  if (outputs.empty()) throw InputError("cannot choose a distance for zero outputs");
  if (std::holds_alternative<TopKOutput>(outputs.front())) return jaccard_on_sets();
  if (std::holds_alternative<GraphPathOutput>(outputs.front())) return jaccard_on_edge_sets();
  return euclidean_on_optimum(outputs);
}

double OutputDistance::operator()(const AlgorithmOutput& a, const AlgorithmOutput& b) const {
  switch (kind_) {
    case DistanceKind::JaccardOnSets: {
      const auto* x = std::get_if<TopKOutput>(&a);
      const auto* y = std::get_if<TopKOutput>(&b);
      if (!x || !y) throw InputError("Jaccard set distance requires top-k outputs");
      return jaccard_distance(x->indices, y->indices);
    }
    case DistanceKind::JaccardOnEdgeSets: {
      const auto* x = std::get_if<GraphPathOutput>(&a);
      const auto* y = std::get_if<GraphPathOutput>(&b);
      if (!x || !y) throw InputError("Jaccard edge distance requires graph-path outputs");
      return jaccard_distance(directed_edges(*x), directed_edges(*y));
    }
    case DistanceKind::EuclideanOnOptimum: {
      const Vector fa = optimum_features(a);
      const Vector fb = optimum_features(b);
      if (fa.size() != fb.size()) throw InputError("optimum outputs differ in dimension");
      if (scale_.size() == 0) return (fa - fb).norm();
      if (scale_.size() != fa.size()) throw InputError("distance scale has the wrong dimension");
      return ((fa - fb).array() / scale_.array()).matrix().norm();
    }
  }
  return 0.0;
}

double select_delta(const std::vector<AlgorithmOutput>& outputs, const OutputDistance& distance,
                    std::size_t min_ball_size) {
  const std::size_t n = outputs.size();
  if (n == 0) throw ConfigError("select_delta needs at least one output");
  if (min_ball_size + 1 > n) {
    throw ConfigError("min_ball_size " + std::to_string(min_ball_size) +
                      " is infeasible with " + std::to_string(n) +
                      " outputs (each ball excludes its centre)");
  }
  if (min_ball_size == 0) return 0.0;
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = distance(outputs[i], outputs[j]);
  }
  double delta = 0.0;
  std::vector<double> row;
  for (std::size_t j = 0; j < n; ++j) {
    row.clear();
    for (std::size_t k = 0; k < n; ++k) {
      if (k != j) row.push_back(d[j][k]);
    }
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(min_ball_size - 1), row.end());
    delta = std::max(delta, row[min_ball_size - 1]);
  }
  return delta;
}

double mixture_entropy(const Vector& means, const Vector& variances, std::size_t draws, Rng& rng) {
  const auto m = means.size();
  if (m == 0 || variances.size() != m) throw InputError("mixture needs matching non-empty components");
  if ((variances.array() <= 0.0).any()) throw InputError("mixture component variances must be positive");
  if (m == 1) return gaussian_entropy(variances[0]);
  if (draws == 0) throw ConfigError("entropy_mc_draws must be positive");

  const Vector log_norm = -0.5 * (2.0 * std::numbers::pi * variances.array()).log();
  const Vector half_precision = 0.5 / variances.array();
  const double log_m = std::log(static_cast<double>(m));
  Vector terms(m);
  auto log_density = [&](double y) {
    terms = log_norm.array() - half_precision.array() * (y - means.array()).square();
    const double top = terms.maxCoeff();
    return top + std::log((terms.array() - top).exp().sum()) - log_m;
  };

  std::normal_distribution<double> normal;
  const auto count = static_cast<std::size_t>(m);
  if (draws < count) {
    double sum = 0.0;
    for (std::size_t h = 0; h < draws; ++h) {
      const auto k = static_cast<Eigen::Index>(h);
      sum += log_density(means[k] + std::sqrt(variances[k]) * normal(rng));
    }
    return -sum / static_cast<double>(draws);
  }
  const std::size_t base = draws / count;
  const std::size_t extra = draws % count;
  double total = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t n_k = base + (k < extra ? 1 : 0);
    const auto ki = static_cast<Eigen::Index>(k);
    const double sd = std::sqrt(variances[ki]);
    double sum = 0.0;
    for (std::size_t h = 0; h < n_k; ++h) sum += log_density(means[ki] + sd * normal(rng));
    total += sum / static_cast<double>(n_k);
  }
  return -total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------------------
// Shared helpers

namespace {

struct CandidateBase {
  Matrix projections;
  Vector means;
  Vector variances;  // latent
};

CandidateBase candidate_base(const Posterior& posterior, const PointList& candidates) {
  CandidateBase b;
  const auto n = static_cast<Eigen::Index>(candidates.size());
  b.projections = posterior.project(candidates);
  b.means.resize(n);
  b.variances.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& x = candidates[static_cast<std::size_t>(i)];
    const Vector col = b.projections.col(i);
    b.means[i] = posterior.mean(x, col);
    b.variances[i] = posterior.latent_variance(x, col);
  }
  return b;
}

void require_noise(const Posterior& posterior, const char* what) {
  if (!(posterior.model().noise_variance > 0.0)) {
    throw ConfigError(std::string(what) + " requires a positive noise_variance");
  }
}

}  // namespace

// ---------------------------------------------------------------------------------------
// Exact-conditioning EIG

ExactConditioningEIG::ExactConditioningEIG(std::shared_ptr<const Posterior> posterior,
                                           const SampleBundle& bundle, Target target)
    : posterior_(std::move(posterior)) {
  if (bundle.size() == 0) throw InputError("EIG needs at least one bundle draw");
  require_noise(*posterior_, "exact-conditioning EIG");
  conditioners_.reserve(bundle.size());
  for (const auto& d : bundle.draws) {
    const auto pairs = target == Target::ExecutionPath ? d.path.as_observations()
                                                       : extract_subsequence_values(d.output);
    conditioners_.emplace_back(posterior_, pairs);
  }
}

Vector ExactConditioningEIG::evaluate(const PointList& candidates) const {
  const double noise = posterior_->model().noise_variance;
  const auto base = candidate_base(*posterior_, candidates);
  Vector conditional = Vector::Zero(base.means.size());
  Vector means;
  Vector variances;
  for (const auto& c : conditioners_) {
    c.predict_batch(candidates, base.projections, base.means, base.variances, means, variances);
    conditional.array() += 0.5 * (variances.array() + noise).log();
  }
  conditional /= static_cast<double>(conditioners_.size());
  // 0.5 ln(2 pi e) cancels between the two entropy terms.
  return (0.5 * (base.variances.array() + noise).log()).matrix() - conditional;
}

double ExactConditioningEIG::evaluate(const Point& x) const { return evaluate(PointList{x})[0]; }

// ---------------------------------------------------------------------------------------
// Output EIG

OutputEIG::OutputEIG(std::shared_ptr<const Posterior> posterior, const SampleBundle& bundle,
                     OutputDistance distance, AbcPolicy policy)
    : posterior_(std::move(posterior)), policy_(policy) {
  const std::size_t l = bundle.size();
  if (l == 0) throw InputError("EIG needs at least one bundle draw");
  if (policy_.min_ball_size < 1) throw ConfigError("min_ball_size must be positive");
  if (l < policy_.min_ball_size) {
    throw ConfigError("output EIG needs at least min_ball_size = " +
                      std::to_string(policy_.min_ball_size) + " posterior samples, got " +
                      std::to_string(l));
  }
  require_noise(*posterior_, "output EIG");
  const auto outputs = bundle.outputs();
  const std::size_t effective = std::min(policy_.min_ball_size, l - 1);
  delta_ = select_delta(outputs, distance, effective);

  std::map<std::vector<std::size_t>, std::size_t> seen;
  ball_of_.resize(l);
  for (std::size_t j = 0; j < l; ++j) {
    std::vector<std::size_t> members;
    for (std::size_t k = 0; k < l; ++k) {
      if (k == j || distance(outputs[j], outputs[k]) <= delta_) members.push_back(k);
    }
    if (members.size() < effective + 1) {
      throw ConfigError("ABC ball smaller than min_ball_size after delta search");
    }
    auto [it, inserted] = seen.emplace(members, balls_.size());
    if (inserted) balls_.push_back(std::move(members));
    ball_of_[j] = it->second;
  }
  conditioners_.reserve(l);
  for (const auto& d : bundle.draws) conditioners_.emplace_back(posterior_, d.path.as_observations());
}

Vector OutputEIG::evaluate(const PointList& candidates, std::uint64_t seed) const {
  std::vector<std::uint64_t> seeds(candidates.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = derive_seed(seed, {i});
  return evaluate_seeded(candidates, seeds);
}

double OutputEIG::evaluate(const Point& x, std::uint64_t seed) const {
  return evaluate_seeded(PointList{x}, {seed})[0];
}

Vector OutputEIG::evaluate_seeded(const PointList& candidates,
                                  const std::vector<std::uint64_t>& seeds) const {
  const double noise = posterior_->model().noise_variance;
  const auto base = candidate_base(*posterior_, candidates);
  const auto n = static_cast<Eigen::Index>(candidates.size());
  const auto l = static_cast<Eigen::Index>(conditioners_.size());
  Matrix means(l, n);
  Matrix variances(l, n);
  Vector m;
  Vector v;
  for (Eigen::Index j = 0; j < l; ++j) {
    conditioners_[static_cast<std::size_t>(j)].predict_batch(candidates, base.projections, base.means,
                                                            base.variances, m, v);
    means.row(j) = m.transpose();
    variances.row(j) = (v.array() + noise).matrix().transpose();
  }

  Vector out(n);
  std::vector<double> ball_entropy(balls_.size());
  Vector cm;
  Vector cv;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint64_t candidate_seed = seeds[static_cast<std::size_t>(i)];
    for (std::size_t b = 0; b < balls_.size(); ++b) {
      const auto& members = balls_[b];
      cm.resize(static_cast<Eigen::Index>(members.size()));
      cv.resize(cm.size());
      for (std::size_t k = 0; k < members.size(); ++k) {
        cm[static_cast<Eigen::Index>(k)] = means(static_cast<Eigen::Index>(members[k]), i);
        cv[static_cast<Eigen::Index>(k)] = variances(static_cast<Eigen::Index>(members[k]), i);
      }
      Rng rng(derive_seed(candidate_seed, {static_cast<std::uint64_t>(b)}));
      ball_entropy[b] = mixture_entropy(cm, cv, policy_.entropy_mc_draws, rng);
    }
    double conditional = 0.0;
    for (std::size_t j = 0; j < ball_of_.size(); ++j) conditional += ball_entropy[ball_of_[j]];
    conditional /= static_cast<double>(ball_of_.size());
    out[i] = gaussian_entropy(base.variances[i] + noise) - conditional;
  }
  return out;
}

// ---------------------------------------------------------------------------------------
// Pointwise entry points

double eig_execpath(std::shared_ptr<const Posterior> posterior, const SampleBundle& bundle,
                    const Point& x) {
  return ExactConditioningEIG(std::move(posterior), bundle,
                              ExactConditioningEIG::Target::ExecutionPath)
      .evaluate(x);
}

double eig_subsequence(std::shared_ptr<const Posterior> posterior, const SampleBundle& bundle,
                       const Point& x) {
  return ExactConditioningEIG(std::move(posterior), bundle, ExactConditioningEIG::Target::Subsequence)
      .evaluate(x);
}

double eig_output(std::shared_ptr<const Posterior> posterior, const SampleBundle& bundle,
                  const OutputDistance& distance, const AbcPolicy& policy, const Point& x,
                  std::uint64_t seed) {
  return OutputEIG(std::move(posterior), bundle, distance, policy).evaluate(x, seed);
}

double baseline_variance(const Posterior& posterior, const Point& x) {
  return posterior.marginal(x, true).variance;
}

double baseline_eig_f(const Posterior& posterior, const Point& x) {
  require_noise(posterior, "EIG on f");
  return 0.5 * std::log1p(posterior.latent_variance(x) / posterior.model().noise_variance);
}

std::size_t baseline_random(std::size_t num_candidates, std::uint64_t seed) {
  if (num_candidates == 0) throw InputError("random baseline needs at least one candidate");
  Rng rng(seed);
  return std::uniform_int_distribution<std::size_t>(0, num_candidates - 1)(rng);
}

}  // namespace bax
