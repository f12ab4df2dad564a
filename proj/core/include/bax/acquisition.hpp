#pragma once

#include "bax/algorithms.hpp"
#include "bax/gp.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace bax {

/// ℓ (path, output) pairs, each from one algorithm run on one posterior function sample.
struct SampleBundle {
  std::vector<AlgorithmRun> draws;

  std::size_t size() const { return draws.size(); }
  std::vector<AlgorithmOutput> outputs() const;
};

enum class DistanceKind { JaccardOnSets, JaccardOnEdgeSets, EuclideanOnOptimum };

/// Distance on algorithm outputs: Jaccard on top-k index sets, Jaccard on directed edge
/// sets of graph paths, or Euclidean on (x*, f*) scaled per coordinate.
class OutputDistance {
 public:
  static OutputDistance jaccard_on_sets() { return OutputDistance(DistanceKind::JaccardOnSets); }
  static OutputDistance jaccard_on_edge_sets() {
    return OutputDistance(DistanceKind::JaccardOnEdgeSets);
  }
  /// Scales each coordinate of (x*, f*) by its sample standard deviation across `outputs`
  /// (coordinates with zero spread keep unit scale).
  static OutputDistance euclidean_on_optimum(const std::vector<AlgorithmOutput>& outputs);
  static OutputDistance euclidean_on_optimum(Vector scale);
  /// Picks the distance matching the outputs' variant.
  static OutputDistance for_outputs(const std::vector<AlgorithmOutput>& outputs);

  DistanceKind kind() const { return kind_; }
  const Vector& scale() const { return scale_; }
  double operator()(const AlgorithmOutput& a, const AlgorithmOutput& b) const;

 private:
  explicit OutputDistance(DistanceKind kind, Vector scale = {}) : kind_(kind), scale_(std::move(scale)) {}

  DistanceKind kind_;
  Vector scale_;
};

struct AbcPolicy {
  std::size_t min_ball_size = 30;
  std::size_t entropy_mc_draws = 512;
};

/// Smallest δ among the pairwise output distances such that every output has at least
/// `min_ball_size` other outputs within δ (inclusive). Throws ConfigError if infeasible.
double select_delta(const std::vector<AlgorithmOutput>& outputs, const OutputDistance& distance,
                    std::size_t min_ball_size);

/// Monte Carlo entropy (nats) of a uniform mixture of Gaussians, using `draws` samples
/// stratified across components. A single component is evaluated in closed form.
double mixture_entropy(const Vector& means, const Vector& variances, std::size_t draws, Rng& rng);

/// EIG with exact Gaussian conditioning on one set of noiseless pairs per bundle draw:
/// the full execution path (EIG_e) or the output's embedded subsequence values (EIG_v).
class ExactConditioningEIG {
 public:
  enum class Target { ExecutionPath, Subsequence };

  ExactConditioningEIG(std::shared_ptr<const Posterior> posterior, const SampleBundle& bundle,
                       Target target);

  Vector evaluate(const PointList& candidates) const;
  double evaluate(const Point& x) const;

 private:
  std::shared_ptr<const Posterior> posterior_;
  std::vector<Conditioner> conditioners_;
};

/// EIG on the algorithm output via δ-balls of similar outputs (ABC) and mixture entropies.
class OutputEIG {
 public:
  OutputEIG(std::shared_ptr<const Posterior> posterior, const SampleBundle& bundle,
            OutputDistance distance, AbcPolicy policy);

  /// Candidate i uses the Monte Carlo seed derive_seed(seed, {i}).
  Vector evaluate(const PointList& candidates, std::uint64_t seed) const;
  double evaluate(const Point& x, std::uint64_t seed) const;
  double delta() const { return delta_; }
  /// Bundle indices in the ball around draw j (including j).
  const std::vector<std::size_t>& ball(std::size_t j) const { return balls_[ball_of_[j]]; }

 private:
  Vector evaluate_seeded(const PointList& candidates, const std::vector<std::uint64_t>& seeds) const;

  std::shared_ptr<const Posterior> posterior_;
  std::vector<Conditioner> conditioners_;
  AbcPolicy policy_;
  double delta_ = 0.0;
  std::vector<std::vector<std::size_t>> balls_;  // distinct memberships
  std::vector<std::size_t> ball_of_;
};

double eig_execpath(std::shared_ptr<const Posterior> posterior, const SampleBundle& bundle,
                    const Point& x);
double eig_subsequence(std::shared_ptr<const Posterior> posterior, const SampleBundle& bundle,
                       const Point& x);
double eig_output(std::shared_ptr<const Posterior> posterior, const SampleBundle& bundle,
                  const OutputDistance& distance, const AbcPolicy& policy, const Point& x,
                  std::uint64_t seed);

/// Predictive variance κ_t(x, x) + σ².
double baseline_variance(const Posterior& posterior, const Point& x);
/// 0.5 ln(1 + κ_t(x, x) / σ²); ConfigError if σ² = 0.
double baseline_eig_f(const Posterior& posterior, const Point& x);
/// Uniform seeded index in [0, num_candidates).
std::size_t baseline_random(std::size_t num_candidates, std::uint64_t seed);

}  // namespace bax
