#pragma once

#include "bax/point.hpp"
#include "bax/random.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

namespace bax {

enum class KernelKind { SquaredExponential, Matern52 };

/// Stationary kernel. `lengthscale` has one entry (isotropic) or one per input dimension.
struct KernelSpec {
  KernelKind kind = KernelKind::SquaredExponential;
  Vector lengthscale = Vector::Ones(1);
  double signal_variance = 1.0;

  void validate() const;
  /// Throws InputError when `dim` is incompatible with the lengthscale vector.
  void check_dimension(Eigen::Index dim) const;
};

double kernel_eval(const KernelSpec& kernel, const Point& x, const Point& x2);
Matrix kernel_matrix(const KernelSpec& kernel, const PointList& a, const PointList& b);

struct GPModel {
  KernelSpec kernel;
  double prior_mean = 0.0;
  double noise_variance = 1e-2;

  void validate() const;
  /// Initial diagonal stabilizer, scaled to the signal variance.
  double base_jitter() const { return 1e-8 * kernel.signal_variance; }
  double max_jitter() const { return 1e-4 * kernel.signal_variance; }
};

struct Observation {
  Point x;
  double y = 0.0;
};

/// Noisy observations D_t plus noiseless (z, f_z) pairs treated as exact.
struct Evidence {
  std::vector<Observation> noisy;
  std::vector<Observation> noiseless;

  bool empty() const { return noisy.empty() && noiseless.empty(); }
  std::size_t size() const { return noisy.size() + noiseless.size(); }
  std::optional<Eigen::Index> dimension() const;
  /// All inputs share one dimensionality; values are finite.
  void validate() const;
};

struct GaussianMarginal {
  double mean = 0.0;
  double variance = 0.0;
};

/// Lower Cholesky factor of `a + jitter * I`, escalating jitter x10 from `base_jitter`
/// up to `max_jitter`. Throws NumericalError with diagnostics if every attempt fails.
struct JitteredCholesky {
  Matrix lower;
  double jitter = 0.0;
};
JitteredCholesky cholesky_with_jitter(const Matrix& a, double base_jitter, double max_jitter);

/// Predictive marginal at `x` under mixed evidence, solved directly on the extended Gram
/// matrix (noisy rows carry the noise variance, noiseless rows carry none).
GaussianMarginal posterior_marginal(const GPModel& model, const Evidence& evidence, const Point& x,
                                    bool predict_observation);

/// Differential entropy of N(., variance) in nats.
double gaussian_entropy(double variance);

/// GP conditioned on a fixed Evidence. Factorizes once; answers means, covariances and
/// whitened cross-covariance projections. Immutable after construction.
class Posterior {
 public:
  Posterior(GPModel model, Evidence evidence);

  const GPModel& model() const { return model_; }
  const Evidence& evidence() const { return evidence_; }
  std::size_t size() const { return points_.size(); }
  double jitter() const { return jitter_; }

  /// L^{-1} k(E, x), where L L^T is the jittered extended Gram matrix.
  Vector project(const Point& x) const;
  /// Column-wise projections for a batch of points.
  Matrix project(const PointList& xs) const;

  double mean(const Point& x) const;
  double mean(const Point& x, const Vector& projection) const;
  double latent_variance(const Point& x) const;
  double latent_variance(const Point& x, const Vector& projection) const;
  double covariance(const Point& a, const Point& b) const;
  GaussianMarginal marginal(const Point& x, bool predict_observation) const;

 private:
  GPModel model_;
  Evidence evidence_;
  PointList points_;
  Matrix lower_;
  Vector whitened_;  // L^{-1} (y - prior_mean)
  double jitter_ = 0.0;
};

/// Exact noiseless conditioning on top of a Posterior, growable one point at a time.
/// Stores the Cholesky factor of the posterior covariance over the conditioning points.
class Conditioner {
 public:
  struct Prediction {
    Vector projection;  // Posterior::project(x)
    Vector solved;      // M^{-1} c, c = posterior covariance between conditioning points and x
    double mean = 0.0;  // latent conditional mean
    double variance = 0.0;  // latent conditional variance, clamped at zero
  };

  explicit Conditioner(std::shared_ptr<const Posterior> posterior);
  /// Bulk factorization. Exact duplicate points are conditioned on once.
  Conditioner(std::shared_ptr<const Posterior> posterior, const std::vector<Observation>& pairs);

  std::size_t size() const { return points_.size(); }
  const PointList& points() const { return points_; }
  const Posterior& posterior() const { return *posterior_; }

  Prediction predict(const Point& x) const;
  GaussianMarginal marginal(const Point& x, bool predict_observation) const;
  /// Latent conditional means and variances for a batch of candidates with precomputed
  /// projections (columns of `projections`), posterior means and posterior variances.
  void predict_batch(const PointList& xs, const Matrix& projections, const Vector& base_means,
                     const Vector& base_variances, Vector& means, Vector& variances) const;

  /// Adds the exact pair (x, value). `prediction` must come from predict(x) on this state.
  void append(const Point& x, double value, const Prediction& prediction);
  void append(const Point& x, double value) { append(x, value, predict(x)); }

 private:
  friend class LazyFunctionSample;
  friend class SupportFactor;
  void reserve(Eigen::Index capacity);

  std::shared_ptr<const Posterior> posterior_;
  PointList points_;
  Matrix projections_;  // t x capacity
  Matrix lower_;        // capacity x capacity, lower triangle valid on [0, size)
  Vector whitened_;     // capacity
};

/// Posterior covariance over a fixed finite point set, factorized once and shared by many
/// samples. Lets samples over finite domains materialize values in O(n) per point.
class SupportFactor {
 public:
  SupportFactor(std::shared_ptr<const Posterior> posterior, const PointList& points);

  const Posterior& posterior() const { return *posterior_; }
  std::shared_ptr<const Posterior> posterior_ptr() const { return posterior_; }
  const PointList& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  std::optional<std::size_t> index_of(const Point& x) const;

  double value(std::size_t i, const Vector& standard_normals) const {
    return means_[static_cast<Eigen::Index>(i)] +
           lower_.row(static_cast<Eigen::Index>(i))
               .head(static_cast<Eigen::Index>(i) + 1)
               .dot(standard_normals.head(static_cast<Eigen::Index>(i) + 1));
  }

  /// Conditioner over all support points with whitened residuals `standard_normals`.
  Conditioner to_conditioner(const Vector& standard_normals) const;

 private:
  std::shared_ptr<const Posterior> posterior_;
  PointList points_;
  Matrix projections_;
  Matrix lower_;
  Vector means_;
  std::unordered_map<Point, std::size_t, PointHash, PointEqual> index_;
};

/// One draw f~ ~ p(f | evidence), realized point by point. Repeated queries return the
/// stored value. Not thread-safe; distinct samples may run concurrently.
class LazyFunctionSample {
 public:
  LazyFunctionSample(std::shared_ptr<const Posterior> posterior, std::uint64_t seed);
  LazyFunctionSample(std::shared_ptr<const SupportFactor> support, std::uint64_t seed);

  double query(const Point& x);
  double operator()(const Point& x) { return query(x); }

  const std::vector<Observation>& realized() const { return realized_; }
  const GPModel& model() const { return posterior_->model(); }
  const Evidence& base_evidence() const { return posterior_->evidence(); }

 private:
  double draw_off_support(const Point& x);

  std::shared_ptr<const Posterior> posterior_;
  std::shared_ptr<const SupportFactor> support_;
  Rng rng_;
  Vector support_normals_;
  std::optional<Conditioner> conditioner_;
  std::unordered_map<Point, double, PointHash, PointEqual> memo_;
  std::vector<Observation> realized_;
};

LazyFunctionSample sample_function(const GPModel& model, const Evidence& evidence,
                                   std::uint64_t seed);

}  // namespace bax
