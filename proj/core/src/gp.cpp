#include "bax/gp.hpp"

#include "bax/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <string>

namespace bax {

void Box::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw InputError("box bounds must be non-empty and of equal dimension");
  }
  if (!lower.allFinite() || !upper.allFinite()) throw InputError("box bounds must be finite");
  if ((upper.array() <= lower.array()).any()) {
    throw InputError("degenerate box: every upper bound must exceed its lower bound");
  }
}

void KernelSpec::validate() const {
  if (lengthscale.size() == 0) throw InputError("kernel lengthscale must be non-empty");
  if (!lengthscale.allFinite() || (lengthscale.array() <= 0.0).any()) {
    throw InputError("kernel lengthscale must be positive");
  }
  if (!std::isfinite(signal_variance) || signal_variance <= 0.0) {
    throw InputError("kernel signal_variance must be positive");
  }
}

void KernelSpec::check_dimension(Eigen::Index dim) const {
  if (lengthscale.size() != 1 && lengthscale.size() != dim) {
    throw InputError("kernel has " + std::to_string(lengthscale.size()) +
                     " lengthscales but inputs have dimension " + std::to_string(dim));
  }
}

namespace {

double scaled_sq_distance(const KernelSpec& k, const Point& x, const Point& x2) {
  if (x.size() != x2.size()) {
    throw InputError("kernel inputs differ in dimension: " + std::to_string(x.size()) + " vs " +
                     std::to_string(x2.size()));
  }
  if (k.lengthscale.size() == 1) {
    return (x - x2).squaredNorm() / (k.lengthscale[0] * k.lengthscale[0]);
  }
  k.check_dimension(x.size());
  return ((x - x2).array() / k.lengthscale.array()).square().sum();
}

double kernel_from_sq(const KernelSpec& k, double r2) {
  switch (k.kind) {
    case KernelKind::SquaredExponential:
      return k.signal_variance * std::exp(-0.5 * r2);
    case KernelKind::Matern52: {
      const double r = std::sqrt(5.0 * r2);
      return k.signal_variance * (1.0 + r + r * r / 3.0) * std::exp(-r);
    }
  }
  return 0.0;
}

}  // namespace

double kernel_eval(const KernelSpec& kernel, const Point& x, const Point& x2) {
  return kernel_from_sq(kernel, scaled_sq_distance(kernel, x, x2));
}

Matrix kernel_matrix(const KernelSpec& kernel, const PointList& a, const PointList& b) {
  Matrix out(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kernel_eval(kernel, a[i], b[j]);
    }
  }
  return out;
}

void GPModel::validate() const {
  kernel.validate();
  if (!std::isfinite(prior_mean)) throw InputError("prior_mean must be finite");
  if (!std::isfinite(noise_variance) || noise_variance < 0.0) {
    throw InputError("noise_variance must be nonnegative");
  }
}

std::optional<Eigen::Index> Evidence::dimension() const {
  if (!noisy.empty()) return noisy.front().x.size();
  if (!noiseless.empty()) return noiseless.front().x.size();
  return std::nullopt;
}

void Evidence::validate() const {
  const auto dim = dimension();
  auto check = [&](const std::vector<Observation>& obs, const char* what) {
    for (const auto& o : obs) {
      if (o.x.size() != *dim) {
        throw InputError(std::string(what) + " evidence point has dimension " +
                         std::to_string(o.x.size()) + ", expected " + std::to_string(*dim));
      }
      if (!o.x.allFinite() || !std::isfinite(o.y)) {
        throw InputError(std::string(what) + " evidence contains non-finite values");
      }
    }
  };
  if (!dim) return;
  check(noisy, "noisy");
  check(noiseless, "noiseless");
}

JitteredCholesky cholesky_with_jitter(const Matrix& a, double base_jitter, double max_jitter) {
  if (a.rows() == 0) return {Matrix(0, 0), base_jitter};
  NumericalError::Diagnostics diag;
  diag.matrix_size = static_cast<std::size_t>(a.rows());
  diag.min_diagonal = a.diagonal().minCoeff();
  diag.max_diagonal = a.diagonal().maxCoeff();
  Matrix work = a;
  double jitter = base_jitter;
  for (;;) {
    work.diagonal() = a.diagonal().array() + jitter;
    Eigen::LLT<Matrix> llt(work);
    if (llt.info() == Eigen::Success) {
      Matrix lower = llt.matrixL();
      if (lower.allFinite()) return {std::move(lower), jitter};
    }
    diag.last_jitter = jitter;
    if (jitter * 10.0 > max_jitter * (1.0 + 1e-12)) break;
    jitter *= 10.0;
  }
  throw NumericalError("Cholesky factorization failed for a " + std::to_string(a.rows()) + "x" +
                           std::to_string(a.rows()) + " matrix after jitter " +
                           std::to_string(diag.last_jitter) + " (diagonal range [" +
                           std::to_string(diag.min_diagonal) + ", " +
                           std::to_string(diag.max_diagonal) + "])",
                       diag);
}

double gaussian_entropy(double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw InputError("gaussian_entropy requires a positive finite variance");
  }
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * variance);
}

// ---------------------------------------------------------------------------------------
// Posterior

Posterior::Posterior(GPModel model, Evidence evidence)
    : model_(std::move(model)), evidence_(std::move(evidence)) {
  model_.validate();
  evidence_.validate();
  if (auto dim = evidence_.dimension()) model_.kernel.check_dimension(*dim);

  const auto n = static_cast<Eigen::Index>(evidence_.size());
  points_.reserve(evidence_.size());
  Vector residual(n);
  Vector noise(n);
  Eigen::Index i = 0;
  for (const auto& o : evidence_.noisy) {
    points_.push_back(o.x);
    residual[i] = o.y - model_.prior_mean;
    noise[i++] = model_.noise_variance;
  }
  for (const auto& o : evidence_.noiseless) {
    points_.push_back(o.x);
    residual[i] = o.y - model_.prior_mean;
    noise[i++] = 0.0;
  }
  Matrix gram = kernel_matrix(model_.kernel, points_, points_);
  gram.diagonal() += noise;
  auto chol = cholesky_with_jitter(gram, model_.base_jitter(), model_.max_jitter());
  lower_ = std::move(chol.lower);
  jitter_ = chol.jitter;
  if (n == 0) return;
  // Iterative refinement against the unjittered system keeps noiseless evidence
  // interpolated to well below the jitter level; the jittered factor is the preconditioner.
  const auto solve = [this](const Vector& b) {
    return Vector(lower_.transpose().triangularView<Eigen::Upper>().solve(
        lower_.triangularView<Eigen::Lower>().solve(b)));
  };
  Vector alpha = solve(residual);
  for (int it = 0; it < 3; ++it) alpha += solve(residual - gram * alpha);
  whitened_ = lower_.transpose() * alpha;
}

Vector Posterior::project(const Point& x) const {
  const auto n = static_cast<Eigen::Index>(points_.size());
  Vector k(n);
  for (Eigen::Index i = 0; i < n; ++i) k[i] = kernel_eval(model_.kernel, points_[static_cast<std::size_t>(i)], x);
  if (n > 0) lower_.triangularView<Eigen::Lower>().solveInPlace(k);
  return k;
}

Matrix Posterior::project(const PointList& xs) const {
  Matrix k = kernel_matrix(model_.kernel, points_, xs);
  if (!points_.empty()) lower_.triangularView<Eigen::Lower>().solveInPlace(k);
  return k;
}

double Posterior::mean(const Point& /*x*/, const Vector& projection) const {
  return model_.prior_mean + (points_.empty() ? 0.0 : projection.dot(whitened_));
}

double Posterior::mean(const Point& x) const { return mean(x, project(x)); }

double Posterior::latent_variance(const Point& x, const Vector& projection) const {
  const double prior = kernel_eval(model_.kernel, x, x);
  return std::max(prior - projection.squaredNorm(), 0.0);
}

double Posterior::latent_variance(const Point& x) const { return latent_variance(x, project(x)); }

double Posterior::covariance(const Point& a, const Point& b) const {
  return kernel_eval(model_.kernel, a, b) - project(a).dot(project(b));
}

GaussianMarginal Posterior::marginal(const Point& x, bool predict_observation) const {
  const Vector v = project(x);
  GaussianMarginal out{mean(x, v), latent_variance(x, v)};
  if (predict_observation) out.variance += model_.noise_variance;
  return out;
}

GaussianMarginal posterior_marginal(const GPModel& model, const Evidence& evidence, const Point& x,
                                    bool predict_observation) {
  return Posterior(model, evidence).marginal(x, predict_observation);
}

// ---------------------------------------------------------------------------------------
// Conditioner

Conditioner::Conditioner(std::shared_ptr<const Posterior> posterior)
    : posterior_(std::move(posterior)) {
  projections_.resize(static_cast<Eigen::Index>(posterior_->size()), 0);
}

Conditioner::Conditioner(std::shared_ptr<const Posterior> posterior,
                         const std::vector<Observation>& pairs)
    : posterior_(std::move(posterior)) {
  std::unordered_map<Point, std::size_t, PointHash, PointEqual> seen;
  std::vector<double> values;
  for (const auto& p : pairs) {
    if (seen.emplace(p.x, points_.size()).second) {
      points_.push_back(p.x);
      values.push_back(p.y);
    }
  }
  const auto r = static_cast<Eigen::Index>(points_.size());
  projections_ = posterior_->project(points_);
  Matrix cov = kernel_matrix(posterior_->model().kernel, points_, points_);
  if (projections_.rows() > 0) cov.noalias() -= projections_.transpose() * projections_;
  const auto& model = posterior_->model();
  auto chol = cholesky_with_jitter(cov, model.base_jitter(), model.max_jitter());
  lower_ = std::move(chol.lower);
  whitened_.resize(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    whitened_[i] = values[static_cast<std::size_t>(i)] -
                   posterior_->mean(points_[static_cast<std::size_t>(i)], projections_.col(i));
  }
  if (r > 0) lower_.triangularView<Eigen::Lower>().solveInPlace(whitened_);
}

void Conditioner::reserve(Eigen::Index capacity) {
  if (capacity <= lower_.rows()) return;
  const auto r = static_cast<Eigen::Index>(points_.size());
  const Eigen::Index cap = std::max<Eigen::Index>(capacity, 2 * lower_.rows());
  Matrix lower(cap, cap);
  lower.topLeftCorner(r, r) = lower_.topLeftCorner(r, r);
  lower_.swap(lower);
  Matrix proj(projections_.rows(), cap);
  proj.leftCols(r) = projections_.leftCols(r);
  projections_.swap(proj);
  Vector white(cap);
  white.head(r) = whitened_.head(r);
  whitened_.swap(white);
}

Conditioner::Prediction Conditioner::predict(const Point& x) const {
  Prediction p;
  p.projection = posterior_->project(x);
  p.mean = posterior_->mean(x, p.projection);
  p.variance = posterior_->latent_variance(x, p.projection);
  const auto r = static_cast<Eigen::Index>(points_.size());
  if (r == 0) return p;
  const auto& kernel = posterior_->model().kernel;
  p.solved.resize(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    p.solved[i] = kernel_eval(kernel, points_[static_cast<std::size_t>(i)], x);
  }
  if (p.projection.size() > 0) p.solved.noalias() -= projections_.leftCols(r).transpose() * p.projection;
  lower_.topLeftCorner(r, r).triangularView<Eigen::Lower>().solveInPlace(p.solved);
  p.mean += p.solved.dot(whitened_.head(r));
  p.variance = std::max(p.variance - p.solved.squaredNorm(), 0.0);
  return p;
}

GaussianMarginal Conditioner::marginal(const Point& x, bool predict_observation) const {
  const auto p = predict(x);
  GaussianMarginal out{p.mean, p.variance};
  if (predict_observation) out.variance += posterior_->model().noise_variance;
  return out;
}

void Conditioner::predict_batch(const PointList& xs, const Matrix& projections,
                                const Vector& base_means, const Vector& base_variances,
                                Vector& means, Vector& variances) const {
  means = base_means;
  variances = base_variances;
  const auto r = static_cast<Eigen::Index>(points_.size());
  if (r == 0) return;
  Matrix cross = kernel_matrix(posterior_->model().kernel, points_, xs);
  if (projections.rows() > 0) cross.noalias() -= projections_.leftCols(r).transpose() * projections;
  lower_.topLeftCorner(r, r).triangularView<Eigen::Lower>().solveInPlace(cross);
  means.noalias() += cross.transpose() * whitened_.head(r);
  variances -= cross.colwise().squaredNorm().transpose();
  variances = variances.cwiseMax(0.0);
}

void Conditioner::append(const Point& x, double value, const Prediction& prediction) {
  const auto r = static_cast<Eigen::Index>(points_.size());
  reserve(r + 1);
  if (projections_.rows() > 0) projections_.col(r) = prediction.projection;
  if (r > 0) lower_.row(r).head(r) = prediction.solved.transpose();
  const double pivot = std::sqrt(prediction.variance + posterior_->model().base_jitter());
  lower_(r, r) = pivot;
  whitened_[r] = (value - prediction.mean) / pivot;
  points_.push_back(x);
}

// ---------------------------------------------------------------------------------------
// SupportFactor

SupportFactor::SupportFactor(std::shared_ptr<const Posterior> posterior, const PointList& points)
    : posterior_(std::move(posterior)) {
  for (const auto& p : points) {
    if (index_.emplace(p, points_.size()).second) points_.push_back(p);
  }
  projections_ = posterior_->project(points_);
  const auto n = static_cast<Eigen::Index>(points_.size());
  Matrix cov = kernel_matrix(posterior_->model().kernel, points_, points_);
  if (projections_.rows() > 0) cov.noalias() -= projections_.transpose() * projections_;
  const auto& model = posterior_->model();
  auto chol = cholesky_with_jitter(cov, model.base_jitter(), model.max_jitter());
  lower_ = std::move(chol.lower);
  means_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    means_[i] = posterior_->mean(points_[static_cast<std::size_t>(i)], projections_.col(i));
  }
}

std::optional<std::size_t> SupportFactor::index_of(const Point& x) const {
  auto it = index_.find(x);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Conditioner SupportFactor::to_conditioner(const Vector& standard_normals) const {
  Conditioner c(posterior_);
  c.points_ = points_;
  c.projections_ = projections_;
  c.lower_ = lower_;
  c.whitened_ = standard_normals;
  return c;
}

// ---------------------------------------------------------------------------------------
// LazyFunctionSample

LazyFunctionSample::LazyFunctionSample(std::shared_ptr<const Posterior> posterior,
                                       std::uint64_t seed)
    : posterior_(std::move(posterior)), rng_(seed) {}

LazyFunctionSample::LazyFunctionSample(std::shared_ptr<const SupportFactor> support,
                                       std::uint64_t seed)
    : posterior_(support->posterior_ptr()), support_(std::move(support)), rng_(seed) {
  std::normal_distribution<double> normal;
  support_normals_.resize(static_cast<Eigen::Index>(support_->size()));
  for (Eigen::Index i = 0; i < support_normals_.size(); ++i) support_normals_[i] = normal(rng_);
}

double LazyFunctionSample::query(const Point& x) {
  if (auto it = memo_.find(x); it != memo_.end()) return it->second;
  if (auto dim = posterior_->evidence().dimension(); dim && *dim != x.size()) {
    throw InputError("sample query has dimension " + std::to_string(x.size()) + ", expected " +
                     std::to_string(*dim));
  }
  double value = 0.0;
  std::optional<std::size_t> idx;
  if (support_) idx = support_->index_of(x);
  if (idx) {
    value = support_->value(*idx, support_normals_);
  } else {
    value = draw_off_support(x);
  }
  memo_.emplace(x, value);
  realized_.push_back({x, value});
  return value;
}

double LazyFunctionSample::draw_off_support(const Point& x) {
  if (!conditioner_) {
    conditioner_ = support_ ? support_->to_conditioner(support_normals_) : Conditioner(posterior_);
  }
  const auto prediction = conditioner_->predict(x);
  std::normal_distribution<double> normal;
  const double value = prediction.mean + std::sqrt(prediction.variance) * normal(rng_);
  conditioner_->append(x, value, prediction);
  return value;
}

LazyFunctionSample sample_function(const GPModel& model, const Evidence& evidence,
                                   std::uint64_t seed) {
  return LazyFunctionSample(std::make_shared<const Posterior>(model, evidence), seed);
}

}  // namespace bax
