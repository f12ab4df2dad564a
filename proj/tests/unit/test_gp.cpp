#include "bax/errors.hpp"
#include "bax/gp.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace bax;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

GPModel se_model(double lengthscale, double variance, double noise) {
  GPModel m;
  m.kernel.kind = KernelKind::SquaredExponential;
  m.kernel.lengthscale = Vector::Constant(1, lengthscale);
  m.kernel.signal_variance = variance;
  m.noise_variance = noise;
  return m;
}

Point random_point(Rng& rng, Eigen::Index dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Point p(dim);
  for (Eigen::Index i = 0; i < dim; ++i) p[i] = u(rng);
  return p;
}

// Heteroscedastic GP solve written out independently: dense LU on K + diag(noise). The mean
// uses the exact system; the variance carries the same diagonal jitter as the library.
GaussianMarginal hetero_oracle(const GPModel& m, const PointList& xs, const Vector& ys,
                               const Vector& noise, const Point& x) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Matrix k(n, n);
  Vector kx(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double r2 = (xs[i] - xs[j]).squaredNorm() / std::pow(m.kernel.lengthscale[0], 2);
      k(i, j) = m.kernel.signal_variance * std::exp(-0.5 * r2);
    }
    const double r2 = (xs[i] - x).squaredNorm() / std::pow(m.kernel.lengthscale[0], 2);
    kx[i] = m.kernel.signal_variance * std::exp(-0.5 * r2);
  }
  k.diagonal() += noise;
  const Vector alpha = Eigen::FullPivLU<Matrix>(k).solve(ys - Vector::Constant(n, m.prior_mean));
  k.diagonal().array() += m.base_jitter();
  const Vector beta = Eigen::FullPivLU<Matrix>(k).solve(kx);
  return {m.prior_mean + kx.dot(alpha), m.kernel.signal_variance - kx.dot(beta)};
}

// Standard normal CDF.
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double ks_statistic(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u[i], u[i] - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace

TEST(Kernel, ZeroDistanceGivesSignalVariance) {
  KernelSpec k;
  k.signal_variance = 2.5;
  EXPECT_DOUBLE_EQ(kernel_eval(k, pt({0.3, -1.2}), pt({0.3, -1.2})), 2.5);
  k.kind = KernelKind::Matern52;
  EXPECT_DOUBLE_EQ(kernel_eval(k, pt({4.0}), pt({4.0})), 2.5);
}

TEST(Kernel, SquaredDistanceTwo) {
  KernelSpec k;
  EXPECT_NEAR(kernel_eval(k, pt({0.0, 0.0}), pt({1.0, 1.0})), std::exp(-1.0), 1e-15);
}

TEST(Kernel, MaternDecaysAndIsSymmetric) {
  KernelSpec k;
  k.kind = KernelKind::Matern52;
  EXPECT_LT(kernel_eval(k, pt({0.0}), pt({100.0})), 1e-30);
  EXPECT_DOUBLE_EQ(kernel_eval(k, pt({0.1}), pt({0.9})), kernel_eval(k, pt({0.9}), pt({0.1})));
  // Matern 5/2 at r = 1: (1 + sqrt5 + 5/3) exp(-sqrt5)
  const double s5 = std::sqrt(5.0);
  EXPECT_NEAR(kernel_eval(k, pt({0.0}), pt({1.0})), (1.0 + s5 + 5.0 / 3.0) * std::exp(-s5), 1e-15);
}

TEST(Kernel, ArdLengthscales) {
  KernelSpec k;
  k.lengthscale = pt({1.0, 2.0});
  EXPECT_NEAR(kernel_eval(k, pt({0.0, 0.0}), pt({1.0, 2.0})), std::exp(-1.0), 1e-15);
  EXPECT_THROW(kernel_eval(k, pt({0.0, 0.0, 0.0}), pt({1.0, 2.0, 0.0})), InputError);
}

TEST(Kernel, DimensionMismatchThrows) {
  KernelSpec k;
  EXPECT_THROW(kernel_eval(k, pt({0.0}), pt({0.0, 1.0})), InputError);
}

TEST(Kernel, GramMatrixIsPsd) {
  Rng rng(3);
  PointList xs;
  for (int i = 0; i < 25; ++i) xs.push_back(random_point(rng, 2));
  for (auto kind : {KernelKind::SquaredExponential, KernelKind::Matern52}) {
    KernelSpec k;
    k.kind = kind;
    k.lengthscale = Vector::Constant(1, 0.4);
    const Matrix g = kernel_matrix(k, xs, xs);
    EXPECT_LT((g - g.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(Kernel, ValidationRejectsBadParameters) {
  KernelSpec k;
  k.signal_variance = 0.0;
  EXPECT_THROW(k.validate(), InputError);
  k.signal_variance = 1.0;
  k.lengthscale = pt({-1.0});
  EXPECT_THROW(k.validate(), InputError);
  GPModel m;
  m.noise_variance = -1e-3;
  EXPECT_THROW(m.validate(), InputError);
}

TEST(PosteriorMarginal, EmptyEvidenceIsPrior) {
  GPModel m = se_model(0.5, 2.0, 0.1);
  m.prior_mean = 0.7;
  const auto g = posterior_marginal(m, {}, pt({0.2}), true);
  EXPECT_DOUBLE_EQ(g.mean, 0.7);
  EXPECT_DOUBLE_EQ(g.variance, 2.1);
  const auto f = posterior_marginal(m, {}, pt({0.2}), false);
  EXPECT_DOUBLE_EQ(f.variance, 2.0);
}

TEST(PosteriorMarginal, NoiselessPairInterpolates) {
  const GPModel m = se_model(0.3, 1.0, 0.05);
  Evidence e;
  e.noisy = {{pt({0.1}), 0.4}, {pt({0.8}), -0.2}};
  e.noiseless = {{pt({0.5}), 1.3}};
  const auto g = posterior_marginal(m, e, pt({0.5}), true);
  EXPECT_NEAR(g.mean, 1.3, 1e-6);
  EXPECT_NEAR(g.variance, 0.05, 1e-6);
}

TEST(PosteriorMarginal, SingleNoisyObservationScalarOracle) {
  // k(x, x1) = exp(-0.5 * 0.25^2 / 0.5^2) = exp(-0.125); mean = k y / (1 + s2)
  const GPModel m = se_model(0.5, 1.0, 0.1);
  Evidence e;
  e.noisy = {{pt({0.0}), 2.0}};
  const auto g = posterior_marginal(m, e, pt({0.25}), false);
  const double kx = std::exp(-0.125);
  EXPECT_NEAR(g.mean, kx * 2.0 / 1.1, 1e-12);
  EXPECT_NEAR(g.variance, 1.0 - kx * kx / (1.1 + m.base_jitter()), 1e-12);
}

TEST(PosteriorMarginal, MixedEvidenceMatchesHeteroscedasticOracle) {
  Rng rng(11);
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const auto n = 1 + static_cast<int>(rng() % 40);
    const auto n_exact = static_cast<int>(rng() % static_cast<std::uint64_t>(n + 1));
    GPModel m = se_model(0.35, 1.5, 0.02);
    m.prior_mean = 0.3;
    Evidence e;
    PointList xs;
    Vector ys(n), noise(n);
    std::normal_distribution<double> nd;
    for (int i = 0; i < n; ++i) {
      Point x = random_point(rng, 3);
      const double y = nd(rng);
      ys[i] = y;
      if (i < n - n_exact) {
        e.noisy.push_back({x, y});
        noise[i] = m.noise_variance;
      } else {
        e.noiseless.push_back({x, y});
        noise[i] = 0.0;
      }
      xs.push_back(x);
    }
    const Posterior post(m, e);
    ASSERT_EQ(post.jitter(), m.base_jitter());
    const Point q = random_point(rng, 3);
    const auto got = post.marginal(q, false);
    const auto want = hetero_oracle(m, xs, ys, noise, q);
    worst = std::max({worst, std::abs(got.mean - want.mean),
                      std::abs(got.variance - std::max(want.variance, 0.0))});
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(PosteriorMarginal, AddingNoiselessPairPinsMean) {
  Rng rng(5);
  for (int inst = 0; inst < 20; ++inst) {
    const GPModel m = se_model(0.3, 1.0, 0.01);
    Evidence e;
    for (int i = 0; i < 10; ++i) e.noisy.push_back({random_point(rng, 2), std::normal_distribution<double>()(rng)});
    const Point x = random_point(rng, 2);
    e.noiseless.push_back({x, 0.77});
    EXPECT_NEAR(posterior_marginal(m, e, x, false).mean, 0.77, 1e-6);
  }
}

TEST(PosteriorMarginal, VarianceNonNegative) {
  Rng rng(8);
  const GPModel m = se_model(2.0, 1.0, 0.0);
  Evidence e;
  for (int i = 0; i < 30; ++i) e.noiseless.push_back({random_point(rng, 1), 0.0});
  const Posterior post(m, e);
  for (int i = 0; i < 200; ++i) EXPECT_GE(post.latent_variance(random_point(rng, 1)), -1e-9);
}

TEST(PosteriorMarginal, DuplicateNoiselessPointsEscalateJitter) {
  const GPModel m = se_model(0.5, 1.0, 0.0);
  Evidence e;
  e.noiseless = {{pt({0.5}), 1.0}, {pt({0.5}), 1.0}};
  const Posterior post(m, e);
  EXPECT_GE(post.jitter(), m.base_jitter());
  EXPECT_NEAR(post.mean(pt({0.5})), 1.0, 1e-6);
}

TEST(PosteriorMarginal, FactorizationFailureCarriesDiagnostics) {
  Matrix bad = Matrix::Identity(3, 3);
  bad(2, 2) = -1.0;
  try {
    cholesky_with_jitter(bad, 1e-8, 1e-4);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.diagnostics().matrix_size, 3u);
    EXPECT_NEAR(e.diagnostics().last_jitter, 1e-4, 1e-16);
    EXPECT_DOUBLE_EQ(e.diagnostics().min_diagonal, -1.0);
    EXPECT_DOUBLE_EQ(e.diagnostics().max_diagonal, 1.0);
  }
}

TEST(Entropy, ClosedForms) {
  const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
  EXPECT_NEAR(gaussian_entropy(1.0 / two_pi_e), 0.0, 1e-15);
  EXPECT_NEAR(gaussian_entropy(1.0), 1.4189385332046727, 1e-12);
  for (double v : {1e-6, 0.3, 7.0}) {
    EXPECT_NEAR(gaussian_entropy(4.0 * v) - gaussian_entropy(v), std::log(2.0), 1e-12);
    EXPECT_LT(gaussian_entropy(v), gaussian_entropy(v * 1.0001));
  }
  EXPECT_THROW(gaussian_entropy(0.0), InputError);
  EXPECT_THROW(gaussian_entropy(-1.0), InputError);
}

TEST(LazySample, DeterministicUnderSeed) {
  const GPModel m = se_model(0.3, 1.0, 0.01);
  Evidence e;
  e.noisy = {{pt({0.2}), 0.5}};
  auto a = sample_function(m, e, 42);
  auto b = sample_function(m, e, 42);
  for (double x : {0.1, 0.5, 0.9, 0.33}) EXPECT_EQ(a.query(pt({x})), b.query(pt({x})));
}

TEST(LazySample, RepeatedQueryIsIdempotent) {
  auto s = sample_function(se_model(0.3, 1.0, 0.01), {}, 1);
  const double v = s.query(pt({0.4}));
  const auto n = s.realized().size();
  EXPECT_EQ(s.query(pt({0.4})), v);
  EXPECT_EQ(s.realized().size(), n);
}

TEST(LazySample, NoiselessEvidenceIsReproduced) {
  Evidence e;
  e.noiseless = {{pt({0.3, 0.3}), -0.9}};
  auto s = sample_function(se_model(0.4, 1.0, 0.01), e, 9);
  EXPECT_NEAR(s.query(pt({0.3, 0.3})), -0.9, 1e-3);
}

TEST(LazySample, DimensionMismatchThrows) {
  Evidence e;
  e.noisy = {{pt({0.3, 0.3}), 0.0}};
  auto s = sample_function(se_model(0.4, 1.0, 0.01), e, 9);
  EXPECT_THROW(s.query(pt({0.3})), InputError);
}

TEST(LazySample, FirstQueryMatchesPriorMarginalKS) {
  GPModel m = se_model(0.3, 2.0, 0.01);
  m.prior_mean = 1.0;
  std::vector<double> u;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    auto s = sample_function(m, {}, seed);
    u.push_back(normal_cdf((s.query(pt({0.5})) - 1.0) / std::sqrt(2.0)));
  }
  // 1% critical value for n = 2000 is about 1.63 / sqrt(n).
  EXPECT_LT(ks_statistic(u), 1.63 / std::sqrt(2000.0));
}

TEST(LazySample, UncorrelatedQueryKeepsPriorLaw) {
  const GPModel m = se_model(0.05, 1.0, 0.01);
  std::vector<double> u;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    auto s = sample_function(m, {}, seed);
    s.query(pt({0.0}));
    s.query(pt({0.01}));
    u.push_back(normal_cdf(s.query(pt({5.0}))));
  }
  EXPECT_LT(ks_statistic(u), 1.63 / std::sqrt(2000.0));
}

namespace {

// Compares the sample moments of a fixed query sequence to the closed-form posterior.
void check_joint_moments(const GPModel& m, const Evidence& e, const PointList& qs, bool use_support) {
  const auto post = std::make_shared<const Posterior>(m, e);
  std::shared_ptr<const SupportFactor> support;
  if (use_support) support = std::make_shared<const SupportFactor>(post, PointList{qs[0], qs[2]});
  const auto k = static_cast<Eigen::Index>(qs.size());
  const int n = 2000;
  Matrix draws(n, k);
  for (int s = 0; s < n; ++s) {
    auto sample = support ? LazyFunctionSample(support, static_cast<std::uint64_t>(s))
                          : LazyFunctionSample(post, static_cast<std::uint64_t>(s));
    for (Eigen::Index i = 0; i < k; ++i) draws(s, i) = sample.query(qs[i]);
  }
  Vector mu(k);
  Matrix cov(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    mu[i] = post->mean(qs[i]);
    for (Eigen::Index j = 0; j < k; ++j) cov(i, j) = post->covariance(qs[i], qs[j]);
  }
  const Vector mean = draws.colwise().mean();
  const Matrix centered = draws.rowwise() - mean.transpose();
  const Matrix emp = centered.transpose() * centered / (n - 1);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double se = std::sqrt(cov(i, i) / n);
    EXPECT_LE(std::abs(mean[i] - mu[i]), 4.0 * se + 1e-12) << "mean " << i;
    for (Eigen::Index j = 0; j < k; ++j) {
      // Var of the sample covariance of a bivariate normal: (s_ij^2 + s_ii s_jj) / n.
      const double se_c = std::sqrt((cov(i, j) * cov(i, j) + cov(i, i) * cov(j, j)) / n);
      EXPECT_LE(std::abs(emp(i, j) - cov(i, j)), 4.0 * se_c + 1e-12) << "cov " << i << "," << j;
    }
  }
}

}  // namespace

TEST(LazySample, JointMomentsMatchPosterior) {
  GPModel m = se_model(0.3, 1.0, 0.05);
  m.prior_mean = -0.2;
  Evidence e;
  e.noisy = {{pt({0.1, 0.2}), 0.8}, {pt({0.7, 0.4}), -0.3}, {pt({0.5, 0.9}), 0.1}};
  e.noiseless = {{pt({0.4, 0.4}), 0.6}};
  const PointList qs = {pt({0.3, 0.3}), pt({0.35, 0.32}), pt({0.6, 0.5}), pt({0.1, 0.25}), pt({0.9, 0.9})};
  check_joint_moments(m, e, qs, false);
}

TEST(LazySample, JointMomentsMatchPosteriorWithSupport) {
  const GPModel m = se_model(0.3, 1.0, 0.05);
  Evidence e;
  e.noisy = {{pt({0.1, 0.2}), 0.8}, {pt({0.7, 0.4}), -0.3}};
  const PointList qs = {pt({0.3, 0.3}), pt({0.35, 0.32}), pt({0.6, 0.5}), pt({0.1, 0.25})};
  check_joint_moments(m, e, qs, true);
}

TEST(LazySample, PairCovarianceWithinThreeStandardErrors) {
  const GPModel m = se_model(0.4, 1.0, 0.01);
  Evidence e;
  e.noisy = {{pt({0.5}), 1.0}};
  const auto post = std::make_shared<const Posterior>(m, e);
  const Point x1 = pt({0.2}), x2 = pt({0.45});
  const int n = 2000;
  double s1 = 0, s2 = 0, s12 = 0;
  for (int s = 0; s < n; ++s) {
    LazyFunctionSample f(post, static_cast<std::uint64_t>(s) + 7777);
    const double a = f.query(x1), b = f.query(x2);
    s1 += a;
    s2 += b;
    s12 += a * b;
  }
  const double c = (s12 - s1 * s2 / n) / (n - 1);
  const double want = post->covariance(x1, x2);
  const double se = std::sqrt((want * want + post->latent_variance(x1) * post->latent_variance(x2)) / n);
  EXPECT_LE(std::abs(c - want), 3.0 * se);
}

TEST(Conditioner, IncrementalMatchesBulk) {
  Rng rng(21);
  const GPModel m = se_model(0.3, 1.0, 0.02);
  Evidence e;
  for (int i = 0; i < 6; ++i) e.noisy.push_back({random_point(rng, 2), std::normal_distribution<double>()(rng)});
  const auto post = std::make_shared<const Posterior>(m, e);
  std::vector<Observation> pairs;
  for (int i = 0; i < 12; ++i) pairs.push_back({random_point(rng, 2), std::normal_distribution<double>()(rng)});
  Conditioner inc(post);
  for (const auto& p : pairs) inc.append(p.x, p.y);
  const Conditioner bulk(post, pairs);
  Evidence full = e;
  full.noiseless = pairs;
  for (int i = 0; i < 20; ++i) {
    const Point q = random_point(rng, 2);
    const auto a = inc.predict(q);
    const auto b = bulk.predict(q);
    const auto want = posterior_marginal(m, full, q, false);
    EXPECT_NEAR(a.mean, b.mean, 1e-7);
    EXPECT_NEAR(a.variance, b.variance, 1e-7);
    EXPECT_NEAR(b.mean, want.mean, 1e-6);
    EXPECT_NEAR(b.variance, want.variance, 1e-6);
  }
}

TEST(Conditioner, BatchMatchesPointwise) {
  Rng rng(4);
  const GPModel m = se_model(0.3, 1.0, 0.02);
  Evidence e;
  for (int i = 0; i < 5; ++i) e.noisy.push_back({random_point(rng, 2), 0.1 * i});
  const auto post = std::make_shared<const Posterior>(m, e);
  std::vector<Observation> pairs;
  for (int i = 0; i < 4; ++i) pairs.push_back({random_point(rng, 2), -0.2 * i});
  const Conditioner c(post, pairs);
  PointList xs;
  for (int i = 0; i < 7; ++i) xs.push_back(random_point(rng, 2));
  const Matrix proj = post->project(xs);
  Vector bm(7), bv(7), means, vars;
  for (int i = 0; i < 7; ++i) {
    bm[i] = post->mean(xs[i], proj.col(i));
    bv[i] = post->latent_variance(xs[i], proj.col(i));
  }
  c.predict_batch(xs, proj, bm, bv, means, vars);
  for (int i = 0; i < 7; ++i) {
    const auto p = c.predict(xs[i]);
    EXPECT_NEAR(means[i], p.mean, 1e-12);
    EXPECT_NEAR(vars[i], p.variance, 1e-12);
  }
}

TEST(SupportFactor, SampleValuesMatchLazyLaw) {
  const GPModel m = se_model(0.3, 1.0, 0.01);
  const auto post = std::make_shared<const Posterior>(m, Evidence{});
  const PointList pts = {pt({0.0}), pt({0.5}), pt({0.5}), pt({1.0})};
  const auto sf = std::make_shared<const SupportFactor>(post, pts);
  EXPECT_EQ(sf->size(), 3u);
  EXPECT_EQ(sf->index_of(pt({1.0})).value(), 2u);
  EXPECT_FALSE(sf->index_of(pt({0.7})).has_value());
  LazyFunctionSample a(sf, 5), b(sf, 5);
  EXPECT_EQ(a.query(pt({0.5})), b.query(pt({0.5})));
  EXPECT_EQ(a.query(pt({0.7})), b.query(pt({0.7})));
}
