#include "bax/loop.hpp"

#include "bax/errors.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace bax {

namespace {

constexpr std::uint64_t kStreamBundle = 1;
constexpr std::uint64_t kStreamCandidates = 2;
constexpr std::uint64_t kStreamRandom = 3;
constexpr std::uint64_t kStreamNoise = 4;
constexpr std::uint64_t kStreamAcquisition = 5;
constexpr std::uint64_t kStreamInit = 6;

PointList uniform_points(const Box& box, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  PointList out(count, Point(box.dimension()));
  for (auto& p : out) {
    for (Eigen::Index d = 0; d < box.dimension(); ++d) {
      p[d] = std::uniform_real_distribution<double>(box.lower[d], box.upper[d])(rng);
    }
  }
  return out;
}

}  // namespace

std::string to_string(AcquisitionKind kind) {
  switch (kind) {
    case AcquisitionKind::EIGe: return "EIGe";
    case AcquisitionKind::EIGout: return "EIGout";
    case AcquisitionKind::EIGv: return "EIGv";
    case AcquisitionKind::Variance: return "Variance";
    case AcquisitionKind::EIGf: return "EIGf";
    case AcquisitionKind::Random: return "Random";
  }
  return "unknown";
}

AcquisitionKind parse_acquisition(std::string_view name) {
  for (auto k : {AcquisitionKind::EIGe, AcquisitionKind::EIGout, AcquisitionKind::EIGv,
                 AcquisitionKind::Variance, AcquisitionKind::EIGf, AcquisitionKind::Random}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown acquisition '" + std::string(name) +
                    "' (valid: EIGe, EIGout, EIGv, Variance, EIGf, Random)");
}

void BaxConfig::validate() const {
  if (budget < 1) throw ConfigError("budget must be >= 1");
  if (num_posterior_samples < 1) throw ConfigError("num_posterior_samples must be >= 1");
  if (candidates.kind == CandidateSource::Kind::FixedSet && candidates.fixed.empty()) {
    throw ConfigError("fixed candidate set is empty");
  }
  if (candidates.kind == CandidateSource::Kind::UniformRandom && candidates.count < 1) {
    throw ConfigError("candidate count must be >= 1");
  }
  if (acquisition == AcquisitionKind::EIGout) {
    if (abc.min_ball_size < 1) throw ConfigError("abc.min_ball_size must be >= 1");
    if (abc.min_ball_size > num_posterior_samples) {
      throw ConfigError("abc.min_ball_size exceeds num_posterior_samples");
    }
    if (abc.entropy_mc_draws < 1) throw ConfigError("abc.entropy_mc_draws must be >= 1");
  }
}

SampleBundle draw_bundle(std::shared_ptr<const Posterior> posterior, const Algorithm& algorithm,
                         std::size_t num_samples, std::uint64_t seed) {
  SampleBundle bundle;
  bundle.draws.reserve(num_samples);
  std::shared_ptr<const SupportFactor> support;
  if (auto points = algorithm.finite_support()) {
    support = std::make_shared<const SupportFactor>(posterior, *points);
  }
  for (std::size_t j = 0; j < num_samples; ++j) {
    const std::uint64_t s = derive_seed(seed, {j});
    LazyFunctionSample sample = support ? LazyFunctionSample(support, s) : LazyFunctionSample(posterior, s);
    bundle.draws.push_back(algorithm.run([&sample](const Point& x) { return sample.query(x); }));
  }
  return bundle;
}

std::size_t optimize_acquisition(const std::vector<double>& values) {
  if (values.empty()) throw InputError("acquisition optimization needs at least one candidate");
  std::size_t best = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) {
      throw NumericalError("acquisition value is NaN at candidate " + std::to_string(i),
                           NumericalError::Diagnostics{});
    }
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t medoid_index(const std::vector<AlgorithmOutput>& outputs, const OutputDistance& distance) {
  if (outputs.empty()) throw InputError("medoid of an empty set");
  const std::size_t n = outputs.size();
  std::vector<double> total(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(outputs[i], outputs[j]);
      total[i] += d;
      total[j] += d;
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (total[i] < total[best]) best = i;
  }
  return best;
}

AlgorithmOutput estimate_output(const SampleBundle& bundle, const OutputDistance& distance) {
  const auto outputs = bundle.outputs();
  return outputs[medoid_index(outputs, distance)];
}

LocalOptOutput refine_on_posterior_mean(const Posterior& posterior,
                                        const EvolutionStrategyAlgorithm& algorithm) {
  auto run = algorithm.run([&posterior](const Point& x) { return posterior.mean(x); });
  return std::get<LocalOptOutput>(run.output);
}

std::vector<double> evaluate_acquisition(AcquisitionKind kind,
                                         const std::shared_ptr<const Posterior>& posterior,
                                         const SampleBundle& bundle, const PointList& candidates,
                                         const AbcPolicy& abc, std::uint64_t seed) {
  Vector values;
  switch (kind) {
    case AcquisitionKind::EIGe:
      values = ExactConditioningEIG(posterior, bundle, ExactConditioningEIG::Target::ExecutionPath)
                   .evaluate(candidates);
      break;
    case AcquisitionKind::EIGv:
      values = ExactConditioningEIG(posterior, bundle, ExactConditioningEIG::Target::Subsequence)
                   .evaluate(candidates);
      break;
    case AcquisitionKind::EIGout:
      values = OutputEIG(posterior, bundle, OutputDistance::for_outputs(bundle.outputs()), abc)
                   .evaluate(candidates, seed);
      break;
    case AcquisitionKind::Variance:
      values.resize(static_cast<Eigen::Index>(candidates.size()));
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        values[static_cast<Eigen::Index>(i)] = baseline_variance(*posterior, candidates[i]);
      }
      break;
    case AcquisitionKind::EIGf:
      values.resize(static_cast<Eigen::Index>(candidates.size()));
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        values[static_cast<Eigen::Index>(i)] = baseline_eig_f(*posterior, candidates[i]);
      }
      break;
    case AcquisitionKind::Random:
      throw InputError("the Random baseline has no acquisition values");
  }
  return {values.data(), values.data() + values.size()};
}

RunRecord run_infobax(const BaxConfig& config, const GPModel& model, const Problem& problem,
                      const Algorithm& algorithm, const MetricCallback& metrics) {
  config.validate();
  model.validate();
  problem.domain.validate();

  RunRecord record;
  record.config = config;
  record.model = model;
  record.algorithm = algorithm.name();
  record.problem = problem.name;

  Evidence data;
  std::normal_distribution<double> normal;
  auto observe = [&](const Point& x, std::uint64_t noise_seed) {
    Rng rng(noise_seed);
    const double y = problem.true_function(x) + std::sqrt(model.noise_variance) * normal(rng);
    ++record.true_evaluations;
    data.noisy.push_back({x, y});
    return y;
  };
  auto candidates_for = [&](std::size_t t) -> PointList {
    if (config.candidates.kind == CandidateSource::Kind::FixedSet) return config.candidates.fixed;
    return uniform_points(problem.domain, config.candidates.count,
                          derive_seed(config.seed, {kStreamCandidates, t}));
  };
  auto record_metrics = [&](IterationRecord& it, const std::shared_ptr<const Posterior>& post,
                            const SampleBundle& bundle) {
    it.sampled_outputs = bundle.outputs();
    if (metrics) it.metrics = metrics(IterationState{it.t, post, &bundle, &data});
  };

  try {
    for (std::size_t i = 0; i < config.n_init; ++i) {
      const std::uint64_t s = derive_seed(config.seed, {kStreamInit, i});
      Point x;
      if (config.candidates.kind == CandidateSource::Kind::FixedSet) {
        x = config.candidates.fixed[baseline_random(config.candidates.fixed.size(), s)];
      } else {
        x = uniform_points(problem.domain, 1, s).front();
      }
      observe(x, derive_seed(config.seed, {kStreamInit, i, kStreamNoise}));
      record.initial_data.push_back(data.noisy.back());
    }

    for (std::size_t t = 1; t <= config.budget; ++t) {
      auto posterior = std::make_shared<const Posterior>(model, data);
      const SampleBundle bundle = draw_bundle(posterior, algorithm, config.num_posterior_samples,
                                              derive_seed(config.seed, {kStreamBundle, t}));
      if (t > 1) record_metrics(record.iterations.back(), posterior, bundle);

      const PointList candidates = candidates_for(t);
      IterationRecord it;
      it.t = static_cast<int>(t);
      if (config.acquisition == AcquisitionKind::Random) {
        it.candidate_index =
            baseline_random(candidates.size(), derive_seed(config.seed, {kStreamRandom, t}));
      } else {
        const auto values =
            evaluate_acquisition(config.acquisition, posterior, bundle, candidates, config.abc,
                                 derive_seed(config.seed, {kStreamAcquisition, t}));
        it.candidate_index = optimize_acquisition(values);
        it.acquisition_max = values[it.candidate_index];
        if (config.record_acquisition_values) it.acquisition_values = values;
      }
      it.x = candidates[it.candidate_index];
      it.y = observe(it.x, derive_seed(config.seed, {kStreamNoise, t}));
      record.iterations.push_back(std::move(it));
    }

    auto posterior = std::make_shared<const Posterior>(model, data);
    const SampleBundle bundle =
        draw_bundle(posterior, algorithm, config.num_posterior_samples,
                    derive_seed(config.seed, {kStreamBundle, config.budget + 1}));
    record_metrics(record.iterations.back(), posterior, bundle);
    record.final_outputs = bundle.outputs();
  } catch (const std::exception& e) {
    record.valid = false;
    record.error = e.what();
  }
  return record;
}

}  // namespace bax
