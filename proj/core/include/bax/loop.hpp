#pragma once

#include "bax/acquisition.hpp"
#include "bax/algorithms.hpp"
#include "bax/gp.hpp"
#include "bax/metrics.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bax {

enum class AcquisitionKind { EIGe, EIGout, EIGv, Variance, EIGf, Random };

std::string to_string(AcquisitionKind kind);
/// Throws ConfigError naming the valid options.
AcquisitionKind parse_acquisition(std::string_view name);

struct CandidateSource {
  enum class Kind { FixedSet, UniformRandom };
  Kind kind = Kind::UniformRandom;
  PointList fixed;          // FixedSet
  std::size_t count = 1000;  // UniformRandom, redrawn every iteration
};

struct BaxConfig {
  std::size_t budget = 20;
  std::size_t num_posterior_samples = 100;
  AcquisitionKind acquisition = AcquisitionKind::EIGv;
  CandidateSource candidates;
  AbcPolicy abc;
  std::uint64_t seed = 0;
  std::size_t n_init = 0;
  bool record_acquisition_values = false;

  void validate() const;
};

/// A black-box problem: the noiseless objective in modeling space and its domain.
struct Problem {
  std::string name;
  Objective true_function;
  Box domain;
};

struct IterationRecord {
  int t = 0;
  Point x;
  double y = 0.0;
  std::size_t candidate_index = 0;
  double acquisition_max = 0.0;
  std::vector<double> acquisition_values;  // only when record_acquisition_values
  std::vector<AlgorithmOutput> sampled_outputs;  // posterior samples after this query
  std::vector<MetricValue> metrics;
};

struct RunRecord {
  BaxConfig config;
  GPModel model;
  std::string algorithm;
  std::string problem;
  std::vector<Observation> initial_data;
  std::vector<IterationRecord> iterations;
  std::vector<AlgorithmOutput> final_outputs;
  std::size_t true_evaluations = 0;
  bool valid = true;
  std::string error;
};

/// Everything a metric may inspect after iteration t: the posterior on D_{t+1}, a fresh
/// bundle drawn from it, and the data so far.
struct IterationState {
  int iteration = 0;
  std::shared_ptr<const Posterior> posterior;
  const SampleBundle* bundle = nullptr;
  const Evidence* data = nullptr;
};
using MetricCallback = std::function<std::vector<MetricValue>(const IterationState&)>;

/// ℓ independent algorithm runs, each on a fresh posterior function sample.
SampleBundle draw_bundle(std::shared_ptr<const Posterior> posterior, const Algorithm& algorithm,
                         std::size_t num_samples, std::uint64_t seed);

/// Index of the largest value; ties resolve to the lowest index. Throws NumericalError on NaN.
std::size_t optimize_acquisition(const std::vector<double>& values);

/// Medoid of the bundle's outputs (minimum summed distance; lowest index on ties).
AlgorithmOutput estimate_output(const SampleBundle& bundle, const OutputDistance& distance);
std::size_t medoid_index(const std::vector<AlgorithmOutput>& outputs, const OutputDistance& distance);

/// Runs the local-optimization algorithm on the posterior mean function.
LocalOptOutput refine_on_posterior_mean(const Posterior& posterior,
                                        const EvolutionStrategyAlgorithm& algorithm);

/// Acquisition values over `candidates` for every kind except Random.
std::vector<double> evaluate_acquisition(AcquisitionKind kind,
                                         const std::shared_ptr<const Posterior>& posterior,
                                         const SampleBundle& bundle, const PointList& candidates,
                                         const AbcPolicy& abc, std::uint64_t seed);

/// Sequential query loop: draw bundle, score candidates, query the argmax, observe a noisy
/// value, repeat `budget` times. Failures stop the loop and return a record marked invalid.
RunRecord run_infobax(const BaxConfig& config, const GPModel& model, const Problem& problem,
                      const Algorithm& algorithm, const MetricCallback& metrics = {});

}  // namespace bax
