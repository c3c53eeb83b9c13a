// Copyright 2026 The ctxsafe Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxsafe/cme_classifier.hpp"
#include "ctxsafe/context_identifier.hpp"
#include "ctxsafe/environments.hpp"
#include "ctxsafe/io.hpp"
#include "ctxsafe/safe_optimizer.hpp"

namespace ctxsafe {

enum class Scenario { full_loop, pure_safeopt, always_identify, sensitivity, logistic_bounds, mmd_demo };

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view name);

struct ClassifierSettings {
  KernelSpec kernel = KernelSpec::gaussian(0.1, 1.0);
  double lambda = 1e-4;
  double gamma = 2.0;
  OffsetConvention context_id_offset = OffsetConvention::mismatch_rate;
  bool provenance_aware = true;
};

struct IdentificationSettings {
  KernelSpec kernel = KernelSpec::gaussian(1.0, 400.0);
  /// K with 0 <= k <= K; defaults to the kernel's k(y, y).
  std::optional<double> k_bound;
  int shift = 50;
  int steps = 2500;
  /// State columns fed to the MMD test.
  std::vector<int> features{3};
  double chirp_f0 = 0.5;
  double chirp_f1 = 5.0;
  double chirp_amplitude = 0.1;
};

struct PendulumSettings {
  std::vector<double> pole_scales{1.0, 1.3, 1.6};
  std::vector<double> process_noise_std{0.0, 0.02, 0.0, 0.02};
  double failure_threshold = 0.5;
  int episode_steps = 2500;
  /// Context-revealing measurement (height of the attached weight).
  std::vector<double> heights{1.0, 2.0, 3.0};
  double observation_noise = 0.1;
  /// Probability of each context per iteration; empty means uniform.
  std::vector<double> context_probabilities;
};

struct OptimizerSettings {
  SafeOptConfig safeopt{.noise_variance = 1e-2};
  /// Tuned gain range, mapped onto [0, 1] for the GP.
  double gain_lower = 0.15;
  double gain_upper = 1.15;
  int grid_points = 101;
  /// Reward fed to the GP is reward_scale * reward.
  double reward_scale = 0.1;
};

struct SensitivitySettings {
  std::vector<double> heights{1.0, 2.0, 2.5, 2.75, 2.875};
  std::vector<double> p_safe_values{0.5, 0.6, 0.7, 0.8, 0.9};
  int decisions = 2000;
  int training_per_context = 200;
  double observation_noise = 0.1;
};

struct LogisticSettings {
  KernelSpec kernel = KernelSpec::gaussian(1.0, 1.0);
  double lambda = 1e-4;
  int resamples = 500;
  int queries = 100;
  double query_lower = -6.0;
  double query_upper = 7.0;
};

struct MmdDemoSettings {
  int samples = 10000;
  double gamma = 1.0;
  std::vector<double> mean_differences{0.0, 0.5, 1.0};
  std::vector<double> sigmas{0.5, 1.0, 1.5};
  int bootstrap = 200;
  int calibration_runs = 100;
};

struct ClassifySettings {
  std::string dataset;
  std::vector<std::vector<double>> queries;
  /// Optional; relative paths land in the --out directory.
  std::string model_out;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::full_loop;
  double p_safe = 0.8;
  double delta_class = 0.05;
  double delta_mmd_prime = 0.05;
  double epsilon = 0.01;
  double delta_safe = 0.05;
  int iterations = 200;
  std::vector<std::uint64_t> seeds{1};

  ClassifierSettings classifier;
  IdentificationSettings identification;
  PendulumSettings pendulum;
  OptimizerSettings optimizer;
  SensitivitySettings sensitivity;
  LogisticSettings logistic;
  MmdDemoSettings mmd_demo;
  ClassifySettings classify;

  double delta_mmd() const { return composed_delta_mmd(delta_mmd_prime, epsilon); }
  /// Throws ConfigError on any out-of-range field.
  void validate() const;
};

/// Unknown keys are rejected; missing keys keep their defaults. Relative paths
/// are resolved against `base_dir`.
ExperimentConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

struct Theorem2Deltas {
  double delta_safe = 0.0;
  double delta_class = 0.0;
  double delta_mmd = 0.0;
};

/// identified: (1 - d_safe)(1 - d_mmd); classified: (1 - d_safe) p_safe (1 - d_class)(1 - d_mmd).
double theorem2_probability(const Theorem2Deltas& deltas, double p_safe, DecisionPath path);

struct ContextCounts {
  int correct = 0;
  int incorrect = 0;
};

struct RunMetrics {
  std::string scenario;
  std::uint64_t seed = 0;
  int failures = 0;
  int episodes = 0;
  int identification_episodes = 0;
  int classified_episodes = 0;
  int identification_failures = 0;
  long long total_samples = 0;
  double training_time_s = 0.0;
  int contexts_learned = 0;
  int identification_errors = 0;
  /// Classified-path decisions keyed by true context.
  std::map<ContextId, ContextCounts> per_context;
  double theorem2_probability = 0.0;
  double theorem2_identified = 0.0;
  double theorem2_classified = 0.0;
  double beta = 0.0;
  double delta_mmd = 0.0;
};

struct EpisodeLogRow {
  int iteration = 0;
  ContextId context_truth = 0;
  Vector observation;
  DecisionPath path = DecisionPath::identified;
  /// Learned id used by the optimizer.
  ContextId context_decided = 0;
  bool new_context = false;
  double lower_bound = 0.0;
  double gain = 0.0;
  double reward = 0.0;
  double constraint = 0.0;
  bool failed = false;
  bool identification_failed = false;
  int samples = 0;
};

struct RunResult {
  RunMetrics metrics;
  std::vector<EpisodeLogRow> log;
  std::optional<ContextLibrary> library;
  std::optional<Json> safeopt_state;
};

/// Environment objects derived from the config.
ContextDynamics make_dynamics(const ExperimentConfig& cfg);
ObservationChannel make_channel(const std::vector<double>& heights, double noise_std);
/// Grid in normalized coordinates u in [0, 1] and its gain values.
Points make_grid(const OptimizerSettings& s);
double grid_gain(const OptimizerSettings& s, double u);

RunResult run_algorithm1(const ExperimentConfig& cfg, std::uint64_t seed);

struct SensitivityRow {
  double p_safe = 0.0;
  ContextId context = 0;
  int confident = 0;
  int correct = 0;
  int incorrect = 0;
  int uncertain = 0;
  /// confusion[d] = confident decisions for context d.
  std::vector<int> decided;
};

struct SensitivityResult {
  std::vector<SensitivityRow> rows;
  /// Per-decision log: p_safe, truth, observation, confident, decided, lower bound.
  Matrix decisions;
};

SensitivityResult run_sensitivity(const ExperimentConfig& cfg, std::uint64_t seed);

struct LogisticQueryRow {
  double y = 0.0;
  double truth = 0.0;
  double estimate = 0.0;
  BoundBreakdown bound;
  double coverage = 0.0;
};

struct LogisticResult {
  std::vector<LogisticQueryRow> rows;
  double min_coverage = 0.0;
  double mean_coverage = 0.0;
  int resamples = 0;
};

LogisticResult run_logistic_bounds(const ExperimentConfig& cfg, std::uint64_t seed);

struct ClosedFormRow {
  double mean_difference = 0.0;
  double sigma = 0.0;
  double empirical = 0.0;
  double standard_error = 0.0;
  double closed_form = 0.0;
  double closed_form_as_printed = 0.0;
  double z = 0.0;
};

struct CalibrationResult {
  int same_tests = 0;
  int wrong_rejects = 0;
  int cross_tests = 0;
  int wrong_accepts = 0;
  double min_cross_mmd = 0.0;
  double max_same_mmd = 0.0;
  double accept_threshold = 0.0;
  double required_eta = 0.0;
  double wrong_reject_rate() const { return same_tests ? double(wrong_rejects) / same_tests : 0.0; }
  double wrong_accept_rate() const { return cross_tests ? double(wrong_accepts) / cross_tests : 0.0; }
};

/// Biased MMD^2 of r samples against the closed form, on the configured grid.
std::vector<ClosedFormRow> run_closed_form_check(const ExperimentConfig& cfg, std::uint64_t seed);
/// Seeded pendulum identification runs: reference and fresh trajectory per
/// context, each fresh one tested against every stored context.
CalibrationResult run_mmd_calibration(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace ctxsafe
