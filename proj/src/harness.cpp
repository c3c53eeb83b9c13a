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

#include "ctxsafe/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "ctxsafe/errors.hpp"

namespace ctxsafe {

namespace {

// Purpose tags mixed into per-iteration seeds.
enum : std::uint64_t {
  kDrawContext = 1,
  kObserve = 2,
  kIdentifyEpisode = 3,
  kOptimizeEpisode = 4,
  kTraining = 5,
  kTestDraw = 6,
  kTestObserve = 7,
  kResample = 8,
  kReference = 9,
  kFresh = 10,
  kSampleA = 11,
  kSampleB = 12,
  kBootstrap = 13,
};

ContextId draw_context(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(count) - 1);
  return pick(rng);
}

ContextId draw_context(std::uint64_t seed, const std::vector<double>& probabilities) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (std::size_t c = 0; c + 1 < probabilities.size(); ++c) {
    acc += probabilities[c];
    if (u < acc) return static_cast<ContextId>(c);
  }
  return static_cast<ContextId>(probabilities.size() - 1);
}

bool is_loop(Scenario s) {
  return s == Scenario::full_loop || s == Scenario::pure_safeopt || s == Scenario::always_identify;
}

double kernel_bound(const IdentificationSettings& s) {
  return s.k_bound ? *s.k_bound : s.kernel.diagonal();
}

// Nystrom feature map for a Gaussian kernel on scalar data, built on an even
// landmark grid over [lo, hi].
class ScalarFeatures {
 public:
  ScalarFeatures(const KernelSpec& kernel, double lo, double hi) : kernel_(kernel) {
    const double step = kernel.lengthscale / 4.0;
    const int m = std::clamp(static_cast<int>(std::ceil((hi - lo) / step)) + 1, 2, 400);
    landmarks_.resize(m, 1);
    for (int i = 0; i < m; ++i) landmarks_(i, 0) = lo + (hi - lo) * i / (m - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram(kernel, landmarks_).values);
    const double cut = 1e-12 * es.eigenvalues().maxCoeff();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()(i) > cut) keep.push_back(i);
    projection_.resize(m, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k)
      projection_.col(static_cast<Eigen::Index>(k)) =
          es.eigenvectors().col(keep[k]) / std::sqrt(es.eigenvalues()(keep[k]));
  }

  // Rows are feature vectors of the samples.
  Matrix map(const Points& x) const { return cross_gram(kernel_, x, landmarks_) * projection_; }

 private:
  KernelSpec kernel_;
  Points landmarks_;
  Matrix projection_;
};

}  // namespace

double theorem2_probability(const Theorem2Deltas& d, double p_safe, DecisionPath path) {
  for (double v : {d.delta_safe, d.delta_class, d.delta_mmd})
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("deltas must lie in [0, 1]");
  if (!(p_safe >= 0.0 && p_safe <= 1.0)) throw InputError("p_safe must lie in [0, 1]");
  if (path == DecisionPath::identified) return (1.0 - d.delta_safe) * (1.0 - d.delta_mmd);
  return (1.0 - d.delta_safe) * p_safe * (1.0 - d.delta_class) * (1.0 - d.delta_mmd);
}

ContextDynamics make_dynamics(const ExperimentConfig& cfg) {
  const auto& p = cfg.pendulum;
  ContextDynamics dyn = pendulum_contexts(p.pole_scales);
  dyn.process_noise_std = Eigen::Map<const Vector>(p.process_noise_std.data(), 4);
  dyn.failure_threshold = p.failure_threshold;
  dyn.validate();
  return dyn;
}

ObservationChannel make_channel(const std::vector<double>& heights, double noise_std) {
  ObservationChannel ch;
  for (double h : heights) ch.means.push_back(Vector::Constant(1, h));
  ch.noise_std = noise_std;
  ch.validate();
  return ch;
}

Points make_grid(const OptimizerSettings& s) {
  Points grid(s.grid_points, 1);
  for (int i = 0; i < s.grid_points; ++i)
    grid(i, 0) = static_cast<double>(i) / (s.grid_points - 1);
  return grid;
}

double grid_gain(const OptimizerSettings& s, double u) {
  return s.gain_lower + u * (s.gain_upper - s.gain_lower);
}

RunResult run_algorithm1(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (!is_loop(cfg.scenario))
    throw ConfigError(fmt::format("scenario '{}' is not a loop scenario", to_string(cfg.scenario)));

  const ContextDynamics dyn = make_dynamics(cfg);
  const ObservationChannel channel =
      make_channel(cfg.pendulum.heights, cfg.pendulum.observation_noise);
  const auto& opt_cfg = cfg.optimizer;
  const auto& id_cfg = cfg.identification;
  const Points grid = make_grid(opt_cfg);

  const Vector nominal = dyn.nominal_gain;
  const double nominal_u = (nominal(dyn.tuned_gain_index) - opt_cfg.gain_lower) /
                           (opt_cfg.gain_upper - opt_cfg.gain_lower);
  if (nominal_u < 0.0 || nominal_u > 1.0)
    throw ConfigError(fmt::format("nominal gain {} lies outside the optimizer range",
                                  nominal(dyn.tuned_gain_index)));
  const auto seed_index = static_cast<Eigen::Index>(std::lround(nominal_u * (opt_cfg.grid_points - 1)));
  SafeOptState optimizer(grid, {seed_index}, opt_cfg.safeopt);

  ContextLibrary library(id_cfg.kernel, kernel_bound(id_cfg), id_cfg.shift);
  const SubsampleConfig subsample_cfg{id_cfg.shift, cfg.epsilon};
  const Excitation chirp = Excitation::chirp(id_cfg.chirp_f0, id_cfg.chirp_f1, id_cfg.chirp_amplitude);
  const BoundOptions bound_opts{cfg.classifier.context_id_offset, cfg.classifier.provenance_aware};
  const double delta_mmd = cfg.delta_mmd();

  std::optional<ClassifierModel> classifier;
  std::vector<LabeledObservation> training;
  std::map<ContextId, ContextId> truth_of;  // learned id -> context that created it

  RunResult result;
  RunMetrics& m = result.metrics;
  m.scenario = std::string(to_string(cfg.scenario));
  m.seed = seed;
  m.beta = opt_cfg.safeopt.beta;
  m.delta_mmd = delta_mmd;

  for (int it = 0; it < cfg.iterations; ++it) {
    const auto step = static_cast<std::uint64_t>(it);
    EpisodeLogRow row;
    row.iteration = it;
    const auto draw_seed = derive_seed(seed, step, kDrawContext);
    row.context_truth = cfg.pendulum.context_probabilities.empty()
                            ? draw_context(draw_seed, dyn.num_contexts())
                            : draw_context(draw_seed, cfg.pendulum.context_probabilities);
    row.observation = observe_context(channel, row.context_truth, derive_seed(seed, step, kObserve));

    bool identify_now = false;
    if (cfg.scenario == Scenario::pure_safeopt) {
      row.context_decided = 0;
      row.path = DecisionPath::classified;
    } else if (cfg.scenario == Scenario::always_identify || !classifier) {
      identify_now = true;
    } else {
      const ContextDecision d =
          classifier->decide(row.observation, cfg.p_safe, cfg.delta_class, delta_mmd, bound_opts);
      row.lower_bound = d.lower_bound;
      if (d.confident) {
        row.context_decided = d.context;
        row.path = DecisionPath::classified;
      } else {
        identify_now = true;
      }
    }

    if (identify_now) {
      row.path = DecisionPath::identified;
      ++m.identification_episodes;
      const EpisodeRecord probe = simulate_episode(dyn, row.context_truth, nominal, id_cfg.steps,
                                                   chirp, derive_seed(seed, step, kIdentifyEpisode));
      row.samples += static_cast<int>(probe.trajectory.length());
      if (probe.failed) {
        // No usable data: count the failure and skip the rest of the iteration.
        row.identification_failed = true;
        row.failed = true;
        ++m.failures;
        ++m.identification_failures;
        ++m.episodes;
        m.total_samples += row.samples;
        result.log.push_back(std::move(row));
        continue;
      }
      const IdentifyOutcome out = identify(probe.trajectory.select_columns(id_cfg.features),
                                           library, subsample_cfg, cfg.delta_mmd_prime);
      row.context_decided = out.context;
      row.new_context = out.new_context;
      if (out.new_context)
        truth_of[out.context] = row.context_truth;
      else if (truth_of.at(out.context) != row.context_truth)
        ++m.identification_errors;

      LabeledObservation obs;
      obs.y = row.observation;
      obs.context = out.context;
      obs.provenance = Provenance::identified;
      obs.delta_mmd = out.delta_mmd;
      training.push_back(std::move(obs));
      classifier = ClassifierModel::fit(training, cfg.classifier.kernel, cfg.classifier.lambda,
                                        cfg.classifier.gamma);
    } else {
      ++m.classified_episodes;
      if (cfg.scenario != Scenario::pure_safeopt) {
        auto& counts = m.per_context[row.context_truth];
        if (truth_of.at(row.context_decided) == row.context_truth)
          ++counts.correct;
        else
          ++counts.incorrect;
      }
    }

    const Eigen::Index idx = optimizer.propose_index(row.context_decided);
    row.gain = grid_gain(opt_cfg, grid(idx, 0));
    Vector gain = nominal;
    gain(dyn.tuned_gain_index) = row.gain;
    const EpisodeRecord ep = simulate_episode(dyn, row.context_truth, gain, cfg.pendulum.episode_steps,
                                              Excitation::none(), derive_seed(seed, step, kOptimizeEpisode));
    row.samples += static_cast<int>(ep.trajectory.length());
    row.reward = ep.reward;
    row.constraint = ep.constraints(0);
    row.failed = ep.failed;
    if (ep.failed) ++m.failures;
    ++m.episodes;
    m.total_samples += row.samples;

    ObjectiveObservation obs;
    obs.a = grid.row(idx).transpose();
    obs.c = row.context_decided;
    obs.f_meas = opt_cfg.reward_scale * ep.reward;
    obs.g_meas = ep.constraints;
    optimizer.observe(obs);
    result.log.push_back(std::move(row));
  }

  m.training_time_s = static_cast<double>(m.total_samples) * dyn.dt;
  m.contexts_learned = static_cast<int>(library.size());
  const Theorem2Deltas deltas{cfg.delta_safe, cfg.delta_class, delta_mmd};
  m.theorem2_identified = theorem2_probability(deltas, cfg.p_safe, DecisionPath::identified);
  m.theorem2_classified = theorem2_probability(deltas, cfg.p_safe, DecisionPath::classified);
  m.theorem2_probability = m.classified_episodes > 0 ? m.theorem2_classified : m.theorem2_identified;
  if (!library.empty()) result.library = std::move(library);
  result.safeopt_state = safeopt_snapshot(optimizer);
  return result;
}

SensitivityResult run_sensitivity(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto& s = cfg.sensitivity;
  const ObservationChannel channel = make_channel(s.heights, s.observation_noise);
  const auto contexts = s.heights.size();

  std::vector<LabeledObservation> training;
  for (std::size_t c = 0; c < contexts; ++c) {
    for (int i = 0; i < s.training_per_context; ++i) {
      LabeledObservation obs;
      obs.context = static_cast<ContextId>(c);
      obs.y = observe_context(channel, obs.context, derive_seed(seed, kTraining, c * 1000003ULL + i));
      training.push_back(std::move(obs));
    }
  }
  const auto model = ClassifierModel::fit(training, cfg.classifier.kernel, cfg.classifier.lambda,
                                          cfg.classifier.gamma);
  const BoundOptions bound_opts{cfg.classifier.context_id_offset, cfg.classifier.provenance_aware};

  // The same test draws are reused at every threshold.
  std::vector<ContextId> truth(static_cast<std::size_t>(s.decisions));
  std::vector<Vector> ys(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    truth[k] = draw_context(derive_seed(seed, kTestDraw, k), contexts);
    ys[k] = observe_context(channel, truth[k], derive_seed(seed, kTestObserve, k));
  }

  SensitivityResult result;
  result.decisions.resize(static_cast<Eigen::Index>(s.p_safe_values.size() * truth.size()), 6);
  Eigen::Index r = 0;
  for (double p : s.p_safe_values) {
    std::vector<SensitivityRow> rows(contexts);
    for (std::size_t c = 0; c < contexts; ++c) {
      rows[c].p_safe = p;
      rows[c].context = static_cast<ContextId>(c);
      rows[c].decided.assign(contexts, 0);
    }
    for (std::size_t k = 0; k < truth.size(); ++k) {
      const auto d = model.decide(ys[k], p, cfg.delta_class, cfg.delta_mmd(), bound_opts);
      auto& row = rows[static_cast<std::size_t>(truth[k])];
      if (d.confident) {
        ++row.confident;
        ++row.decided[static_cast<std::size_t>(d.context)];
        if (d.context == truth[k])
          ++row.correct;
        else
          ++row.incorrect;
      } else {
        ++row.uncertain;
      }
      result.decisions.row(r++) << p, truth[k], ys[k](0), d.confident ? 1.0 : 0.0, d.context,
          d.lower_bound;
    }
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  }
  return result;
}

LogisticResult run_logistic_bounds(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto& s = cfg.logistic;
  const LogisticProblem problem = logistic_generator(seed);
  std::vector<double> inputs;
  for (const auto& obs : problem.data) inputs.push_back(obs.y(0));

  const auto model = ClassifierModel::fit(problem.data, s.kernel, s.lambda, cfg.classifier.gamma);
  const BoundOptions bound_opts{cfg.classifier.context_id_offset, cfg.classifier.provenance_aware};

  LogisticResult result;
  result.resamples = s.resamples;
  Points queries(s.queries, 1);
  for (int q = 0; q < s.queries; ++q) {
    const double y = s.queries == 1 ? s.query_lower
                                    : s.query_lower + (s.query_upper - s.query_lower) * q / (s.queries - 1);
    queries(q, 0) = y;
    LogisticQueryRow row;
    row.y = y;
    row.truth = LogisticProblem::p0(y);
    const Vector yq = Vector::Constant(1, y);
    const auto col = model.column_of(0);
    row.estimate = col ? model.predict_raw(yq)(*col) : 0.0;
    row.bound = model.total_bound(yq, cfg.delta_class, cfg.delta_mmd(), bound_opts);
    result.rows.push_back(row);
  }

  std::vector<int> covered(static_cast<std::size_t>(s.queries), 0);
  for (int r = 0; r < s.resamples; ++r) {
    const auto data = resample_logistic_labels(inputs, derive_seed(seed, kResample, static_cast<std::uint64_t>(r)));
    const auto fitted = ClassifierModel::fit(data, s.kernel, s.lambda, cfg.classifier.gamma);
    const auto col = fitted.column_of(0);
    for (int q = 0; q < s.queries; ++q) {
      const auto& row = result.rows[static_cast<std::size_t>(q)];
      const Vector yq = Vector::Constant(1, row.y);
      const double est = col ? fitted.predict_raw(yq)(*col) : 0.0;
      const double width = fitted.total_bound(yq, cfg.delta_class, cfg.delta_mmd(), bound_opts).total;
      if (std::abs(row.truth - est) <= width) ++covered[static_cast<std::size_t>(q)];
    }
  }
  double sum = 0.0;
  result.min_coverage = 1.0;
  for (int q = 0; q < s.queries; ++q) {
    auto& row = result.rows[static_cast<std::size_t>(q)];
    row.coverage = static_cast<double>(covered[static_cast<std::size_t>(q)]) / s.resamples;
    sum += row.coverage;
    result.min_coverage = std::min(result.min_coverage, row.coverage);
  }
  result.mean_coverage = sum / s.queries;
  return result;
}

std::vector<ClosedFormRow> run_closed_form_check(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto& s = cfg.mmd_demo;
  const KernelSpec kernel = KernelSpec::gaussian(s.gamma, 1.0);
  // Offset so that the printed exponents differ from the reconciled ones even
  // for equal means.
  const double base_mean = 0.5;
  std::vector<ClosedFormRow> rows;
  std::uint64_t cell = 0;
  for (double dmu : s.mean_differences) {
    for (double sigma : s.sigmas) {
      ++cell;
      std::mt19937_64 rng_a(derive_seed(seed, kSampleA, cell));
      std::mt19937_64 rng_b(derive_seed(seed, kSampleB, cell));
      std::normal_distribution<double> na(base_mean, sigma);
      std::normal_distribution<double> nb(base_mean + dmu, sigma);
      Points a(s.samples, 1);
      Points b(s.samples, 1);
      for (int i = 0; i < s.samples; ++i) a(i, 0) = na(rng_a);
      for (int i = 0; i < s.samples; ++i) b(i, 0) = nb(rng_b);

      ClosedFormRow row;
      row.mean_difference = dmu;
      row.sigma = sigma;
      row.empirical = mmd_squared(a, b, kernel);
      row.closed_form = gaussian_mmd_population(base_mean, sigma, base_mean + dmu, sigma, s.gamma);
      const double scale = std::sqrt(2.0 * std::numbers::pi) * s.gamma;
      row.closed_form_as_printed =
          scale * closed_form_gaussian_mmd(base_mean, sigma, base_mean + dmu, sigma, s.gamma,
                                           ClosedFormVariant::as_printed);

      // Bootstrap over both samples. Replicates go through a Nystrom feature
      // map on a dense landmark grid, O(r) each instead of O(r^2).
      const double lo = std::min(a.minCoeff(), b.minCoeff()) - s.gamma;
      const double hi = std::max(a.maxCoeff(), b.maxCoeff()) + s.gamma;
      const ScalarFeatures features(kernel, lo, hi);
      const Matrix fa = features.map(a);
      const Matrix fb = features.map(b);
      std::mt19937_64 rng(derive_seed(seed, kBootstrap, cell));
      std::uniform_int_distribution<int> pick(0, s.samples - 1);
      std::vector<double> reps;
      reps.reserve(static_cast<std::size_t>(s.bootstrap));
      Vector ma(fa.cols());
      Vector mb(fb.cols());
      for (int rep = 0; rep < s.bootstrap; ++rep) {
        ma.setZero();
        mb.setZero();
        for (int i = 0; i < s.samples; ++i) ma += fa.row(pick(rng)).transpose();
        for (int i = 0; i < s.samples; ++i) mb += fb.row(pick(rng)).transpose();
        reps.push_back(((ma - mb) / s.samples).squaredNorm());
      }
      double mean = 0.0;
      for (double v : reps) mean += v;
      mean /= static_cast<double>(reps.size());
      double var = 0.0;
      for (double v : reps) var += (v - mean) * (v - mean);
      row.standard_error = std::sqrt(var / static_cast<double>(reps.size() - 1));
      row.z = row.standard_error > 0.0 ? (row.empirical - row.closed_form) / row.standard_error : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

CalibrationResult run_mmd_calibration(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto& id = cfg.identification;
  const ContextDynamics dyn = make_dynamics(cfg);
  const Excitation chirp = Excitation::chirp(id.chirp_f0, id.chirp_f1, id.chirp_amplitude);
  const double k_bound = kernel_bound(id);

  auto probe = [&](ContextId c, std::uint64_t s) {
    const auto rec = simulate_episode(dyn, c, dyn.nominal_gain, id.steps, chirp, s);
    if (rec.failed) throw NumericalError("identification probe failed under the nominal gain", 0.0);
    return subsample(rec.trajectory.select_columns(id.features), id.shift);
  };

  CalibrationResult out;
  out.min_cross_mmd = std::numeric_limits<double>::infinity();
  const auto contexts = static_cast<ContextId>(dyn.num_contexts());
  for (int run = 0; run < cfg.mmd_demo.calibration_runs; ++run) {
    std::vector<Points> refs;
    for (ContextId c = 0; c < contexts; ++c)
      refs.push_back(probe(c, derive_seed(seed, kReference, static_cast<std::uint64_t>(run) * 64 + c)));
    for (ContextId c = 0; c < contexts; ++c) {
      const Points fresh = probe(c, derive_seed(seed, kFresh, static_cast<std::uint64_t>(run) * 64 + c));
      for (ContextId d = 0; d < contexts; ++d) {
        const double v = mmd_squared(fresh, refs[static_cast<std::size_t>(d)], id.kernel);
        const auto t = MmdTestResult::make(d, v, fresh.rows(), k_bound, cfg.delta_mmd_prime, cfg.epsilon);
        out.accept_threshold = t.accept_threshold;
        out.required_eta = t.eta_required;
        if (c == d) {
          ++out.same_tests;
          if (!t.accepted) ++out.wrong_rejects;
          out.max_same_mmd = std::max(out.max_same_mmd, v);
        } else {
          ++out.cross_tests;
          if (t.accepted) ++out.wrong_accepts;
          out.min_cross_mmd = std::min(out.min_cross_mmd, v);
        }
      }
    }
  }
  if (out.cross_tests == 0) out.min_cross_mmd = 0.0;
  return out;
}

}  // namespace ctxsafe
