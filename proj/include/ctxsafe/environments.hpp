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
#include <functional>
#include <optional>
#include <vector>

#include "ctxsafe/cme_classifier.hpp"
#include "ctxsafe/context_identifier.hpp"
#include "ctxsafe/kernel.hpp"

namespace ctxsafe {

/// Deterministic 64-bit seed mixing (splitmix64 finalizer over the inputs).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// x(k+1) = A x(k) + B u(k) + w(k)
struct LinearContext {
  Matrix A;
  Matrix B;
};

/// Context-dependent discrete-time linear plant with a single input.
struct ContextDynamics {
  std::vector<LinearContext> contexts;
  Vector process_noise_std;
  double dt = 0.005;
  /// State component whose magnitude defines failure.
  int failure_state = 2;
  double failure_threshold = 0.5;
  /// Nominal feedback row F (u = -F x); safe in every context.
  Vector nominal_gain;
  /// Entry of F tuned by the optimizer.
  int tuned_gain_index = 2;
  /// Rollouts stop once |x_failure| exceeds this multiple of the threshold.
  double abort_factor = 10.0;
  /// Lower clamp for the reported reward of failed rollouts.
  double reward_floor = -10.0;

  Eigen::Index state_dim() const { return contexts.empty() ? 0 : contexts.front().A.rows(); }
  std::size_t num_contexts() const { return contexts.size(); }
  void validate() const;
};

struct Excitation {
  enum class Kind { none, chirp };
  Kind kind = Kind::none;
  double f0 = 0.5;
  double f1 = 5.0;
  double amplitude = 0.0;

  static Excitation none() { return {}; }
  static Excitation chirp(double f0, double f1, double amplitude) {
    return {Kind::chirp, f0, f1, amplitude};
  }

  /// amplitude sin(2 pi (f0 + (f1 - f0) k / (2 steps)) k dt), or 0.
  double at(int k, int steps, double dt) const;
};

enum class DecisionPath { classified, identified };

/// One simulated experiment.
struct EpisodeRecord {
  Trajectory trajectory;
  double reward = 0.0;
  Vector constraints;
  bool failed = false;
  ContextId context_truth = 0;
  /// Decided context id; empty when a new context was declared.
  std::optional<ContextId> context_decided;
  DecisionPath decision_path = DecisionPath::identified;
};

/// Closed-loop rollout u(k) = -F x(k) + e(k) from x(0) = 0. Reward is the
/// negative mean squared state norm over x(1..); the single constraint is the
/// smallest margin threshold - |x_failure(k)|, floored at -threshold.
EpisodeRecord simulate_episode(const ContextDynamics& dyn, ContextId c,
                               const Eigen::Ref<const Vector>& feedback_gain, int steps,
                               const Excitation& excitation, std::uint64_t seed);

/// Noisy measurement channel revealing the context (e.g. a weight's height).
struct ObservationChannel {
  std::vector<Vector> means;
  double noise_std = 0.1;

  void validate() const;
};

Vector observe_context(const ObservationChannel& channel, ContextId c, std::uint64_t seed);

/// Synthetic two-class problem with p_0(y) = 1 / (1 + exp(-y + 1)).
struct LogisticProblem {
  std::vector<LabeledObservation> data;

  static double p0(double y);
  static double p1(double y) { return 1.0 - p0(y); }
};

/// 50 inputs uniform on each of [-6, -4.7], [0.5, 1.78], [5.7, 7]; labels
/// Bernoulli with P(context 0) = p_0(y).
LogisticProblem logistic_generator(std::uint64_t seed);

/// Redraws only the labels of `inputs`.
std::vector<LabeledObservation> resample_logistic_labels(const std::vector<double>& inputs,
                                                         std::uint64_t seed);

/// Physical constants of the linearized rotary (Furuta) pendulum.
struct PendulumParameters {
  double arm_mass = 0.095;       // kg
  double arm_length = 0.085;     // m
  double pole_mass = 0.024;      // kg
  double pole_length = 0.129;    // m
  double arm_damping = 5e-4;     // N m s / rad
  double pole_damping = 2.5e-5;  // N m s / rad
  double gravity = 9.81;         // m / s^2
};

/// Continuous-time linearization about the upright equilibrium, state
/// (arm angle, arm rate, pole angle, pole rate), input arm torque.
LinearContext furuta_continuous(const PendulumParameters& p, double pole_scale);

/// Zero-order-hold discretization via the matrix exponential.
LinearContext discretize(const LinearContext& continuous, double dt);

/// Infinite-horizon discrete LQR gain (Riccati fixed point).
Matrix discrete_lqr(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

double spectral_radius(const Matrix& M);

/// One pendulum context per pole scale (mass and length scaled together),
/// dt = 1/200 s, noise on the two rate states, and an LQR nominal gain
/// (Q = diag(1, 0.1, 10, 0.1), R = 200) designed on the middle context.
ContextDynamics pendulum_contexts(const std::vector<double>& pole_scales,
                                  const PendulumParameters& params = {});

/// pendulum_contexts({1.0, 1.3, 1.6}).
ContextDynamics default_pendulum_contexts(const PendulumParameters& params = {});

}  // namespace ctxsafe
