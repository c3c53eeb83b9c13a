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

#include "ctxsafe/environments.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>
#include <fmt/format.h>

#include "ctxsafe/errors.hpp"

namespace ctxsafe {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(base) ^ a) ^ (b * 0xD1B54A32D192ED03ULL));
}

void ContextDynamics::validate() const {
  if (contexts.size() < 2) throw InputError("ContextDynamics needs at least two contexts");
  const auto n = contexts.front().A.rows();
  const auto m = contexts.front().B.cols();
  if (n == 0 || m != 1) throw InputError("ContextDynamics supports single-input systems only");
  for (const auto& ctx : contexts) {
    if (ctx.A.rows() != n || ctx.A.cols() != n || ctx.B.rows() != n || ctx.B.cols() != m)
      throw InputError("all contexts must share state and input dimensions");
  }
  if (process_noise_std.size() != n) throw InputError("process_noise_std has wrong length");
  if ((process_noise_std.array() < 0.0).any()) throw InputError("process noise std must be >= 0");
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  if (failure_state < 0 || failure_state >= n) throw InputError("failure_state out of range");
  if (!(failure_threshold > 0.0)) throw InputError("failure_threshold must be positive");
  if (nominal_gain.size() != n) throw InputError("nominal_gain has wrong length");
  if (tuned_gain_index < 0 || tuned_gain_index >= n) throw InputError("tuned_gain_index out of range");
  if (!(abort_factor >= 1.0)) throw InputError("abort_factor must be >= 1");
}

double Excitation::at(int k, int steps, double dt) const {
  if (kind == Kind::none || amplitude == 0.0) return 0.0;
  const double t = k * dt;
  const double f = f0 + (f1 - f0) * static_cast<double>(k) / (2.0 * steps);
  return amplitude * std::sin(2.0 * std::numbers::pi * f * t);
}

EpisodeRecord simulate_episode(const ContextDynamics& dyn, ContextId c,
                               const Eigen::Ref<const Vector>& feedback_gain, int steps,
                               const Excitation& excitation, std::uint64_t seed) {
  dyn.validate();
  if (c < 0 || static_cast<std::size_t>(c) >= dyn.num_contexts())
    throw InputError(fmt::format("context {} out of range", c));
  if (steps < 1) throw InputError("steps must be >= 1");
  const auto n = dyn.state_dim();
  if (feedback_gain.size() != n) throw InputError("feedback gain has wrong length");

  const auto& sys = dyn.contexts[static_cast<std::size_t>(c)];
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  EpisodeRecord rec;
  rec.context_truth = c;
  rec.trajectory.dt = dyn.dt;
  rec.trajectory.context_truth = c;
  Matrix samples = Matrix::Zero(steps + 1, n);

  const double thr = dyn.failure_threshold;
  Vector x = Vector::Zero(n);
  Vector w(n);
  double sq_sum = 0.0;
  double min_margin = thr;
  int last = 0;
  bool diverged = false;
  for (int k = 0; k < steps; ++k) {
    const double u = -feedback_gain.dot(x) + excitation.at(k, steps, dyn.dt);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = dyn.process_noise_std(i) * normal(rng);
    x = sys.A * x + sys.B.col(0) * u + w;
    last = k + 1;
    if (!x.allFinite()) {
      diverged = true;
      break;
    }
    samples.row(last) = x.transpose();
    sq_sum += x.squaredNorm();
    const double excursion = std::abs(x(dyn.failure_state));
    min_margin = std::min(min_margin, thr - excursion);
    if (excursion > dyn.abort_factor * thr) {
      diverged = true;
      break;
    }
  }

  rec.trajectory.samples = samples.topRows(last + 1);
  rec.reward = diverged ? dyn.reward_floor
                        : std::max(dyn.reward_floor, -sq_sum / static_cast<double>(last));
  rec.constraints = Vector::Constant(1, std::max(min_margin, -thr));
  if (diverged) rec.constraints(0) = -thr;
  rec.failed = rec.constraints(0) < 0.0;
  return rec;
}

void ObservationChannel::validate() const {
  if (means.empty()) throw InputError("ObservationChannel needs at least one context");
  if (!(noise_std >= 0.0)) throw InputError("observation noise std must be >= 0");
  for (const auto& m : means)
    if (m.size() != means.front().size() || m.size() == 0)
      throw InputError("observation means must share a nonzero dimension");
}

Vector observe_context(const ObservationChannel& channel, ContextId c, std::uint64_t seed) {
  channel.validate();
  if (c < 0 || static_cast<std::size_t>(c) >= channel.means.size())
    throw InputError(fmt::format("context {} out of range", c));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector y = channel.means[static_cast<std::size_t>(c)];
  if (channel.noise_std > 0.0)
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += channel.noise_std * normal(rng);
  return y;
}

double LogisticProblem::p0(double y) { return 1.0 / (1.0 + std::exp(-y + 1.0)); }

std::vector<LabeledObservation> resample_logistic_labels(const std::vector<double>& inputs,
                                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<LabeledObservation> out;
  out.reserve(inputs.size());
  for (double y : inputs) {
    LabeledObservation obs;
    obs.y = Vector::Constant(1, y);
    obs.context = unif(rng) < LogisticProblem::p0(y) ? 0 : 1;
    obs.provenance = Provenance::ground_truth;
    out.push_back(std::move(obs));
  }
  return out;
}

LogisticProblem logistic_generator(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> inputs;
  inputs.reserve(150);
  const double bands[3][2] = {{-6.0, -4.7}, {0.5, 1.78}, {5.7, 7.0}};
  for (const auto& band : bands) {
    std::uniform_real_distribution<double> unif(band[0], band[1]);
    for (int i = 0; i < 50; ++i) inputs.push_back(unif(rng));
  }
  LogisticProblem problem;
  problem.data = resample_logistic_labels(inputs, rng());
  return problem;
}

LinearContext furuta_continuous(const PendulumParameters& p, double pole_scale) {
  if (!(pole_scale > 0.0)) throw InputError("pole_scale must be positive");
  const double mp = p.pole_mass * pole_scale;
  const double Lp = p.pole_length * pole_scale;
  const double l = 0.5 * Lp;
  const double Jp = mp * Lp * Lp / 12.0;
  const double Jr = p.arm_mass * p.arm_length * p.arm_length / 3.0;
  const double r = p.arm_length;

  // Inertia matrix [[a, c], [c, d]] of (arm, pole) about the upright point.
  const double a = Jr + mp * r * r;
  const double cc = mp * r * l;
  const double d = Jp + mp * l * l;
  const double det = a * d - cc * cc;
  const double mgl = mp * p.gravity * l;

  LinearContext sys;
  sys.A = Matrix::Zero(4, 4);
  sys.B = Matrix::Zero(4, 1);
  sys.A(0, 1) = 1.0;
  sys.A(2, 3) = 1.0;
  sys.A(1, 1) = -d * p.arm_damping / det;
  sys.A(1, 2) = cc * mgl / det;
  sys.A(1, 3) = -cc * p.pole_damping / det;
  sys.A(3, 1) = -cc * p.arm_damping / det;
  sys.A(3, 2) = a * mgl / det;
  sys.A(3, 3) = -a * p.pole_damping / det;
  sys.B(1, 0) = d / det;
  sys.B(3, 0) = cc / det;
  return sys;
}

LinearContext discretize(const LinearContext& continuous, double dt) {
  const auto n = continuous.A.rows();
  const auto m = continuous.B.cols();
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = continuous.A * dt;
  aug.topRightCorner(n, m) = continuous.B * dt;
  const Matrix e = aug.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

Matrix discrete_lqr(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  Matrix P = Q;
  for (int it = 0; it < 200000; ++it) {
    const Matrix BtP = B.transpose() * P;
    const Matrix gain = (R + BtP * B).ldlt().solve(BtP * A);
    const Matrix next = Q + A.transpose() * P * (A - B * gain);
    const Matrix sym = 0.5 * (next + next.transpose());
    const double change = (sym - P).cwiseAbs().maxCoeff();
    P = sym;
    if (change <= 1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff())) {
      const Matrix BtPf = B.transpose() * P;
      return (R + BtPf * B).ldlt().solve(BtPf * A);
    }
  }
  throw NumericalError("discrete Riccati iteration did not converge", 0.0);
}

double spectral_radius(const Matrix& M) {
  Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

ContextDynamics pendulum_contexts(const std::vector<double>& pole_scales,
                                  const PendulumParameters& params) {
  if (pole_scales.empty()) throw InputError("pole_scales must not be empty");
  ContextDynamics dyn;
  dyn.dt = 1.0 / 200.0;
  for (double scale : pole_scales)
    dyn.contexts.push_back(discretize(furuta_continuous(params, scale), dyn.dt));
  dyn.process_noise_std = Vector::Zero(4);
  dyn.process_noise_std << 0.0, 0.02, 0.0, 0.02;

  Vector q(4);
  q << 1.0, 0.1, 10.0, 0.1;
  Matrix Q = q.asDiagonal();
  Matrix R = Matrix::Constant(1, 1, 200.0);
  const auto& mid = dyn.contexts[dyn.contexts.size() / 2];
  dyn.nominal_gain = discrete_lqr(mid.A, mid.B, Q, R).row(0).transpose();
  dyn.failure_state = 2;
  dyn.failure_threshold = 0.5;
  dyn.tuned_gain_index = 2;
  return dyn;
}

ContextDynamics default_pendulum_contexts(const PendulumParameters& params) {
  return pendulum_contexts({1.0, 1.3, 1.6}, params);
}

}  // namespace ctxsafe
