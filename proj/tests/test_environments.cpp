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

#include <cmath>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "ctxsafe/context_identifier.hpp"
#include "ctxsafe/environments.hpp"
#include "ctxsafe/errors.hpp"

namespace ctxsafe {
namespace {

Matrix closed_loop(const LinearContext& sys, const Vector& gain) {
  return sys.A - sys.B * gain.transpose();
}

TEST(Seeds, DeriveSeedIsDeterministicAndSpreads) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 50; ++a)
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(7, a, b));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
}

TEST(Pendulum, NominalGainStabilizesEveryContext) {
  const auto dyn = default_pendulum_contexts();
  ASSERT_EQ(dyn.num_contexts(), 3u);
  for (const auto& sys : dyn.contexts) EXPECT_LT(spectral_radius(closed_loop(sys, dyn.nominal_gain)), 1.0);
  // Open loop is unstable (upright pendulum).
  EXPECT_GT(spectral_radius(dyn.contexts[0].A), 1.0);
}

TEST(Pendulum, ContextsDiffer) {
  const auto dyn = default_pendulum_contexts();
  EXPECT_GT((dyn.contexts[0].A - dyn.contexts[2].A).norm(), 1e-4);
  EXPECT_GT((dyn.contexts[0].B - dyn.contexts[1].B).norm(), 1e-6);
}

TEST(Pendulum, NominalGainSafeUnderNoiseAndChirp) {
  const auto dyn = default_pendulum_contexts();
  int failures = 0;
  for (ContextId c = 0; c < 3; ++c) {
    for (std::uint64_t s = 0; s < 100; ++s) {
      failures += simulate_episode(dyn, c, dyn.nominal_gain, 2500, Excitation::none(), s).failed;
      failures += simulate_episode(dyn, c, dyn.nominal_gain, 2500,
                                   Excitation::chirp(0.5, 5.0, 0.1), 1000 + s).failed;
    }
  }
  EXPECT_EQ(failures, 0);
}

TEST(Discretize, DoubleIntegrator) {
  LinearContext ct{Matrix::Zero(2, 2), Matrix::Zero(2, 1)};
  ct.A(0, 1) = 1.0;
  ct.B(1, 0) = 1.0;
  const double h = 0.1;
  const auto d = discretize(ct, h);
  EXPECT_NEAR(d.A(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(d.A(0, 1), h, 1e-14);
  EXPECT_NEAR(d.A(1, 0), 0.0, 1e-14);
  EXPECT_NEAR(d.B(0, 0), h * h / 2.0, 1e-14);
  EXPECT_NEAR(d.B(1, 0), h, 1e-14);
}

TEST(Lqr, SatisfiesRiccatiAndStabilizes) {
  const auto dyn = default_pendulum_contexts();
  const auto& sys = dyn.contexts[1];
  Vector q(4);
  q << 1.0, 0.1, 10.0, 0.1;
  const Matrix Q = q.asDiagonal();
  const Matrix R = Matrix::Constant(1, 1, 200.0);
  const Matrix F = discrete_lqr(sys.A, sys.B, Q, R);
  EXPECT_LE((F.row(0).transpose() - dyn.nominal_gain).norm(), 1e-12);
  EXPECT_LT(spectral_radius(sys.A - sys.B * F), 1.0);
  // Scalar check: A = 1, B = 1, Q = 1, R = 1 gives P = (1 + sqrt 5) / 2, F = P / (1 + P).
  const Matrix one = Matrix::Ones(1, 1);
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  EXPECT_NEAR(discrete_lqr(one, one, one, one)(0, 0), p / (1.0 + p), 1e-10);
}

TEST(Simulate, ZeroNoiseStaysAtEquilibrium) {
  auto dyn = default_pendulum_contexts();
  dyn.process_noise_std.setZero();
  const auto rec = simulate_episode(dyn, 0, dyn.nominal_gain, 300, Excitation::none(), 5);
  EXPECT_EQ(rec.trajectory.samples.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(rec.reward, 0.0);
  EXPECT_FALSE(rec.failed);
  EXPECT_EQ(rec.constraints(0), dyn.failure_threshold);
  EXPECT_EQ(rec.trajectory.length(), 300);
  EXPECT_EQ(rec.trajectory.dt, dyn.dt);
  EXPECT_EQ(*rec.trajectory.context_truth, 0);
}

TEST(Simulate, DestabilizingGainFails) {
  const auto dyn = default_pendulum_contexts();
  Vector gain = dyn.nominal_gain;
  gain(dyn.tuned_gain_index) = 0.05;
  ASSERT_GT(spectral_radius(closed_loop(dyn.contexts[0], gain)), 1.0);
  const auto rec = simulate_episode(dyn, 0, gain, 2500, Excitation::none(), 1);
  EXPECT_TRUE(rec.failed);
  EXPECT_EQ(rec.constraints(0), -dyn.failure_threshold);
  EXPECT_LT(rec.trajectory.length(), 2500);
}

TEST(Simulate, FailureMatchesNegativeMargin) {
  const auto dyn = default_pendulum_contexts();
  for (double g : {0.15, 0.2, 0.22, 0.25, 0.3, 0.72, 1.2}) {
    Vector gain = dyn.nominal_gain;
    gain(dyn.tuned_gain_index) = g;
    for (ContextId c = 0; c < 3; ++c) {
      const auto rec = simulate_episode(dyn, c, gain, 1500, Excitation::none(), 3);
      EXPECT_EQ(rec.failed, rec.constraints(0) < 0.0);
      const double peak = rec.trajectory.samples.col(dyn.failure_state).cwiseAbs().maxCoeff();
      if (!rec.failed) {
        EXPECT_NEAR(rec.constraints(0), dyn.failure_threshold - peak, 1e-15);
      }
    }
  }
}

TEST(Simulate, RewardIsMeanSquaredState) {
  const auto dyn = default_pendulum_contexts();
  const auto rec = simulate_episode(dyn, 1, dyn.nominal_gain, 400, Excitation::none(), 9);
  const Matrix tail = rec.trajectory.samples.bottomRows(400);
  EXPECT_NEAR(rec.reward, -tail.rowwise().squaredNorm().mean(), 1e-12);
}

TEST(Simulate, BitIdenticalForSameSeed) {
  const auto dyn = default_pendulum_contexts();
  const auto chirp = Excitation::chirp(0.5, 5.0, 0.1);
  const auto a = simulate_episode(dyn, 2, dyn.nominal_gain, 1000, chirp, 77);
  const auto b = simulate_episode(dyn, 2, dyn.nominal_gain, 1000, chirp, 77);
  EXPECT_EQ(a.trajectory.samples, b.trajectory.samples);
  EXPECT_EQ(a.reward, b.reward);
  EXPECT_EQ(a.constraints, b.constraints);
  const auto c = simulate_episode(dyn, 2, dyn.nominal_gain, 1000, chirp, 78);
  EXPECT_NE(a.trajectory.samples, c.trajectory.samples);
}

TEST(Simulate, InputChecks) {
  const auto dyn = default_pendulum_contexts();
  EXPECT_THROW(simulate_episode(dyn, 3, dyn.nominal_gain, 10, Excitation::none(), 0), InputError);
  EXPECT_THROW(simulate_episode(dyn, 0, dyn.nominal_gain, 0, Excitation::none(), 0), InputError);
  EXPECT_THROW(simulate_episode(dyn, 0, Vector::Zero(3), 10, Excitation::none(), 0), InputError);
  auto one = dyn;
  one.contexts.resize(1);
  EXPECT_THROW(one.validate(), InputError);
}

TEST(Simulate, StationaryClosedLoop) {
  const auto dyn = default_pendulum_contexts();
  const auto rec = simulate_episode(dyn, 1, dyn.nominal_gain, 200000, Excitation::none(), 4);
  const Matrix s = rec.trajectory.samples.bottomRows(200000);
  const Matrix first = s.topRows(100000), second = s.bottomRows(100000);
  for (int col : {1, 3}) {
    const double v1 = (first.col(col).array() - first.col(col).mean()).square().mean();
    const double v2 = (second.col(col).array() - second.col(col).mean()).square().mean();
    EXPECT_NEAR(v2, v1, 0.1 * v1) << "column " << col;
    EXPECT_LT(std::abs(second.col(col).mean() - first.col(col).mean()), 0.1 * std::sqrt(v1));
  }
}

TEST(Excitation, ChirpFormula) {
  const auto e = Excitation::chirp(0.5, 5.0, 0.2);
  const int steps = 1000, k = 321;
  const double dt = 0.005;
  const double f = 0.5 + 4.5 * k / (2.0 * steps);
  EXPECT_NEAR(e.at(k, steps, dt), 0.2 * std::sin(2.0 * std::numbers::pi * f * k * dt), 1e-14);
  EXPECT_EQ(Excitation::none().at(k, steps, dt), 0.0);
  EXPECT_EQ(e.at(0, steps, dt), 0.0);
}

TEST(Observation, ChannelNoise) {
  ObservationChannel ch{{Vector::Constant(1, 1.0), Vector::Constant(1, 3.0)}, 0.1};
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double y = observe_context(ch, 1, derive_seed(5, i))(0);
    sum += y;
    sq += (y - 3.0) * (y - 3.0);
  }
  EXPECT_NEAR(sum / n, 3.0, 0.005);
  EXPECT_NEAR(std::sqrt(sq / n), 0.1, 0.005);
  EXPECT_THROW(observe_context(ch, 2, 0), InputError);
  ch.noise_std = 0.0;
  EXPECT_EQ(observe_context(ch, 0, 1)(0), 1.0);
}

TEST(Logistic, GeneratorBands) {
  EXPECT_DOUBLE_EQ(LogisticProblem::p0(1.0), 0.5);
  EXPECT_NEAR(LogisticProblem::p0(1.0) + LogisticProblem::p1(1.0), 1.0, 1e-15);
  const auto p = logistic_generator(3);
  ASSERT_EQ(p.data.size(), 150u);
  for (std::size_t i = 0; i < 150; ++i) {
    const double y = p.data[i].y(0);
    const double lo[3] = {-6.0, 0.5, 5.7}, hi[3] = {-4.7, 1.78, 7.0};
    EXPECT_GE(y, lo[i / 50]);
    EXPECT_LE(y, hi[i / 50]);
    EXPECT_TRUE(p.data[i].context == 0 || p.data[i].context == 1);
    EXPECT_EQ(p.data[i].provenance, Provenance::ground_truth);
  }
}

TEST(Logistic, LabelFrequencyFollowsP0) {
  std::vector<double> inputs(20000, 1.5);
  const auto d = resample_logistic_labels(inputs, 8);
  int zeros = 0;
  for (const auto& o : d) zeros += o.context == 0;
  EXPECT_NEAR(zeros / 20000.0, LogisticProblem::p0(1.5), 0.01);
}

// Contexts are told apart by the identification test at r = 50.
TEST(Pendulum, ContextsSeparatedAtEpisodeLength) {
  const auto dyn = default_pendulum_contexts();
  const auto chirp = Excitation::chirp(0.5, 5.0, 0.1);
  const auto kernel = KernelSpec::gaussian(1.0, 400.0);
  const double delta_mmd = composed_delta_mmd(0.05, 0.01);
  int wrong_accepts = 0, tests = 0;
  double min_cross = 1e300;
  for (std::uint64_t run = 0; run < 20; ++run) {
    std::vector<Points> sub;
    for (ContextId c = 0; c < 3; ++c) {
      const auto rec = simulate_episode(dyn, c, dyn.nominal_gain, 2500, chirp, derive_seed(run, c));
      sub.push_back(subsample(rec.trajectory.select_columns({3}), 50));
    }
    for (ContextId a = 0; a < 3; ++a) {
      for (ContextId b = a + 1; b < 3; ++b) {
        const double v = mmd_squared(sub[a], sub[b], kernel);
        min_cross = std::min(min_cross, v);
        ++tests;
        wrong_accepts += v < accept_threshold(50, kernel.diagonal(), 0.05);
      }
    }
  }
  EXPECT_EQ(wrong_accepts, 0);
  EXPECT_GT(min_cross, required_eta(50, kernel.diagonal(), delta_mmd));
  EXPECT_EQ(tests, 60);
}

}  // namespace
}  // namespace ctxsafe
