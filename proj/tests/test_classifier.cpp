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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <Eigen/LU>

#include "ctxsafe/cme_classifier.hpp"
#include "ctxsafe/environments.hpp"
#include "ctxsafe/errors.hpp"

namespace ctxsafe {
namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

LabeledObservation obs(double y, ContextId c, Provenance p = Provenance::ground_truth,
                       double delta = 0.0) {
  return {scalar(y), c, p, delta};
}

std::vector<LabeledObservation> random_data(std::mt19937_64& rng, int n, int contexts, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, contexts - 1);
  std::vector<LabeledObservation> out;
  for (int i = 0; i < n; ++i) {
    LabeledObservation o;
    o.y = Vector(dim);
    for (int j = 0; j < dim; ++j) o.y(j) = g(rng);
    o.context = i < contexts ? i : pick(rng);
    out.push_back(o);
  }
  return out;
}

TEST(Fit, SingleObservation) {
  const auto m = ClassifierModel::fit({obs(0.3, 0)}, KernelSpec::gaussian(1.0, 2.0), 0.1, 2.0);
  EXPECT_EQ(m.size(), 1);
  EXPECT_DOUBLE_EQ(m.gram_matrix().values(0, 0), 4.0);
  EXPECT_EQ(m.num_contexts(), 1);
}

TEST(Fit, EmptyThrows) {
  EXPECT_THROW(ClassifierModel::fit({}, KernelSpec::gaussian(1.0), 0.1, 2.0), InputError);
}

TEST(Fit, RejectsBadRegularization) {
  EXPECT_THROW(ClassifierModel::fit({obs(0, 0)}, KernelSpec::gaussian(1.0), 0.0, 2.0), InputError);
  EXPECT_THROW(ClassifierModel::fit({obs(0, 0)}, KernelSpec::gaussian(1.0), 0.1, -1.0),
               InputError);
}

TEST(Fit, InconsistentDimensionsThrow) {
  std::vector<LabeledObservation> d{obs(0, 0), {Vector::Zero(2), 1}};
  EXPECT_THROW(ClassifierModel::fit(d, KernelSpec::gaussian(1.0), 0.1, 2.0), InputError);
}

TEST(Fit, LabelRowsAreOneHot) {
  std::mt19937_64 rng(1);
  const auto m = ClassifierModel::fit(random_data(rng, 30, 4, 2), KernelSpec::gaussian(1.0),
                                      1e-3, 2.0);
  EXPECT_EQ(m.num_contexts(), 4);
  for (Eigen::Index r = 0; r < m.size(); ++r) {
    EXPECT_EQ(m.labels_onehot().row(r).sum(), 1.0);
    EXPECT_EQ(m.labels_onehot().row(r).maxCoeff(), 1.0);
  }
}

TEST(Fit, LogisticSetupNeedsNoJitter) {
  const auto problem = logistic_generator(42);
  ASSERT_EQ(problem.data.size(), 150u);
  const auto m = ClassifierModel::fit(problem.data, KernelSpec::gaussian(1.0), 1e-4, 2.0);
  EXPECT_EQ(m.gram_matrix().jitter_added, 0.0);
  EXPECT_DOUBLE_EQ(m.lam_bar(), 1.0);
}

TEST(Fit, LamBarIsMaxOfOneAndNLambda) {
  std::mt19937_64 rng(2);
  const auto m = ClassifierModel::fit(random_data(rng, 40, 2, 1), KernelSpec::gaussian(1.0),
                                      0.1, 2.0);
  EXPECT_DOUBLE_EQ(m.lam_bar(), 4.0);
  Matrix reg = m.gram_matrix().values + 4.0 * Matrix::Identity(40, 40);
  EXPECT_NEAR(m.logdet_bar(), std::log(reg.determinant()), 1e-9);
}

TEST(Fit, ConflictingDuplicatesAverage) {
  const auto m =
      ClassifierModel::fit({obs(1.0, 0), obs(1.0, 1)}, KernelSpec::gaussian(1.0), 0.25, 2.0);
  // (J + 0.5 I)^{-1} e_c with J = ones(2, 2), query at the shared point: 1 / (2 + 0.5).
  const Vector p = m.predict_raw(scalar(1.0));
  EXPECT_NEAR(p(0), 0.4, 1e-12);
  EXPECT_NEAR(p(1), 0.4, 1e-12);
}

TEST(PredictRaw, ScalarRidgeFormula) {
  const auto m = ClassifierModel::fit({obs(0.7, 0)}, KernelSpec::gaussian(1.0), 0.5, 2.0);
  EXPECT_NEAR(m.predict_raw(scalar(0.7))(0), 2.0 / 3.0, 1e-15);
}

TEST(PredictRaw, FarQueryVanishes) {
  const auto m = ClassifierModel::fit({obs(0, 0), obs(1, 1)}, KernelSpec::gaussian(1.0), 0.1, 2.0);
  EXPECT_LT(m.predict_raw(scalar(1e3)).cwiseAbs().maxCoeff(), 1e-300);
}

TEST(PredictRaw, SymmetricMidpoint) {
  const auto m =
      ClassifierModel::fit({obs(-1, 0), obs(1, 1)}, KernelSpec::gaussian(1.0), 0.1, 2.0);
  const Vector p = m.predict_raw(scalar(0.0));
  EXPECT_NEAR(p(0), p(1), 1e-15);
  EXPECT_GT(p(0), 0.0);
}

TEST(PredictRaw, DimensionMismatchThrows) {
  const auto m = ClassifierModel::fit({obs(0, 0)}, KernelSpec::gaussian(1.0), 0.1, 2.0);
  EXPECT_THROW(m.predict_raw(Vector::Zero(2)), InputError);
}

TEST(PredictRaw, MatchesDirectSolve) {
  std::mt19937_64 rng(3);
  const auto data = random_data(rng, 12, 3, 2);
  const auto m = ClassifierModel::fit(data, KernelSpec::gaussian(0.8), 0.05, 2.0);
  const Vector y = Vector::Constant(2, 0.2);
  const Matrix K = m.gram_matrix().values + 12 * 0.05 * Matrix::Identity(12, 12);
  const Vector ky = cross_kernel(m.kernel(), m.inputs(), y);
  const Vector expect = m.labels_onehot().transpose() * K.inverse() * ky;
  EXPECT_LE((m.predict_raw(y) - expect).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PredictNormalized, SumsToOneInUnitBox) {
  std::mt19937_64 rng(4);
  const auto m = ClassifierModel::fit(random_data(rng, 25, 3, 1), KernelSpec::gaussian(0.5),
                                      1e-3, 2.0);
  for (double y = -4.0; y <= 4.0; y += 0.25) {
    const Vector p = m.predict_normalized(scalar(y));
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_GE(p.minCoeff(), 0.0);
    EXPECT_LE(p.maxCoeff(), 1.0);
  }
}

TEST(PredictNormalized, UniformWhenEverythingClips) {
  std::vector<LabeledObservation> d{obs(0, 0), obs(1, 1), obs(2, 2), obs(3, 3)};
  const auto m = ClassifierModel::fit(d, KernelSpec::gaussian(0.1), 0.1, 2.0);
  const Vector p = m.predict_normalized(scalar(500.0));
  for (int c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(p(c), 0.25);
}

TEST(PredictNormalized, ClipThenRenormalize) {
  // Nearly interpolating fit: raw at a training point of context 1 is ~1 for
  // context 1 and can be slightly negative for context 0.
  std::vector<LabeledObservation> d{obs(0.0, 0), obs(0.3, 1), obs(0.6, 0)};
  const auto m = ClassifierModel::fit(d, KernelSpec::gaussian(0.3), 1e-6, 2.0);
  const Vector raw = m.predict_raw(scalar(0.3));
  const Vector p = m.predict_normalized(scalar(0.3));
  Vector expect = raw.cwiseMax(0.0).cwiseMin(1.0);
  expect /= expect.sum();
  EXPECT_LE((p - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PowerFunction, SoleTrainingPoint) {
  const auto m = ClassifierModel::fit({obs(0.2, 0)}, KernelSpec::gaussian(1.0), 0.5, 2.0);
  EXPECT_NEAR(m.power_function(scalar(0.2)), std::sqrt(1.0 / 3.0), 1e-15);
  EXPECT_NEAR(m.power_function(scalar(0.2)), 0.5774, 1e-4);
}

TEST(PowerFunction, FarQueryIsMagnitude) {
  const auto m = ClassifierModel::fit({obs(0.0, 0)}, KernelSpec::gaussian(1.0, 1.7), 0.5, 2.0);
  EXPECT_NEAR(m.power_function(scalar(1e3)), 1.7, 1e-14);
}

TEST(PowerFunction, VanishesAsLambdaShrinks) {
  double previous = 1.0;
  for (double lam : {1e-1, 1e-3, 1e-5, 1e-8}) {
    const auto m = ClassifierModel::fit({obs(0.0, 0)}, KernelSpec::gaussian(1.0), lam, 2.0);
    const double rho = m.power_function(scalar(0.0));
    EXPECT_LT(rho, previous);
    previous = rho;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(PowerFunction, BoundedAndNonIncreasingWhenAddingPoints) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 19;
    auto data = random_data(rng, n + 1, 1, 2);
    const auto spec = KernelSpec::gaussian(0.9, 1.3);
    // Fixed ridge: lam scaled so that n lam stays constant as n grows.
    const double ridge = 0.05;
    std::vector<LabeledObservation> smaller(data.begin(), data.end() - 1);
    const auto a = ClassifierModel::fit(smaller, spec, ridge / n, 2.0);
    const auto b = ClassifierModel::fit(data, spec, ridge / (n + 1), 2.0);
    for (int q = 0; q < 10; ++q) {
      Vector y(2);
      y << g(rng), g(rng);
      const double ra = a.power_function(y), rb = b.power_function(y);
      EXPECT_GE(ra, 0.0);
      EXPECT_LE(ra, 1.3 + 1e-12);
      EXPECT_LE(rb, ra + 1e-9);
    }
  }
}

TEST(Bounds, EstimationTerm) {
  const auto m = ClassifierModel::fit({obs(0.0, 0)}, KernelSpec::gaussian(1.0), 0.5, 2.0);
  const double rho = m.power_function(scalar(0.0));
  EXPECT_NEAR(m.bound_estimation(scalar(0.0)), std::sqrt(2.0) * rho, 1e-15);
  const auto far = ClassifierModel::fit({obs(0.0, 0)}, KernelSpec::gaussian(1.0), 0.5, 1.0);
  EXPECT_NEAR(far.bound_estimation(scalar(1e3)), 1.0, 1e-15);
  const auto tight = ClassifierModel::fit({obs(0.0, 0)}, KernelSpec::gaussian(1.0), 1e-12, 2.0);
  EXPECT_LT(tight.bound_estimation(scalar(0.0)), 1e-5);
}

TEST(Bounds, MeasurementTermHandValue) {
  // n = 1, lam = 1, K = [[1]], lam_bar = 1, delta = 1/e, rho = 1 (far query).
  const auto m = ClassifierModel::fit({obs(0.0, 0)}, KernelSpec::gaussian(1.0), 1.0, 2.0);
  EXPECT_NEAR(m.logdet_bar(), std::log(2.0), 1e-15);
  const double v = m.bound_measurement(scalar(1e3), std::exp(-1.0));
  EXPECT_NEAR(v, 0.25 * std::sqrt(std::log(2.0) + 2.0), 1e-14);
  EXPECT_NEAR(v, 0.4102, 1e-4);
}

TEST(Bounds, MeasurementTermRejectsBadDelta) {
  const auto m = ClassifierModel::fit({obs(0.0, 0)}, KernelSpec::gaussian(1.0), 1.0, 2.0);
  EXPECT_THROW(m.bound_measurement(scalar(0.0), 0.0), InputError);
  EXPECT_THROW(m.bound_measurement(scalar(0.0), 1.0), InputError);
}

TEST(Bounds, ContextIdHandValues) {
  const auto m = ClassifierModel::fit({obs(0.0, 0)}, KernelSpec::gaussian(1.0), 1.0, 2.0);
  const double d = 0.05;
  const double expect_scaled =
      0.9 * std::sqrt(std::log(2.0) + 2.0 * std::log(20.0)) /
      (2.0 * (std::log(0.95) - std::log(0.05)));
  // sqrt(ln 2 + 2 ln 20) = 2.5855, so the product is 0.3951.
  EXPECT_NEAR(expect_scaled, 0.3951, 1e-4);
  const auto far = m.bound_context_id(scalar(1e3), d, OffsetConvention::as_printed);
  EXPECT_NEAR(far.scaled, expect_scaled, 1e-14);
  EXPECT_NEAR(far.offset, 0.0, 1e-300);
  // At the training point K_y = 1 and 1^T (K + n lam I)^{-1} K_y = 1/2.
  const auto near = m.bound_context_id(scalar(0.0), d, OffsetConvention::as_printed);
  EXPECT_NEAR(near.offset, 0.475, 1e-15);
  const auto rate = m.bound_context_id(scalar(0.0), d, OffsetConvention::mismatch_rate);
  EXPECT_NEAR(rate.offset, 0.025, 1e-15);
  EXPECT_DOUBLE_EQ(rate.scaled, near.scaled);
}

TEST(Bounds, ContextIdRejectsHalfOrMore) {
  const auto m = ClassifierModel::fit({obs(0.0, 0)}, KernelSpec::gaussian(1.0), 1.0, 2.0);
  EXPECT_THROW(m.bound_context_id(scalar(0.0), 0.5), InputError);
  EXPECT_THROW(m.bound_context_id(scalar(0.0), 0.0), InputError);
}

TEST(Bounds, TotalIsSumOfFields) {
  std::mt19937_64 rng(6);
  auto data = random_data(rng, 10, 2, 4);
  for (std::size_t i = 0; i < data.size(); i += 3) {
    data[i].provenance = Provenance::identified;
    data[i].delta_mmd = 0.0233;
  }
  const auto m = ClassifierModel::fit(data, KernelSpec::gaussian(7.5, 1.5), 1e-4, 2.0);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int q = 0; q < 20; ++q) {
    Vector y(4);
    for (int j = 0; j < 4; ++j) y(j) = g(rng);
    for (auto conv : {OffsetConvention::as_printed, OffsetConvention::mismatch_rate}) {
      const auto b = m.total_bound(y, 0.05, 0.0233, {conv, true});
      EXPECT_TRUE(b.context_id_included);
      EXPECT_NEAR(b.total,
                  b.term_estimation + b.term_measurement + b.term_context_id +
                      b.offset_context_id,
                  1e-12);
      EXPECT_GE(b.rho, 0.0);
      EXPECT_LE(b.rho, 1.5 + 1e-12);
      EXPECT_NEAR(b.joint_probability, (1.0 - 0.0233) * 0.95, 1e-15);
    }
  }
}

TEST(Bounds, FarQueryLimit) {
  std::vector<LabeledObservation> d{obs(0, 0, Provenance::identified, 0.05), obs(1, 1)};
  const auto m = ClassifierModel::fit(d, KernelSpec::gaussian(1.0), 0.1, 2.0);
  const auto b = m.total_bound(scalar(1e3), 0.05, 0.05, {OffsetConvention::as_printed, true});
  EXPECT_NEAR(b.rho, 1.0, 1e-14);
  EXPECT_NEAR(b.term_estimation, std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(b.offset_context_id, 0.0, 1e-300);
  EXPECT_NEAR(b.term_context_id, m.bound_context_id(scalar(1e3), 0.05).scaled, 1e-15);
}

TEST(Bounds, ProvenanceAwareDropsIdentificationTerms) {
  const auto m = ClassifierModel::fit({obs(0, 0), obs(1, 1)}, KernelSpec::gaussian(1.0), 0.1, 2.0);
  ASSERT_TRUE(m.all_ground_truth());
  const auto aware = m.total_bound(scalar(0.5), 0.1, 0.05, {OffsetConvention::as_printed, true});
  EXPECT_FALSE(aware.context_id_included);
  EXPECT_EQ(aware.term_context_id, 0.0);
  EXPECT_EQ(aware.offset_context_id, 0.0);
  EXPECT_DOUBLE_EQ(aware.joint_probability, 0.9);
  const auto full = m.total_bound(scalar(0.5), 0.1, 0.05, {OffsetConvention::as_printed, false});
  EXPECT_TRUE(full.context_id_included);
  EXPECT_GT(full.total, aware.total);
}

TEST(Decide, ConfidentWhenLowerBoundClearsThreshold) {
  std::vector<LabeledObservation> d;
  for (int i = 0; i < 200; ++i) d.push_back(obs(0.0, 0));
  d.push_back(obs(50.0, 1));
  const auto m = ClassifierModel::fit(d, KernelSpec::gaussian(1.0), 1e-4, 2.0);
  const auto dec = m.decide(scalar(0.0), 0.8, 0.05, 0.05);
  const double lower = m.predict_raw(scalar(0.0))(0) - m.total_bound(scalar(0.0), 0.05, 0.05).total;
  EXPECT_TRUE(dec.confident);
  EXPECT_EQ(dec.context, 0);
  EXPECT_DOUBLE_EQ(dec.lower_bound, lower);
  EXPECT_GT(dec.lower_bound, 0.8);
}

TEST(Decide, UncertainReportsBestCandidate) {
  const auto m = ClassifierModel::fit({obs(0, 0), obs(3, 1)}, KernelSpec::gaussian(1.0), 0.1, 2.0);
  const auto dec = m.decide(scalar(2.9), 0.8, 0.05, 0.05);
  EXPECT_FALSE(dec.confident);
  EXPECT_EQ(dec.context, 1);
  EXPECT_LE(dec.lower_bound, 0.8);
}

TEST(Decide, TieGoesToSmallerId) {
  const auto m =
      ClassifierModel::fit({obs(-1, 4), obs(1, 2)}, KernelSpec::gaussian(1.0), 0.1, 2.0);
  // Far away every raw score is exactly 0, so the lower bounds tie.
  const auto dec = m.decide(scalar(1e3), 0.5, 0.05, 0.05);
  EXPECT_EQ(m.predict_raw(scalar(1e3))(0), m.predict_raw(scalar(1e3))(1));
  EXPECT_EQ(dec.context, 2);
  EXPECT_FALSE(dec.confident);
}

TEST(Decide, RaisingPSafeNeverCreatesConfidence) {
  std::mt19937_64 rng(8);
  std::vector<LabeledObservation> d;
  std::normal_distribution<double> g(0.0, 0.1);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 60; ++i) d.push_back(obs(c + g(rng), c));
  const auto m = ClassifierModel::fit(d, KernelSpec::gaussian(0.5), 1e-3, 2.0);
  for (double y = -0.5; y <= 2.5; y += 0.05) {
    bool was_confident = true;
    for (double p : {0.1, 0.3, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99}) {
      const bool now = m.decide(scalar(y), p, 0.05, 0.05).confident;
      EXPECT_TRUE(was_confident || !now) << "y=" << y << " p=" << p;
      was_confident = now;
    }
  }
}

TEST(AddContext, WidensLabelsAndMatchesFreshFit) {
  std::vector<LabeledObservation> base{obs(0, 0), obs(0.5, 1), obs(1.0, 0)};
  const auto m = ClassifierModel::fit(base, KernelSpec::gaussian(0.7), 0.01, 2.0);
  std::vector<LabeledObservation> extra{obs(3.0, 2), obs(3.2, 2)};
  const auto grown = m.add_context(extra);
  EXPECT_EQ(grown.num_contexts(), 3);
  EXPECT_EQ(grown.labels_onehot().col(2).head(3).sum(), 0.0);
  EXPECT_EQ(grown.labels_onehot().col(2).tail(2).sum(), 2.0);

  auto all = base;
  all.insert(all.end(), extra.begin(), extra.end());
  const auto fresh = ClassifierModel::fit(all, KernelSpec::gaussian(0.7), 0.01, 2.0);
  for (double y : {-1.0, 0.2, 1.7, 3.1}) {
    EXPECT_LE((grown.predict_raw(scalar(y)) - fresh.predict_raw(scalar(y))).cwiseAbs().maxCoeff(),
              1e-12);
    EXPECT_DOUBLE_EQ(grown.power_function(scalar(y)), fresh.power_function(scalar(y)));
  }
}

TEST(AddContext, AppendsColumnForUnsortedId) {
  const auto m = ClassifierModel::fit({obs(0, 5), obs(1, 7)}, KernelSpec::gaussian(1.0), 0.1, 2.0);
  const auto grown = m.add_context({obs(2, 1)});
  EXPECT_EQ(grown.context_ids(), (std::vector<ContextId>{5, 7, 1}));
  EXPECT_EQ(*grown.column_of(1), 2);
}

TEST(AddContext, Errors) {
  const auto m = ClassifierModel::fit({obs(0, 0)}, KernelSpec::gaussian(1.0), 0.1, 2.0);
  EXPECT_THROW(m.add_context({}), InputError);
  EXPECT_THROW(m.add_context({obs(1, 0)}), InputError);
  EXPECT_THROW(m.add_context({obs(1, 1), obs(2, 2)}), InputError);
}

TEST(RkhsNorm, Values) {
  EXPECT_EQ(estimate_rkhs_norm(Vector::Zero(3), GramMatrix{Matrix::Identity(3, 3)}), 0.0);
  EXPECT_DOUBLE_EQ(estimate_rkhs_norm(scalar(1.0), GramMatrix{Matrix::Constant(1, 1, 4.0)}), 2.0);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(5, 5);
  for (int i = 0; i < 25; ++i) a(i % 5, i / 5) = g(rng);
  const Matrix k = a * a.transpose();
  Vector alpha(5);
  for (int i = 0; i < 5; ++i) alpha(i) = g(rng);
  EXPECT_NEAR(estimate_rkhs_norm(alpha, GramMatrix{k}), std::sqrt(alpha.dot(k * alpha)), 1e-12);
}

// Centered Bernoulli variables: which reading of "sigma <= 1/4" makes the
// MGF bound hold.
TEST(SubGaussian, BernoulliConstant) {
  bool parameter_quarter_holds = true;
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (double s = -10.0; s <= 10.0; s += 0.05) {
      const double mgf = p * std::exp(s * (1.0 - p)) + (1.0 - p) * std::exp(-s * p);
      // Variance proxy sigma^2 = 1/4, i.e. exp(s^2 (1/2)^2 / 2).
      EXPECT_LE(mgf, std::exp(s * s * 0.25 / 2.0) * (1.0 + 1e-12)) << p << " " << s;
      if (mgf > std::exp(s * s * 0.0625 / 2.0)) parameter_quarter_holds = false;
    }
  }
  EXPECT_FALSE(parameter_quarter_holds);
}

double band_mae(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double bands[3][2] = {{-6.0, -4.7}, {0.5, 1.78}, {5.7, 7.0}};
  std::vector<double> inputs;
  for (const auto& b : bands) {
    std::uniform_real_distribution<double> u(b[0], b[1]);
    for (int i = 0; i < n / 3; ++i) inputs.push_back(u(rng));
  }
  const auto data = resample_logistic_labels(inputs, rng());
  const auto m = ClassifierModel::fit(data, KernelSpec::gaussian(1.0), 1e-4, 2.0);
  double total = 0.0;
  int count = 0;
  for (const auto& b : bands) {
    for (int q = 0; q < 20; ++q) {
      const double y = b[0] + (b[1] - b[0]) * (q + 0.5) / 20.0;
      total += std::abs(m.predict_raw(scalar(y))(0) - LogisticProblem::p0(y));
      ++count;
    }
  }
  return total / count;
}

TEST(Consistency, ErrorShrinksWithData) {
  std::vector<double> medians;
  for (int n : {50, 150, 450}) {
    std::vector<double> errs;
    for (std::uint64_t s = 1; s <= 10; ++s) errs.push_back(band_mae(n, s));
    std::sort(errs.begin(), errs.end());
    medians.push_back(0.5 * (errs[4] + errs[5]));
  }
  EXPECT_GT(medians[0], medians[1]);
  EXPECT_GT(medians[1], medians[2]);
}

// Estimation plus measurement terms cover the truth on ground-truth labels.
TEST(Coverage, LogisticResamples) {
  const auto problem = logistic_generator(123);
  std::vector<double> inputs;
  for (const auto& o : problem.data) inputs.push_back(o.y(0));
  const int resamples = 500;
  std::vector<double> queries;
  for (int q = 0; q < 100; ++q) queries.push_back(-6.0 + 13.0 * q / 99.0);
  for (double delta : {0.1, 0.05}) {
    std::vector<int> hits(queries.size(), 0);
    for (int r = 0; r < resamples; ++r) {
      const auto data = resample_logistic_labels(inputs, derive_seed(99, r));
      const auto m = ClassifierModel::fit(data, KernelSpec::gaussian(1.0), 1e-4, 2.0);
      for (std::size_t q = 0; q < queries.size(); ++q) {
        const Vector y = scalar(queries[q]);
        const double width = m.bound_estimation(y) + m.bound_measurement(y, delta);
        if (std::abs(LogisticProblem::p0(queries[q]) - m.predict_raw(y)(0)) <= width) ++hits[q];
      }
    }
    const double need = (1.0 - delta) - 0.03;
    for (std::size_t q = 0; q < queries.size(); ++q)
      EXPECT_GE(hits[q] / double(resamples), need) << "delta " << delta << " y " << queries[q];
  }
}

}  // namespace
}  // namespace ctxsafe
