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

#include <map>
#include <optional>
#include <vector>

#include "ctxsafe/cme_classifier.hpp"
#include "ctxsafe/kernel.hpp"
#include "ctxsafe/linalg.hpp"

namespace ctxsafe {

struct ObjectiveObservation {
  Vector a;
  ContextId c = 0;
  double f_meas = 0.0;
  Vector g_meas;
};

struct SafeOptConfig {
  KernelSpec parameter_kernel = KernelSpec::matern52(0.1, 1.0);
  KernelSpec context_kernel = KernelSpec::gaussian(1.0, 1.0);
  double noise_variance = 1e-4;
  double beta = 3.0;
  int num_constraints = 1;

  void validate() const;
};

/// Posterior mean and variance of one surrogate at one input.
struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

/// Per-context confidence intervals and sets over the parameter grid.
/// Column 0 of lower/upper is the reward, columns 1..q the constraints.
struct ContextSets {
  Matrix lower;
  Matrix upper;
  std::vector<bool> safe;
  std::vector<bool> expanders;
  std::vector<bool> maximizers;
};

/// Contextual SafeOpt over a finite parameter grid.
///
/// Reward and constraints have independent zero-mean GP surrogates sharing the
/// product kernel k_A(a, a') k_C(c, c'). Intervals are intersected with their
/// previous values, so they never widen. Seed points stay in every safe set.
class SafeOptState {
 public:
  SafeOptState(Points grid, std::vector<Eigen::Index> seed_indices, SafeOptConfig config);

  const Points& grid() const { return grid_; }
  const SafeOptConfig& config() const { return config_; }
  const std::vector<Eigen::Index>& seeds() const { return seeds_; }
  const std::vector<ObjectiveObservation>& data() const { return data_; }
  const std::map<ContextId, ContextSets>& contexts() const { return sets_; }

  /// Registers a context (prior intervals, seed-only safe set) if unseen.
  void ensure_context(ContextId c);
  const ContextSets& sets(ContextId c) const;

  /// function 0 is the reward, 1..q the constraints.
  Posterior posterior(const Eigen::Ref<const Vector>& a, ContextId c, int function) const;

  /// Recomputes safe set, maximizers and expanders for context c.
  void update_sets(ContextId c);

  /// Grid index of the next evaluation for context c.
  Eigen::Index propose_index(ContextId c);
  Vector propose(ContextId c) { return grid_.row(propose_index(c)).transpose(); }

  /// Adds a measurement and refreshes intervals and sets of every context.
  void observe(const ObjectiveObservation& obs);

  /// Index of the safe grid point with the largest reward lower bound.
  Eigen::Index best_safe_index(ContextId c) const;

 private:
  void refit();
  // Posterior means (N x functions) and covariance over the grid.
  void grid_posterior(ContextId c, Matrix& means, Matrix& cov) const;
  void refresh(ContextId c);
  Vector context_column(ContextId c) const;

  Points grid_;
  std::vector<Eigen::Index> seeds_;
  SafeOptConfig config_;
  std::vector<ObjectiveObservation> data_;
  std::map<ContextId, ContextSets> sets_;

  // GP cache over data_.
  Points data_params_;
  Vector data_contexts_;
  std::optional<SpdFactor> factor_;
  Matrix alpha_;  // (K + noise I)^{-1} Y, one column per function
};

}  // namespace ctxsafe
