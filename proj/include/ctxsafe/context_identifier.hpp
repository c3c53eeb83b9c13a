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

namespace ctxsafe {

/// Uniformly sampled state trajectory. Row 0 is the initial state x(0); rows
/// 1..length() are x(1)..x(length()).
struct Trajectory {
  Matrix samples;
  double dt = 0.0;
  std::optional<ContextId> context_truth;

  Eigen::Index length() const { return samples.rows() - 1; }
  Eigen::Index state_dim() const { return samples.cols(); }

  /// Throws InputError unless there are >= 2 samples and dt > 0.
  void validate() const;

  /// Copy keeping only the listed state columns.
  Trajectory select_columns(const std::vector<int>& columns) const;
};

/// Mixing shift a* and the mixing slack epsilon.
struct SubsampleConfig {
  int shift = 1;
  double epsilon = 0.01;

  void validate() const;
};

/// One two-sample test of the current trajectory against a stored context.
class MmdTestResult {
 public:
  /// Fills the derived fields; delta_mmd is fixed to (delta_prime + 2 epsilon) / 3.
  static MmdTestResult make(ContextId context, double mmd_sq, Eigen::Index r, double k_bound,
                            double delta_prime, double epsilon);

  ContextId context = 0;
  double mmd_sq = 0.0;
  double accept_threshold = 0.0;
  double eta_required = 0.0;
  bool accepted = false;
  Eigen::Index r = 0;
  double delta_mmd = 0.0;
  double delta_mmd_prime = 0.0;
};

/// Sub-sampled reference data per identified context.
class ContextLibrary {
 public:
  ContextLibrary(const KernelSpec& kernel, int shift);
  ContextLibrary(const KernelSpec& kernel, double k_bound, int shift);

  const KernelSpec& kernel() const { return kernel_; }
  double k_bound() const { return k_bound_; }
  int shift() const { return shift_; }
  const std::map<ContextId, Points>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  /// Smallest id not yet used (0 for an empty library).
  ContextId next_id() const;

  /// Stores sub-sampled data for a context. All entries must share the row and
  /// column counts, and the kernel must stay within [0, k_bound] on the data.
  void insert(ContextId id, Points data);

 private:
  KernelSpec kernel_;
  double k_bound_;
  int shift_;
  std::map<ContextId, Points> entries_;
};

struct IdentifyOutcome {
  /// One result per stored context, ascending id, up to the first acceptance.
  std::vector<MmdTestResult> tests;
  bool new_context = false;
  ContextId context = 0;
  double delta_mmd = 0.0;
};

/// The three averages of the biased estimator.
struct MmdTerms {
  double within_x = 0.0;
  double within_y = 0.0;
  double cross = 0.0;

  double unclamped() const { return within_x + within_y - 2.0 * cross; }
};

MmdTerms mmd_terms(const Points& x, const Points& y, const KernelSpec& kernel);

/// Biased (V-statistic) squared MMD between equally sized samples, clamped at 0.
double mmd_squared(const Points& x, const Points& y, const KernelSpec& kernel);

/// Rows x(shift), x(2 shift), ..., x(k shift) with k shift <= length().
Points subsample(const Trajectory& traj, int shift);

/// 2 sqrt(2K / r) (1 + sqrt(2 ln(2 / delta_prime)))
double accept_threshold(Eigen::Index r, double k_bound, double delta_prime);

/// 4 sqrt(2K / r) (1 + sqrt(2 ln(2 / delta_mmd))): the separation contexts need
/// for the identification guarantee at sample size r.
double required_eta(Eigen::Index r, double k_bound, double delta_mmd);

/// (delta_prime + 2 epsilon) / 3
double composed_delta_mmd(double delta_prime, double epsilon);

/// Tests `current` against each stored context in ascending id order and
/// returns the first acceptance. If none accepts (or the library is empty) the
/// sub-sampled data is stored under library.next_id() and reported as new.
IdentifyOutcome identify(const Trajectory& current, ContextLibrary& library,
                         const SubsampleConfig& config, double delta_prime);

struct MixingShiftOptions {
  double delta_prime = 0.05;
  int window = 10;
  /// Kernel bound K; defaults to the kernel's k(y, y).
  std::optional<double> k_bound;
};

struct MixingShiftEstimate {
  int shift = 1;
  bool satisfied = false;
  std::vector<double> mmd_by_shift;       // index a - 1
  std::vector<double> threshold_by_shift; // index a - 1
};

/// Smallest shift a whose MMD between the two sub-sampled trajectories stays
/// under the acceptance threshold for every a' in [a, min(a + window, a_max)].
MixingShiftEstimate estimate_mixing_shift(const Trajectory& first, const Trajectory& second,
                                          const KernelSpec& kernel, int a_max,
                                          const MixingShiftOptions& options = {});

/// Median of the nonzero pairwise Euclidean distances between rows; 1 if
/// every pair coincides.
double median_heuristic_lengthscale(const Points& data);

enum class ClosedFormVariant { as_printed, reconciled };

/// Population squared MMD between N(mu_a, sigma_a^2) and N(mu_b, sigma_b^2)
/// under the density-normalized Gaussian kernel N(x - y; 0, gamma^2).
///
/// as_printed evaluates the widely circulated expression with exponents
/// exp(+2 mu^2 / ...) and exp(+(mu_a + mu_b)^2 / ...). reconciled uses zero
/// self-exponents and exp(-(mu_a - mu_b)^2 / ...), which is what numerical
/// integration of the population MMD reproduces.
double closed_form_gaussian_mmd(double mu_a, double sigma_a, double mu_b, double sigma_b,
                                double gamma,
                                ClosedFormVariant variant = ClosedFormVariant::reconciled);

/// Same quantity for KernelSpec::gaussian(gamma, magnitude), i.e. the
/// reconciled form scaled by magnitude^2 sqrt(2 pi) gamma.
double gaussian_mmd_population(double mu_a, double sigma_a, double mu_b, double sigma_b,
                               double gamma, double magnitude = 1.0);

}  // namespace ctxsafe
