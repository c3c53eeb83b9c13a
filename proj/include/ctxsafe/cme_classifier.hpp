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

#include <optional>
#include <vector>

#include "ctxsafe/kernel.hpp"
#include "ctxsafe/linalg.hpp"

namespace ctxsafe {

using ContextId = int;

enum class Provenance { ground_truth, identified };

/// One (measurement, context) training pair.
struct LabeledObservation {
  Vector y;
  ContextId context = 0;
  Provenance provenance = Provenance::ground_truth;
  /// Identification error probability in force when an identified label was
  /// produced. Unused for ground-truth labels.
  double delta_mmd = 0.0;
};

/// How the constant offset of the context-identification term is scaled.
///
/// as_printed multiplies the all-ones projection 1^T (K + n lam I)^{-1} K_y by
/// (1 - delta_mmd). mismatch_rate multiplies it by delta_mmd, the mean of the
/// label-mismatch indicator whose sub-Gaussian constant the ρ-term uses.
enum class OffsetConvention { as_printed, mismatch_rate };

struct BoundOptions {
  OffsetConvention offset = OffsetConvention::as_printed;
  /// Drop the identification terms when every label is ground truth.
  bool provenance_aware = true;
};

/// Pointwise decomposition of |p_c(y) - p̂_c(y)|'s high-probability bound.
/// All terms already include the ρ(y) factor, so
/// total = term_estimation + term_measurement + term_context_id + offset_context_id.
struct BoundBreakdown {
  double rho = 0.0;
  double term_estimation = 0.0;
  double term_measurement = 0.0;
  double term_context_id = 0.0;
  double offset_context_id = 0.0;
  double total = 0.0;
  double delta_class = 0.0;
  double delta_mmd = 0.0;
  /// False when the provenance-aware rule dropped the identification terms.
  bool context_id_included = true;
  /// (1 - delta_mmd)(1 - delta_class), or 1 - delta_class without identification terms.
  double joint_probability = 0.0;
};

struct ContextIdTerms {
  double scaled = 0.0;  // ρ-proportional part
  double offset = 0.0;  // constant part
};

struct ContextDecision {
  bool confident = false;
  /// Chosen context (confident) or the best candidate (uncertain).
  ContextId context = 0;
  double lower_bound = 0.0;
};

/// Conditional-mean-embedding classifier p̂_c(y) = 1_c^T (K + n lam I)^{-1} K_y.
///
/// Immutable after construction; fit and add_context return new models.
/// Columns of the label matrix correspond to context_ids() in order: ids
/// present at fit time sorted ascending, contexts added later appended.
class ClassifierModel {
 public:
  static ClassifierModel fit(std::vector<LabeledObservation> data, const KernelSpec& kernel,
                             double lam, double gamma);

  /// New model with one more context; every observation must carry the same,
  /// previously unseen context id.
  ClassifierModel add_context(const std::vector<LabeledObservation>& new_data) const;

  Eigen::Index size() const { return inputs_.rows(); }
  Eigen::Index input_dim() const { return inputs_.cols(); }
  Eigen::Index num_contexts() const { return labels_.cols(); }
  const std::vector<ContextId>& context_ids() const { return context_ids_; }
  std::optional<Eigen::Index> column_of(ContextId id) const;

  const Points& inputs() const { return inputs_; }
  const Matrix& labels_onehot() const { return labels_; }
  const std::vector<LabeledObservation>& observations() const { return data_; }
  const KernelSpec& kernel() const { return kernel_; }
  const GramMatrix& gram_matrix() const { return gram_; }
  double lam() const { return lam_; }
  double gamma() const { return gamma_; }
  /// max{1, n lam}
  double lam_bar() const { return lam_bar_; }
  /// log det(K + lam_bar I)
  double logdet_bar() const { return logdet_bar_; }
  bool all_ground_truth() const { return all_ground_truth_; }

  /// Unclipped estimates, one per context column; may leave [0, 1].
  Vector predict_raw(const Eigen::Ref<const Vector>& y) const;
  /// Clip to [0, 1], renormalize to sum 1; uniform when everything clips to 0.
  Vector predict_normalized(const Eigen::Ref<const Vector>& y) const;
  /// ρ(y) = sqrt(max(0, k(y,y) - K_y^T (K + n lam I)^{-1} K_y))
  double power_function(const Eigen::Ref<const Vector>& y) const;

  /// sqrt(Γ) ρ(y)
  double bound_estimation(const Eigen::Ref<const Vector>& y) const;
  /// ρ(y) / (4 sqrt(n lam)) * sqrt(logdet_bar - 2 ln δ)
  double bound_measurement(const Eigen::Ref<const Vector>& y, double delta_class) const;
  /// Identification term; delta_mmd must lie in (0, 1/2).
  ContextIdTerms bound_context_id(const Eigen::Ref<const Vector>& y, double delta_mmd,
                                  OffsetConvention offset = OffsetConvention::as_printed) const;

  BoundBreakdown total_bound(const Eigen::Ref<const Vector>& y, double delta_class,
                             double delta_mmd, const BoundOptions& options = {}) const;

  /// Confident iff some context's p̂_c - total exceeds p_safe. Ties go to the
  /// larger lower bound, then to the smaller context id.
  ContextDecision decide(const Eigen::Ref<const Vector>& y, double p_safe, double delta_class,
                         double delta_mmd, const BoundOptions& options = {}) const;

 private:
  ClassifierModel() = default;
  static ClassifierModel build(std::vector<LabeledObservation> data,
                               std::vector<ContextId> context_ids, const KernelSpec& kernel,
                               double lam, double gamma);

  void check_query(const Eigen::Ref<const Vector>& y) const;

  std::vector<LabeledObservation> data_;
  std::vector<ContextId> context_ids_;
  Points inputs_;
  Matrix labels_;
  KernelSpec kernel_;
  GramMatrix gram_;
  double lam_ = 0.0;
  double gamma_ = 0.0;
  double lam_bar_ = 1.0;
  double logdet_bar_ = 0.0;
  bool all_ground_truth_ = true;

  std::optional<SpdFactor> factor_;
  Matrix alpha_;     // (K + n lam I)^{-1} labels
  Vector alpha_sum_; // (K + n lam I)^{-1} 1
};

/// sqrt(alpha^T K alpha): RKHS norm of sum_i alpha_i k(y_i, .).
double estimate_rkhs_norm(const Eigen::Ref<const Vector>& alpha, const GramMatrix& K);

}  // namespace ctxsafe
