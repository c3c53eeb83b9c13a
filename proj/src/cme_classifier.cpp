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

#include "ctxsafe/cme_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "ctxsafe/errors.hpp"

namespace ctxsafe {
namespace {

void check_delta(double delta, const char* name) {
  if (!(delta > 0.0 && delta < 1.0))
    throw InputError(std::string(name) + " must lie in (0, 1)");
}

}  // namespace

ClassifierModel ClassifierModel::fit(std::vector<LabeledObservation> data,
                                     const KernelSpec& kernel, double lam, double gamma) {
  if (data.empty()) throw InputError("fit: no training data");
  std::set<ContextId> ids;
  for (const auto& obs : data) ids.insert(obs.context);
  return build(std::move(data), std::vector<ContextId>(ids.begin(), ids.end()), kernel, lam,
               gamma);
}

ClassifierModel ClassifierModel::build(std::vector<LabeledObservation> data,
                                       std::vector<ContextId> context_ids,
                                       const KernelSpec& kernel, double lam, double gamma) {
  kernel.validate();
  if (!(lam > 0.0) || !std::isfinite(lam)) throw InputError("fit: lambda must be positive");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("fit: Gamma must be positive");

  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index s = data.front().y.size();
  if (s == 0) throw InputError("fit: measurements must have at least one component");

  ClassifierModel model;
  model.kernel_ = kernel;
  model.lam_ = lam;
  model.gamma_ = gamma;
  model.context_ids_ = std::move(context_ids);
  model.inputs_.resize(n, s);
  model.labels_ = Matrix::Zero(n, static_cast<Eigen::Index>(model.context_ids_.size()));

  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& obs = data[static_cast<std::size_t>(j)];
    if (obs.y.size() != s) throw InputError("fit: measurements have inconsistent dimensions");
    if (!obs.y.allFinite()) throw InputError("fit: non-finite measurement");
    model.inputs_.row(j) = obs.y.transpose();
    const auto col = model.column_of(obs.context);
    if (!col) throw InputError("fit: context id missing from the label map");
    model.labels_(j, *col) = 1.0;
    if (obs.provenance == Provenance::identified) {
      model.all_ground_truth_ = false;
      check_delta(obs.delta_mmd, "identified label delta_mmd");
    }
  }
  model.data_ = std::move(data);

  const double n_lam = static_cast<double>(n) * lam;
  model.gram_ = gram(kernel, model.inputs_);
  model.factor_ = SpdFactor::factorize(model.gram_.values, n_lam);
  model.gram_.jitter_added = model.factor_->jitter();
  model.alpha_ = model.factor_->solve(model.labels_);
  model.alpha_sum_ = model.factor_->solve(Vector::Ones(n));

  model.lam_bar_ = std::max(1.0, n_lam);
  model.logdet_bar_ = log_det_regularized(model.gram_, model.lam_bar_);
  return model;
}

ClassifierModel ClassifierModel::add_context(
    const std::vector<LabeledObservation>& new_data) const {
  if (new_data.empty()) throw InputError("add_context: no observations for the new context");
  const ContextId id = new_data.front().context;
  for (const auto& obs : new_data) {
    if (obs.context != id)
      throw InputError("add_context: observations carry more than one context id");
  }
  if (column_of(id)) throw InputError("add_context: context id already known");

  std::vector<LabeledObservation> all = data_;
  all.insert(all.end(), new_data.begin(), new_data.end());
  std::vector<ContextId> ids = context_ids_;
  ids.push_back(id);
  return build(std::move(all), std::move(ids), kernel_, lam_, gamma_);
}

std::optional<Eigen::Index> ClassifierModel::column_of(ContextId id) const {
  const auto it = std::find(context_ids_.begin(), context_ids_.end(), id);
  if (it == context_ids_.end()) return std::nullopt;
  return static_cast<Eigen::Index>(it - context_ids_.begin());
}

void ClassifierModel::check_query(const Eigen::Ref<const Vector>& y) const {
  if (y.size() != input_dim())
    throw InputError("query has dimension " + std::to_string(y.size()) + ", model expects " +
                     std::to_string(input_dim()));
}

Vector ClassifierModel::predict_raw(const Eigen::Ref<const Vector>& y) const {
  check_query(y);
  return alpha_.transpose() * cross_kernel(kernel_, inputs_, y);
}

Vector ClassifierModel::predict_normalized(const Eigen::Ref<const Vector>& y) const {
  Vector p = predict_raw(y).cwiseMax(0.0).cwiseMin(1.0);
  const double total = p.sum();
  if (!(total > 0.0)) return Vector::Constant(p.size(), 1.0 / static_cast<double>(p.size()));
  return p / total;
}

double ClassifierModel::power_function(const Eigen::Ref<const Vector>& y) const {
  check_query(y);
  const Vector ky = cross_kernel(kernel_, inputs_, y);
  const double explained = factor_->inverse_quadratic(ky);
  return std::sqrt(std::max(0.0, kernel_.diagonal() - explained));
}

double ClassifierModel::bound_estimation(const Eigen::Ref<const Vector>& y) const {
  return std::sqrt(gamma_) * power_function(y);
}

double ClassifierModel::bound_measurement(const Eigen::Ref<const Vector>& y,
                                          double delta_class) const {
  check_delta(delta_class, "delta_class");
  const double n_lam = static_cast<double>(size()) * lam_;
  const double rho = power_function(y);
  return rho / (4.0 * std::sqrt(n_lam)) *
         std::sqrt(logdet_bar_ - 2.0 * std::log(delta_class));
}

ContextIdTerms ClassifierModel::bound_context_id(const Eigen::Ref<const Vector>& y,
                                                 double delta_mmd,
                                                 OffsetConvention offset) const {
  if (!(delta_mmd > 0.0 && delta_mmd < 0.5))
    throw InputError("delta_mmd must lie in (0, 1/2) for the identification term");
  check_query(y);
  const double n_lam = static_cast<double>(size()) * lam_;
  const Vector ky = cross_kernel(kernel_, inputs_, y);
  const double rho = std::sqrt(std::max(0.0, kernel_.diagonal() - factor_->inverse_quadratic(ky)));

  const double d = delta_mmd;
  const double sub_gaussian = (1.0 - 2.0 * d) / (2.0 * (std::log(1.0 - d) - std::log(d)));
  ContextIdTerms terms;
  terms.scaled = rho * sub_gaussian * std::sqrt(logdet_bar_ - 2.0 * std::log(d)) /
                 std::sqrt(n_lam);
  const double weight = offset == OffsetConvention::as_printed ? 1.0 - d : d;
  terms.offset = weight * alpha_sum_.dot(ky);
  return terms;
}

BoundBreakdown ClassifierModel::total_bound(const Eigen::Ref<const Vector>& y,
                                            double delta_class, double delta_mmd,
                                            const BoundOptions& options) const {
  check_delta(delta_class, "delta_class");
  BoundBreakdown b;
  b.delta_class = delta_class;
  b.delta_mmd = delta_mmd;
  b.rho = power_function(y);
  b.term_estimation = std::sqrt(gamma_) * b.rho;
  b.term_measurement = bound_measurement(y, delta_class);

  b.context_id_included = !(options.provenance_aware && all_ground_truth_);
  if (b.context_id_included) {
    const auto id_terms = bound_context_id(y, delta_mmd, options.offset);
    b.term_context_id = id_terms.scaled;
    b.offset_context_id = id_terms.offset;
    b.joint_probability = (1.0 - delta_mmd) * (1.0 - delta_class);
  } else {
    b.joint_probability = 1.0 - delta_class;
  }
  b.total = b.term_estimation + b.term_measurement + b.term_context_id + b.offset_context_id;
  return b;
}

ContextDecision ClassifierModel::decide(const Eigen::Ref<const Vector>& y, double p_safe,
                                        double delta_class, double delta_mmd,
                                        const BoundOptions& options) const {
  check_delta(p_safe, "p_safe");
  const Vector p = predict_raw(y);
  const double width = total_bound(y, delta_class, delta_mmd, options).total;

  ContextDecision best;
  best.lower_bound = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < p.size(); ++c) {
    const double lower = p(c) - width;
    const ContextId id = context_ids_[static_cast<std::size_t>(c)];
    if (lower > best.lower_bound || (lower == best.lower_bound && id < best.context)) {
      best.lower_bound = lower;
      best.context = id;
    }
  }
  best.confident = best.lower_bound > p_safe;
  return best;
}

double estimate_rkhs_norm(const Eigen::Ref<const Vector>& alpha, const GramMatrix& K) {
  if (alpha.size() != K.size()) throw InputError("estimate_rkhs_norm: size mismatch");
  return std::sqrt(std::max(0.0, alpha.dot(K.values * alpha)));
}

}  // namespace ctxsafe
