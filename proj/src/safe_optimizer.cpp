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

#include "ctxsafe/safe_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ctxsafe/errors.hpp"

namespace ctxsafe {

void SafeOptConfig::validate() const {
  parameter_kernel.validate();
  context_kernel.validate();
  if (!(noise_variance > 0.0)) throw InputError("SafeOpt noise variance must be positive");
  if (!(beta > 0.0)) throw InputError("SafeOpt beta must be positive");
  if (num_constraints < 1) throw InputError("SafeOpt needs at least one constraint");
}

SafeOptState::SafeOptState(Points grid, std::vector<Eigen::Index> seed_indices,
                           SafeOptConfig config)
    : grid_(std::move(grid)), seeds_(std::move(seed_indices)), config_(std::move(config)) {
  config_.validate();
  if (grid_.rows() == 0 || grid_.cols() == 0) throw InputError("SafeOpt grid is empty");
  if (seeds_.empty()) throw InputError("SafeOpt needs at least one safe seed");
  for (const auto s : seeds_) {
    if (s < 0 || s >= grid_.rows()) throw InputError("safe seed index outside the grid");
  }
  std::sort(seeds_.begin(), seeds_.end());
  seeds_.erase(std::unique(seeds_.begin(), seeds_.end()), seeds_.end());
}

void SafeOptState::ensure_context(ContextId c) {
  if (sets_.count(c) != 0) return;
  const Eigen::Index n = grid_.rows();
  const int functions = config_.num_constraints + 1;
  ContextSets s;
  s.lower = Matrix::Constant(n, functions, -std::numeric_limits<double>::infinity());
  s.upper = Matrix::Constant(n, functions, std::numeric_limits<double>::infinity());
  sets_.emplace(c, std::move(s));
  refresh(c);
}

const ContextSets& SafeOptState::sets(ContextId c) const {
  const auto it = sets_.find(c);
  if (it == sets_.end()) throw InputError("unknown SafeOpt context " + std::to_string(c));
  return it->second;
}

Vector SafeOptState::context_column(ContextId c) const {
  Points ids(data_contexts_.size(), 1);
  ids.col(0) = data_contexts_;
  Vector q(1);
  q(0) = static_cast<double>(c);
  return cross_kernel(config_.context_kernel, ids, q);
}

void SafeOptState::refit() {
  const auto n = static_cast<Eigen::Index>(data_.size());
  const int functions = config_.num_constraints + 1;
  data_params_.resize(n, grid_.cols());
  data_contexts_.resize(n);
  Matrix y(n, functions);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& obs = data_[static_cast<std::size_t>(i)];
    data_params_.row(i) = obs.a.transpose();
    data_contexts_(i) = static_cast<double>(obs.c);
    y(i, 0) = obs.f_meas;
    y.row(i).tail(config_.num_constraints) = obs.g_meas.transpose();
  }
  Points ids(n, 1);
  ids.col(0) = data_contexts_;
  const Matrix k = gram(config_.parameter_kernel, data_params_).values.cwiseProduct(
      gram(config_.context_kernel, ids).values);
  factor_ = SpdFactor::factorize(k, config_.noise_variance);
  alpha_ = factor_->solve(y);
}

void SafeOptState::grid_posterior(ContextId c, Matrix& means, Matrix& cov) const {
  const int functions = config_.num_constraints + 1;
  const double kc_self = config_.context_kernel.diagonal();
  cov = gram(config_.parameter_kernel, grid_).values * kc_self;
  if (data_.empty()) {
    means = Matrix::Zero(grid_.rows(), functions);
    return;
  }
  Matrix k_dg = cross_gram(config_.parameter_kernel, data_params_, grid_);
  k_dg.array().colwise() *= context_column(c).array();
  means = k_dg.transpose() * alpha_;
  const Matrix v = factor_->solve_lower(k_dg);
  cov.noalias() -= v.transpose() * v;
}

Posterior SafeOptState::posterior(const Eigen::Ref<const Vector>& a, ContextId c,
                                  int function) const {
  if (a.size() != grid_.cols()) throw InputError("posterior: parameter dimension mismatch");
  if (function < 0 || function > config_.num_constraints)
    throw InputError("posterior: function index out of range");
  const double prior = config_.parameter_kernel.diagonal() * config_.context_kernel.diagonal();
  if (data_.empty()) return {0.0, prior};
  Vector k = cross_kernel(config_.parameter_kernel, data_params_, a);
  k.array() *= context_column(c).array();
  return {k.dot(alpha_.col(function)), std::max(0.0, prior - factor_->inverse_quadratic(k))};
}

void SafeOptState::refresh(ContextId c) {
  ContextSets& s = sets_.at(c);
  const Eigen::Index n = grid_.rows();
  const int functions = config_.num_constraints + 1;
  const double beta = config_.beta;

  Matrix means;
  Matrix cov;
  grid_posterior(c, means, cov);
  const Vector sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();

  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < functions; ++j) {
      const double lo = std::max(s.lower(i, j), means(i, j) - beta * sd(i));
      const double up = std::min(s.upper(i, j), means(i, j) + beta * sd(i));
      s.upper(i, j) = up;
      s.lower(i, j) = std::min(lo, up);
    }
  }

  s.safe.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.safe[static_cast<std::size_t>(i)] =
        (s.lower.row(i).tail(config_.num_constraints).array() >= 0.0).all();
  }
  for (const auto seed : seeds_) s.safe[static_cast<std::size_t>(seed)] = true;

  double best_lower = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (s.safe[static_cast<std::size_t>(i)]) best_lower = std::max(best_lower, s.lower(i, 0));
  }
  s.maximizers.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.maximizers[static_cast<std::size_t>(i)] =
        s.safe[static_cast<std::size_t>(i)] && s.upper(i, 0) >= best_lower;
  }

  // Expanders: a hypothetical measurement at the optimistic constraint value
  // would certify at least one currently unsafe grid point.
  std::vector<Eigen::Index> unsafe;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!s.safe[static_cast<std::size_t>(i)]) unsafe.push_back(i);
  }
  s.expanders.assign(static_cast<std::size_t>(n), false);
  if (unsafe.empty()) return;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!s.safe[static_cast<std::size_t>(i)]) continue;
    const double denom = cov(i, i) + config_.noise_variance;
    bool expands = false;
    for (const auto z : unsafe) {
      const double gain = cov(z, i) / denom;
      const double var = std::max(0.0, cov(z, z) - cov(z, i) * gain);
      const double sd_new = std::sqrt(var);
      bool certified = true;
      for (int j = 1; j < functions && certified; ++j) {
        const double mean_new = means(z, j) + gain * (s.upper(i, j) - means(i, j));
        certified = mean_new - beta * sd_new >= 0.0;
      }
      if (certified) {
        expands = true;
        break;
      }
    }
    s.expanders[static_cast<std::size_t>(i)] = expands;
  }
}

void SafeOptState::update_sets(ContextId c) {
  ensure_context(c);
  refresh(c);
}

Eigen::Index SafeOptState::best_safe_index(ContextId c) const {
  const ContextSets& s = sets(c);
  Eigen::Index best = seeds_.front();
  double best_value = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < grid_.rows(); ++i) {
    if (s.safe[static_cast<std::size_t>(i)] && s.lower(i, 0) > best_value) {
      best_value = s.lower(i, 0);
      best = i;
    }
  }
  return best;
}

Eigen::Index SafeOptState::propose_index(ContextId c) {
  ensure_context(c);
  const ContextSets& s = sets_.at(c);
  Eigen::Index best = -1;
  double best_width = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < grid_.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!(s.maximizers[k] || s.expanders[k])) continue;
    const double width = (s.upper.row(i) - s.lower.row(i)).maxCoeff();
    if (width > best_width) {
      best_width = width;
      best = i;
    }
  }
  if (best >= 0) return best;

  best = seeds_.front();
  double best_value = -std::numeric_limits<double>::infinity();
  for (const auto seed : seeds_) {
    if (s.lower(seed, 0) > best_value) {
      best_value = s.lower(seed, 0);
      best = seed;
    }
  }
  return best;
}

void SafeOptState::observe(const ObjectiveObservation& obs) {
  if (obs.a.size() != grid_.cols()) throw InputError("observation parameter dimension mismatch");
  if (obs.g_meas.size() != config_.num_constraints)
    throw InputError("observation has the wrong number of constraint values");
  if (!obs.a.allFinite() || !std::isfinite(obs.f_meas) || !obs.g_meas.allFinite())
    throw InputError("observation contains non-finite values");
  ensure_context(obs.c);
  data_.push_back(obs);
  refit();
  for (auto& [c, unused] : sets_) refresh(c);
}

}  // namespace ctxsafe
