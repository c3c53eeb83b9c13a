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

#include "ctxsafe/linalg.hpp"

#include <cmath>

#include <fmt/format.h>

#include "ctxsafe/errors.hpp"

namespace ctxsafe {
namespace {

constexpr int kJitterAttempts = 3;
constexpr double kJitterGrowth = 10.0;
constexpr double kJitterStart = 1e-10;

bool try_factor(const Matrix& K, double diag, Eigen::LLT<Matrix>& out) {
  Matrix A = K;
  A.diagonal().array() += diag;
  out.compute(A);
  if (out.info() != Eigen::Success) return false;
  // LLT can "succeed" with non-finite pivots on NaN input.
  return out.matrixLLT().diagonal().allFinite() &&
         (out.matrixLLT().diagonal().array() > 0.0).all();
}

}  // namespace

SpdFactor SpdFactor::factorize(const Matrix& K, double ridge) {
  if (K.rows() != K.cols()) throw InputError("factorize: matrix is not square");
  if (K.rows() == 0) throw InputError("factorize: empty matrix");
  if (!(ridge >= 0.0) || !std::isfinite(ridge))
    throw InputError("factorize: ridge must be nonnegative and finite");
  if (!K.allFinite()) throw NumericalError("factorize: matrix has non-finite entries");

  Eigen::LLT<Matrix> llt;
  if (try_factor(K, ridge, llt)) return SpdFactor(std::move(llt), ridge, 0.0);

  const double n = static_cast<double>(K.rows());
  double jitter = kJitterStart * K.trace() / n;
  if (!(jitter > 0.0)) jitter = kJitterStart;
  for (int attempt = 0; attempt < kJitterAttempts; ++attempt) {
    if (try_factor(K, ridge + jitter, llt)) return SpdFactor(std::move(llt), ridge, jitter);
    if (attempt + 1 < kJitterAttempts) jitter *= kJitterGrowth;
  }
  throw NumericalError(
      fmt::format("Cholesky factorization failed after {} jitter attempts (last jitter {:g})",
                  kJitterAttempts, jitter),
      jitter);
}

double SpdFactor::inverse_quadratic(const Eigen::Ref<const Vector>& rhs) const {
  const Vector half = llt_.matrixL().solve(rhs);
  return half.squaredNorm();
}

double SpdFactor::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Matrix regularized_solve(GramMatrix& K, double ridge, const Eigen::Ref<const Matrix>& rhs) {
  if (!(ridge > 0.0)) throw InputError("regularized_solve: ridge must be positive");
  if (rhs.rows() != K.size()) throw InputError("regularized_solve: rhs has wrong row count");
  const auto factor = SpdFactor::factorize(K.values, ridge);
  K.jitter_added = factor.jitter();
  return factor.solve(rhs);
}

double log_det_regularized(const GramMatrix& K, double lam_bar) {
  if (!(lam_bar > 0.0)) throw InputError("log_det_regularized: lam_bar must be positive");
  return SpdFactor::factorize(K.values, lam_bar).log_det();
}

}  // namespace ctxsafe
