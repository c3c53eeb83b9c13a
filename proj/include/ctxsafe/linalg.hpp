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

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ctxsafe/kernel.hpp"

namespace ctxsafe {

/// Cholesky factor of K + ridge*I.
///
/// If the plain factorization fails, a diagonal jitter starting at
/// 1e-10 * trace(K) / n is added and escalated tenfold, three attempts in
/// total. A NumericalError carrying the last jitter is thrown if all fail.
class SpdFactor {
 public:
  static SpdFactor factorize(const Matrix& K, double ridge);

  Eigen::Index size() const { return llt_.rows(); }
  double ridge() const { return ridge_; }
  double jitter() const { return jitter_; }

  /// (K + (ridge + jitter) I)^{-1} rhs
  template <class Rhs>
  auto solve(const Eigen::MatrixBase<Rhs>& rhs) const {
    return llt_.solve(rhs).eval();
  }

  /// L^{-1} rhs for the lower Cholesky factor L.
  Matrix solve_lower(const Eigen::Ref<const Matrix>& rhs) const {
    return llt_.matrixL().solve(rhs);
  }

  /// rhs^T (K + ridge I)^{-1} rhs via one triangular solve.
  double inverse_quadratic(const Eigen::Ref<const Vector>& rhs) const;

  /// log det(K + ridge I) = 2 * sum(log diag(L)).
  double log_det() const;

 private:
  SpdFactor(Eigen::LLT<Matrix> llt, double ridge, double jitter)
      : llt_(std::move(llt)), ridge_(ridge), jitter_(jitter) {}

  Eigen::LLT<Matrix> llt_;
  double ridge_;
  double jitter_;
};

/// (K + ridge I)^{-1} rhs. Records the jitter used in K.jitter_added.
Matrix regularized_solve(GramMatrix& K, double ridge, const Eigen::Ref<const Matrix>& rhs);

/// log det(K + lam_bar I).
double log_det_regularized(const GramMatrix& K, double lam_bar);

}  // namespace ctxsafe
