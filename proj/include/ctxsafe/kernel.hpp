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

#include <string>
#include <string_view>

#include <Eigen/Core>

namespace ctxsafe {

enum class KernelKind { gaussian, matern52, kronecker_delta };

std::string_view to_string(KernelKind kind);
KernelKind kernel_kind_from_string(std::string_view name);

/// Stationary kernel description. For gaussian and matern52 the lengthscale is
/// in input units and k(y, y) = magnitude^2. kronecker_delta compares inputs
/// for exact equality and ignores both hyperparameters.
struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  double lengthscale = 1.0;
  double magnitude = 1.0;

  static KernelSpec gaussian(double lengthscale, double magnitude = 1.0) {
    return {KernelKind::gaussian, lengthscale, magnitude};
  }
  static KernelSpec matern52(double lengthscale, double magnitude = 1.0) {
    return {KernelKind::matern52, lengthscale, magnitude};
  }
  static KernelSpec kronecker() { return {KernelKind::kronecker_delta, 1.0, 1.0}; }

  /// k(y, y), identical for every y.
  double diagonal() const {
    return kind == KernelKind::kronecker_delta ? 1.0 : magnitude * magnitude;
  }

  /// Throws InputError unless lengthscale and magnitude are positive and finite.
  void validate() const;

  bool operator==(const KernelSpec&) const = default;
};

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Rows of a Points matrix are input vectors.
using Points = Eigen::MatrixXd;

double evaluate(const KernelSpec& kernel, const Eigen::Ref<const Vector>& y1,
                const Eigen::Ref<const Vector>& y2);

/// Symmetric kernel matrix of a point set.
struct GramMatrix {
  Matrix values;
  double jitter_added = 0.0;

  Eigen::Index size() const { return values.rows(); }
};

GramMatrix gram(const KernelSpec& kernel, const Points& points);

/// K_y: kernel values between every row of `points` and `query`.
Vector cross_kernel(const KernelSpec& kernel, const Points& points,
                    const Eigen::Ref<const Vector>& query);

/// (a.rows() x b.rows()) matrix of kernel values.
Matrix cross_gram(const KernelSpec& kernel, const Points& a, const Points& b);

}  // namespace ctxsafe
