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

#include "ctxsafe/kernel.hpp"

#include <cmath>
#include <string>

#include "ctxsafe/errors.hpp"
#include "ctxsafe/simd/kernels.hpp"

namespace ctxsafe {
namespace {

simd::PointsView view_of(const Points& p) {
  return {p.data(), static_cast<std::size_t>(p.rows()), static_cast<std::size_t>(p.cols()),
          static_cast<std::size_t>(p.rows())};
}

// Turns squared distances into kernel values in place.
void apply_kernel(const KernelSpec& kernel, double* d2, std::size_t n) {
  const auto& ops = simd::active_ops();
  switch (kernel.kind) {
    case KernelKind::gaussian:
      ops.gaussian_from_sq_dist(d2, n, 1.0 / (2.0 * kernel.lengthscale * kernel.lengthscale),
                                kernel.diagonal(), d2);
      return;
    case KernelKind::matern52:
      ops.matern52_from_sq_dist(d2, n, 1.0 / kernel.lengthscale, kernel.diagonal(), d2);
      return;
    case KernelKind::kronecker_delta:
      for (std::size_t i = 0; i < n; ++i) d2[i] = d2[i] == 0.0 ? 1.0 : 0.0;
      return;
  }
}

}  // namespace

std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::gaussian:
      return "gaussian";
    case KernelKind::matern52:
      return "matern52";
    case KernelKind::kronecker_delta:
      return "kronecker";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(std::string_view name) {
  if (name == "gaussian") return KernelKind::gaussian;
  if (name == "matern52") return KernelKind::matern52;
  if (name == "kronecker" || name == "kronecker-delta") return KernelKind::kronecker_delta;
  throw InputError("unknown kernel kind '" + std::string(name) + "'");
}

void KernelSpec::validate() const {
  if (kind == KernelKind::kronecker_delta) return;
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
    throw InputError("kernel lengthscale must be positive and finite");
  if (!(magnitude > 0.0) || !std::isfinite(magnitude))
    throw InputError("kernel magnitude must be positive and finite");
}

double evaluate(const KernelSpec& kernel, const Eigen::Ref<const Vector>& y1,
                const Eigen::Ref<const Vector>& y2) {
  if (y1.size() != y2.size())
    throw InputError("kernel inputs have different dimensions (" + std::to_string(y1.size()) +
                     " vs " + std::to_string(y2.size()) + ")");
  const double d2 = (y1 - y2).squaredNorm();
  switch (kernel.kind) {
    case KernelKind::gaussian:
      return kernel.diagonal() * std::exp(-d2 / (2.0 * kernel.lengthscale * kernel.lengthscale));
    case KernelKind::matern52: {
      const double s = std::sqrt(5.0 * d2) / kernel.lengthscale;
      return kernel.diagonal() * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    case KernelKind::kronecker_delta:
      return d2 == 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

GramMatrix gram(const KernelSpec& kernel, const Points& points) {
  if (points.rows() == 0) throw InputError("gram: empty point set");
  const Eigen::Index n = points.rows();
  GramMatrix g{Matrix(n, n), 0.0};
  const auto view = view_of(points);
  Vector q(points.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    q = points.row(i).transpose();
    double* col = g.values.col(i).data();
    simd::active_ops().sq_dist(view, q.data(), col);
    apply_kernel(kernel, col, static_cast<std::size_t>(n));
  }
  // Exact symmetry: mirror the upper triangle.
  g.values.triangularView<Eigen::StrictlyLower>() = g.values.transpose();
  return g;
}

Vector cross_kernel(const KernelSpec& kernel, const Points& points,
                    const Eigen::Ref<const Vector>& query) {
  if (query.size() != points.cols())
    throw InputError("query dimension " + std::to_string(query.size()) +
                     " does not match data dimension " + std::to_string(points.cols()));
  Vector out(points.rows());
  if (points.rows() == 0) return out;
  const Vector q = query;
  simd::active_ops().sq_dist(view_of(points), q.data(), out.data());
  apply_kernel(kernel, out.data(), static_cast<std::size_t>(out.size()));
  return out;
}

Matrix cross_gram(const KernelSpec& kernel, const Points& a, const Points& b) {
  if (a.cols() != b.cols()) throw InputError("cross_gram: dimension mismatch");
  Matrix out(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    out.col(j) = cross_kernel(kernel, a, b.row(j).transpose());
  }
  return out;
}

}  // namespace ctxsafe
