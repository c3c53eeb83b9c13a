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

#include <cmath>

#include "ctxsafe/simd/kernels.hpp"

namespace ctxsafe::simd {
namespace {

void sq_dist(PointsView pts, const double* q, double* out) {
  for (std::size_t i = 0; i < pts.count; ++i) out[i] = 0.0;
  for (std::size_t j = 0; j < pts.dim; ++j) {
    const double* col = pts.data + j * pts.stride;
    const double qj = q[j];
    for (std::size_t i = 0; i < pts.count; ++i) {
      const double d = col[i] - qj;
      out[i] += d * d;
    }
  }
}

void gaussian_from_sq_dist(const double* d2, std::size_t n, double inv_two_ls2,
                           double scale, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = scale * std::exp(-d2[i] * inv_two_ls2);
}

void matern52_from_sq_dist(const double* d2, std::size_t n, double inv_ls, double scale,
                           double* out) {
  const double root5 = std::sqrt(5.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = root5 * std::sqrt(d2[i]) * inv_ls;
    out[i] = scale * (1.0 + s + s * s / 3.0) * std::exp(-s);
  }
}

double gaussian_block_sum(PointsView a, PointsView b, double inv_two_ls2) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.count; ++i) {
    double row = 0.0;
    for (std::size_t k = 0; k < b.count; ++k) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < a.dim; ++j) {
        const double d = a.at(i, j) - b.at(k, j);
        d2 += d * d;
      }
      row += std::exp(-d2 * inv_two_ls2);
    }
    total += row;
  }
  return total;
}

}  // namespace

namespace detail {
const KernelOps& scalar_ops() {
  static const KernelOps ops{"scalar", &sq_dist, &gaussian_from_sq_dist,
                             &matern52_from_sq_dist, &gaussian_block_sum};
  return ops;
}
}  // namespace detail

}  // namespace ctxsafe::simd
