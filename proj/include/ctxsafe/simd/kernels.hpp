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

// Data-parallel kernel evaluation primitives.
//
// Every routine has a portable scalar reference and, on x86-64, an AVX2/FMA
// variant compiled in a separate translation unit. The variant is chosen once
// at runtime from CPUID; the CTXSAFE_SIMD environment variable ("scalar" or
// "avx2") overrides the choice. Both variants are kept in lockstep by the
// equivalence tests in tests/test_simd.cpp.

#pragma once

#include <cstddef>
#include <string_view>

namespace ctxsafe::simd {

// Column-major point set: coordinate j of point i lives at data[j * stride + i].
// This is the layout of an Eigen::MatrixXd with one point per row.
struct PointsView {
  const double* data = nullptr;
  std::size_t count = 0;
  std::size_t dim = 0;
  std::size_t stride = 0;

  double at(std::size_t i, std::size_t j) const { return data[j * stride + i]; }
};

struct KernelOps {
  std::string_view name;

  // out[i] = ||p_i - q||^2, q has pts.dim entries.
  void (*sq_dist)(PointsView pts, const double* q, double* out);

  // out[i] = scale * exp(-d2[i] * inv_two_ls2). In-place (out == d2) is allowed.
  void (*gaussian_from_sq_dist)(const double* d2, std::size_t n, double inv_two_ls2,
                                double scale, double* out);

  // Matern nu=5/2: out[i] = scale * (1 + s + s^2/3) * exp(-s), s = sqrt(5 d2[i]) / ls.
  // In-place allowed.
  void (*matern52_from_sq_dist)(const double* d2, std::size_t n, double inv_ls,
                                double scale, double* out);

  // sum_{i,j} exp(-||a_i - b_j||^2 * inv_two_ls2); a.dim == b.dim.
  double (*gaussian_block_sum)(PointsView a, PointsView b, double inv_two_ls2);
};

enum class Backend { scalar, avx2 };

std::string_view backend_name(Backend b);

// nullptr when the variant is not compiled in or the CPU lacks the features.
const KernelOps* ops_for(Backend b);

// The variant in use for this process.
const KernelOps& active_ops();
Backend active_backend();

namespace detail {
const KernelOps& scalar_ops();
#ifdef CTXSAFE_HAVE_AVX2
const KernelOps& avx2_ops();
#endif
}  // namespace detail

}  // namespace ctxsafe::simd
