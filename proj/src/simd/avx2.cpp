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

// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the runtime CPU check in dispatch.cpp.

#include <immintrin.h>

#include <cmath>

#include "ctxsafe/simd/kernels.hpp"

namespace ctxsafe::simd {
namespace {

// Cephes-style exp: range reduction by ln 2 split in two constants, (3,4) Pade
// approximant on the reduced argument, then scaling by 2^n through the
// exponent bits. Inputs below -708.39 return 0 instead of subnormals.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.39);
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125E-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212E-6);
  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878E-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300E-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910E-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042E-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192E-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766E-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000009E0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d half = _mm256_set1_pd(0.5);

  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d fx = _mm256_round_pd(_mm256_fmadd_pd(x, log2e, half),
                                     _MM_FROUND_TO_NEG_INF | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(fx, c1, x);
  r = _mm256_fnmadd_pd(fx, c2, r);

  const __m256d rr = _mm256_mul_pd(r, r);
  __m256d px = _mm256_fmadd_pd(p0, rr, p1);
  px = _mm256_fmadd_pd(px, rr, p2);
  px = _mm256_mul_pd(px, r);
  __m256d qx = _mm256_fmadd_pd(q0, rr, q1);
  qx = _mm256_fmadd_pd(qx, rr, q2);
  qx = _mm256_fmadd_pd(qx, rr, q3);

  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(e, _mm256_set1_pd(2.0), one);

  __m256i n = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(fx));
  n = _mm256_add_epi64(n, _mm256_set1_epi64x(1023));
  n = _mm256_slli_epi64(n, 52);
  const __m256d result = _mm256_mul_pd(e, _mm256_castsi256_pd(n));
  return _mm256_andnot_pd(underflow, result);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void sq_dist(PointsView pts, const double* q, double* out) {
  const std::size_t n = pts.count;
  const std::size_t vec_end = n - n % 4;
  for (std::size_t i = 0; i < vec_end; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < pts.dim; ++j) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(pts.data + j * pts.stride + i),
                                      _mm256_set1_pd(q[j]));
      acc = _mm256_fmadd_pd(d, d, acc);
    }
    _mm256_storeu_pd(out + i, acc);
  }
  for (std::size_t i = vec_end; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < pts.dim; ++j) {
      const double d = pts.at(i, j) - q[j];
      acc += d * d;
    }
    out[i] = acc;
  }
}

void gaussian_from_sq_dist(const double* d2, std::size_t n, double inv_two_ls2,
                           double scale, double* out) {
  const __m256d c = _mm256_set1_pd(-inv_two_ls2);
  const __m256d s = _mm256_set1_pd(scale);
  const std::size_t vec_end = n - n % 4;
  for (std::size_t i = 0; i < vec_end; i += 4) {
    const __m256d v = exp_pd(_mm256_mul_pd(_mm256_loadu_pd(d2 + i), c));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(v, s));
  }
  for (std::size_t i = vec_end; i < n; ++i) out[i] = scale * std::exp(-d2[i] * inv_two_ls2);
}

void matern52_from_sq_dist(const double* d2, std::size_t n, double inv_ls, double scale,
                           double* out) {
  const __m256d k = _mm256_set1_pd(std::sqrt(5.0) * inv_ls);
  const __m256d third = _mm256_set1_pd(1.0 / 3.0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sc = _mm256_set1_pd(scale);
  const std::size_t vec_end = n - n % 4;
  for (std::size_t i = 0; i < vec_end; i += 4) {
    const __m256d s = _mm256_mul_pd(_mm256_sqrt_pd(_mm256_loadu_pd(d2 + i)), k);
    // 1 + s + s^2/3 = 1 + s * (1 + s/3)
    const __m256d poly = _mm256_fmadd_pd(s, _mm256_fmadd_pd(s, third, one), one);
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), s));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_mul_pd(poly, e), sc));
  }
  const double root5 = std::sqrt(5.0);
  for (std::size_t i = vec_end; i < n; ++i) {
    const double s = root5 * std::sqrt(d2[i]) * inv_ls;
    out[i] = scale * (1.0 + s + s * s / 3.0) * std::exp(-s);
  }
}

double gaussian_block_sum(PointsView a, PointsView b, double inv_two_ls2) {
  const __m256d c = _mm256_set1_pd(-inv_two_ls2);
  const std::size_t nb = b.count;
  const std::size_t vec_end = nb - nb % 4;
  double total = 0.0;
  for (std::size_t i = 0; i < a.count; ++i) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < vec_end; k += 4) {
      __m256d d2 = _mm256_setzero_pd();
      for (std::size_t j = 0; j < a.dim; ++j) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(b.data + j * b.stride + k),
                                        _mm256_set1_pd(a.at(i, j)));
        d2 = _mm256_fmadd_pd(d, d, d2);
      }
      acc = _mm256_add_pd(acc, exp_pd(_mm256_mul_pd(d2, c)));
    }
    double row = hsum(acc);
    for (std::size_t k = vec_end; k < nb; ++k) {
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
const KernelOps& avx2_ops() {
  static const KernelOps ops{"avx2", &sq_dist, &gaussian_from_sq_dist,
                             &matern52_from_sq_dist, &gaussian_block_sum};
  return ops;
}
}  // namespace detail

}  // namespace ctxsafe::simd
