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

// Scalar and AVX2 kernel primitives must agree on every input size,
// including the remainder lanes.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ctxsafe/simd/kernels.hpp"

namespace ctxsafe::simd {
namespace {

constexpr double kRelTol = 1e-13;

struct Fixture {
  std::vector<double> data;
  PointsView view;
};

Fixture random_points(std::mt19937_64& rng, std::size_t count, std::size_t dim, double spread) {
  std::normal_distribution<double> n(0.0, spread);
  Fixture f;
  f.data.resize(count * dim);
  for (auto& v : f.data) v = n(rng);
  f.view = PointsView{f.data.data(), count, dim, count};
  return f;
}

const KernelOps* avx2_or_skip() { return ops_for(Backend::avx2); }

void expect_close(const std::vector<double>& a, const std::vector<double>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(1.0, std::abs(a[i]));
    EXPECT_LE(std::abs(a[i] - b[i]), kRelTol * scale) << "index " << i;
  }
}

TEST(Simd, ScalarAlwaysAvailable) {
  ASSERT_NE(ops_for(Backend::scalar), nullptr);
  EXPECT_EQ(ops_for(Backend::scalar)->name, "scalar");
  EXPECT_NE(ops_for(active_backend()), nullptr);
}

TEST(Simd, SquaredDistanceMatches) {
  const KernelOps* vec = avx2_or_skip();
  if (vec == nullptr) GTEST_SKIP() << "AVX2 not available";
  const KernelOps& ref = *ops_for(Backend::scalar);
  std::mt19937_64 rng(1);
  for (std::size_t count = 0; count <= 19; ++count) {
    for (std::size_t dim : {1u, 2u, 3u, 7u}) {
      auto pts = random_points(rng, count, dim, 2.0);
      auto q = random_points(rng, 1, dim, 2.0);
      std::vector<double> a(count), b(count);
      ref.sq_dist(pts.view, q.data.data(), a.data());
      vec->sq_dist(pts.view, q.data.data(), b.data());
      expect_close(a, b);
    }
  }
}

TEST(Simd, StridedViewMatches) {
  const KernelOps* vec = avx2_or_skip();
  if (vec == nullptr) GTEST_SKIP() << "AVX2 not available";
  std::mt19937_64 rng(2);
  // Stride larger than count: a block of rows inside a bigger matrix.
  auto big = random_points(rng, 23, 3, 1.0);
  PointsView sub{big.data.data() + 4, 13, 3, 23};
  std::vector<double> q{0.1, -0.2, 0.3}, a(13), b(13);
  ops_for(Backend::scalar)->sq_dist(sub, q.data(), a.data());
  vec->sq_dist(sub, q.data(), b.data());
  expect_close(a, b);
}

TEST(Simd, GaussianFromSquaredDistanceMatches) {
  const KernelOps* vec = avx2_or_skip();
  if (vec == nullptr) GTEST_SKIP() << "AVX2 not available";
  const KernelOps& ref = *ops_for(Backend::scalar);
  std::uniform_real_distribution<double> u(0.0, 60.0);
  std::mt19937_64 rng(3);
  for (std::size_t n = 0; n <= 37; ++n) {
    std::vector<double> d2(n);
    for (auto& v : d2) v = u(rng);
    if (n > 2) d2[1] = 0.0;
    std::vector<double> a(n), b(n);
    ref.gaussian_from_sq_dist(d2.data(), n, 0.37, 2.5, a.data());
    vec->gaussian_from_sq_dist(d2.data(), n, 0.37, 2.5, b.data());
    expect_close(a, b);
    // In place.
    std::vector<double> c = d2;
    vec->gaussian_from_sq_dist(c.data(), n, 0.37, 2.5, c.data());
    expect_close(a, c);
  }
}

TEST(Simd, GaussianUnderflowIsZero) {
  const KernelOps* vec = avx2_or_skip();
  if (vec == nullptr) GTEST_SKIP() << "AVX2 not available";
  std::vector<double> d2{1e3, 2e3, 1e6, 1e300, 0.0}, a(5), b(5);
  ops_for(Backend::scalar)->gaussian_from_sq_dist(d2.data(), 5, 1.0, 1.0, a.data());
  vec->gaussian_from_sq_dist(d2.data(), 5, 1.0, 1.0, b.data());
  for (int i = 0; i < 4; ++i) EXPECT_LE(b[static_cast<std::size_t>(i)], 1e-300);
  EXPECT_EQ(b[4], 1.0);
  EXPECT_EQ(a[4], 1.0);
}

TEST(Simd, Matern52Matches) {
  const KernelOps* vec = avx2_or_skip();
  if (vec == nullptr) GTEST_SKIP() << "AVX2 not available";
  const KernelOps& ref = *ops_for(Backend::scalar);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  std::mt19937_64 rng(4);
  for (std::size_t n = 0; n <= 37; ++n) {
    std::vector<double> d2(n);
    for (auto& v : d2) v = u(rng);
    std::vector<double> a(n), b(n);
    ref.matern52_from_sq_dist(d2.data(), n, 1.0 / 0.3, 1.7, a.data());
    vec->matern52_from_sq_dist(d2.data(), n, 1.0 / 0.3, 1.7, b.data());
    expect_close(a, b);
  }
}

TEST(Simd, BlockSumMatches) {
  const KernelOps* vec = avx2_or_skip();
  if (vec == nullptr) GTEST_SKIP() << "AVX2 not available";
  const KernelOps& ref = *ops_for(Backend::scalar);
  std::mt19937_64 rng(5);
  for (std::size_t na : {1u, 3u, 4u, 9u, 50u}) {
    for (std::size_t nb : {1u, 5u, 8u, 50u}) {
      for (std::size_t dim : {1u, 4u}) {
        auto a = random_points(rng, na, dim, 1.0);
        auto b = random_points(rng, nb, dim, 1.5);
        const double s = ref.gaussian_block_sum(a.view, b.view, 0.5);
        const double v = vec->gaussian_block_sum(a.view, b.view, 0.5);
        EXPECT_LE(std::abs(s - v), kRelTol * static_cast<double>(na * nb));
      }
    }
  }
}

TEST(Simd, ScalarReferenceHandValues) {
  const KernelOps& ref = *ops_for(Backend::scalar);
  std::vector<double> pts{0.0, 3.0, 0.0, 4.0};  // two 2-D points: (0,0), (3,4)
  PointsView view{pts.data(), 2, 2, 2};
  std::vector<double> q{0.0, 0.0}, out(2);
  ref.sq_dist(view, q.data(), out.data());
  EXPECT_EQ(out[0], 0.0);
  EXPECT_EQ(out[1], 25.0);
  ref.gaussian_from_sq_dist(out.data(), 2, 0.5, 1.0, out.data());
  EXPECT_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], std::exp(-12.5));
}

}  // namespace
}  // namespace ctxsafe::simd
