// Copyright 2026 The compgrad Authors. All Rights Reserved.
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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "compgrad/numerics.hpp"

namespace compgrad {
namespace {

TEST(Dot, SmallExamples) {
  EXPECT_EQ(dot(DenseVector{1, 2}, DenseVector{3, 4}), 11.0);
  EXPECT_EQ(dot(DenseVector{5, -7, 2}, DenseVector::zeros(3)), 0.0);
  EXPECT_EQ(dot(DenseVector{1, 0, 0}, DenseVector{0, 1, 0}), 0.0);
}

TEST(Dot, RejectsMismatchedLengths) {
  EXPECT_THROW(dot(DenseVector{1, 2}, DenseVector{1}), DimensionError);
}

TEST(Axpy, SmallExamples) {
  const DenseVector x{1.5, -2.0};
  const DenseVector y{0.25, 3.0};
  EXPECT_EQ(axpy(0.0, x, y), y);
  EXPECT_EQ(axpy(1.0, x, DenseVector::zeros(2)), x);
  EXPECT_EQ(axpy(2.0, DenseVector{1, 1}, DenseVector{1, 2}), (DenseVector{3, 4}));
}

TEST(Axpy, InplaceMatchesOutOfPlace) {
  DenseVector y{1.0, 2.0, 3.0};
  const DenseVector x{0.1, 0.2, 0.3};
  const DenseVector expected = axpy(-0.7, x, y);
  axpy_inplace(-0.7, x, y);
  EXPECT_EQ(y, expected);
}

TEST(Axpy, Linearity) {
  RngStream rng(3, {});
  for (int t = 0; t < 50; ++t) {
    DenseVector x(16), y(16), z(16);
    for (std::size_t i = 0; i < 16; ++i) {
      x[i] = rng.uniform() - 0.5;
      y[i] = rng.uniform() - 0.5;
      z[i] = rng.uniform() - 0.5;
    }
    const double a = rng.uniform() * 4 - 2;
    const double lhs = dot(axpy(a, x, y), z);
    const double rhs = a * dot(x, z) + dot(y, z);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (std::abs(a * dot(x, z)) + std::abs(dot(y, z)) + 1e-300));
  }
}

TEST(Norm, Examples) {
  EXPECT_EQ(norm_p(DenseVector{3, 4}, 2.0), 5.0);
  EXPECT_EQ(norm_p(DenseVector{3, -4}, std::numeric_limits<double>::infinity()), 4.0);
  EXPECT_EQ(norm_p(DenseVector{3, -4}, 1.0), 7.0);
  for (double p : {1.0, 1.5, 2.0, 3.0, std::numeric_limits<double>::infinity()}) {
    EXPECT_EQ(norm_p(DenseVector::zeros(4), p), 0.0);
  }
  EXPECT_NEAR(norm_p(DenseVector{1, 1}, 3.0), std::cbrt(2.0), 1e-15);
  EXPECT_THROW(norm_p(DenseVector{1}, 0.5), std::invalid_argument);
}

TEST(Norm, SquaredForms) {
  EXPECT_EQ(squared_norm(DenseVector{3, 4}), 25.0);
  EXPECT_EQ(squared_distance(DenseVector{1, 1}, DenseVector{4, 5}), 25.0);
}

TEST(MeanOf, AveragesInIndexOrder) {
  const std::vector<DenseVector> parts{{1, 2}, {3, 4}, {5, 9}};
  EXPECT_EQ(mean_of(parts), (DenseVector{3, 5}));
  EXPECT_THROW(mean_of(std::vector<DenseVector>{}), std::invalid_argument);
}

TEST(RngStream, ReplayIsIndependentOfInterleaving) {
  RngStream a(11, {2, 7, Channel::shift});
  std::vector<std::uint64_t> solo;
  for (int i = 0; i < 100; ++i) solo.push_back(a.next_u64());

  RngStream b(11, {2, 7, Channel::shift});
  RngStream other(11, {2, 8, Channel::shift});
  for (int i = 0; i < 100; ++i) {
    other.next_u64();
    other.next_u64();
    EXPECT_EQ(b.next_u64(), solo[i]);
  }
}

TEST(RngStream, DistinctKeysDiffer) {
  const StreamKey keys[] = {{0, 0, Channel::gradient}, {1, 0, Channel::gradient},
                            {0, 1, Channel::gradient}, {0, 0, Channel::shift}};
  std::set<std::uint64_t> firsts;
  for (const auto& k : keys) firsts.insert(RngStream(5, k).next_u64());
  firsts.insert(RngStream(6, keys[0]).next_u64());
  EXPECT_EQ(firsts.size(), 5u);
}

TEST(RngStream, UniformMomentsAcrossKeys) {
  // Correlation between two streams with neighbouring keys stays near zero.
  RngStream a(1, {0, 0, Channel::gradient});
  RngStream b(1, {0, 1, Channel::gradient});
  const int n = 100000;
  double sa = 0, sb = 0, sab = 0;
  for (int i = 0; i < n; ++i) {
    const double u = a.uniform(), v = b.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sa += u;
    sb += v;
    sab += u * v;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  EXPECT_NEAR(sa / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(cov / (1.0 / 12), 0.0, 4 / std::sqrt(double(n)));
}

TEST(RngStream, BelowStaysInRange) {
  RngStream s(9, {});
  for (int i = 0; i < 10000; ++i) EXPECT_LT(s.below(7), 7u);
  EXPECT_THROW(s.below(0), std::invalid_argument);
}

TEST(DrawSubset, Examples) {
  RngStream s(1, {});
  EXPECT_EQ(draw_subset(s, 5, 5), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(draw_subset(s, 1, 1), (std::vector<std::size_t>{0}));
  EXPECT_THROW(draw_subset(s, 3, 0), std::invalid_argument);
  EXPECT_THROW(draw_subset(s, 3, 4), std::invalid_argument);
}

TEST(DrawSubset, DistinctSortedAndUniform) {
  const std::size_t trials = 100000;
  const std::size_t d = 4;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    RngStream s(2, {0, t, Channel::gradient});
    const auto idx = draw_subset(s, d, 1);
    if (idx[0] == 0) ++hits;
  }
  EXPECT_NEAR(static_cast<double>(hits) / trials, 0.25, 0.01);

  // marginal inclusion k/d within 3 standard errors, d = 10, k = 3
  std::vector<std::size_t> count(10, 0);
  for (std::size_t t = 0; t < trials; ++t) {
    RngStream s(3, {0, t, Channel::gradient});
    const auto idx = draw_subset(s, 10, 3);
    ASSERT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    ASSERT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 3u);
    for (auto i : idx) ++count[i];
  }
  const double se = std::sqrt(0.3 * 0.7 / trials);
  for (auto c : count) EXPECT_NEAR(static_cast<double>(c) / trials, 0.3, 3 * se);
}

TEST(DrawPermutation, IsPermutation) {
  RngStream s(4, {});
  auto perm = draw_permutation(s, 50);
  std::sort(perm.begin(), perm.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(perm[i], i);
}

}  // namespace
}  // namespace compgrad
