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
#include <vector>

#include "compgrad/compressors.hpp"

namespace compgrad {
namespace {

DenseVector draw(const Compressor& c, const DenseVector& x, std::uint64_t t) {
  RngStream s(17, {0, t, Channel::gradient});
  return compress(c, x, s).payload;
}

TEST(Omega, ClosedForms) {
  EXPECT_EQ(omega(Compressor::random_k(4, 1)), 3.0);
  EXPECT_EQ(omega(Compressor::identity(7)), 0.0);
  EXPECT_DOUBLE_EQ(omega(Compressor::quantization(100, 2.0, 10)), 4.0);
  EXPECT_EQ(omega(Compressor::natural(5)), 0.125);
  EXPECT_EQ(omega(Compressor::random_k(9, 9)), 0.0);
}

TEST(BitCost, FixedBudgets) {
  EXPECT_EQ(bit_cost(Compressor::random_k(100, 25)), 800.0);
  EXPECT_DOUBLE_EQ(bit_cost(Compressor::dithering(100, 10)), 312.0);
  EXPECT_EQ(bit_cost(Compressor::natural(100)), 900.0);
  EXPECT_EQ(bit_cost(Compressor::identity(100)), 3200.0);
  // s != floor(sqrt(d)): 32-bit norm plus sign and ceil(log2(s+1)) level bits
  EXPECT_EQ(bit_cost(Compressor::dithering(100, 3)), 32.0 + 100.0 * 3.0);
}

TEST(BitCost, IndependentOfPayload) {
  const Compressor c = Compressor::dithering(6, 2);
  RngStream s(1, {});
  EXPECT_EQ(compress(c, DenseVector::zeros(6), s).bit_cost, bit_cost(c));
  EXPECT_EQ(compress(c, DenseVector{1, 2, 3, 4, 5, 6}, s).bit_cost, bit_cost(c));
}

TEST(Defaults, Levels) {
  EXPECT_EQ(Compressor::default_k(3), 1u);
  EXPECT_EQ(Compressor::default_k(123), 30u);
  EXPECT_EQ(Compressor::default_s(1), 1u);
  EXPECT_EQ(Compressor::default_s(99), 9u);
  EXPECT_EQ(Compressor::default_s(100), 10u);
  EXPECT_EQ(Compressor::default_s(112), 10u);
}

TEST(Compress, IdentityIsExact) {
  EXPECT_EQ(draw(Compressor::identity(2), DenseVector{1, -2}, 0), (DenseVector{1, -2}));
}

TEST(Compress, ZeroMapsToZero) {
  for (const auto& c : {Compressor::identity(3), Compressor::random_k(3, 1),
                        Compressor::dithering(3, 1), Compressor::natural(3)}) {
    EXPECT_EQ(draw(c, DenseVector::zeros(3), 4), DenseVector::zeros(3)) << c.name();
  }
}

TEST(Compress, RejectsBadInput) {
  RngStream s(1, {});
  EXPECT_THROW(compress(Compressor::natural(3), DenseVector{1, 2}, s), DimensionError);
  EXPECT_THROW(compress(Compressor::natural(2), DenseVector{1, NAN}, s), std::domain_error);
}

TEST(RandomK, TwoOutcomeLaw) {
  const Compressor c = Compressor::random_k(2, 1);
  const DenseVector x{1, 3};
  const int n = 100000;
  int first = 0;
  DenseVector mean = DenseVector::zeros(2);
  for (int t = 0; t < n; ++t) {
    const DenseVector y = draw(c, x, t);
    const bool a = y == DenseVector{2, 0};
    ASSERT_TRUE(a || y == (DenseVector{0, 6}));
    first += a;
    axpy_inplace(1.0 / n, y, mean);
  }
  const double se = std::sqrt(0.25 / n);
  EXPECT_NEAR(static_cast<double>(first) / n, 0.5, 3 * se);
  EXPECT_NEAR(mean[0], 1.0, 3 * 2 * se);
  EXPECT_NEAR(mean[1], 3.0, 3 * 6 * se);
}

TEST(RandomK, FullKIsDeterministic) {
  const DenseVector x{0.1, -0.2, 0.3};
  for (int t = 0; t < 20; ++t) EXPECT_EQ(draw(Compressor::random_k(3, 3), x, t), x);
}

TEST(RandomK, KeepsExactlyK) {
  const DenseVector x{1, 2, 3, 4, 5, 6, 7, 8};
  for (int t = 0; t < 50; ++t) {
    const DenseVector y = draw(Compressor::random_k(8, 3), x, t);
    int kept = 0;
    for (std::size_t i = 0; i < 8; ++i) {
      if (y[i] != 0.0) {
        ++kept;
        EXPECT_EQ(y[i], (8.0 / 3.0) * x[i]);
      }
    }
    EXPECT_EQ(kept, 3);
  }
}

TEST(Quantization, OutputsAdjacentLevelsWithInputSign) {
  const DenseVector x{0.3, -1.7, 0.0, 2.2, -0.05};
  for (std::size_t s : {1u, 2u, 5u}) {
    const Compressor c = Compressor::dithering(5, s);
    const double unit = norm(x) / static_cast<double>(s);
    for (int t = 0; t < 200; ++t) {
      const DenseVector y = draw(c, x, t);
      for (std::size_t i = 0; i < 5; ++i) {
        const double r = std::abs(x[i]) / unit;
        const double level = std::abs(y[i]) / unit;
        EXPECT_NEAR(level, std::round(level), 1e-9);
        EXPECT_GE(std::round(level), std::floor(r));
        EXPECT_LE(std::round(level), std::floor(r) + 1);
        if (y[i] != 0.0) {
          EXPECT_EQ(std::signbit(y[i]), std::signbit(x[i]));
        }
      }
    }
  }
}

TEST(Quantization, ExactLevelNeverRoundsUp) {
  // |x_i| s / ||x|| integer for every coordinate: output is x itself.
  const DenseVector x{3, 4};
  for (int t = 0; t < 100; ++t) EXPECT_EQ(draw(Compressor::dithering(2, 5), x, t), x);
}

TEST(Natural, PowersOfTwoWithinFactorTwo) {
  const DenseVector x{0.3, -1.7, 1e-5, 8.0, -3.0};
  for (int t = 0; t < 200; ++t) {
    const DenseVector y = draw(Compressor::natural(5), x, t);
    for (std::size_t i = 0; i < 5; ++i) {
      int e = 0;
      EXPECT_EQ(std::frexp(std::abs(y[i]), &e), 0.5);
      EXPECT_GE(std::abs(y[i]), std::abs(x[i]) / 2);
      EXPECT_LE(std::abs(y[i]), 2 * std::abs(x[i]));
      EXPECT_EQ(std::signbit(y[i]), std::signbit(x[i]));
    }
    EXPECT_EQ(y[3], 8.0);
  }
}

TEST(Law, UnbiasedAndVarianceBounded) {
  // 20 random vectors per kind; d = 1 and 10 here (the wider grid runs in
  // the acceptance suite).
  const int draws = 20000;
  for (std::size_t d : {1u, 10u}) {
    const std::vector<Compressor> kinds{Compressor::random_k(d, std::max<std::size_t>(1, d / 4)),
                                        Compressor::dithering(d, Compressor::default_s(d)),
                                        Compressor::natural(d)};
    for (const auto& c : kinds) {
      for (std::uint64_t v = 0; v < 20; ++v) {
        RngStream rv(100 + v, {});
        DenseVector x(d);
        for (auto& e : x) e = 4 * rv.uniform() - 2;
        std::vector<double> s1(d, 0.0), s2(d, 0.0);
        double err = 0.0;
        for (int t = 0; t < draws; ++t) {
          RngStream s(v, {d, static_cast<std::uint64_t>(t), Channel::gradient});
          const DenseVector y = compress(c, x, s).payload;
          for (std::size_t i = 0; i < d; ++i) {
            s1[i] += y[i];
            s2[i] += y[i] * y[i];
          }
          err += squared_distance(y, x);
        }
        for (std::size_t i = 0; i < d; ++i) {
          const double m = s1[i] / draws;
          const double se = std::sqrt(std::max(0.0, s2[i] / draws - m * m) / draws);
          EXPECT_LE(std::abs(m - x[i]), 4 * se + 1e-10 * std::abs(x[i])) << c.name();
        }
        EXPECT_LE(err / draws, omega(c) * squared_norm(x) * 1.05) << c.name();
      }
    }
  }
}

TEST(Parse, SelectionStrings) {
  EXPECT_TRUE(parse_compressor("identity", 5).is_identity());
  EXPECT_EQ(parse_compressor("randk", 100).name(), "randk:25");
  EXPECT_EQ(parse_compressor("randk:7", 100).name(), "randk:7");
  EXPECT_EQ(parse_compressor("dithering", 123).name(), "dithering:11");
  EXPECT_EQ(parse_compressor("dithering:3", 123).name(), "dithering:3");
  EXPECT_EQ(parse_compressor("natural", 4).name(), "natural");
  EXPECT_EQ(omega(parse_compressor("natural:0.5", 4)), 0.5);
  EXPECT_EQ(parse_compressor("natural:0.5", 4).name(), "natural:0.5");
}

TEST(Parse, Rejects) {
  for (const char* bad : {"", "topk", "randk:", "randk:0", "randk:x", "randk:200", "dithering:-1",
                          "identity:2", "natural:abc", "natural:-1"}) {
    EXPECT_THROW(parse_compressor(bad, 100), CompressorError) << bad;
  }
}

}  // namespace
}  // namespace compgrad
