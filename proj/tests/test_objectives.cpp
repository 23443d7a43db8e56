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

#include <cmath>
#include <vector>

#include "compgrad/dataset.hpp"
#include "compgrad/objectives.hpp"
#include "test_support.hpp"

namespace compgrad {
namespace {

SparseDataset one_sample(double a0, double a1, double label) {
  SparseDataset ds(2);
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  if (a0 != 0.0) idx.push_back(0), val.push_back(a0);
  if (a1 != 0.0) idx.push_back(1), val.push_back(a1);
  ds.add_row(label, idx, val);
  return ds;
}

SparseDataset small_data() { return make_synthetic({"obj", 90, 12, 3}, 4); }

TEST(Logistic, GradientAtOriginSingleSample) {
  const LogisticLoss loss(one_sample(1, 0, 1), 0.0);
  EXPECT_EQ(loss.gradient(DenseVector::zeros(2)), (DenseVector{-0.5, 0}));
  EXPECT_DOUBLE_EQ(loss.value(DenseVector::zeros(2)), std::log(2.0));
}

TEST(Logistic, ValueAtOriginIsLogTwo) {
  const LogisticLoss loss(small_data(), 0.0);
  EXPECT_NEAR(loss.value(DenseVector::zeros(12)), std::log(2.0), 1e-15);
}

TEST(Logistic, StableForLargeMargins) {
  const LogisticLoss loss(one_sample(1, 0, 1), 0.0);
  EXPECT_NEAR(loss.value(DenseVector{-800, 0}), 800.0, 1e-12);
  EXPECT_EQ(loss.value(DenseVector{800, 0}), 0.0);
  EXPECT_TRUE(loss.gradient(DenseVector{-800, 0}).all_finite());
  EXPECT_EQ(LogisticLoss::sigmoid(-800), 0.0);
  EXPECT_EQ(LogisticLoss::sigmoid(800), 1.0);
}

TEST(Logistic, FiniteDifferences) {
  const LogisticLoss loss(small_data(), 1e-2);
  for (std::uint64_t p = 0; p < 10; ++p) {
    const DenseVector x = testing::random_vector(12, 60 + p, 1.0);
    const DenseVector g = loss.gradient(x);
    DenseVector fd(12);
    const double h = 1e-5;
    for (std::size_t j = 0; j < 12; ++j) {
      DenseVector hi = x, lo = x;
      hi[j] += h;
      lo[j] -= h;
      fd[j] = (loss.value(hi) - loss.value(lo)) / (2 * h);
    }
    EXPECT_LT(std::sqrt(squared_distance(g, fd)) / norm(g), 1e-6);
  }
}

TEST(Quadratic, IdentityHessianGradient) {
  const auto q = QuadraticLoss::diagonal(DenseVector{1, 1}, DenseVector::zeros(2));
  EXPECT_EQ(q.gradient(DenseVector{2, -1}), (DenseVector{2, -1}));
  EXPECT_EQ(q.value(DenseVector{2, -1}), 2.5);
}

TEST(Quadratic, RejectsBadSpectrum) {
  EXPECT_THROW(QuadraticLoss::diagonal(DenseVector{-1, 1}, DenseVector::zeros(2)),
               std::invalid_argument);
  EXPECT_THROW(QuadraticLoss::dense({1, 0, 0}, DenseVector::zeros(2), 1, 1), DimensionError);
}

TEST(GradFull, MeanOfNodes) {
  const SparseDataset ds = small_data();
  const Objective one =
      make_logistic_objective(ds, partition(ds, 1, PartitionScheme::contiguous), 1e-3);
  const DenseVector x = testing::random_vector(12, 8, 1.0);
  EXPECT_EQ(one.grad_full(x), one.grad_node(0, x));

  const LogisticLoss l(ds, 1e-3);
  const Objective twins({SmoothLoss(l), SmoothLoss(l)}, Regularizer::none(), 1.0, 0.0);
  const DenseVector g = twins.grad_full(x);
  EXPECT_EQ(g, twins.grad_node(0, x));

  // Equal-size 3-way split matches the unsplit gradient.
  const Objective split =
      make_logistic_objective(ds, partition(ds, 3, PartitionScheme::shuffled, 5), 1e-3);
  const DenseVector gs = split.grad_full(x);
  const DenseVector g1 = one.grad_full(x);
  EXPECT_LT(std::sqrt(squared_distance(gs, g1)) / norm(g1), 1e-12);
}

TEST(Value, Examples) {
  const SparseDataset ds = small_data();
  const auto part = partition(ds, 3, PartitionScheme::contiguous);
  EXPECT_NEAR(make_logistic_objective(ds, part, 0.0).value(DenseVector::zeros(12)), std::log(2.0),
              1e-15);
  const Objective ridge = make_logistic_objective(ds, part, 0.0, Regularizer::ridge(0.3));
  EXPECT_EQ(ridge.value(DenseVector::zeros(12)), ridge.smooth_value(DenseVector::zeros(12)));
}

TEST(Value, DecreasesAlongNegativeGradient) {
  const SparseDataset ds = small_data();
  const Objective obj =
      make_logistic_objective(ds, partition(ds, 3, PartitionScheme::shuffled, 2), 1e-3);
  for (std::uint64_t p = 0; p < 10; ++p) {
    const DenseVector x = testing::random_vector(12, 200 + p, 2.0);
    const DenseVector g = obj.grad_full(x);
    EXPECT_LT(obj.value(axpy(-1e-3 / obj.L(), g, x)), obj.value(x));
  }
}

TEST(Prox, Examples) {
  EXPECT_EQ(prox(Regularizer::none(), 0.7, DenseVector{1, -2}), (DenseVector{1, -2}));
  EXPECT_EQ(prox(Regularizer::ridge(1), 1, DenseVector{2}), (DenseVector{1}));
  EXPECT_EQ(prox(Regularizer::l1(1), 0.5, DenseVector{0.3, -2}), (DenseVector{0, -1.5}));
  EXPECT_THROW(prox(Regularizer::l1(1), 0.0, DenseVector{1}), std::invalid_argument);
  EXPECT_THROW(Regularizer::ridge(0), std::invalid_argument);
}

TEST(Prox, Nonexpansive) {
  for (const auto& reg : {Regularizer::none(), Regularizer::ridge(0.4), Regularizer::l1(0.9)}) {
    for (std::uint64_t t = 0; t < 100; ++t) {
      const DenseVector u = testing::random_vector(6, 2 * t, 3.0);
      const DenseVector v = testing::random_vector(6, 2 * t + 1, 3.0);
      EXPECT_LE(squared_distance(prox(reg, 0.8, u), prox(reg, 0.8, v)),
                squared_distance(u, v) * (1 + 1e-15));
    }
  }
}

TEST(Constants, Quadratic) {
  const auto est = estimate_constants(std::vector<SmoothLoss>{
      QuadraticLoss::diagonal(DenseVector{1, 4}, DenseVector::zeros(2))});
  EXPECT_EQ(est.L, 4.0);
  EXPECT_EQ(est.mu, 1.0);
}

TEST(Constants, LogisticSingleSample) {
  const auto est = estimate_constants(std::vector<SmoothLoss>{LogisticLoss(one_sample(2, 0, 1), 0)});
  EXPECT_NEAR(est.L, 1.0, 1e-6);
  EXPECT_EQ(est.mu, 0.0);
  const auto ridge =
      estimate_constants(std::vector<SmoothLoss>{LogisticLoss(one_sample(2, 0, 1), 1e-3)});
  EXPECT_NEAR(ridge.L - est.L, 1e-3, 1e-9);
  EXPECT_EQ(ridge.mu, 1e-3);
}

TEST(Constants, SmoothnessCertificate) {
  const SparseDataset ds = small_data();
  const Objective obj =
      make_logistic_objective(ds, partition(ds, 3, PartitionScheme::shuffled, 1), 1e-2);
  for (std::uint64_t t = 0; t < 100; ++t) {
    const DenseVector x = testing::random_vector(12, 400 + 2 * t, 2.0);
    const DenseVector y = testing::random_vector(12, 401 + 2 * t, 2.0);
    for (std::size_t i = 0; i < obj.nodes(); ++i) {
      EXPECT_LE(norm(obj.grad_node(i, x) - obj.grad_node(i, y)), obj.L() * norm(x - y) * (1 + 1e-9));
    }
  }
}

TEST(Objective, ValidatesConstruction) {
  const auto q = QuadraticLoss::diagonal(DenseVector{1, 4}, DenseVector::zeros(2));
  const auto q3 = QuadraticLoss::diagonal(DenseVector{1, 4, 1}, DenseVector::zeros(3));
  EXPECT_THROW(Objective({}, Regularizer::none(), 1, 0), std::invalid_argument);
  EXPECT_THROW(Objective({q, q3}, Regularizer::none(), 4, 1), DimensionError);
  EXPECT_THROW(Objective({q}, Regularizer::none(), 1, 2), std::invalid_argument);
  EXPECT_THROW(Objective({q}, Regularizer::none(), 0, 0), std::invalid_argument);
}

TEST(Stationarity, ZeroAtMinimizer) {
  const auto q = QuadraticLoss::diagonal(DenseVector{1, 4}, DenseVector{1, 0});
  const Objective obj({q}, Regularizer::none(), 4, 1);
  EXPECT_EQ(obj.stationarity(DenseVector{1, 0}), 0.0);
  // l1 with lambda above |grad| at 0 makes 0 stationary
  const Objective sparse({QuadraticLoss::diagonal(DenseVector{1, 1}, DenseVector{0.5, -0.5})},
                         Regularizer::l1(1.0), 1, 1);
  EXPECT_EQ(sparse.stationarity(DenseVector::zeros(2)), 0.0);
}

}  // namespace
}  // namespace compgrad
