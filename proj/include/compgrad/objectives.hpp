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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "compgrad/dataset.hpp"
#include "compgrad/numerics.hpp"

namespace compgrad {

/// Mean logistic loss over local samples plus (lambda/2)||x||^2.
class LogisticLoss {
 public:
  LogisticLoss(SparseDataset samples, double lambda)
      : samples_(std::make_shared<const SparseDataset>(std::move(samples))), lambda_(lambda) {
    if (samples_->size() == 0) throw std::invalid_argument("LogisticLoss: no samples");
    if (!(lambda_ >= 0.0)) throw std::invalid_argument("LogisticLoss: lambda must be >= 0");
  }

  std::size_t dimension() const noexcept { return samples_->dimension(); }
  double lambda() const noexcept { return lambda_; }
  const SparseDataset& samples() const noexcept { return *samples_; }

  double value(const DenseVector& x) const {
    check(x);
    double acc = 0.0;
    for (std::size_t j = 0; j < samples_->size(); ++j) {
      acc += softplus(-samples_->label(j) * samples_->row(j).dot(x));
    }
    return acc / static_cast<double>(samples_->size()) + 0.5 * lambda_ * squared_norm(x);
  }

  DenseVector gradient(const DenseVector& x) const {
    check(x);
    DenseVector g(x.size());
    for (std::size_t j = 0; j < samples_->size(); ++j) {
      const double b = samples_->label(j);
      const auto row = samples_->row(j);
      // d/dt log(1 + e^{-bt}) = -b sigma(-bt)
      row.add_to(-b * sigmoid(-b * row.dot(x)), g);
    }
    const double inv_m = 1.0 / static_cast<double>(samples_->size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] * inv_m + lambda_ * x[i];
    return g;
  }

  /// log(1 + e^t) without overflow.
  static double softplus(double t) noexcept {
    return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
  }

  static double sigmoid(double t) noexcept {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
  }

 private:
  void check(const DenseVector& x) const {
    if (x.size() != dimension()) {
      throw DimensionError("LogisticLoss: expected dimension " + std::to_string(dimension()) +
                           ", got " + std::to_string(x.size()));
    }
  }

  std::shared_ptr<const SparseDataset> samples_;
  double lambda_;
};

/// f(x) = 0.5 x^T A x - b^T x with A applied matrix-free. The caller supplies
/// the extreme eigenvalues of A.
class QuadraticLoss {
 public:
  using Apply = std::function<DenseVector(const DenseVector&)>;

  QuadraticLoss(Apply apply, DenseVector linear, double max_eigenvalue, double min_eigenvalue)
      : apply_(std::move(apply)),
        linear_(std::move(linear)),
        max_eig_(max_eigenvalue),
        min_eig_(min_eigenvalue) {
    if (!(min_eig_ >= 0.0) || !(max_eig_ >= min_eig_)) {
      throw std::invalid_argument("QuadraticLoss: need 0 <= min eigenvalue <= max eigenvalue");
    }
  }

  /// A = diag(diagonal).
  static QuadraticLoss diagonal(DenseVector diagonal, DenseVector linear) {
    if (diagonal.size() != linear.size()) throw DimensionError("QuadraticLoss: size mismatch");
    const auto [lo, hi] = std::minmax_element(diagonal.begin(), diagonal.end());
    const double lo_v = *lo;
    const double hi_v = *hi;
    auto diag = std::make_shared<const DenseVector>(std::move(diagonal));
    return QuadraticLoss(
        [diag](const DenseVector& x) {
          DenseVector out(x.size());
          for (std::size_t i = 0; i < x.size(); ++i) out[i] = (*diag)[i] * x[i];
          return out;
        },
        std::move(linear), hi_v, lo_v);
  }

  /// Dense symmetric A given row-major as d x d values.
  static QuadraticLoss dense(std::vector<double> matrix, DenseVector linear,
                             double max_eigenvalue, double min_eigenvalue) {
    const std::size_t d = linear.size();
    if (matrix.size() != d * d) throw DimensionError("QuadraticLoss: matrix must be d x d");
    auto a = std::make_shared<const std::vector<double>>(std::move(matrix));
    return QuadraticLoss(
        [a, d](const DenseVector& x) {
          DenseVector out(d);
          for (std::size_t r = 0; r < d; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) acc += (*a)[r * d + c] * x[c];
            out[r] = acc;
          }
          return out;
        },
        std::move(linear), max_eigenvalue, min_eigenvalue);
  }

  std::size_t dimension() const noexcept { return linear_.size(); }
  double max_eigenvalue() const noexcept { return max_eig_; }
  double min_eigenvalue() const noexcept { return min_eig_; }
  const DenseVector& linear() const noexcept { return linear_; }

  DenseVector hessian_apply(const DenseVector& x) const { return apply_(x); }

  double value(const DenseVector& x) const {
    return 0.5 * dot(x, apply_(x)) - dot(linear_, x);
  }

  DenseVector gradient(const DenseVector& x) const { return apply_(x) - linear_; }

 private:
  Apply apply_;
  DenseVector linear_;
  double max_eig_;
  double min_eig_;
};

/// One node's smooth loss f_i.
class SmoothLoss {
 public:
  SmoothLoss(LogisticLoss loss) : impl_(std::move(loss)) {}  // NOLINT
  SmoothLoss(QuadraticLoss loss) : impl_(std::move(loss)) {}  // NOLINT

  std::size_t dimension() const {
    return std::visit([](const auto& l) { return l.dimension(); }, impl_);
  }
  double value(const DenseVector& x) const {
    return std::visit([&](const auto& l) { return l.value(x); }, impl_);
  }
  DenseVector gradient(const DenseVector& x) const {
    return std::visit([&](const auto& l) { return l.gradient(x); }, impl_);
  }

  const LogisticLoss* as_logistic() const noexcept { return std::get_if<LogisticLoss>(&impl_); }
  const QuadraticLoss* as_quadratic() const noexcept { return std::get_if<QuadraticLoss>(&impl_); }

 private:
  std::variant<LogisticLoss, QuadraticLoss> impl_;
};

/// The possibly nonsmooth term psi, with its proximal operator.
struct Regularizer {
  enum class Kind { zero, ridge, l1 };

  Kind kind = Kind::zero;
  double lambda = 0.0;

  static Regularizer none() { return {}; }
  static Regularizer ridge(double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("ridge regularizer needs lambda > 0");
    return {Kind::ridge, lambda};
  }
  static Regularizer l1(double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("l1 regularizer needs lambda > 0");
    return {Kind::l1, lambda};
  }

  bool is_zero() const noexcept { return kind == Kind::zero; }

  double value(const DenseVector& x) const {
    switch (kind) {
      case Kind::zero: return 0.0;
      case Kind::ridge: return 0.5 * lambda * squared_norm(x);
      case Kind::l1: return lambda * norm_p(x, 1.0);
    }
    return 0.0;
  }
};

/// argmin_u 0.5||u - v||^2 + eta psi(u).
inline DenseVector prox(const Regularizer& reg, double eta, const DenseVector& v) {
  if (!(eta > 0.0)) throw std::invalid_argument("prox: eta must be > 0");
  switch (reg.kind) {
    case Regularizer::Kind::zero:
      return v;
    case Regularizer::Kind::ridge:
      return scale(1.0 / (1.0 + eta * reg.lambda), v);
    case Regularizer::Kind::l1: {
      const double t = eta * reg.lambda;
      DenseVector out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]) - t;
        out[i] = a > 0.0 ? std::copysign(a, v[i]) : 0.0;
      }
      return out;
    }
  }
  return v;
}

struct SmoothnessEstimate {
  double L = 0.0;
  double mu = 0.0;
  /// True when at least one node's power iteration did not converge and the
  /// Frobenius bound was used instead.
  bool used_frobenius_bound = false;
};

namespace detail {

struct PowerIterationResult {
  double eigenvalue = 0.0;
  bool converged = false;
};

/// Largest eigenvalue of A^T A / m for a node's sample matrix.
inline PowerIterationResult gram_max_eigenvalue(const SparseDataset& ds, double tol = 1e-6,
                                                int max_iters = 500) {
  const std::size_t d = ds.dimension();
  const auto m = static_cast<double>(ds.size());
  DenseVector v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i % 7);
  double vn = norm(v);
  for (double& e : v) e /= vn;

  double estimate = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    DenseVector w(d);
    for (std::size_t j = 0; j < ds.size(); ++j) {
      const auto row = ds.row(j);
      row.add_to(row.dot(v), w);
    }
    for (double& e : w) e /= m;
    const double next = norm(w);
    if (next == 0.0) return {0.0, true};
    for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / next;
    if (it > 0 && std::abs(next - estimate) <= tol * next) return {next, true};
    estimate = next;
  }
  return {estimate, false};
}

inline double frobenius_over_m(const SparseDataset& ds) {
  double s = 0.0;
  for (std::size_t j = 0; j < ds.size(); ++j) {
    for (double v : ds.row(j).values) s += v * v;
  }
  return s / static_cast<double>(ds.size());
}

}  // namespace detail

/// Smoothness and strong-convexity constants of a set of node losses.
/// L is the max over nodes; mu is the mean of the per-node strong convexity
/// moduli, which lower-bounds the modulus of their mean.
inline SmoothnessEstimate estimate_constants(const std::vector<SmoothLoss>& nodes) {
  SmoothnessEstimate est;
  double mu_sum = 0.0;
  for (const auto& node : nodes) {
    double L_i = 0.0;
    double mu_i = 0.0;
    if (const auto* q = node.as_quadratic()) {
      L_i = q->max_eigenvalue();
      mu_i = q->min_eigenvalue();
    } else if (const auto* lg = node.as_logistic()) {
      const auto power = detail::gram_max_eigenvalue(lg->samples());
      double curvature = power.eigenvalue;
      if (!power.converged) {
        curvature = detail::frobenius_over_m(lg->samples());
        est.used_frobenius_bound = true;
      }
      L_i = lg->lambda() + curvature / 4.0;
      mu_i = lg->lambda();
    }
    est.L = std::max(est.L, L_i);
    mu_sum += mu_i;
  }
  est.mu = nodes.empty() ? 0.0 : mu_sum / static_cast<double>(nodes.size());
  return est;
}

/// P(x) = (1/n) sum_i f_i(x) + psi(x).
class Objective {
 public:
  Objective(std::vector<SmoothLoss> nodes, Regularizer regularizer, double L, double mu)
      : nodes_(std::move(nodes)), regularizer_(regularizer), L_(L), mu_(mu) {
    validate();
  }

  /// Builds the objective with constants from `estimate_constants`.
  static Objective with_estimated_constants(std::vector<SmoothLoss> nodes,
                                            Regularizer regularizer = Regularizer::none()) {
    const auto est = estimate_constants(nodes);
    Objective obj(std::move(nodes), regularizer, est.L, est.mu);
    obj.used_frobenius_bound_ = est.used_frobenius_bound;
    return obj;
  }

  std::size_t nodes() const noexcept { return nodes_.size(); }
  std::size_t dimension() const { return nodes_.front().dimension(); }
  const SmoothLoss& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<SmoothLoss>& losses() const noexcept { return nodes_; }
  const Regularizer& regularizer() const noexcept { return regularizer_; }
  double L() const noexcept { return L_; }
  double mu() const noexcept { return mu_; }
  bool used_frobenius_bound() const noexcept { return used_frobenius_bound_; }

  DenseVector grad_node(std::size_t i, const DenseVector& x) const {
    if (i >= nodes_.size()) throw std::out_of_range("grad_node: node index out of range");
    return nodes_[i].gradient(x);
  }

  /// Gradient of the smooth part f = mean of f_i.
  DenseVector grad_full(const DenseVector& x) const {
    DenseVector acc = nodes_.front().gradient(x);
    for (std::size_t i = 1; i < nodes_.size(); ++i) axpy_inplace(1.0, nodes_[i].gradient(x), acc);
    const double inv = 1.0 / static_cast<double>(nodes_.size());
    for (double& v : acc) v *= inv;
    return acc;
  }

  double smooth_value(const DenseVector& x) const {
    double acc = 0.0;
    for (const auto& node : nodes_) acc += node.value(x);
    return acc / static_cast<double>(nodes_.size());
  }

  double value(const DenseVector& x) const { return smooth_value(x) + regularizer_.value(x); }

  /// Stationarity measure: ||grad f|| when psi = 0, else the norm of the
  /// gradient mapping (x - prox_{psi/L}(x - grad f / L)) * L.
  double stationarity(const DenseVector& x) const {
    const DenseVector g = grad_full(x);
    if (regularizer_.is_zero()) return norm(g);
    const double eta = 1.0 / L_;
    const DenseVector step = prox(regularizer_, eta, axpy(-eta, g, x));
    return norm(x - step) / eta;
  }

 private:
  void validate() const {
    if (nodes_.empty()) throw std::invalid_argument("Objective: need at least one node");
    const std::size_t d = nodes_.front().dimension();
    for (const auto& n : nodes_) {
      if (n.dimension() != d) throw DimensionError("Objective: node dimensions differ");
    }
    if (!(L_ > 0.0)) throw std::invalid_argument("Objective: L must be > 0");
    if (!(mu_ >= 0.0)) throw std::invalid_argument("Objective: mu must be >= 0");
    if (mu_ > L_ * (1.0 + 1e-12)) throw std::invalid_argument("Objective: mu exceeds L");
  }

  std::vector<SmoothLoss> nodes_;
  Regularizer regularizer_;
  double L_;
  double mu_;
  bool used_frobenius_bound_ = false;
};

inline SmoothnessEstimate estimate_constants(const Objective& obj) {
  return estimate_constants(obj.losses());
}

/// Ridge-regularized logistic objective over a partitioned dataset.
inline Objective make_logistic_objective(const SparseDataset& ds, const Partition& part,
                                         double lambda,
                                         Regularizer regularizer = Regularizer::none()) {
  std::vector<SmoothLoss> nodes;
  nodes.reserve(part.nodes());
  for (const auto& idx : part.node_sample_indices) {
    nodes.emplace_back(LogisticLoss(ds.subset(idx), lambda));
  }
  return Objective::with_estimated_constants(std::move(nodes), regularizer);
}

}  // namespace compgrad
