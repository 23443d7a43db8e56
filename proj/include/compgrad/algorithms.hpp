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
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "compgrad/compressors.hpp"
#include "compgrad/numerics.hpp"
#include "compgrad/objectives.hpp"
#include "compgrad/parallel.hpp"

namespace compgrad {

/// Invalid method, schedule or experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Method { cgd, acgd_convex, acgd_strongly_convex, dcgd, diana, adiana };

inline Method parse_method(std::string_view s) {
  if (s == "cgd") return Method::cgd;
  if (s == "acgd-cvx") return Method::acgd_convex;
  if (s == "acgd-scvx") return Method::acgd_strongly_convex;
  if (s == "dcgd") return Method::dcgd;
  if (s == "diana") return Method::diana;
  if (s == "adiana") return Method::adiana;
  throw ConfigError("unknown method '" + std::string(s) +
                    "' (expected cgd, acgd-cvx, acgd-scvx, dcgd, diana, adiana)");
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::cgd: return "cgd";
    case Method::acgd_convex: return "acgd-cvx";
    case Method::acgd_strongly_convex: return "acgd-scvx";
    case Method::dcgd: return "dcgd";
    case Method::diana: return "diana";
    case Method::adiana: return "adiana";
  }
  return "?";
}

/// Methods that only make sense on one node with psi = 0.
inline bool is_single_node(Method m) {
  return m == Method::cgd || m == Method::acgd_convex || m == Method::acgd_strongly_convex;
}

// -----------------------------------------------------------------------------
// Schedules
// -----------------------------------------------------------------------------

/// Step size for CGD and DCGD.
struct GradientSchedule {
  double eta = 0.0;
};

/// Step size and shift learning rate for DIANA.
struct DianaSchedule {
  double eta = 0.0;
  double alpha = 0.0;
};

/// Parameters of the accelerated single-node method. Convex mode uses
/// theta_k = k/(k+2), beta_k = 0, gamma_k = 2p/(k+2); strongly convex mode
/// uses the constants theta = p/(p+sqrt(mu/L)), beta = sqrt(mu/L)/p,
/// gamma = sqrt(mu/L). In both, eta = 1/L and p = 1 + omega.
struct AcgdSchedule {
  enum class Mode { convex, strongly_convex };

  Mode mode = Mode::convex;
  double eta = 0.0;
  double p = 1.0;
  double L = 0.0;
  double mu = 0.0;
  double omega = 0.0;
  // Constants for strongly convex mode.
  double theta_sc = 0.0;
  double beta_sc = 0.0;
  double gamma_sc = 0.0;

  static AcgdSchedule convex(double L, double omega) {
    if (!(L > 0.0)) throw ConfigError("ACGD: L must be > 0");
    if (!(omega >= 0.0)) throw ConfigError("ACGD: omega must be >= 0");
    AcgdSchedule s;
    s.mode = Mode::convex;
    s.L = L;
    s.omega = omega;
    s.eta = 1.0 / L;
    s.p = 1.0 + omega;
    return s;
  }

  static AcgdSchedule strongly_convex(double L, double mu, double omega) {
    if (!(mu > 0.0)) {
      throw ConfigError("ACGD strongly convex mode needs mu > 0; use acgd-cvx for mu = 0");
    }
    AcgdSchedule s = convex(L, omega);
    s.mode = Mode::strongly_convex;
    s.mu = mu;
    const double q = std::sqrt(mu / L);
    s.theta_sc = s.p / (s.p + q);
    s.beta_sc = q / s.p;
    s.gamma_sc = q;
    return s;
  }

  double theta(std::uint64_t k) const {
    if (mode == Mode::strongly_convex) return theta_sc;
    const auto kd = static_cast<double>(k);
    return kd / (kd + 2.0);
  }
  double beta(std::uint64_t k) const {
    (void)k;
    return mode == Mode::strongly_convex ? beta_sc : 0.0;
  }
  double gamma(std::uint64_t k) const {
    if (mode == Mode::strongly_convex) return gamma_sc;
    return 2.0 * p / (static_cast<double>(k) + 2.0);
  }

  /// Conditions under which one ACGD step contracts the potential:
  /// theta_k = (1 - gamma_k/p) / (1 - beta_k gamma_k / p),
  /// beta_k <= min{mu eta / (gamma_k p), 1}, p >= (1 + L eta)(1 + omega)/2.
  bool feasible(std::uint64_t k, double tol = 1e-12) const {
    const double th = theta(k);
    const double be = beta(k);
    const double ga = gamma(k);
    const double theta_req = (1.0 - ga / p) / (1.0 - be * ga / p);
    const double beta_cap = std::min(mu * eta / (ga * p), 1.0);
    const double p_req = (1.0 + L * eta) * (1.0 + omega) / 2.0;
    return std::abs(th - theta_req) <= tol * std::max(1.0, std::abs(th)) &&
           be <= beta_cap + tol && p >= p_req * (1.0 - tol) && ga > 0.0 && eta > 0.0;
  }

  void require_feasible(std::uint64_t k) const {
    if (!feasible(k)) {
      throw ConfigError("ACGD schedule violates the one-step contraction conditions at k=" +
                        std::to_string(k));
    }
  }
};

/// Accelerated DIANA parameters:
///   eta    = min{1/(2L), n / (64 omega (2p(omega+1)+1)^2 L)}
///   theta1 = min{1/4, sqrt(eta mu / p)},  theta2 = 1/2
///   alpha  = 1/(omega+1),  gamma = eta / (2(theta1 + eta mu)),  beta = 1 - gamma mu
///   p      = min{1, max{1, sqrt(n/(32 omega)) - 1} / (2(1+omega))}
/// With omega = 0 the second step-size branch is inactive and p = 1.
struct AdianaSchedule {
  double eta = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.5;
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 0.0;
  double p = 1.0;
  double L = 0.0;
  double mu = 0.0;
  double omega = 0.0;
  std::size_t n = 1;

  static double anchor_probability(double omega, std::size_t n) {
    if (omega == 0.0) return 1.0;
    const double root = std::sqrt(static_cast<double>(n) / (32.0 * omega)) - 1.0;
    return std::min(1.0, std::max(1.0, root) / (2.0 * (1.0 + omega)));
  }

  static AdianaSchedule theoretical(double L, double mu, double omega, std::size_t n) {
    if (!(L > 0.0)) throw ConfigError("ADIANA: L must be > 0");
    if (!(mu > 0.0)) throw ConfigError("ADIANA requires a strongly convex objective (mu > 0)");
    if (!(omega >= 0.0)) throw ConfigError("ADIANA: omega must be >= 0");
    if (n == 0) throw ConfigError("ADIANA: need at least one node");
    AdianaSchedule s;
    s.L = L;
    s.mu = mu;
    s.omega = omega;
    s.n = n;
    s.p = anchor_probability(omega, n);
    s.eta = 1.0 / (2.0 * L);
    if (omega > 0.0) {
      const double t = 2.0 * s.p * (omega + 1.0) + 1.0;
      s.eta = std::min(s.eta, static_cast<double>(n) / (64.0 * omega * t * t * L));
    }
    s.theta1 = std::min(0.25, std::sqrt(s.eta * mu / s.p));
    s.theta2 = 0.5;
    s.alpha = 1.0 / (omega + 1.0);
    s.gamma = s.eta / (2.0 * (s.theta1 + s.eta * mu));
    s.beta = 1.0 - s.gamma * mu;
    return s;
  }

  /// Guaranteed expected per-step contraction of the Lyapunov function:
  /// min{alpha/4, p/8, sqrt(eta mu p)/4}.
  double contraction() const {
    return std::min({alpha / 4.0, p / 8.0, std::sqrt(eta * mu * p) / 4.0});
  }

  void validate() const {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("ADIANA: need 0 < p <= 1");
    if (!(eta > 0.0)) throw ConfigError("ADIANA: need eta > 0");
    if (!(theta1 > 0.0) || !(theta2 >= 0.0) || theta1 + theta2 > 1.0) {
      throw ConfigError("ADIANA: need theta1 > 0, theta2 >= 0, theta1 + theta2 <= 1");
    }
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("ADIANA: need 0 < beta <= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("ADIANA: need 0 < alpha <= 1");
    if (!(gamma > 0.0)) throw ConfigError("ADIANA: need gamma > 0");
  }
};

using Schedule = std::variant<GradientSchedule, DianaSchedule, AcgdSchedule, AdianaSchedule>;

/// Theoretical parameters for `method`.
///
/// CGD: eta = 1/((1+omega)L). DCGD: eta = 1/((1+omega/n)L).
/// DIANA: eta = 1/((1+2 omega/n)L), alpha = 1/(1+omega).
inline Schedule build_schedule(Method method, double L, double mu, double omega, std::size_t n) {
  if (!(L > 0.0)) throw ConfigError("schedule: L must be > 0");
  if (!(mu >= 0.0)) throw ConfigError("schedule: mu must be >= 0");
  if (!(omega >= 0.0)) throw ConfigError("schedule: omega must be >= 0");
  if (n == 0) throw ConfigError("schedule: n must be >= 1");
  const auto nd = static_cast<double>(n);
  switch (method) {
    case Method::cgd:
      return GradientSchedule{1.0 / ((1.0 + omega) * L)};
    case Method::dcgd:
      return GradientSchedule{1.0 / ((1.0 + omega / nd) * L)};
    case Method::diana:
      return DianaSchedule{1.0 / ((1.0 + 2.0 * omega / nd) * L), 1.0 / (1.0 + omega)};
    case Method::acgd_convex:
      return AcgdSchedule::convex(L, omega);
    case Method::acgd_strongly_convex:
      return AcgdSchedule::strongly_convex(L, mu, omega);
    case Method::adiana:
      return AdianaSchedule::theoretical(L, mu, omega, n);
  }
  throw ConfigError("schedule: unknown method");
}

// -----------------------------------------------------------------------------
// States and step results
// -----------------------------------------------------------------------------

/// Iterate of CGD / DCGD.
struct IterateState {
  DenseVector x;
  std::uint64_t k = 0;

  static IterateState initial(DenseVector x0) { return {std::move(x0), 0}; }
};

struct DianaState {
  DenseVector x;
  std::vector<DenseVector> shifts;
  DenseVector shift_mean;
  std::uint64_t k = 0;

  /// Zero shifts on n nodes.
  static DianaState initial(DenseVector x0, std::size_t n) {
    DianaState s;
    s.shifts.assign(n, DenseVector::zeros(x0.size()));
    s.shift_mean = DenseVector::zeros(x0.size());
    s.x = std::move(x0);
    return s;
  }
};

struct AcgdState {
  DenseVector x;
  DenseVector y;
  DenseVector z;
  std::uint64_t k = 0;

  static AcgdState initial(const DenseVector& x0) { return {x0, x0, x0, 0}; }
};

struct AdianaState {
  DenseVector x;  // last query point x^k (x^0 before the first step)
  DenseVector y;
  DenseVector z;
  DenseVector w;
  std::vector<DenseVector> shifts;
  DenseVector shift_mean;
  /// Cached grad f_i(w); empty whenever w changed since it was filled.
  std::vector<DenseVector> anchor_gradients;
  std::uint64_t k = 0;

  static AdianaState initial(const DenseVector& x0, std::size_t n) {
    AdianaState s;
    s.x = s.y = s.z = s.w = x0;
    s.shifts.assign(n, DenseVector::zeros(x0.size()));
    s.shift_mean = DenseVector::zeros(x0.size());
    return s;
  }

  static AdianaState initial(const DenseVector& x0, std::vector<DenseVector> shifts) {
    if (shifts.empty()) throw std::invalid_argument("AdianaState: need at least one shift");
    AdianaState s;
    s.x = s.y = s.z = s.w = x0;
    s.shift_mean = mean_of(shifts);
    s.shifts = std::move(shifts);
    return s;
  }
};

/// Components of the accelerated DIANA Lyapunov function.
struct LyapunovSnapshot {
  double Z = 0.0;  // ||z - x*||^2
  double Y = 0.0;  // P(y) - P(x*)
  double W = 0.0;  // P(w) - P(x*)
  double H = 0.0;  // (1/n) sum ||h_i - grad f_i(w)||^2
  double Psi = 0.0;
};

template <class State>
struct StepOutcome {
  State state;
  double bits_sent = 0.0;
  std::optional<LyapunovSnapshot> diagnostics;
};

/// Server-side stream identity (the anchor coin is shared by all nodes).
inline constexpr std::uint64_t kServerNode = std::numeric_limits<std::uint64_t>::max();

namespace detail {

inline void require_single_node(const Objective& obj, const char* method) {
  if (obj.nodes() != 1 || !obj.regularizer().is_zero()) {
    throw ConfigError(std::string(method) + " needs a single-node objective with psi = 0");
  }
}

inline void require_dimension(const Objective& obj, const Compressor& c) {
  if (obj.dimension() != c.dimension()) {
    throw DimensionError("compressor dimension " + std::to_string(c.dimension()) +
                         " does not match objective dimension " + std::to_string(obj.dimension()));
  }
}

inline RngStream node_stream(std::uint64_t seed, std::size_t node, std::uint64_t k, Channel ch) {
  return RngStream(seed, {static_cast<std::uint64_t>(node), k, ch});
}

/// Mean of per-node vectors, reduced in node order.
inline DenseVector node_mean(const std::vector<DenseVector>& parts) { return mean_of(parts); }

/// (1/n) sum_i (messages_i + shifts_i)
inline DenseVector shifted_mean(const std::vector<DenseVector>& messages,
                                const std::vector<DenseVector>& shifts) {
  std::vector<DenseVector> parts(messages.size());
  for (std::size_t i = 0; i < messages.size(); ++i) parts[i] = messages[i] + shifts[i];
  return mean_of(parts);
}

}  // namespace detail

/// x' = x - eta C(grad f(x)).
inline StepOutcome<IterateState> cgd_step(const IterateState& state, const Objective& obj,
                                          const Compressor& compressor, double eta,
                                          std::uint64_t seed) {
  detail::require_single_node(obj, "CGD");
  detail::require_dimension(obj, compressor);
  auto stream = detail::node_stream(seed, 0, state.k, Channel::gradient);
  const auto msg = compress(compressor, obj.grad_node(0, state.x), stream);
  return {{axpy(-eta, msg.payload, state.x), state.k + 1}, msg.bit_cost, std::nullopt};
}

/// One ACGD iteration:
///   x^k     = theta y^k + (1 - theta) z^k
///   g^k     = C(grad f(x^k))
///   y^{k+1} = x^k - (eta/p) g^k
///   z^{k+1} = y^{k+1}/gamma + (1/p - 1/gamma) y^k + (1 - 1/p)(1 - beta) z^k
///             + (1 - 1/p) beta x^k
inline StepOutcome<AcgdState> acgd_step(const AcgdState& state, const Objective& obj,
                                        const Compressor& compressor, const AcgdSchedule& sched,
                                        std::uint64_t seed) {
  detail::require_single_node(obj, "ACGD");
  detail::require_dimension(obj, compressor);
  sched.require_feasible(state.k);
  const double theta = sched.theta(state.k);
  const double beta = sched.beta(state.k);
  const double gamma = sched.gamma(state.k);
  const double p = sched.p;
  const std::size_t d = state.y.size();

  AcgdState next;
  next.k = state.k + 1;
  next.x = DenseVector(d);
  for (std::size_t i = 0; i < d; ++i) next.x[i] = theta * state.y[i] + (1.0 - theta) * state.z[i];

  auto stream = detail::node_stream(seed, 0, state.k, Channel::gradient);
  const auto msg = compress(compressor, obj.grad_node(0, next.x), stream);
  next.y = axpy(-sched.eta / p, msg.payload, next.x);

  const double c_new = 1.0 / gamma;
  const double c_old = 1.0 / p - 1.0 / gamma;
  const double c_z = (1.0 - 1.0 / p) * (1.0 - beta);
  const double c_x = (1.0 - 1.0 / p) * beta;
  next.z = DenseVector(d);
  for (std::size_t i = 0; i < d; ++i) {
    next.z[i] = c_new * next.y[i] + c_old * state.y[i] + c_z * state.z[i] + c_x * next.x[i];
  }
  return {std::move(next), msg.bit_cost, std::nullopt};
}

/// Distributed compressed gradient descent:
/// x' = prox_{eta psi}(x - eta (1/n) sum_i C_i(grad f_i(x))).
inline StepOutcome<IterateState> dcgd_step(const IterateState& state, const Objective& obj,
                                           const Compressor& compressor, double eta,
                                           std::uint64_t seed,
                                           NodeExecutor& exec = NodeExecutor::sequential()) {
  detail::require_dimension(obj, compressor);
  const std::size_t n = obj.nodes();
  std::vector<DenseVector> messages(n);
  exec.for_each(n, [&](std::size_t i) {
    auto stream = detail::node_stream(seed, i, state.k, Channel::gradient);
    messages[i] = compress(compressor, obj.grad_node(i, state.x), stream).payload;
  });
  const DenseVector g = detail::node_mean(messages);
  DenseVector x = prox(obj.regularizer(), eta, axpy(-eta, g, state.x));
  return {{std::move(x), state.k + 1}, static_cast<double>(n) * bit_cost(compressor),
          std::nullopt};
}

/// DIANA: nodes send m_i = C_i(grad f_i(x) - h_i); the server steps along
/// g = mean(m_i + h_i) and every shift moves by alpha m_i.
inline StepOutcome<DianaState> diana_step(const DianaState& state, const Objective& obj,
                                          const Compressor& compressor,
                                          const DianaSchedule& sched, std::uint64_t seed,
                                          NodeExecutor& exec = NodeExecutor::sequential()) {
  detail::require_dimension(obj, compressor);
  const std::size_t n = obj.nodes();
  if (state.shifts.size() != n) throw DimensionError("DIANA: one shift per node required");
  std::vector<DenseVector> messages(n);
  exec.for_each(n, [&](std::size_t i) {
    auto stream = detail::node_stream(seed, i, state.k, Channel::gradient);
    messages[i] = compress(compressor, obj.grad_node(i, state.x) - state.shifts[i], stream).payload;
  });
  const DenseVector g = detail::shifted_mean(messages, state.shifts);

  DianaState next;
  next.k = state.k + 1;
  next.x = prox(obj.regularizer(), sched.eta, axpy(-sched.eta, g, state.x));
  next.shifts.resize(n);
  for (std::size_t i = 0; i < n; ++i) next.shifts[i] = axpy(sched.alpha, messages[i], state.shifts[i]);
  next.shift_mean = detail::node_mean(next.shifts);
  return {std::move(next), static_cast<double>(n) * bit_cost(compressor), std::nullopt};
}

/// One accelerated DIANA iteration. Every node compresses two shifted
/// gradients with independent randomness: at the query point x^k (channel 0)
/// and at the anchor w^k (channel 1). The anchor is refreshed to y^k with
/// probability p by one server-side coin (channel 2).
///
/// With `count_shift_message` the shift-update message is charged as well,
/// so a round costs 2n messages; otherwise n.
inline StepOutcome<AdianaState> adiana_step(const AdianaState& state, const Objective& obj,
                                            const Compressor& compressor,
                                            const AdianaSchedule& sched, std::uint64_t seed,
                                            NodeExecutor& exec = NodeExecutor::sequential(),
                                            bool count_shift_message = true) {
  detail::require_dimension(obj, compressor);
  const std::size_t n = obj.nodes();
  if (state.shifts.size() != n) throw DimensionError("ADIANA: one shift per node required");
  const std::size_t d = state.y.size();
  const double t1 = sched.theta1;
  const double t2 = sched.theta2;

  DenseVector x(d);
  for (std::size_t i = 0; i < d; ++i) {
    x[i] = t1 * state.z[i] + t2 * state.w[i] + (1.0 - t1 - t2) * state.y[i];
  }

  const bool have_anchor_grads = state.anchor_gradients.size() == n;
  std::vector<DenseVector> anchor_grads = have_anchor_grads ? state.anchor_gradients
                                                            : std::vector<DenseVector>(n);
  std::vector<DenseVector> grad_msgs(n);
  std::vector<DenseVector> shift_msgs(n);
  exec.for_each(n, [&](std::size_t i) {
    if (!have_anchor_grads) anchor_grads[i] = obj.grad_node(i, state.w);
    auto s_grad = detail::node_stream(seed, i, state.k, Channel::gradient);
    auto s_shift = detail::node_stream(seed, i, state.k, Channel::shift);
    grad_msgs[i] = compress(compressor, obj.grad_node(i, x) - state.shifts[i], s_grad).payload;
    shift_msgs[i] = compress(compressor, anchor_grads[i] - state.shifts[i], s_shift).payload;
  });

  const DenseVector g = detail::shifted_mean(grad_msgs, state.shifts);

  AdianaState next;
  next.k = state.k + 1;
  next.shifts.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    next.shifts[i] = axpy(sched.alpha, shift_msgs[i], state.shifts[i]);
  }
  next.shift_mean = detail::node_mean(next.shifts);

  next.y = prox(obj.regularizer(), sched.eta, axpy(-sched.eta, g, x));
  const double step_ratio = sched.gamma / sched.eta;
  next.z = DenseVector(d);
  for (std::size_t i = 0; i < d; ++i) {
    next.z[i] = sched.beta * state.z[i] + (1.0 - sched.beta) * x[i] +
                step_ratio * (next.y[i] - x[i]);
  }

  auto coin = RngStream(seed, {kServerNode, state.k, Channel::anchor});
  if (coin.uniform() < sched.p) {
    next.w = state.y;
  } else {
    next.w = state.w;
    next.anchor_gradients = std::move(anchor_grads);
  }
  next.x = std::move(x);

  const double messages = count_shift_message ? 2.0 * static_cast<double>(n)
                                              : static_cast<double>(n);
  return {std::move(next), messages * bit_cost(compressor), std::nullopt};
}

}  // namespace compgrad
