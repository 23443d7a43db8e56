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
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "compgrad/algorithms.hpp"
#include "compgrad/compressors.hpp"
#include "compgrad/dataset.hpp"
#include "compgrad/numerics.hpp"
#include "compgrad/objectives.hpp"
#include "compgrad/parallel.hpp"

namespace compgrad {

/// An error raised while an experiment is running, tagged with where it
/// happened.
class RunError : public std::runtime_error {
 public:
  RunError(const std::string& context, const std::string& what)
      : std::runtime_error(context + ": " + what) {}
};

// -----------------------------------------------------------------------------
// Reference optimum
// -----------------------------------------------------------------------------

struct ReferenceOptions {
  std::uint64_t max_iters = 100000;
  /// Early exit once stationarity <= tolerance * max(1, stationarity(x0)).
  double tolerance = 1e-12;
  std::uint64_t check_every = 10;
};

struct ReferenceSolution {
  DenseVector x_star;
  double f_star = 0.0;
  std::uint64_t iterations = 0;
  double stationarity = 0.0;
  bool converged = false;
  std::string solver;  // which uncompressed method produced the minimum
};

namespace detail {

struct ReferenceCandidate {
  DenseVector x;
  double value = 0.0;
  std::uint64_t iterations = 0;
  double stationarity = 0.0;
  bool converged = false;
};

template <class State, class Step, class Output>
ReferenceCandidate run_reference_method(State state, const Objective& obj,
                                        const ReferenceOptions& opts, double target, Step step,
                                        Output output) {
  ReferenceCandidate best;
  std::uint64_t k = 0;
  double station = obj.stationarity(output(state));
  while (k < opts.max_iters && station > target) {
    state = step(state);
    ++k;
    if (k % opts.check_every == 0 || k == opts.max_iters) station = obj.stationarity(output(state));
  }
  best.x = output(state);
  best.value = obj.value(best.x);
  best.iterations = k;
  best.stationarity = obj.stationarity(best.x);
  best.converged = best.stationarity <= target;
  return best;
}

}  // namespace detail

/// Minimum of uncompressed ADIANA, DIANA and DCGD started from `x0`.
inline ReferenceSolution solve_reference(const Objective& obj, const ReferenceOptions& opts = {},
                                         std::optional<DenseVector> x0 = std::nullopt) {
  if (!(obj.mu() > 0.0)) {
    throw ConfigError("reference solve needs a strongly convex objective (mu > 0)");
  }
  const std::size_t d = obj.dimension();
  const std::size_t n = obj.nodes();
  const DenseVector start = x0 ? *x0 : DenseVector::zeros(d);
  const double target = opts.tolerance * std::max(1.0, obj.stationarity(start));
  const Compressor exact = Compressor::identity(d);
  constexpr std::uint64_t kSeed = 0;

  const auto adiana_sched = AdianaSchedule::theoretical(obj.L(), obj.mu(), 0.0, n);
  const auto diana_sched = std::get<DianaSchedule>(build_schedule(Method::diana, obj.L(), obj.mu(), 0.0, n));
  const auto dcgd_sched = std::get<GradientSchedule>(build_schedule(Method::dcgd, obj.L(), obj.mu(), 0.0, n));

  std::vector<std::pair<std::string, detail::ReferenceCandidate>> candidates;
  candidates.emplace_back(
      "adiana", detail::run_reference_method(
                    AdianaState::initial(start, n), obj, opts, target,
                    [&](const AdianaState& s) {
                      return adiana_step(s, obj, exact, adiana_sched, kSeed).state;
                    },
                    [](const AdianaState& s) { return s.y; }));
  candidates.emplace_back(
      "diana", detail::run_reference_method(
                   DianaState::initial(start, n), obj, opts, target,
                   [&](const DianaState& s) {
                     return diana_step(s, obj, exact, diana_sched, kSeed).state;
                   },
                   [](const DianaState& s) { return s.x; }));
  candidates.emplace_back(
      "dcgd", detail::run_reference_method(
                  IterateState::initial(start), obj, opts, target,
                  [&](const IterateState& s) {
                    return dcgd_step(s, obj, exact, dcgd_sched.eta, kSeed).state;
                  },
                  [](const IterateState& s) { return s.x; }));

  const auto best = std::min_element(candidates.begin(), candidates.end(),
                                     [](const auto& a, const auto& b) {
                                       return a.second.value < b.second.value;
                                     });
  ReferenceSolution ref;
  ref.x_star = best->second.x;
  ref.f_star = best->second.value;
  ref.iterations = best->second.iterations;
  ref.stationarity = best->second.stationarity;
  ref.converged = best->second.converged;
  ref.solver = best->first;
  return ref;
}

// -----------------------------------------------------------------------------
// Lyapunov diagnostics
// -----------------------------------------------------------------------------

/// Psi = Z + (2 gamma beta / theta1) Y
///         + 2 gamma beta theta2 (1 + theta1) / (theta1 p) W
///         + 8 gamma eta omega / (alpha theta1 n) H
/// The H term vanishes when omega = 0.
inline LyapunovSnapshot lyapunov_snapshot(const AdianaState& state, const Objective& obj,
                                          const DenseVector& x_star, double f_star,
                                          const AdianaSchedule& sched) {
  const std::size_t n = obj.nodes();
  LyapunovSnapshot s;
  s.Z = squared_distance(state.z, x_star);
  s.Y = obj.value(state.y) - f_star;
  s.W = obj.value(state.w) - f_star;
  double h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const DenseVector gw = state.anchor_gradients.size() == n ? state.anchor_gradients[i]
                                                              : obj.grad_node(i, state.w);
    h += squared_distance(state.shifts[i], gw);
  }
  s.H = h / static_cast<double>(n);

  const double gb = sched.gamma * sched.beta;
  s.Psi = s.Z + (2.0 * gb / sched.theta1) * s.Y +
          2.0 * gb * sched.theta2 * (1.0 + sched.theta1) / (sched.theta1 * sched.p) * s.W;
  if (sched.omega > 0.0) {
    s.Psi += 8.0 * sched.gamma * sched.eta * sched.omega /
             (sched.alpha * sched.theta1 * static_cast<double>(n)) * s.H;
  }
  return s;
}

inline LyapunovSnapshot lyapunov_snapshot(const AdianaState& state, const Objective& obj,
                                          const ReferenceSolution& ref,
                                          const AdianaSchedule& sched) {
  return lyapunov_snapshot(state, obj, ref.x_star, ref.f_star, sched);
}

// -----------------------------------------------------------------------------
// Runs
// -----------------------------------------------------------------------------

struct TraceRecord {
  std::uint64_t iter = 0;
  double cumulative_bits = 0.0;
  double f_gap = 0.0;
  double grad_norm = 0.0;
  double dist_to_opt = 0.0;
  std::optional<LyapunovSnapshot> lyapunov;
};

using ParameterOverrides = std::map<std::string, double>;

/// Applies named parameter overrides verbatim (no re-derivation of the
/// dependent parameters). Unknown names are rejected.
inline Schedule apply_overrides(Schedule sched, const ParameterOverrides& overrides) {
  for (const auto& [key, value] : overrides) {
    bool known = false;
    std::visit(
        [&](auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, GradientSchedule>) {
            if (key == "eta") { s.eta = value; known = true; }
          } else if constexpr (std::is_same_v<S, DianaSchedule>) {
            if (key == "eta") { s.eta = value; known = true; }
            if (key == "alpha") { s.alpha = value; known = true; }
          } else if constexpr (std::is_same_v<S, AcgdSchedule>) {
            if (key == "eta") { s.eta = value; known = true; }
            if (key == "p") { s.p = value; known = true; }
          } else {
            if (key == "eta") { s.eta = value; known = true; }
            if (key == "theta1") { s.theta1 = value; known = true; }
            if (key == "theta2") { s.theta2 = value; known = true; }
            if (key == "alpha") { s.alpha = value; known = true; }
            if (key == "beta") { s.beta = value; known = true; }
            if (key == "gamma") { s.gamma = value; known = true; }
            if (key == "p") { s.p = value; known = true; }
          }
        },
        sched);
    if (!known) throw ConfigError("override '" + key + "' does not apply to this method");
    if (!std::isfinite(value)) throw ConfigError("override '" + key + "' is not finite");
  }
  std::visit(
      [](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, AdianaSchedule>) {
          s.validate();
        } else if constexpr (std::is_same_v<S, AcgdSchedule>) {
          s.require_feasible(0);
        } else if constexpr (std::is_same_v<S, DianaSchedule>) {
          if (!(s.eta > 0.0)) throw ConfigError("eta must be > 0");
          if (!(s.alpha > 0.0 && s.alpha <= 1.0)) throw ConfigError("alpha must be in (0, 1]");
        } else {
          if (!(s.eta > 0.0)) throw ConfigError("eta must be > 0");
        }
      },
      sched);
  return sched;
}

/// Everything a run needs besides the objective.
struct RunOptions {
  Method method = Method::adiana;
  std::uint64_t master_seed = 1;
  std::optional<std::uint64_t> max_iters;
  std::optional<double> max_bits;
  bool diagnostics = false;
  ParameterOverrides overrides;
  /// Charge ADIANA's shift-update message as a second message per node.
  bool count_shift_message = true;
  /// Report bits summed over nodes instead of bits per node.
  bool sum_node_bits = false;
  /// Record every iteration below this many, else thin to about this many rows.
  std::uint64_t trace_rows = 10000;
  std::optional<DenseVector> x0;
  ReferenceOptions reference;
  std::size_t threads = 1;
};

struct RunResult {
  std::vector<TraceRecord> trace;
  ReferenceSolution reference;
  Schedule schedule;
  double L = 0.0;
  double mu = 0.0;
  double omega = 0.0;
  double bits_per_round = 0.0;
  std::uint64_t iterations = 0;
  bool diagnostics = false;
  bool f_gap_clamped = false;
};

namespace detail {

inline const DenseVector& output_point(const IterateState& s) { return s.x; }
inline const DenseVector& output_point(const DianaState& s) { return s.x; }
inline const DenseVector& output_point(const AcgdState& s) { return s.y; }
inline const DenseVector& output_point(const AdianaState& s) { return s.y; }

inline std::uint64_t planned_iterations(const RunOptions& opts, double bits_per_round) {
  if (!opts.max_iters && !opts.max_bits) {
    throw ConfigError("budget: set max_iters and/or max_bits");
  }
  std::uint64_t k = std::numeric_limits<std::uint64_t>::max();
  if (opts.max_iters) k = *opts.max_iters;
  if (opts.max_bits) {
    if (!(*opts.max_bits > 0.0)) throw ConfigError("budget: max_bits must be > 0");
    const double rounds = std::floor(*opts.max_bits / bits_per_round * (1.0 + 1e-12));
    k = std::min<std::uint64_t>(k, static_cast<std::uint64_t>(rounds));
  }
  if (k == 0) throw ConfigError("budget allows no iterations");
  return k;
}

}  // namespace detail

/// Runs `opts.method` on `obj` (reference solution computed unless given).
inline RunResult run_on(const Objective& obj, const Compressor& compressor, const RunOptions& opts,
                        std::optional<ReferenceSolution> reference = std::nullopt) {
  const std::size_t n = obj.nodes();
  const std::size_t d = obj.dimension();
  if (compressor.dimension() != d) {
    throw ConfigError("compressor dimension does not match the objective");
  }
  if (is_single_node(opts.method) && (n != 1 || !obj.regularizer().is_zero())) {
    throw ConfigError(std::string(to_string(opts.method)) +
                      " runs on a single node with no regularizer; use --nodes 1");
  }

  RunResult result;
  result.L = obj.L();
  result.mu = obj.mu();
  result.omega = omega(compressor);
  result.schedule =
      apply_overrides(build_schedule(opts.method, obj.L(), obj.mu(), result.omega, n), opts.overrides);
  result.diagnostics = opts.diagnostics && opts.method == Method::adiana;
  result.reference = reference ? *reference : solve_reference(obj, opts.reference, opts.x0);

  const double message_bits = bit_cost(compressor);
  double messages_per_round = is_single_node(opts.method) ? 1.0 : static_cast<double>(n);
  if (opts.method == Method::adiana && opts.count_shift_message) messages_per_round *= 2.0;
  const double node_bits = is_single_node(opts.method) ? message_bits
                                                       : messages_per_round / static_cast<double>(n) * message_bits;
  result.bits_per_round = opts.sum_node_bits ? messages_per_round * message_bits : node_bits;

  const std::uint64_t K = detail::planned_iterations(opts, result.bits_per_round);
  const std::uint64_t stride = K < opts.trace_rows ? 1 : (K + opts.trace_rows - 1) / opts.trace_rows;
  result.iterations = K;

  NodeExecutor exec(opts.threads);
  const DenseVector x0 = opts.x0 ? *opts.x0 : DenseVector::zeros(d);
  const auto& ref = result.reference;

  auto record = [&](std::uint64_t k, const DenseVector& out,
                    std::optional<LyapunovSnapshot> lyap) {
    TraceRecord r;
    r.iter = k;
    r.cumulative_bits = static_cast<double>(k) * result.bits_per_round;
    r.f_gap = obj.value(out) - ref.f_star;
    if (r.f_gap < -1e-10) {
      r.f_gap = -1e-10;
      result.f_gap_clamped = true;
    }
    r.grad_norm = obj.stationarity(out);
    r.dist_to_opt = std::sqrt(squared_distance(out, ref.x_star));
    r.lyapunov = std::move(lyap);
    result.trace.push_back(std::move(r));
  };
  auto wants = [&](std::uint64_t k) { return k % stride == 0 || k == K; };

  auto drive = [&](auto state, auto step, auto diag) {
    record(0, detail::output_point(state), diag(state));
    for (std::uint64_t k = 1; k <= K; ++k) {
      try {
        state = step(state);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw RunError(std::string(to_string(opts.method)) + " iteration " + std::to_string(k),
                       e.what());
      }
      if (wants(k)) record(k, detail::output_point(state), diag(state));
    }
  };
  auto no_diag = [](const auto&) { return std::optional<LyapunovSnapshot>{}; };
  const std::uint64_t seed = opts.master_seed;

  std::visit(
      [&](const auto& sched) {
        using S = std::decay_t<decltype(sched)>;
        if constexpr (std::is_same_v<S, GradientSchedule>) {
          if (opts.method == Method::cgd) {
            drive(IterateState::initial(x0),
                  [&](const IterateState& s) { return cgd_step(s, obj, compressor, sched.eta, seed).state; },
                  no_diag);
          } else {
            drive(IterateState::initial(x0),
                  [&](const IterateState& s) {
                    return dcgd_step(s, obj, compressor, sched.eta, seed, exec).state;
                  },
                  no_diag);
          }
        } else if constexpr (std::is_same_v<S, DianaSchedule>) {
          drive(DianaState::initial(x0, n),
                [&](const DianaState& s) { return diana_step(s, obj, compressor, sched, seed, exec).state; },
                no_diag);
        } else if constexpr (std::is_same_v<S, AcgdSchedule>) {
          drive(AcgdState::initial(x0),
                [&](const AcgdState& s) { return acgd_step(s, obj, compressor, sched, seed).state; },
                no_diag);
        } else {
          drive(AdianaState::initial(x0, n),
                [&](const AdianaState& s) {
                  return adiana_step(s, obj, compressor, sched, seed, exec, opts.count_shift_message)
                      .state;
                },
                [&](const AdianaState& s) -> std::optional<LyapunovSnapshot> {
                  if (!result.diagnostics) return std::nullopt;
                  return lyapunov_snapshot(s, obj, ref, sched);
                });
        }
      },
      result.schedule);
  return result;
}

// -----------------------------------------------------------------------------
// Dataset-backed experiments
// -----------------------------------------------------------------------------

/// A fully specified experiment on a LIBSVM dataset.
struct ExperimentSpec {
  std::string method = "adiana";
  std::string compressor = "dithering";
  std::string dataset;
  std::size_t nodes = 20;
  double lambda = 1e-3;
  /// l1 weight of psi; 0 means psi = 0.
  double l1 = 0.0;
  std::uint64_t master_seed = 1;
  std::optional<std::uint64_t> max_iters;
  std::optional<double> max_bits;
  PartitionScheme partition = PartitionScheme::shuffled;
  bool diagnostics = false;
  ParameterOverrides overrides;
  bool count_shift_message = true;
  bool sum_node_bits = false;
  std::uint64_t reference_max_iters = 100000;
  double reference_tolerance = 1e-12;
};

inline constexpr std::uint64_t kSyntheticDataSeed = 0x5eed5eedULL;

struct ResolvedDataset {
  SparseDataset data;
  /// `file:<path>` or `synthetic:<profile>`.
  std::string source;
};

/// Resolves a dataset reference: an existing file path, a profile name found
/// under $COMPGRAD_DATA_DIR, or else a synthetic stand-in for a known profile.
inline ResolvedDataset resolve_dataset(const std::string& ref) {
  namespace fs = std::filesystem;
  if (!ref.empty() && fs::is_regular_file(ref)) return {load_libsvm(ref), "file:" + ref};
  if (const char* dir = std::getenv("COMPGRAD_DATA_DIR")) {
    const fs::path candidate = fs::path(dir) / ref;
    if (fs::is_regular_file(candidate)) {
      return {load_libsvm(candidate.string()), "file:" + candidate.string()};
    }
  }
  if (const auto profile = find_profile(ref)) {
    return {make_synthetic(*profile, kSyntheticDataSeed), "synthetic:" + profile->name};
  }
  throw std::runtime_error("dataset '" + ref + "' is neither a readable file nor a known profile");
}

/// Builds the objective described by `spec` over an already loaded dataset.
inline Objective build_objective(const ExperimentSpec& spec, const SparseDataset& data) {
  if (spec.nodes == 0) throw ConfigError("nodes must be >= 1");
  if (!(spec.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(spec.l1 >= 0.0)) throw ConfigError("l1 must be >= 0");
  if (spec.nodes > data.size()) {
    throw ConfigError("nodes (" + std::to_string(spec.nodes) + ") exceeds sample count (" +
                      std::to_string(data.size()) + ")");
  }
  const auto part = partition(data, spec.nodes, spec.partition, spec.master_seed);
  const Regularizer psi = spec.l1 > 0.0 ? Regularizer::l1(spec.l1) : Regularizer::none();
  return make_logistic_objective(data, part, spec.lambda, psi);
}

inline RunOptions make_run_options(const ExperimentSpec& spec, std::size_t threads) {
  RunOptions opts;
  opts.method = parse_method(spec.method);
  opts.master_seed = spec.master_seed;
  opts.max_iters = spec.max_iters;
  opts.max_bits = spec.max_bits;
  opts.diagnostics = spec.diagnostics;
  opts.overrides = spec.overrides;
  opts.count_shift_message = spec.count_shift_message;
  opts.sum_node_bits = spec.sum_node_bits;
  opts.reference.max_iters = spec.reference_max_iters;
  opts.reference.tolerance = spec.reference_tolerance;
  opts.threads = threads;
  return opts;
}

/// Loads the dataset, builds objective, schedule and reference, and runs.
inline RunResult run(const ExperimentSpec& spec, std::size_t threads = 1) {
  const auto opts = make_run_options(spec, threads);
  const auto data = resolve_dataset(spec.dataset);
  const Objective obj = build_objective(spec, data.data);
  const Compressor comp = parse_compressor(spec.compressor, obj.dimension());
  return run_on(obj, comp, opts);
}

// -----------------------------------------------------------------------------
// Trace output
// -----------------------------------------------------------------------------

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// CSV with header `iter,bits,f_gap,grad_norm,dist_opt[,Z,Y,W,H,Psi]`.
inline void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace,
                            bool diagnostics) {
  out << "iter,bits,f_gap,grad_norm,dist_opt";
  if (diagnostics) out << ",Z,Y,W,H,Psi";
  out << '\n';
  for (const auto& r : trace) {
    out << r.iter << ',' << format_real(r.cumulative_bits) << ',' << format_real(r.f_gap) << ','
        << format_real(r.grad_norm) << ',' << format_real(r.dist_to_opt);
    if (diagnostics) {
      const LyapunovSnapshot l = r.lyapunov.value_or(LyapunovSnapshot{});
      out << ',' << format_real(l.Z) << ',' << format_real(l.Y) << ',' << format_real(l.W) << ','
          << format_real(l.H) << ',' << format_real(l.Psi);
    }
    out << '\n';
  }
}

}  // namespace compgrad
