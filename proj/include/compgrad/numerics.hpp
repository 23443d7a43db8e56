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
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace compgrad {

/// Raised when two operands of a vector operation disagree in length.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense d-dimensional vector of doubles. Length is fixed at construction.
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
  DenseVector(std::initializer_list<double> values) : values_(values) {}
  explicit DenseVector(std::vector<double> values) : values_(std::move(values)) {}

  static DenseVector zeros(std::size_t dim) { return DenseVector(dim, 0.0); }

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const DenseVector&, const DenseVector&) = default;

 private:
  std::vector<double> values_;
};

namespace detail {

inline void require_same_size(const DenseVector& a, const DenseVector& b,
                              const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": dimension mismatch (" +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
}

}  // namespace detail

inline double dot(const DenseVector& a, const DenseVector& b) {
  detail::require_same_size(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

/// Returns alpha * x + y.
inline DenseVector axpy(double alpha, const DenseVector& x, const DenseVector& y) {
  detail::require_same_size(x, y, "axpy");
  DenseVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha * x[i] + y[i];
  return out;
}

/// y += alpha * x
inline void axpy_inplace(double alpha, const DenseVector& x, DenseVector& y) {
  detail::require_same_size(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline DenseVector scale(double alpha, const DenseVector& x) {
  DenseVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha * x[i];
  return out;
}

inline DenseVector operator+(const DenseVector& a, const DenseVector& b) {
  detail::require_same_size(a, b, "add");
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline DenseVector operator-(const DenseVector& a, const DenseVector& b) {
  detail::require_same_size(a, b, "subtract");
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline DenseVector operator*(double alpha, const DenseVector& x) { return scale(alpha, x); }

/// l_p norm; pass `std::numeric_limits<double>::infinity()` for the max norm.
inline double norm_p(const DenseVector& x, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
  }
  if (!(p >= 1.0)) throw std::invalid_argument("norm_p: p must be >= 1");
  if (p == 1.0) {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return s;
  }
  if (p == 2.0) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
  }
  double s = 0.0;
  for (double v : x) s += std::pow(std::abs(v), p);
  return std::pow(s, 1.0 / p);
}

inline double norm(const DenseVector& x) { return norm_p(x, 2.0); }

inline double squared_norm(const DenseVector& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

inline double squared_distance(const DenseVector& a, const DenseVector& b) {
  detail::require_same_size(a, b, "squared_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

/// Arithmetic mean of equally sized vectors, summed in index order.
inline DenseVector mean_of(std::span<const DenseVector> parts) {
  if (parts.empty()) throw std::invalid_argument("mean_of: no vectors");
  DenseVector acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) axpy_inplace(1.0, parts[i], acc);
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (double& v : acc) v *= inv;
  return acc;
}

// -----------------------------------------------------------------------------
// Randomness
// -----------------------------------------------------------------------------

/// Stream channels. 0..2 are used by the optimizers; the rest by tooling.
enum class Channel : std::uint32_t {
  gradient = 0,
  shift = 1,
  anchor = 2,
  partition = 3,
  synthetic_data = 4,
  initial_point = 5,
};

struct StreamKey {
  std::uint64_t node = 0;
  std::uint64_t iteration = 0;
  Channel channel = Channel::gradient;
};

namespace detail {

// Stafford's variant 13 finalizer (the SplitMix64 output function).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Counter-based random stream. The n-th draw is a pure function of
/// (master_seed, key, n), so streams never share state and the sequence of a
/// stream does not depend on what other streams did before it.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, StreamKey key) noexcept
      : key_(derive_key(master_seed, key)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t c = counter_++;
    return detail::mix64(detail::mix64(key_ + c * detail::kGolden) ^ c);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound) (Lemire's nearly-divisionless method).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("RngStream::below: bound is 0");
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::uint64_t draws() const noexcept { return counter_; }

 private:
  static std::uint64_t derive_key(std::uint64_t seed, StreamKey key) noexcept {
    std::uint64_t h = detail::mix64(seed ^ 0x6a09e667f3bcc909ULL);
    h = detail::mix64(h ^ detail::mix64(key.node + 0xbb67ae8584caa73bULL));
    h = detail::mix64(h ^ detail::mix64(key.iteration + 0x3c6ef372fe94f82bULL));
    h = detail::mix64(
        h ^ detail::mix64(static_cast<std::uint64_t>(key.channel) + 0xa54ff53a5f1d36f1ULL));
    return h;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline double draw_uniform(RngStream& stream) { return stream.uniform(); }

/// k distinct indices from [0, d), uniform over all k-subsets, ascending.
inline std::vector<std::size_t> draw_subset(RngStream& stream, std::size_t d,
                                            std::size_t k) {
  if (k == 0 || k > d) {
    throw std::invalid_argument("draw_subset: need 0 < k <= d (k=" + std::to_string(k) +
                                ", d=" + std::to_string(d) + ")");
  }
  std::vector<std::size_t> pool(d);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  if (k < d) {
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(stream.below(d - i));
      std::swap(pool[i], pool[j]);
    }
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

/// Uniformly random permutation of [0, m).
inline std::vector<std::size_t> draw_permutation(RngStream& stream, std::size_t m) {
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = m; i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

}  // namespace compgrad
