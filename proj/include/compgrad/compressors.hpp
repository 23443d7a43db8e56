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

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "compgrad/numerics.hpp"

namespace compgrad {

/// Raised for invalid compressor configuration strings or parameters.
class CompressorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct IdentityKind {};

/// Keep k uniformly chosen coordinates and rescale them by d/k.
struct RandomKKind {
  std::size_t k = 1;
};

/// (p, s)-quantization: randomized rounding of |x_i| / ||x||_p onto s levels.
struct QuantizationKind {
  double p = 2.0;
  std::size_t s = 1;
};

/// Randomized rounding of every coordinate to one of its two neighbouring
/// powers of two. The variance parameter is not derivable from the bit budget
/// alone, so it is carried as configuration (1/8 is the tight worst case).
struct NaturalKind {
  double omega = 0.125;
};

using CompressorKind = std::variant<IdentityKind, RandomKKind, QuantizationKind, NaturalKind>;

/// An unbiased randomized compression operator for vectors of a fixed
/// dimension. Immutable once built; all randomness comes from the stream
/// handed to `compress`.
class Compressor {
 public:
  static Compressor identity(std::size_t dim) { return Compressor(dim, IdentityKind{}); }

  static Compressor random_k(std::size_t dim, std::size_t k) {
    if (k == 0 || k > dim) {
      throw CompressorError("random_k: need 0 < k <= d (k=" + std::to_string(k) +
                            ", d=" + std::to_string(dim) + ")");
    }
    return Compressor(dim, RandomKKind{k});
  }

  static Compressor quantization(std::size_t dim, double p, std::size_t s) {
    if (s == 0) throw CompressorError("quantization: s must be >= 1");
    if (!(p >= 1.0)) throw CompressorError("quantization: p must be >= 1");
    return Compressor(dim, QuantizationKind{p, s});
  }

  /// (2, s)-quantization, i.e. random dithering.
  static Compressor dithering(std::size_t dim, std::size_t s) { return quantization(dim, 2.0, s); }

  static Compressor natural(std::size_t dim, double omega = 0.125) {
    if (!(omega >= 0.0)) throw CompressorError("natural: omega must be >= 0");
    return Compressor(dim, NaturalKind{omega});
  }

  /// Sparsification level used when none is given: max(1, floor(d/4)).
  static std::size_t default_k(std::size_t dim) { return std::max<std::size_t>(1, dim / 4); }

  /// Dithering level used when none is given: max(1, floor(sqrt(d))).
  static std::size_t default_s(std::size_t dim) {
    auto s = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(dim))));
    while ((s + 1) * (s + 1) <= dim) ++s;
    while (s > 1 && s * s > dim) --s;
    return std::max<std::size_t>(1, s);
  }

  std::size_t dimension() const noexcept { return dim_; }
  const CompressorKind& kind() const noexcept { return kind_; }
  bool is_identity() const noexcept { return std::holds_alternative<IdentityKind>(kind_); }

  /// Selection-string form (`identity`, `randk:<r>`, `dithering:<s>`, ...).
  std::string name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, IdentityKind>) {
            return "identity";
          } else if constexpr (std::is_same_v<K, RandomKKind>) {
            return "randk:" + std::to_string(k.k);
          } else if constexpr (std::is_same_v<K, QuantizationKind>) {
            if (k.p == 2.0) return "dithering:" + std::to_string(k.s);
            return "quantization:" + std::to_string(k.p) + ":" + std::to_string(k.s);
          } else {
            if (k.omega == NaturalKind{}.omega) return "natural";
            char buf[32];
            std::snprintf(buf, sizeof(buf), "natural:%.17g", k.omega);
            return buf;
          }
        },
        kind_);
  }

 private:
  Compressor(std::size_t dim, CompressorKind kind) : dim_(dim), kind_(kind) {}

  std::size_t dim_;
  CompressorKind kind_;
};

struct CompressedMessage {
  DenseVector payload;
  double bit_cost = 0.0;
};

/// Variance parameter omega: E||C(x) - x||^2 <= omega ||x||^2.
inline double omega(const Compressor& c) {
  const auto d = static_cast<double>(c.dimension());
  return std::visit(
      [d](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, IdentityKind>) {
          return 0.0;
        } else if constexpr (std::is_same_v<K, RandomKKind>) {
          return d / static_cast<double>(k.k) - 1.0;
        } else if constexpr (std::is_same_v<K, QuantizationKind>) {
          return 2.0 + (std::pow(d, 1.0 / k.p) + std::sqrt(d)) / static_cast<double>(k.s);
        } else {
          return k.omega;
        }
      },
      c.kind());
}

/// Bits charged for one compressed message. Depends only on the kind and d.
///
/// Fixed per-message budgets: 32 bits per kept float for random-k, 9 bits per
/// coordinate for natural compression (sign + 8-bit exponent), 2.8d + 32 for
/// dithering at s = floor(sqrt(d)). Other dithering levels fall back to a
/// fixed-width code: 32-bit norm plus sign and ceil(log2(s + 1)) level bits
/// per coordinate.
inline double bit_cost(const Compressor& c) {
  const auto dim = c.dimension();
  const auto d = static_cast<double>(dim);
  return std::visit(
      [d, dim](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, IdentityKind>) {
          return 32.0 * d;
        } else if constexpr (std::is_same_v<K, RandomKKind>) {
          return 32.0 * static_cast<double>(k.k);
        } else if constexpr (std::is_same_v<K, QuantizationKind>) {
          if (k.p == 2.0 && k.s == Compressor::default_s(dim)) return 2.8 * d + 32.0;
          const double level_bits = std::ceil(std::log2(static_cast<double>(k.s) + 1.0));
          return 32.0 + d * (1.0 + level_bits);
        } else {
          return 9.0 * d;
        }
      },
      c.kind());
}

namespace detail {

inline DenseVector compress_random_k(const RandomKKind& kind, const DenseVector& x,
                                     RngStream& stream) {
  const std::size_t d = x.size();
  if (kind.k == d) return x;
  DenseVector out(d);
  const double scale = static_cast<double>(d) / static_cast<double>(kind.k);
  for (std::size_t i : draw_subset(stream, d, kind.k)) out[i] = scale * x[i];
  return out;
}

inline DenseVector compress_quantization(const QuantizationKind& kind, const DenseVector& x,
                                         RngStream& stream) {
  const double xnorm = norm_p(x, kind.p);
  DenseVector out(x.size());
  if (xnorm == 0.0) return out;
  const auto s = static_cast<double>(kind.s);
  const double unit = xnorm / s;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = stream.uniform();  // one draw per coordinate keeps streams aligned
    const double r = std::min(std::abs(x[i]) * s / xnorm, s);
    double level = std::floor(r);
    if (u < r - level) level += 1.0;
    out[i] = std::copysign(unit * level, x[i]);
    if (level == 0.0) out[i] = 0.0;
  }
  return out;
}

inline DenseVector compress_natural(const DenseVector& x, RngStream& stream) {
  DenseVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = stream.uniform();
    const double t = std::abs(x[i]);
    if (t == 0.0) continue;
    int exp = 0;
    const double mantissa = std::frexp(t, &exp);  // t = mantissa * 2^exp, mantissa in [0.5, 1)
    const double low = std::ldexp(1.0, exp - 1);
    if (mantissa == 0.5) {
      out[i] = x[i];
      continue;
    }
    const double prob_up = (t - low) / low;
    const double magnitude = u < prob_up ? 2.0 * low : low;
    out[i] = std::copysign(magnitude, x[i]);
  }
  return out;
}

}  // namespace detail

/// Draws C(x). Throws on dimension mismatch or non-finite input.
inline CompressedMessage compress(const Compressor& c, const DenseVector& x, RngStream& stream) {
  if (x.size() != c.dimension()) {
    throw DimensionError("compress: vector has dimension " + std::to_string(x.size()) +
                         ", compressor expects " + std::to_string(c.dimension()));
  }
  if (!x.all_finite()) throw std::domain_error("compress: non-finite input");
  DenseVector payload = std::visit(
      [&](const auto& k) -> DenseVector {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, IdentityKind>) {
          return x;
        } else if constexpr (std::is_same_v<K, RandomKKind>) {
          return detail::compress_random_k(k, x, stream);
        } else if constexpr (std::is_same_v<K, QuantizationKind>) {
          return detail::compress_quantization(k, x, stream);
        } else {
          return detail::compress_natural(x, stream);
        }
      },
      c.kind());
  return {std::move(payload), bit_cost(c)};
}

/// Parses `identity`, `randk[:<r>]`, `dithering[:<s>]`, `natural[:<omega>]`.
/// Omitted levels take the defaults for dimension `dim`.
inline Compressor parse_compressor(std::string_view text, std::size_t dim) {
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view arg =
      colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  const bool has_arg = colon != std::string_view::npos;

  auto parse_count = [&](std::string_view s) -> std::size_t {
    std::size_t v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc{} || ptr != end || v == 0) {
      throw CompressorError("invalid compressor level in '" + std::string(text) + "'");
    }
    return v;
  };

  if (head == "identity" && !has_arg) return Compressor::identity(dim);
  if (head == "randk") {
    return Compressor::random_k(dim, has_arg ? parse_count(arg) : Compressor::default_k(dim));
  }
  if (head == "dithering") {
    return Compressor::dithering(dim, has_arg ? parse_count(arg) : Compressor::default_s(dim));
  }
  if (head == "natural") {
    if (!has_arg) return Compressor::natural(dim);
    double w = 0.0;
    const auto* end = arg.data() + arg.size();
    auto [ptr, ec] = std::from_chars(arg.data(), end, w);
    if (arg.empty() || ec != std::errc{} || ptr != end) {
      throw CompressorError("invalid natural-compression omega in '" + std::string(text) + "'");
    }
    return Compressor::natural(dim, w);
  }
  throw CompressorError("unknown compressor '" + std::string(text) +
                        "' (expected identity, randk:<r>, dithering:<s>, natural)");
}

}  // namespace compgrad
