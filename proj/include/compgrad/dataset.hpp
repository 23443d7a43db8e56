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
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "compgrad/numerics.hpp"

namespace compgrad {

/// A LIBSVM parse failure, located by 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct SparseRowView {
  std::span<const std::uint32_t> indices;
  std::span<const double> values;
  /// Every value is exactly 1.
  bool unit = false;

  double dot(const DenseVector& x) const noexcept {
    const std::size_t len = indices.size();
    const std::uint32_t* idx = indices.data();
    const double* xv = x.data();
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t j = 0;
    if (unit) {
      for (; j + 4 <= len; j += 4) {
        a0 += xv[idx[j]];
        a1 += xv[idx[j + 1]];
        a2 += xv[idx[j + 2]];
        a3 += xv[idx[j + 3]];
      }
      for (; j < len; ++j) a0 += xv[idx[j]];
    } else {
      const double* v = values.data();
      for (; j + 4 <= len; j += 4) {
        a0 += v[j] * xv[idx[j]];
        a1 += v[j + 1] * xv[idx[j + 1]];
        a2 += v[j + 2] * xv[idx[j + 2]];
        a3 += v[j + 3] * xv[idx[j + 3]];
      }
      for (; j < len; ++j) a0 += v[j] * xv[idx[j]];
    }
    return (a0 + a1) + (a2 + a3);
  }

  /// out += alpha * row
  void add_to(double alpha, DenseVector& out) const noexcept {
    double* o = out.data();
    if (unit) {
      for (std::size_t j = 0; j < indices.size(); ++j) o[indices[j]] += alpha;
    } else {
      for (std::size_t j = 0; j < indices.size(); ++j) o[indices[j]] += alpha * values[j];
    }
  }
};

/// Binary-labelled sparse samples in compressed-row form. Labels are +-1 and
/// row indices are strictly increasing and below `dimension()`.
class SparseDataset {
 public:
  SparseDataset() = default;
  explicit SparseDataset(std::size_t dim) : dim_(dim) {}

  std::size_t dimension() const noexcept { return dim_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t nonzeros() const noexcept { return indices_.size(); }

  double label(std::size_t i) const noexcept { return labels_[i]; }
  const std::vector<double>& labels() const noexcept { return labels_; }

  SparseRowView row(std::size_t i) const noexcept {
    const auto b = offsets_[i];
    const auto e = offsets_[i + 1];
    return {std::span<const std::uint32_t>(indices_).subspan(b, e - b),
            std::span<const double>(values_).subspan(b, e - b), unit_values_};
  }

  void add_row(double label, std::span<const std::uint32_t> indices,
               std::span<const double> values) {
    if (indices.size() != values.size()) {
      throw std::invalid_argument("add_row: indices/values length mismatch");
    }
    if (label != 1.0 && label != -1.0) throw std::invalid_argument("add_row: label must be +-1");
    for (std::size_t j = 0; j < indices.size(); ++j) {
      if (indices[j] >= dim_) throw std::invalid_argument("add_row: index out of range");
      if (j > 0 && indices[j] <= indices[j - 1]) {
        throw std::invalid_argument("add_row: indices must be strictly increasing");
      }
    }
    indices_.insert(indices_.end(), indices.begin(), indices.end());
    values_.insert(values_.end(), values.begin(), values.end());
    for (double v : values) unit_values_ = unit_values_ && v == 1.0;
    offsets_.push_back(indices_.size());
    labels_.push_back(label);
  }

  /// Rows `selection` (in the given order) as a new dataset of the same dimension.
  SparseDataset subset(std::span<const std::size_t> selection) const {
    SparseDataset out(dim_);
    for (std::size_t i : selection) {
      const auto r = row(i);
      out.add_row(labels_[i], r.indices, r.values);
    }
    return out;
  }

  friend bool operator==(const SparseDataset&, const SparseDataset&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
  std::vector<double> labels_;
  bool unit_values_ = true;
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses LIBSVM text (`<label> <index>:<value> ...`, 1-based indices).
///
/// Labels 1/+1 map to +1; 0, -1 and 2 map to -1. Blank lines and `#`
/// comments are skipped. The dimension is the largest index seen unless
/// `dimension_override` is given, which must not be smaller.
inline SparseDataset parse_libsvm(std::istream& in,
                                  std::optional<std::size_t> dimension_override = std::nullopt) {
  struct Row {
    double label;
    std::vector<std::uint32_t> indices;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = detail::trim(view);
    if (view.empty()) continue;

    std::vector<std::string_view> tokens;
    while (!view.empty()) {
      const auto sp = view.find_first_of(" \t");
      tokens.push_back(view.substr(0, sp));
      if (sp == std::string_view::npos) break;
      view = detail::trim(view.substr(sp));
    }

    Row row{};
    double raw_label = 0.0;
    if (!detail::parse_double(tokens.front(), raw_label)) {
      throw ParseError(line_no, "non-numeric label '" + std::string(tokens.front()) + "'");
    }
    if (raw_label == 1.0) {
      row.label = 1.0;
    } else if (raw_label == -1.0 || raw_label == 0.0 || raw_label == 2.0) {
      row.label = -1.0;
    } else {
      throw ParseError(line_no, "unsupported label '" + std::string(tokens.front()) +
                                    "' (expected one of 0, 1, -1, +1, 2)");
    }

    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto tok = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(line_no, "malformed token '" + std::string(tok) + "' (expected index:value)");
      }
      const auto idx_text = tok.substr(0, colon);
      const auto val_text = tok.substr(colon + 1);
      std::uint64_t index = 0;
      {
        const auto* end = idx_text.data() + idx_text.size();
        auto [ptr, ec] = std::from_chars(idx_text.data(), end, index);
        if (idx_text.empty() || ec != std::errc{} || ptr != end) {
          throw ParseError(line_no, "non-numeric feature index '" + std::string(idx_text) + "'");
        }
      }
      if (index == 0) throw ParseError(line_no, "feature index 0 (indices are 1-based)");
      if (index > std::numeric_limits<std::uint32_t>::max()) {
        throw ParseError(line_no, "feature index " + std::to_string(index) + " too large");
      }
      double value = 0.0;
      if (!detail::parse_double(val_text, value)) {
        throw ParseError(line_no, "non-numeric feature value '" + std::string(val_text) + "'");
      }
      const auto zero_based = static_cast<std::uint32_t>(index - 1);
      if (!row.indices.empty()) {
        if (zero_based == row.indices.back()) {
          throw ParseError(line_no, "duplicate feature index " + std::to_string(index));
        }
        if (zero_based < row.indices.back()) {
          throw ParseError(line_no, "feature indices not increasing at " + std::to_string(index));
        }
      }
      row.indices.push_back(zero_based);
      row.values.push_back(value);
      max_index = std::max<std::size_t>(max_index, index);
    }
    rows.push_back(std::move(row));
  }

  std::size_t dim = max_index;
  if (dimension_override) {
    if (*dimension_override < max_index) {
      throw ParseError(line_no, "dimension override " + std::to_string(*dimension_override) +
                                    " is smaller than the largest index " +
                                    std::to_string(max_index));
    }
    dim = *dimension_override;
  }
  SparseDataset ds(dim);
  for (const auto& r : rows) ds.add_row(r.label, r.indices, r.values);
  return ds;
}

inline SparseDataset load_libsvm(const std::string& path,
                                 std::optional<std::size_t> dimension_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return parse_libsvm(in, dimension_override);
}

/// Writes LIBSVM text that parses back to an identical dataset.
inline void write_libsvm(std::ostream& out, const SparseDataset& ds) {
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << (ds.label(i) > 0 ? "+1" : "-1");
    const auto r = ds.row(i);
    for (std::size_t j = 0; j < r.indices.size(); ++j) {
      std::snprintf(buf, sizeof(buf), " %u:%.17g", r.indices[j] + 1, r.values[j]);
      out << buf;
    }
    out << '\n';
  }
}

// -----------------------------------------------------------------------------
// Partitioning
// -----------------------------------------------------------------------------

enum class PartitionScheme { contiguous, shuffled };

inline PartitionScheme parse_partition_scheme(std::string_view s) {
  if (s == "contiguous") return PartitionScheme::contiguous;
  if (s == "shuffled") return PartitionScheme::shuffled;
  throw std::invalid_argument("unknown partition scheme '" + std::string(s) +
                              "' (expected contiguous or shuffled)");
}

inline const char* to_string(PartitionScheme s) {
  return s == PartitionScheme::contiguous ? "contiguous" : "shuffled";
}

/// Disjoint cover of the sample indices [0, m) by n nodes.
struct Partition {
  std::vector<std::vector<std::size_t>> node_sample_indices;

  std::size_t nodes() const noexcept { return node_sample_indices.size(); }
  friend bool operator==(const Partition&, const Partition&) = default;
};

/// Node i receives positions [floor(i m / n), floor((i + 1) m / n)) of the
/// sample order, which is the identity for `contiguous` and a permutation
/// drawn from `seed` for `shuffled`. Each node's list is sorted.
inline Partition partition(std::size_t m, std::size_t n, PartitionScheme scheme,
                           std::uint64_t seed = 0) {
  if (n == 0) throw std::invalid_argument("partition: need at least one node");
  if (n > m) {
    throw std::invalid_argument("partition: " + std::to_string(n) + " nodes but only " +
                                std::to_string(m) + " samples");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (scheme == PartitionScheme::shuffled) {
    RngStream stream(seed, {0, 0, Channel::partition});
    order = draw_permutation(stream, m);
  }
  Partition part;
  part.node_sample_indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = i * m / n;
    const std::size_t e = (i + 1) * m / n;
    auto& bucket = part.node_sample_indices[i];
    bucket.assign(order.begin() + static_cast<std::ptrdiff_t>(b),
                  order.begin() + static_cast<std::ptrdiff_t>(e));
    std::sort(bucket.begin(), bucket.end());
  }
  return part;
}

inline Partition partition(const SparseDataset& ds, std::size_t n, PartitionScheme scheme,
                           std::uint64_t seed = 0) {
  return partition(ds.size(), n, scheme, seed);
}

// -----------------------------------------------------------------------------
// Synthetic stand-ins for the standard LIBSVM benchmark files
// -----------------------------------------------------------------------------

/// Shape of a benchmark dataset: m samples of one-hot encoded categorical
/// attributes (`groups` attributes spread over d binary features).
struct DatasetProfile {
  std::string name;
  std::size_t samples = 0;
  std::size_t dimension = 0;
  std::size_t groups = 0;
  /// Labels are a deterministic linear rule of the features.
  bool separable = false;
};

inline std::optional<DatasetProfile> find_profile(std::string_view name) {
  static const DatasetProfile kProfiles[] = {
      {"a5a", 6414, 123, 14},
      {"a9a", 32561, 123, 14},
      {"mushrooms", 8124, 112, 22, true},
      {"w6a", 17188, 300, 12},
  };
  for (const auto& p : kProfiles) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

/// Deterministic binary dataset with the given profile's shape. Each attribute
/// group takes one category per sample from a skewed distribution; labels
/// follow a planted logistic model, or for separable profiles the sign of the
/// planted margin about its median.
inline SparseDataset make_synthetic(const DatasetProfile& profile, std::uint64_t seed) {
  const std::size_t d = profile.dimension;
  const std::size_t groups = std::max<std::size_t>(1, std::min(profile.groups, d));
  RngStream rng(seed, {0, 0, Channel::synthetic_data});

  // group g covers features [bounds[g], bounds[g+1])
  std::vector<std::size_t> bounds(groups + 1);
  for (std::size_t g = 0; g <= groups; ++g) bounds[g] = g * d / groups;

  // skewed category weights within each group, cumulative
  std::vector<std::vector<double>> cdf(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t width = bounds[g + 1] - bounds[g];
    double total = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      const double w = std::pow(0.55, static_cast<double>(c)) * (0.5 + rng.uniform());
      total += w;
      cdf[g].push_back(total);
    }
    for (double& v : cdf[g]) v /= total;
  }

  DenseVector planted(d);
  for (std::size_t j = 0; j < d; ++j) planted[j] = 2.0 * (2.0 * rng.uniform() - 1.0);

  std::vector<std::vector<std::uint32_t>> rows(profile.samples);
  std::vector<double> margins(profile.samples);
  std::vector<double> labels(profile.samples);
  for (std::size_t i = 0; i < profile.samples; ++i) {
    auto& idx = rows[i];
    double margin = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
      const double u = rng.uniform();
      const auto it = std::lower_bound(cdf[g].begin(), cdf[g].end(), u);
      const auto c = std::min<std::size_t>(static_cast<std::size_t>(it - cdf[g].begin()),
                                           cdf[g].size() - 1);
      const auto feature = static_cast<std::uint32_t>(bounds[g] + c);
      idx.push_back(feature);
      margin += planted[feature];
    }
    margins[i] = margin;
    if (!profile.separable) {
      const double centred = margin / std::sqrt(static_cast<double>(groups));
      const double prob = 1.0 / (1.0 + std::exp(-centred));
      labels[i] = rng.uniform() < prob ? 1.0 : -1.0;
    }
  }
  if (profile.separable) {
    std::vector<double> sorted = margins;
    const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    for (std::size_t i = 0; i < profile.samples; ++i) labels[i] = margins[i] >= *mid ? 1.0 : -1.0;
  }

  SparseDataset ds(d);
  const std::vector<double> ones(groups, 1.0);
  for (std::size_t i = 0; i < profile.samples; ++i) ds.add_row(labels[i], rows[i], ones);
  return ds;
}

}  // namespace compgrad
