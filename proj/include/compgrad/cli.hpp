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

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "compgrad/harness.hpp"

namespace compgrad::cli {

/// Failure tagged with the pipeline stage: config, data, run or io.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// An ExperimentSpec template plus sweep lists and an output directory.
struct RunConfig {
  ExperimentSpec base;
  std::vector<std::string> methods{"adiana"};
  std::vector<std::string> compressors{"dithering"};
  std::vector<std::size_t> nodes{20};
  std::string out_dir = "out";
};

namespace detail {

using nlohmann::json;

inline std::uint64_t as_count(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && std::floor(d) == d && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  throw StageError("config", "key '" + key + "' must be a non-negative integer");
}

inline double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw StageError("config", "key '" + key + "' must be a number");
  return v.get<double>();
}

inline std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw StageError("config", "key '" + key + "' must be a string");
  return v.get<std::string>();
}

inline bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw StageError("config", "key '" + key + "' must be true or false");
  return v.get<bool>();
}

inline std::vector<std::string> as_strings(const json& v, const std::string& key) {
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array() || v.empty()) {
    throw StageError("config", "key '" + key + "' must be a string or non-empty list");
  }
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(as_string(e, key));
  return out;
}

inline std::vector<std::size_t> as_counts(const json& v, const std::string& key) {
  if (!v.is_array()) return {static_cast<std::size_t>(as_count(v, key))};
  if (v.empty()) throw StageError("config", "key '" + key + "' must not be empty");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(static_cast<std::size_t>(as_count(e, key)));
  return out;
}

inline PartitionScheme as_partition(const std::string& s) {
  try {
    return parse_partition_scheme(s);
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
}

}  // namespace detail

/// Applies a flat JSON document onto `cfg`. Unknown keys are rejected.
inline void apply_config_json(const nlohmann::json& doc, RunConfig& cfg) {
  using detail::json;
  if (!doc.is_object()) throw StageError("config", "config must be a JSON object");
  for (const auto& [key, v] : doc.items()) {
    auto& s = cfg.base;
    if (key == "method" || key == "methods") {
      cfg.methods = detail::as_strings(v, key);
    } else if (key == "compressor" || key == "compressors") {
      cfg.compressors = detail::as_strings(v, key);
    } else if (key == "dataset") {
      s.dataset = detail::as_string(v, key);
    } else if (key == "nodes") {
      cfg.nodes = detail::as_counts(v, key);
    } else if (key == "lambda") {
      s.lambda = detail::as_real(v, key);
    } else if (key == "l1") {
      s.l1 = detail::as_real(v, key);
    } else if (key == "seed") {
      s.master_seed = detail::as_count(v, key);
    } else if (key == "max_iters") {
      if (v.is_null()) s.max_iters.reset(); else s.max_iters = detail::as_count(v, key);
    } else if (key == "max_bits") {
      if (v.is_null()) s.max_bits.reset(); else s.max_bits = detail::as_real(v, key);
    } else if (key == "partition") {
      s.partition = detail::as_partition(detail::as_string(v, key));
    } else if (key == "diagnostics") {
      s.diagnostics = detail::as_bool(v, key);
    } else if (key == "count_shift_message") {
      s.count_shift_message = detail::as_bool(v, key);
    } else if (key == "sum_node_bits") {
      s.sum_node_bits = detail::as_bool(v, key);
    } else if (key == "reference_max_iters") {
      s.reference_max_iters = detail::as_count(v, key);
    } else if (key == "reference_tolerance") {
      s.reference_tolerance = detail::as_real(v, key);
    } else if (key == "overrides") {
      if (!v.is_object()) throw StageError("config", "key 'overrides' must be an object");
      s.overrides.clear();
      for (const auto& [name, value] : v.items()) {
        s.overrides[name] = detail::as_real(value, "overrides." + name);
      }
    } else if (key == "out") {
      cfg.out_dir = detail::as_string(v, key);
    } else {
      throw StageError("config", "unknown key '" + key + "'");
    }
  }
}

inline RunConfig load_config_file(const std::string& path, RunConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw StageError("config", "cannot open config '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw StageError("config", "'" + path + "': " + e.what());
  }
  apply_config_json(doc, cfg);
  return cfg;
}

/// The config as a JSON document that `load_config_file` reads back verbatim.
inline nlohmann::json to_json(const RunConfig& cfg) {
  const auto& s = cfg.base;
  nlohmann::json doc;
  doc["methods"] = cfg.methods;
  doc["compressors"] = cfg.compressors;
  doc["nodes"] = cfg.nodes;
  doc["dataset"] = s.dataset;
  doc["lambda"] = s.lambda;
  doc["l1"] = s.l1;
  doc["seed"] = s.master_seed;
  doc["max_iters"] = s.max_iters ? nlohmann::json(*s.max_iters) : nlohmann::json(nullptr);
  doc["max_bits"] = s.max_bits ? nlohmann::json(*s.max_bits) : nlohmann::json(nullptr);
  doc["partition"] = to_string(s.partition);
  doc["diagnostics"] = s.diagnostics;
  doc["count_shift_message"] = s.count_shift_message;
  doc["sum_node_bits"] = s.sum_node_bits;
  doc["reference_max_iters"] = s.reference_max_iters;
  doc["reference_tolerance"] = s.reference_tolerance;
  doc["overrides"] = nlohmann::json::object();
  for (const auto& [k, v] : s.overrides) doc["overrides"][k] = v;
  doc["out"] = cfg.out_dir;
  return doc;
}

/// Checks everything that can be checked without data, and makes the
/// dataset and output paths absolute.
inline void resolve(RunConfig& cfg) {
  namespace fs = std::filesystem;
  auto& s = cfg.base;
  if (s.dataset.empty()) throw StageError("config", "no dataset given");
  for (const auto& m : cfg.methods) {
    try {
      parse_method(m);
    } catch (const std::exception& e) {
      throw StageError("config", e.what());
    }
  }
  for (std::size_t n : cfg.nodes) {
    if (n == 0) throw StageError("config", "nodes must be >= 1");
  }
  if (!(s.lambda >= 0.0) || !std::isfinite(s.lambda)) throw StageError("config", "lambda must be >= 0");
  if (!(s.l1 >= 0.0) || !std::isfinite(s.l1)) throw StageError("config", "l1 must be >= 0");
  if (!s.max_iters && !s.max_bits) throw StageError("config", "set max_iters and/or max_bits");
  if (s.max_iters && *s.max_iters == 0) throw StageError("config", "max_iters must be > 0");
  if (s.max_bits && !(*s.max_bits > 0.0)) throw StageError("config", "max_bits must be > 0");
  if (fs::is_regular_file(s.dataset)) s.dataset = fs::absolute(s.dataset).lexically_normal().string();
  cfg.out_dir = fs::absolute(cfg.out_dir).lexically_normal().string();
}

/// Writes `content` to `path` through a temporary file and a rename.
inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StageError("io", "cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw StageError("io", "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw StageError("io", "rename to '" + path.string() + "' failed: " + ec.message());
}

struct CellSummary {
  std::string method;
  std::string compressor;
  std::size_t nodes = 0;
  std::uint64_t iterations = 0;
  double total_bits = 0.0;
  double final_f_gap = 0.0;
  std::string file;
};

namespace detail {

inline ResolvedDataset load_data(const std::string& ref) {
  try {
    return resolve_dataset(ref);
  } catch (const std::exception& e) {
    throw StageError("data", e.what());
  }
}

inline Objective objective_for(const ExperimentSpec& spec, const SparseDataset& data) {
  try {
    return build_objective(spec, data);
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
}

inline Compressor compressor_for(const std::string& text, std::size_t dim) {
  try {
    return parse_compressor(text, dim);
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
}

inline std::string fmt(double v) { return format_real(v); }

}  // namespace detail

/// Runs every (nodes, method, compressor) cell. Trace files are named
/// `<method>_<compressor>.csv`, inside `n<nodes>/` when several node counts
/// are swept.
inline std::vector<CellSummary> cmd_run(RunConfig cfg, std::ostream& out, std::size_t threads) {
  namespace fs = std::filesystem;
  resolve(cfg);
  const auto data = detail::load_data(cfg.base.dataset);
  const std::size_t dim = data.data.dimension();
  for (const auto& c : cfg.compressors) detail::compressor_for(c, dim);

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw StageError("io", "cannot create '" + cfg.out_dir + "': " + ec.message());
  write_atomically(fs::path(cfg.out_dir) / "resolved.json", to_json(cfg).dump(2) + "\n");

  std::vector<CellSummary> cells;
  for (std::size_t n : cfg.nodes) {
    ExperimentSpec spec = cfg.base;
    spec.nodes = n;
    const Objective obj = detail::objective_for(spec, data.data);
    const fs::path dir = cfg.nodes.size() > 1 ? fs::path(cfg.out_dir) / ("n" + std::to_string(n))
                                              : fs::path(cfg.out_dir);
    fs::create_directories(dir, ec);
    if (ec) throw StageError("io", "cannot create '" + dir.string() + "': " + ec.message());

    std::optional<ReferenceSolution> reference;
    for (const auto& method : cfg.methods) {
      for (const auto& comp_text : cfg.compressors) {
        spec.method = method;
        spec.compressor = comp_text;
        RunOptions opts;
        try {
          opts = make_run_options(spec, threads);
        } catch (const std::exception& e) {
          throw StageError("config", e.what());
        }
        const Compressor comp = detail::compressor_for(comp_text, dim);
        RunResult result;
        try {
          if (!reference) reference = solve_reference(obj, opts.reference);
          result = run_on(obj, comp, opts, reference);
        } catch (const ConfigError& e) {
          throw StageError("config", method + " " + comp_text + ": " + e.what());
        } catch (const std::exception& e) {
          throw StageError("run", method + " " + comp_text + ": " + e.what());
        }
        std::ostringstream csv;
        write_trace_csv(csv, result.trace, result.diagnostics);
        const fs::path file = dir / (method + "_" + comp_text + ".csv");
        write_atomically(file, csv.str());

        CellSummary cell;
        cell.method = method;
        cell.compressor = comp_text;
        cell.nodes = n;
        cell.iterations = result.iterations;
        cell.total_bits = result.trace.back().cumulative_bits;
        cell.final_f_gap = result.trace.back().f_gap;
        cell.file = file.string();
        cells.push_back(cell);
      }
    }
  }

  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %-16s %6s %12s %14s %14s\n", "method", "compressor",
                "nodes", "iterations", "total_bits", "final_f_gap");
  out << line;
  for (const auto& c : cells) {
    std::snprintf(line, sizeof(line), "%-10s %-16s %6zu %12llu %14.6e %14.6e\n", c.method.c_str(),
                  c.compressor.c_str(), c.nodes, static_cast<unsigned long long>(c.iterations),
                  c.total_bits, c.final_f_gap);
    out << line;
  }
  return cells;
}

/// Prints the resolved constants and schedule parameters of every cell.
inline void cmd_validate(RunConfig cfg, std::ostream& out) {
  if (!cfg.base.max_iters && !cfg.base.max_bits) cfg.base.max_iters = 1;
  resolve(cfg);
  const auto data = detail::load_data(cfg.base.dataset);
  const std::size_t dim = data.data.dimension();
  out << "dataset " << data.source << " samples=" << data.data.size() << " dim=" << dim << '\n';
  for (std::size_t n : cfg.nodes) {
    ExperimentSpec spec = cfg.base;
    spec.nodes = n;
    const Objective obj = detail::objective_for(spec, data.data);
    for (const auto& method_text : cfg.methods) {
      for (const auto& comp_text : cfg.compressors) {
        const Compressor comp = detail::compressor_for(comp_text, dim);
        Schedule sched;
        Method method{};
        try {
          method = parse_method(method_text);
          if (is_single_node(method) && (n != 1 || !obj.regularizer().is_zero())) {
            throw ConfigError(method_text + " runs on a single node with no regularizer");
          }
          sched = apply_overrides(build_schedule(method, obj.L(), obj.mu(), omega(comp), n),
                                  spec.overrides);
        } catch (const std::exception& e) {
          throw StageError("config", method_text + " " + comp_text + ": " + e.what());
        }
        std::map<std::string, std::optional<double>> p{
            {"eta", std::nullopt},    {"theta1", std::nullopt}, {"theta2", std::nullopt},
            {"alpha", std::nullopt},  {"beta", std::nullopt},   {"gamma", std::nullopt},
            {"p", std::nullopt}};
        std::visit(
            [&](const auto& s) {
              using S = std::decay_t<decltype(s)>;
              p["eta"] = s.eta;
              if constexpr (std::is_same_v<S, DianaSchedule>) {
                p["alpha"] = s.alpha;
              } else if constexpr (std::is_same_v<S, AcgdSchedule>) {
                p["p"] = s.p;
                p["theta1"] = s.theta(0);
                p["beta"] = s.beta(0);
                p["gamma"] = s.gamma(0);
              } else if constexpr (std::is_same_v<S, AdianaSchedule>) {
                p["theta1"] = s.theta1;
                p["theta2"] = s.theta2;
                p["alpha"] = s.alpha;
                p["beta"] = s.beta;
                p["gamma"] = s.gamma;
                p["p"] = s.p;
              }
            },
            sched);
        out << "cell method=" << method_text << " compressor=" << comp_text << " nodes=" << n
            << '\n';
        out << "  L = " << detail::fmt(obj.L()) << '\n';
        out << "  mu = " << detail::fmt(obj.mu()) << '\n';
        out << "  omega = " << detail::fmt(omega(comp)) << '\n';
        for (const char* key : {"eta", "theta1", "theta2", "alpha", "beta", "gamma", "p"}) {
          out << "  " << key << " = " << (p[key] ? detail::fmt(*p[key]) : std::string("n/a"))
              << '\n';
        }
      }
    }
  }
}

/// Entry point shared by the binary and the tests. Returns the exit code.
inline int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"compgrad: compressed gradient methods on a simulated cluster"};
  app.require_subcommand(1);

  struct Flags {
    std::string config, method, compressor, dataset, partition, out;
    std::size_t nodes = 0;
    double lambda = 0.0, l1 = 0.0, max_bits = 0.0;
    std::uint64_t seed = 0, max_iters = 0;
    bool diagnostics = false, sum_node_bits = false;
    std::string count_shift_message;
  } f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file");
    sub->add_option("--method", f.method, "cgd | acgd-cvx | acgd-scvx | dcgd | diana | adiana");
    sub->add_option("--compressor", f.compressor, "identity | randk:<r> | dithering:<s> | natural");
    sub->add_option("--dataset", f.dataset, "LIBSVM file or profile name (a5a, a9a, mushrooms, w6a)");
    sub->add_option("--nodes", f.nodes, "number of nodes");
    sub->add_option("--lambda", f.lambda, "ridge weight");
    sub->add_option("--l1", f.l1, "l1 weight of the regularizer (0 = none)");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--max-iters", f.max_iters, "iteration budget");
    sub->add_option("--max-bits", f.max_bits, "bit budget");
    sub->add_option("--partition", f.partition, "contiguous | shuffled");
    sub->add_flag("--diagnostics", f.diagnostics, "record Lyapunov terms (adiana)");
    sub->add_option("--count-shift-message", f.count_shift_message,
                    "charge adiana's second message (true | false)");
    sub->add_flag("--sum-node-bits", f.sum_node_bits, "report bits summed over nodes");
    sub->add_option("--out", f.out, "output directory");
  };
  auto* run_cmd = app.add_subcommand("run", "run experiments and write traces");
  auto* validate_cmd = app.add_subcommand("validate", "print resolved constants and parameters");
  add_common(run_cmd);
  add_common(validate_cmd);

  std::vector<std::string> args;
  for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ERROR config: " << e.what() << '\n';
    return 2;
  }

  CLI::App* sub = run_cmd->parsed() ? run_cmd : validate_cmd;
  auto given = [&](const char* name) { return sub->count(name) > 0; };

  try {
    RunConfig cfg;
    if (given("--config")) cfg = load_config_file(f.config);
    auto& s = cfg.base;
    if (given("--method")) cfg.methods = {f.method};
    if (given("--compressor")) cfg.compressors = {f.compressor};
    if (given("--dataset")) s.dataset = f.dataset;
    if (given("--nodes")) cfg.nodes = {f.nodes};
    if (given("--lambda")) s.lambda = f.lambda;
    if (given("--l1")) s.l1 = f.l1;
    if (given("--seed")) s.master_seed = f.seed;
    if (given("--max-iters")) s.max_iters = f.max_iters;
    if (given("--max-bits")) s.max_bits = f.max_bits;
    if (given("--partition")) s.partition = detail::as_partition(f.partition);
    if (given("--diagnostics")) s.diagnostics = f.diagnostics;
    if (given("--sum-node-bits")) s.sum_node_bits = f.sum_node_bits;
    if (given("--count-shift-message")) {
      if (f.count_shift_message == "true") {
        s.count_shift_message = true;
      } else if (f.count_shift_message == "false") {
        s.count_shift_message = false;
      } else {
        throw StageError("config", "--count-shift-message expects true or false");
      }
    }
    if (given("--out")) cfg.out_dir = f.out;

    if (sub == run_cmd) {
      cmd_run(cfg, out, NodeExecutor::threads_from_env());
    } else {
      cmd_validate(cfg, out);
    }
  } catch (const StageError& e) {
    err << "ERROR " << e.stage() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "ERROR run: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace compgrad::cli
