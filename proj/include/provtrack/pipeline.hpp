#pragma once

// Declarative pipelines: a JSON document naming source datasets and an
// ordered list of operator steps over named frames. See docs/pipeline.md.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "provtrack/csv.hpp"
#include "provtrack/log.hpp"
#include "provtrack/operators.hpp"
#include "provtrack/tracker.hpp"

namespace provtrack {

struct SourceDecl {
  std::string id;
  std::optional<std::string> csv;  // path, relative to the pipeline file
  std::optional<Dataset> inline_data;
};

struct StepDecl {
  OperatorSpec spec;
  std::vector<std::string> inputs;
  std::string output;
  bool track = true;
};

struct OutputDecl {
  std::string frame;
  std::string csv;
};

struct PipelineSpec {
  std::vector<SourceDecl> sources;
  std::vector<StepDecl> steps;
  std::vector<OutputDecl> outputs;
  std::optional<std::string> provenance;  // log path
  std::filesystem::path base_dir;
};

namespace detail {

// Call from a handler only: rethrows the error in flight with its type intact.
[[noreturn]] inline void rethrow_in(const std::string& where, Error& e) {
  e.add_context(where);
  throw;
}

inline std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  const auto& v = j.at(key);
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) throw ValidationError(std::string("'") + key + "' must be a string or a list of strings");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) throw ValidationError(std::string("'") + key + "' must hold strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

inline std::string req_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) throw ValidationError(std::string("missing string field '") + key + "'");
  return j.at(key).get<std::string>();
}

inline VaFunction parse_va_function(const std::string& s) {
  if (s == "expr") return VaFunction::expr;
  if (s == "one_hot") return VaFunction::one_hot;
  if (s == "split") return VaFunction::split;
  if (s == "string_index") return VaFunction::string_index;
  throw ValidationError("unknown vaugment function '" + s + "'");
}

inline TransformFn parse_transform_fn(const std::string& s) {
  static const std::map<std::string, TransformFn> names = {
      {"fillna_most_frequent", TransformFn::fillna_most_frequent},
      {"fillna_mean", TransformFn::fillna_mean},
      {"fillna_constant", TransformFn::fillna_constant},
      {"binarize", TransformFn::binarize},
      {"normalize_minmax", TransformFn::normalize_minmax},
      {"normalize_zscore", TransformFn::normalize_zscore},
      {"discretize", TransformFn::discretize},
      {"string_index", TransformFn::string_index},
      {"value_map", TransformFn::value_map},
      {"strip", TransformFn::strip},
      {"expr", TransformFn::expr}};
  auto it = names.find(s);
  if (it == names.end()) throw ValidationError("unknown transform function '" + s + "'");
  return it->second;
}

inline OperatorSpec parse_operator(const nlohmann::json& j) {
  const std::string op = req_string(j, "op");
  if (op == "project") {
    if (j.contains("drop")) {
      return ProjectSpec{FeaturePredicate::negation(FeaturePredicate::name_in(string_list(j, "drop")))};
    }
    return ProjectSpec{parse_feature_predicate(req_string(j, "keep"))};
  }
  if (op == "select") return SelectSpec{parse_expr(req_string(j, "condition"))};
  if (op == "vaugment") {
    VaSpec s;
    s.fn = parse_va_function(j.value("fn", std::string("expr")));
    s.x = string_list(j, "x");
    s.y = string_list(j, "y");
    if (j.contains("expr")) s.expr = parse_expr(req_string(j, "expr"));
    else if (s.fn == VaFunction::expr) throw ValidationError("vaugment expr needs 'expr'");
    s.prefix = j.value("prefix", std::string());
    s.sep = j.value("sep", std::string(":"));
    return s;
  }
  if (op == "haugment") {
    HaSpec s;
    s.keys = string_list(j, "keys");
    s.agg = parse_aggregate(j.value("agg", std::string("avg")));
    s.target = req_string(j, "target");
    return s;
  }
  if (op == "transform") {
    TransformSpec s;
    s.fn = parse_transform_fn(req_string(j, "fn"));
    s.x = string_list(j, "x");
    if (s.x.empty()) throw ValidationError("transform needs 'x'");
    if (j.contains("constant")) s.constant = logfmt::json_value(j.at("constant"));
    s.threshold = j.value("threshold", 0.0);
    s.bins = j.value("bins", 2);
    if (j.contains("mapping")) {
      const auto& m = j.at("mapping");
      if (!m.is_object()) throw ValidationError("'mapping' must be an object");
      for (const auto& [k, v] : m.items()) s.mapping.emplace_back(k, logfmt::json_value(v));
    }
    if (j.contains("expr")) s.expr = parse_expr(req_string(j, "expr"));
    else if (s.fn == TransformFn::expr) throw ValidationError("transform expr needs 'expr'");
    return s;
  }
  if (op == "join") {
    JoinSpec s;
    s.type = parse_join_type(j.value("how", std::string("inner")));
    if (!j.contains("on") || !j.at("on").is_array() || j.at("on").empty()) throw ValidationError("join needs 'on'");
    for (const auto& k : j.at("on")) {
      if (k.is_string()) {
        s.keys.emplace_back(k.get<std::string>(), k.get<std::string>());
      } else if (k.is_array() && k.size() == 2 && k[0].is_string() && k[1].is_string()) {
        s.keys.emplace_back(k[0].get<std::string>(), k[1].get<std::string>());
      } else {
        throw ValidationError("join key must be a name or a [left, right] pair");
      }
    }
    return s;
  }
  if (op == "append") return AppendSpec{};
  throw ValidationError("unknown op '" + op + "'");
}

inline Dataset parse_inline(const nlohmann::json& j, const std::string& id) {
  std::vector<FeatureName> cols = string_list(j, "columns");
  std::vector<std::vector<Value>> rows;
  if (j.contains("rows")) {
    for (const auto& r : j.at("rows")) {
      std::vector<Value> row;
      for (const auto& v : r) row.push_back(logfmt::json_value(v));
      rows.push_back(std::move(row));
    }
  }
  return Dataset::from_rows(cols, rows, id);
}

}  // namespace detail

inline PipelineSpec parse_pipeline(const nlohmann::json& j, std::filesystem::path base_dir = {}) {
  PipelineSpec p;
  p.base_dir = std::move(base_dir);
  if (!j.is_object()) throw ValidationError("pipeline must be a JSON object");
  if (!j.contains("sources") || !j.at("sources").is_array()) throw ValidationError("pipeline needs a 'sources' list");
  std::size_t i = 0;
  for (const auto& s : j.at("sources")) {
    try {
      SourceDecl d;
      d.id = detail::req_string(s, "id");
      if (s.contains("csv")) d.csv = detail::req_string(s, "csv");
      else if (s.contains("columns")) d.inline_data = detail::parse_inline(s, d.id);
      else throw ValidationError("source needs 'csv' or inline 'columns'/'rows'");
      p.sources.push_back(std::move(d));
    } catch (Error& e) {
      detail::rethrow_in("source " + std::to_string(i), e);
    }
    ++i;
  }
  i = 0;
  if (j.contains("steps")) {
    for (const auto& s : j.at("steps")) {
      try {
        StepDecl d;
        d.spec = detail::parse_operator(s);
        d.inputs = s.contains("inputs") ? detail::string_list(s, "inputs") : detail::string_list(s, "input");
        if (d.inputs.empty()) throw ValidationError("step needs 'input' or 'inputs'");
        d.output = s.value("output", d.inputs.front());
        d.track = s.value("track", true);
        p.steps.push_back(std::move(d));
      } catch (Error& e) {
        detail::rethrow_in("step " + std::to_string(i), e);
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("step " + std::to_string(i) + ": " + e.what());
      }
      ++i;
    }
  }
  if (j.contains("outputs")) {
    for (const auto& o : j.at("outputs")) p.outputs.push_back({detail::req_string(o, "frame"), detail::req_string(o, "csv")});
  }
  if (j.contains("provenance")) p.provenance = detail::req_string(j, "provenance");
  return p;
}

inline PipelineSpec load_pipeline(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open pipeline '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("pipeline '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_pipeline(j, std::filesystem::path(path).parent_path());
}

/// Static checks: ids unique, every input names a frame defined earlier,
/// arities match, binary steps are tracked.
inline void validate_pipeline(const PipelineSpec& p) {
  std::set<std::string> frames;
  for (const auto& s : p.sources) {
    if (s.id.empty()) throw ValidationError("source with empty id");
    if (!frames.insert(s.id).second) throw ValidationError("duplicate source id '" + s.id + "'");
  }
  for (std::size_t i = 0; i < p.steps.size(); ++i) {
    const auto& s = p.steps[i];
    const std::string where = "step " + std::to_string(i);
    std::size_t want = is_binary(s.spec) ? 2 : 1;
    if (s.inputs.size() != want) {
      throw ValidationError(where + ": " + op_kind_name(kind_of(s.spec)) + " takes " + std::to_string(want) + " input(s)");
    }
    for (const auto& in : s.inputs) {
      if (!frames.count(in)) throw ValidationError(where + ": unknown frame '" + in + "'");
    }
    if (is_binary(s.spec) && !s.track) throw ValidationError(where + ": binary steps cannot run untracked");
    frames.insert(s.output);
  }
  for (const auto& o : p.outputs) {
    if (!frames.count(o.frame)) throw ValidationError("output names unknown frame '" + o.frame + "'");
  }
}

struct RunOptions {
  bool track = true;
  unsigned workers = 1;
  std::optional<std::string> log_path;  // overrides the pipeline's own
  std::ostream* log_stream = nullptr;   // takes precedence over any path
  bool write_outputs = true;
  std::optional<std::filesystem::path> output_dir;  // overrides where outputs go
  bool background_writer = false;
};

struct RunResult {
  std::map<std::string, Dataset> frames;
  std::vector<std::string> warnings;
  std::size_t batches = 0;
  std::size_t activities = 0;
  std::size_t provlets = 0;
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::uint64_t log_bytes = 0;
};

inline Dataset load_source(const PipelineSpec& p, const SourceDecl& s) {
  if (s.inline_data) return s.inline_data->with_id(s.id);
  auto path = p.base_dir / *s.csv;
  try {
    return ingest_csv_file(path.string(), {}, s.id);
  } catch (Error& e) {
    detail::rethrow_in("source '" + s.id + "'", e);
  }
}

/// Executes the steps in order. With tracking every step goes through the
/// tracker and the log is written; a failing step aborts the log.
inline RunResult run_pipeline(const PipelineSpec& p, const RunOptions& opt = {}) {
  validate_pipeline(p);
  RunResult res;
  std::vector<Dataset> sources;
  for (const auto& s : p.sources) sources.push_back(load_source(p, s));

  if (!opt.track) {
    RowIdAllocator alloc;
    for (const auto& d : sources) {
      if (d.rows()) alloc.reserve_through(d.next_row_id() - 1);
      res.frames[d.id()] = d;
    }
    for (std::size_t i = 0; i < p.steps.size(); ++i) {
      const auto& s = p.steps[i];
      try {
        std::vector<const Dataset*> in;
        for (const auto& n : s.inputs) in.push_back(&res.frames.at(n));
        Dataset out = apply_operator(s.spec, in, &alloc).data;
        res.frames[s.output] = out.with_id(s.output);
      } catch (Error& e) {
        detail::rethrow_in("step " + std::to_string(i), e);
      }
    }
  } else {
    std::unique_ptr<ProvLogWriter> writer;
    std::optional<std::string> path = opt.log_path ? opt.log_path : p.provenance;
    if (opt.log_stream) {
      writer = std::make_unique<ProvLogWriter>(*opt.log_stream, opt.background_writer);
    } else if (path) {
      auto full = std::filesystem::path(*path);
      if (!opt.log_path && full.is_relative()) full = p.base_dir / full;
      writer = std::make_unique<ProvLogWriter>(full.string(), opt.background_writer);
    }
    Tracker tracker(
        [&](Batch&& b) {
          ++res.batches;
          res.activities += b.activities.size();
          res.provlets += b.provlets.size();
          for (const auto& pl : b.provlets) {
            res.entities += pl.entities.size();
            res.relations += pl.relations.size();
          }
          if (writer) writer->append_async(std::move(b));
        },
        TrackerOptions{opt.workers, true});
    std::map<std::string, Frame> frames;
    std::set<std::string> consumed;  // frames read by a later step
    try {
      for (auto& d : sources) {
        std::string id = d.id();
        frames[id] = tracker.subscribe(std::move(d));
      }
      for (std::size_t i = 0; i < p.steps.size(); ++i) {
        const auto& s = p.steps[i];
        try {
          std::vector<Frame> in;
          for (const auto& n : s.inputs) {
            in.push_back(frames.at(n));
            consumed.insert(n);
          }
          tracker.set_tracking(s.track);
          frames[s.output] = tracker.apply(s.spec, in, s.output);
          tracker.set_tracking(true);
          consumed.erase(s.output);
        } catch (Error& e) {
          detail::rethrow_in("step " + std::to_string(i), e);
        }
      }
      // Untracked changes nobody consumed become one final tracked step.
      for (auto& [n, f] : frames) {
        if (f.dirty() && !consumed.count(n)) f = tracker.settle(f);
      }
    } catch (const Error& e) {
      if (writer) {
        writer->abort(e.what());
        res.log_bytes = writer->offset();
      }
      throw;
    }
    if (writer) {
      writer->close();
      res.log_bytes = writer->offset();
    }
    for (const auto& [n, f] : frames) res.frames[n] = f.data();
    res.warnings = tracker.warnings();
  }

  if (opt.write_outputs) {
    for (const auto& o : p.outputs) {
      auto base = opt.output_dir ? *opt.output_dir : p.base_dir;
      auto path = base / o.csv;
      std::ofstream out(path, std::ios::binary);
      if (!out) throw DataError("cannot write output '" + path.string() + "'");
      write_csv(out, res.frames.at(o.frame));
    }
  }
  return res;
}

}  // namespace provtrack
