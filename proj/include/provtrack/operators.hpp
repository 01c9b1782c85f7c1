#pragma once

// Dataframe operator algebra: project, select, vaugment, haugment, transform,
// join, append. Operators are pure and know nothing about provenance.

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "provtrack/dataset.hpp"
#include "provtrack/error.hpp"
#include "provtrack/expr.hpp"
#include "provtrack/value.hpp"

namespace provtrack {

enum class OpKind : std::uint8_t { project, select, vaugment, haugment, transform, join, append };

inline const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::project: return "project";
    case OpKind::select: return "select";
    case OpKind::vaugment: return "vaugment";
    case OpKind::haugment: return "haugment";
    case OpKind::transform: return "transform";
    case OpKind::join: return "join";
    case OpKind::append: return "append";
  }
  return "?";
}

struct ProjectSpec {
  FeaturePredicate keep;
};

struct SelectSpec {
  Expr condition;
};

enum class VaFunction : std::uint8_t { expr, one_hot, split, string_index };

struct VaSpec {
  VaFunction fn = VaFunction::expr;
  std::vector<FeatureName> x;  // inputs; for expr, empty means "whatever the expression reads"
  std::vector<FeatureName> y;  // outputs; derived from the data for one_hot
  Expr expr;
  std::string prefix;  // one_hot column prefix, default "<source>_"
  std::string sep = ":";  // split separator
};

enum class Aggregate : std::uint8_t { avg, sum, count, min, max };

inline const char* aggregate_name(Aggregate a) {
  switch (a) {
    case Aggregate::avg: return "avg";
    case Aggregate::sum: return "sum";
    case Aggregate::count: return "count";
    case Aggregate::min: return "min";
    case Aggregate::max: return "max";
  }
  return "?";
}

inline Aggregate parse_aggregate(std::string_view s) {
  if (s == "avg" || s == "mean") return Aggregate::avg;
  if (s == "sum") return Aggregate::sum;
  if (s == "count") return Aggregate::count;
  if (s == "min") return Aggregate::min;
  if (s == "max") return Aggregate::max;
  throw ValidationError("unknown aggregate '" + std::string(s) + "'");
}

struct HaSpec {
  std::vector<FeatureName> keys;
  Aggregate agg = Aggregate::avg;
  FeatureName target;
};

enum class TransformFn : std::uint8_t {
  fillna_most_frequent,
  fillna_mean,
  fillna_constant,
  binarize,
  normalize_minmax,
  normalize_zscore,
  discretize,
  string_index,
  value_map,
  strip,
  expr
};

struct TransformSpec {
  TransformFn fn = TransformFn::value_map;
  std::vector<FeatureName> x;
  Value constant;        // fillna_constant
  double threshold = 0;  // binarize
  int bins = 2;          // discretize
  // value_map: keyed by the display form of a non-null cell. Cells without an
  // entry keep their value.
  std::vector<std::pair<std::string, Value>> mapping;
  Expr expr;  // expr, evaluated with '@' bound to the current cell
};

enum class JoinType : std::uint8_t { inner, left, right, full };

inline const char* join_type_name(JoinType t) {
  switch (t) {
    case JoinType::inner: return "inner";
    case JoinType::left: return "left";
    case JoinType::right: return "right";
    case JoinType::full: return "full";
  }
  return "?";
}

inline JoinType parse_join_type(std::string_view s) {
  if (s == "inner") return JoinType::inner;
  if (s == "left") return JoinType::left;
  if (s == "right") return JoinType::right;
  if (s == "full" || s == "outer") return JoinType::full;
  throw ValidationError("unknown join type '" + std::string(s) + "'");
}

struct JoinSpec {
  JoinType type = JoinType::inner;
  std::vector<std::pair<FeatureName, FeatureName>> keys;  // (left feature, right feature)
};

struct AppendSpec {};

using OperatorSpec = std::variant<ProjectSpec, SelectSpec, VaSpec, HaSpec, TransformSpec, JoinSpec, AppendSpec>;

inline OpKind kind_of(const OperatorSpec& s) { return static_cast<OpKind>(s.index()); }
inline bool is_binary(const OperatorSpec& s) { return kind_of(s) == OpKind::join || kind_of(s) == OpKind::append; }

/// One emitted group of a horizontal augmentation.
struct Group {
  RowId row = 0;               // id of the appended row
  std::vector<RowId> ginput;   // contributing input rows, in input order
  bool operator==(const Group&) const = default;
};
using GroupMapping = std::vector<Group>;

namespace detail {

inline Dataset replace_columns(const Dataset& d, const std::map<std::size_t, Column>& fresh) {
  std::vector<ColumnPtr> cols = d.column_ptrs();
  for (const auto& [j, c] : fresh) cols[j] = std::make_shared<const Column>(c);
  return Dataset(d.schema(), std::move(cols), {d.row_ids().begin(), d.row_ids().end()}, d.id());
}

inline std::vector<RowId> take_ids(RowIdAllocator* alloc, RowId fallback_base, std::size_t n) {
  std::vector<RowId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = alloc ? alloc->take() : fallback_base + i;
  return ids;
}

inline double require_number(const Value& v, std::string_view feature, const char* op) {
  if (!v.is_number()) {
    throw TypeError(std::string(op) + " needs numeric values but '" + std::string(feature) + "' holds a " +
                    type_name(v.type()));
  }
  return v.as_number();
}

inline std::vector<Value> sorted_distinct(const Column& c) {
  std::set<Value> s;
  for (const auto& v : c) {
    if (!v.is_null()) s.insert(v);
  }
  return {s.begin(), s.end()};
}

}  // namespace detail

inline Dataset project(const Dataset& d, const FeaturePredicate& keep) {
  std::vector<FeatureName> schema;
  std::vector<ColumnPtr> cols;
  for (std::size_t j = 0; j < d.cols(); ++j) {
    if (eval_feature_predicate(keep, d, d.schema()[j])) {
      schema.push_back(d.schema()[j]);
      cols.push_back(d.column_ptr(j));
    }
  }
  if (schema.empty()) throw ValidationError("projection leaves an empty schema");
  return Dataset(std::move(schema), std::move(cols), {d.row_ids().begin(), d.row_ids().end()}, d.id());
}

inline Dataset drop_features(const Dataset& d, const std::vector<FeatureName>& features) {
  for (const auto& f : features) d.require_feature(f);
  return project(d, FeaturePredicate::negation(FeaturePredicate::name_in(features)));
}

inline Dataset select(const Dataset& d, const Expr& cond) {
  BoundExpr b(cond, d.schema());
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    if (b.test(d, i)) keep.push_back(i);
  }
  std::vector<ColumnPtr> cols;
  for (std::size_t j = 0; j < d.cols(); ++j) {
    Column c;
    c.reserve(keep.size());
    for (auto i : keep) c.push_back(d.at(i, j));
    cols.push_back(std::make_shared<const Column>(std::move(c)));
  }
  std::vector<RowId> ids;
  ids.reserve(keep.size());
  for (auto i : keep) ids.push_back(d.row_ids()[i]);
  return Dataset(d.schema(), std::move(cols), std::move(ids), d.id());
}

/// Columns a vertical augmentation will add, in order. Computed from the data for one_hot.
inline std::vector<FeatureName> va_output_features(const Dataset& d, const VaSpec& s) {
  if (s.fn != VaFunction::one_hot) return s.y;
  if (s.x.size() != 1) throw ValidationError("one-hot encoding needs exactly one source feature");
  std::string prefix = s.prefix.empty() ? s.x[0] + "_" : s.prefix;
  std::vector<FeatureName> out;
  for (const auto& v : detail::sorted_distinct(d.column(s.x[0]))) out.push_back(prefix + to_string(v));
  return out;
}

inline std::vector<FeatureName> va_input_features(const VaSpec& s) {
  if (s.fn == VaFunction::expr && s.x.empty()) return referenced_features(s.expr);
  return s.x;
}

inline Dataset vaugment(const Dataset& d, const VaSpec& s) {
  for (const auto& f : s.x) d.require_feature(f);
  std::vector<FeatureName> y = va_output_features(d, s);
  if (y.empty() && s.fn != VaFunction::one_hot) throw ValidationError("vertical augmentation needs output features");
  std::set<FeatureName> seen;
  for (const auto& f : y) {
    if (d.has_feature(f)) throw ValidationError("new feature '" + f + "' already exists");
    if (!seen.insert(f).second) throw ValidationError("duplicate new feature '" + f + "'");
  }
  const std::size_t n = d.rows();
  std::vector<Column> fresh(y.size(), Column(n));
  switch (s.fn) {
    case VaFunction::expr: {
      if (y.size() != 1) throw ValidationError("expression augmentation produces exactly one feature");
      BoundExpr b(s.expr, d.schema());
      for (std::size_t i = 0; i < n; ++i) fresh[0][i] = b.eval(d, i);
      break;
    }
    case VaFunction::one_hot: {
      const Column& src = d.column(s.x[0]);
      auto values = detail::sorted_distinct(src);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < values.size(); ++k) {
          fresh[k][i] = src[i].is_null() ? Value(Null{}) : Value(src[i] == values[k] ? 1 : 0);
        }
      }
      break;
    }
    case VaFunction::split: {
      if (s.x.size() != 1) throw ValidationError("split needs exactly one source feature");
      if (s.sep.empty()) throw ValidationError("split separator must not be empty");
      const Column& src = d.column(s.x[0]);
      for (std::size_t i = 0; i < n; ++i) {
        if (src[i].is_null()) continue;
        std::string text = to_string(src[i]);
        std::size_t start = 0;
        for (std::size_t k = 0; k < y.size(); ++k) {
          if (start > text.size()) break;
          std::size_t end = k + 1 == y.size() ? std::string::npos : text.find(s.sep, start);
          std::string part = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
          fresh[k][i] = Value(std::move(part));
          start = end == std::string::npos ? text.size() + 1 : end + s.sep.size();
        }
      }
      break;
    }
    case VaFunction::string_index: {
      if (s.x.size() != 1 || y.size() != 1) throw ValidationError("string index maps one feature to one feature");
      const Column& src = d.column(s.x[0]);
      auto values = detail::sorted_distinct(src);
      for (std::size_t i = 0; i < n; ++i) {
        if (src[i].is_null()) continue;
        fresh[0][i] = static_cast<double>(std::lower_bound(values.begin(), values.end(), src[i]) - values.begin());
      }
      break;
    }
  }
  std::vector<FeatureName> schema = d.schema();
  std::vector<ColumnPtr> cols = d.column_ptrs();
  for (std::size_t k = 0; k < y.size(); ++k) {
    schema.push_back(y[k]);
    cols.push_back(std::make_shared<const Column>(std::move(fresh[k])));
  }
  return Dataset(std::move(schema), std::move(cols), {d.row_ids().begin(), d.row_ids().end()}, d.id());
}

struct HaResult {
  Dataset data;
  GroupMapping groups;
};

/// Groups by the key features in first-appearance order; rows with a Null key
/// are left out. Groups whose target values are all Null are not emitted,
/// except for count.
inline HaResult haugment(const Dataset& d, const HaSpec& s, RowIdAllocator* alloc = nullptr) {
  std::vector<std::size_t> kidx;
  for (const auto& k : s.keys) kidx.push_back(d.require_feature(k));
  std::size_t t = d.require_feature(s.target);
  if (std::find(s.keys.begin(), s.keys.end(), s.target) != s.keys.end()) {
    throw ValidationError("aggregate target '" + s.target + "' is also a group key");
  }

  std::map<std::vector<Value>, std::size_t> index;
  std::vector<std::vector<Value>> keys;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    std::vector<Value> key;
    bool null_key = false;
    for (auto j : kidx) {
      if (d.at(i, j).is_null()) null_key = true;
      key.push_back(d.at(i, j));
    }
    if (null_key) continue;
    auto [it, inserted] = index.emplace(key, keys.size());
    if (inserted) {
      keys.push_back(std::move(key));
      members.emplace_back();
    }
    members[it->second].push_back(i);
  }

  std::vector<std::vector<Value>> out_rows;
  std::vector<std::vector<RowId>> ginputs;
  for (std::size_t g = 0; g < keys.size(); ++g) {
    std::optional<Value> agg;
    std::size_t non_null = 0;
    double acc = 0;
    for (auto i : members[g]) {
      const Value& v = d.at(i, t);
      if (v.is_null()) continue;
      ++non_null;
      switch (s.agg) {
        case Aggregate::avg:
        case Aggregate::sum: acc += detail::require_number(v, s.target, aggregate_name(s.agg)); break;
        case Aggregate::min:
        case Aggregate::max:
          if (agg && agg->type() != v.type()) throw TypeError("cannot aggregate mixed types in '" + s.target + "'");
          if (!agg || (s.agg == Aggregate::min ? v < *agg : v > *agg)) agg = v;
          break;
        case Aggregate::count: break;
      }
    }
    if (s.agg == Aggregate::count) {
      agg = Value(members[g].size());
    } else if (non_null == 0) {
      continue;
    } else if (s.agg == Aggregate::sum) {
      agg = acc;
    } else if (s.agg == Aggregate::avg) {
      agg = acc / static_cast<double>(non_null);
    }
    std::vector<Value> row(d.cols());
    for (std::size_t k = 0; k < kidx.size(); ++k) row[kidx[k]] = keys[g][k];
    row[t] = *agg;
    out_rows.push_back(std::move(row));
    std::vector<RowId> gi;
    for (auto i : members[g]) gi.push_back(d.row_ids()[i]);
    ginputs.push_back(std::move(gi));
  }

  std::vector<RowId> new_ids = detail::take_ids(alloc, d.next_row_id(), out_rows.size());
  std::vector<ColumnPtr> cols;
  for (std::size_t j = 0; j < d.cols(); ++j) {
    Column c = d.column(j);
    for (const auto& r : out_rows) c.push_back(r[j]);
    cols.push_back(std::make_shared<const Column>(std::move(c)));
  }
  std::vector<RowId> ids(d.row_ids().begin(), d.row_ids().end());
  ids.insert(ids.end(), new_ids.begin(), new_ids.end());
  HaResult res{Dataset(d.schema(), std::move(cols), std::move(ids), d.id()), {}};
  for (std::size_t g = 0; g < out_rows.size(); ++g) res.groups.push_back({new_ids[g], std::move(ginputs[g])});
  return res;
}

inline Column transform_column(const Column& c, const TransformSpec& s, std::string_view feature) {
  Column out = c;
  auto stats = column_stats(c, std::string(feature));
  auto numbers = [&](const char* op) {
    for (const auto& v : c) {
      if (!v.is_null()) detail::require_number(v, feature, op);
    }
  };
  switch (s.fn) {
    case TransformFn::fillna_most_frequent:
      if (!stats.mode.is_null()) {
        for (auto& v : out) {
          if (v.is_null()) v = stats.mode;
        }
      }
      break;
    case TransformFn::fillna_mean:
      numbers("fillna(mean)");
      if (stats.mean) {
        for (auto& v : out) {
          if (v.is_null()) v = *stats.mean;
        }
      }
      break;
    case TransformFn::fillna_constant:
      for (auto& v : out) {
        if (v.is_null()) v = s.constant;
      }
      break;
    case TransformFn::binarize:
      numbers("binarize");
      for (auto& v : out) {
        if (!v.is_null()) v = Value(v.as_number() > s.threshold ? 1 : 0);
      }
      break;
    case TransformFn::normalize_minmax:
      numbers("normalize");
      for (auto& v : out) {
        if (v.is_null()) continue;
        double range = *stats.max - *stats.min;
        v = range == 0 ? 0.0 : (v.as_number() - *stats.min) / range;
      }
      break;
    case TransformFn::normalize_zscore:
      numbers("normalize");
      for (auto& v : out) {
        if (v.is_null()) continue;
        v = *stats.stddev == 0 ? 0.0 : (v.as_number() - *stats.mean) / *stats.stddev;
      }
      break;
    case TransformFn::discretize: {
      if (s.bins < 1) throw ValidationError("discretize needs at least one bin");
      numbers("discretize");
      for (auto& v : out) {
        if (v.is_null()) continue;
        double range = *stats.max - *stats.min;
        double k = range == 0 ? 0 : std::floor((v.as_number() - *stats.min) / (range / s.bins));
        v = std::min(k, static_cast<double>(s.bins - 1));
      }
      break;
    }
    case TransformFn::string_index: {
      auto values = detail::sorted_distinct(c);
      for (auto& v : out) {
        if (!v.is_null()) v = static_cast<double>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
      }
      break;
    }
    case TransformFn::value_map: {
      std::unordered_map<std::string, Value> m(s.mapping.begin(), s.mapping.end());
      for (auto& v : out) {
        if (v.is_null()) continue;
        auto it = m.find(to_string(v));
        if (it != m.end()) v = it->second;
      }
      break;
    }
    case TransformFn::strip:
      for (auto& v : out) {
        if (!v.is_string()) continue;
        const auto& str = v.as_string();
        auto b = str.find_first_not_of(" \t\r\n");
        auto e = str.find_last_not_of(" \t\r\n");
        v = b == std::string::npos ? std::string() : str.substr(b, e - b + 1);
      }
      break;
    case TransformFn::expr: break;  // needs the dataset; handled by transform()
  }
  return out;
}

inline Dataset transform(const Dataset& d, const TransformSpec& s) {
  if (s.x.empty()) throw ValidationError("transformation needs at least one feature");
  std::map<std::size_t, Column> fresh;
  for (const auto& f : s.x) {
    std::size_t j = d.require_feature(f);
    if (s.fn == TransformFn::expr) {
      BoundExpr b(s.expr, d.schema(), true);
      Column c(d.rows());
      for (std::size_t i = 0; i < d.rows(); ++i) c[i] = b.eval(d, i, &d.at(i, j));
      fresh[j] = std::move(c);
    } else {
      fresh[j] = transform_column(d.column(j), s, f);
    }
  }
  return detail::replace_columns(d, fresh);
}

/// Where each output column of a join comes from.
struct JoinLayout {
  struct Col {
    FeatureName name;
    std::optional<std::size_t> left;   // column index in the left operand
    std::optional<std::size_t> right;  // column index in the right operand
  };
  std::vector<Col> cols;
  std::vector<std::pair<std::size_t, std::size_t>> keys;  // (left index, right index)

  std::vector<FeatureName> schema() const {
    std::vector<FeatureName> s;
    for (const auto& c : cols) s.push_back(c.name);
    return s;
  }
};

// A key pair naming the same feature on both sides becomes one output column,
// filled from whichever side is present. Every other name that occurs on both
// sides is suffixed _l / _r.
inline JoinLayout join_layout(const std::vector<FeatureName>& ls, const std::vector<FeatureName>& rs,
                              const std::vector<std::pair<FeatureName, FeatureName>>& keys) {
  auto find = [](const std::vector<FeatureName>& s, const FeatureName& f) -> std::size_t {
    auto it = std::find(s.begin(), s.end(), f);
    if (it == s.end()) throw UnknownFeature(f);
    return static_cast<std::size_t>(it - s.begin());
  };
  JoinLayout lay;
  std::map<std::size_t, std::size_t> coalesced;  // right index -> left index
  for (const auto& [l, r] : keys) {
    std::size_t li = find(ls, l), ri = find(rs, r);
    lay.keys.emplace_back(li, ri);
    if (l == r) coalesced[ri] = li;
  }
  if (keys.empty()) throw ValidationError("join needs at least one key pair");
  std::set<FeatureName> lnames(ls.begin(), ls.end()), rnames;
  for (std::size_t j = 0; j < rs.size(); ++j) {
    if (!coalesced.count(j)) rnames.insert(rs[j]);
  }
  std::set<std::size_t> coalesced_left;
  for (const auto& [ri, li] : coalesced) coalesced_left.insert(li);
  for (std::size_t j = 0; j < ls.size(); ++j) {
    JoinLayout::Col c{ls[j], j, std::nullopt};
    if (coalesced_left.count(j)) {
      for (const auto& [ri, li] : coalesced) {
        if (li == j) c.right = ri;
      }
    } else if (rnames.count(ls[j])) {
      c.name += "_l";
    }
    lay.cols.push_back(std::move(c));
  }
  for (std::size_t j = 0; j < rs.size(); ++j) {
    if (coalesced.count(j)) continue;
    JoinLayout::Col c{rs[j], std::nullopt, j};
    if (lnames.count(rs[j])) c.name += "_r";
    lay.cols.push_back(std::move(c));
  }
  std::set<FeatureName> out;
  for (const auto& c : lay.cols) {
    if (!out.insert(c.name).second) throw ValidationError("join output feature '" + c.name + "' is ambiguous");
  }
  return lay;
}

/// Join keys match when every pair is non-null and equal.
inline bool join_keys_match(const Dataset& l, std::size_t i, const Dataset& r, std::size_t k, const JoinLayout& lay) {
  for (const auto& [li, ri] : lay.keys) {
    const Value& a = l.at(i, li);
    if (a.is_null() || !(a == r.at(k, ri))) return false;
  }
  return true;
}

/// Output order: for each left row in order its matches in right order (and a
/// pad for an unmatched left row under left/full), then unmatched right rows
/// under right/full.
inline Dataset join(const Dataset& l, const Dataset& r, const JoinSpec& s, RowIdAllocator* alloc = nullptr) {
  JoinLayout lay = join_layout(l.schema(), r.schema(), s.keys);
  std::unordered_map<std::string, std::vector<std::size_t>> rindex;
  auto key_bytes = [&](const Dataset& d, std::size_t i, bool left) -> std::optional<std::string> {
    std::string b;
    for (const auto& [li, ri] : lay.keys) {
      const Value& v = d.at(i, left ? li : ri);
      if (v.is_null()) return std::nullopt;
      append_canonical(b, v);
    }
    return b;
  };
  for (std::size_t k = 0; k < r.rows(); ++k) {
    if (auto b = key_bytes(r, k, false)) rindex[*b].push_back(k);
  }
  std::vector<std::pair<std::optional<std::size_t>, std::optional<std::size_t>>> pairs;
  std::vector<bool> rmatched(r.rows(), false);
  const bool keep_left = s.type == JoinType::left || s.type == JoinType::full;
  const bool keep_right = s.type == JoinType::right || s.type == JoinType::full;
  for (std::size_t i = 0; i < l.rows(); ++i) {
    bool any = false;
    if (auto b = key_bytes(l, i, true)) {
      auto it = rindex.find(*b);
      if (it != rindex.end()) {
        for (auto k : it->second) {
          pairs.emplace_back(i, k);
          rmatched[k] = true;
          any = true;
        }
      }
    }
    if (!any && keep_left) pairs.emplace_back(i, std::nullopt);
  }
  if (keep_right) {
    for (std::size_t k = 0; k < r.rows(); ++k) {
      if (!rmatched[k]) pairs.emplace_back(std::nullopt, k);
    }
  }
  std::vector<ColumnPtr> cols;
  for (const auto& c : lay.cols) {
    Column col;
    col.reserve(pairs.size());
    for (const auto& [li, ri] : pairs) {
      if (li && c.left) {
        col.push_back(l.at(*li, *c.left));
      } else if (ri && c.right) {
        col.push_back(r.at(*ri, *c.right));
      } else {
        col.emplace_back(Null{});
      }
    }
    cols.push_back(std::make_shared<const Column>(std::move(col)));
  }
  return Dataset(lay.schema(), std::move(cols), detail::take_ids(alloc, 0, pairs.size()));
}

inline std::vector<FeatureName> append_schema(const std::vector<FeatureName>& ls, const std::vector<FeatureName>& rs) {
  std::vector<FeatureName> s = ls;
  for (const auto& f : rs) {
    if (std::find(ls.begin(), ls.end(), f) == ls.end()) s.push_back(f);
  }
  return s;
}

inline Dataset append(const Dataset& l, const Dataset& r, RowIdAllocator* alloc = nullptr) {
  auto schema = append_schema(l.schema(), r.schema());
  std::vector<ColumnPtr> cols;
  for (const auto& f : schema) {
    Column c;
    c.reserve(l.rows() + r.rows());
    auto lj = l.feature_index(f), rj = r.feature_index(f);
    for (std::size_t i = 0; i < l.rows(); ++i) c.push_back(lj ? l.at(i, *lj) : Value(Null{}));
    for (std::size_t i = 0; i < r.rows(); ++i) c.push_back(rj ? r.at(i, *rj) : Value(Null{}));
    cols.push_back(std::make_shared<const Column>(std::move(c)));
  }
  return Dataset(std::move(schema), std::move(cols), detail::take_ids(alloc, 0, l.rows() + r.rows()));
}

struct ApplyResult {
  Dataset data;
  std::optional<GroupMapping> groups;
};

inline ApplyResult apply_operator(const OperatorSpec& spec, const std::vector<const Dataset*>& in,
                                  RowIdAllocator* alloc = nullptr) {
  const std::size_t want = is_binary(spec) ? 2 : 1;
  if (in.size() != want) {
    throw ValidationError(std::string(op_kind_name(kind_of(spec))) + " takes " + std::to_string(want) + " input(s)");
  }
  const Dataset& d = *in[0];
  return std::visit(
      [&](const auto& s) -> ApplyResult {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ProjectSpec>) return {project(d, s.keep), {}};
        if constexpr (std::is_same_v<T, SelectSpec>) return {select(d, s.condition), {}};
        if constexpr (std::is_same_v<T, VaSpec>) return {vaugment(d, s), {}};
        if constexpr (std::is_same_v<T, HaSpec>) {
          auto r = haugment(d, s, alloc);
          return {std::move(r.data), std::move(r.groups)};
        }
        if constexpr (std::is_same_v<T, TransformSpec>) return {transform(d, s), {}};
        if constexpr (std::is_same_v<T, JoinSpec>) return {join(d, *in[1], s, alloc), {}};
        if constexpr (std::is_same_v<T, AppendSpec>) return {append(d, *in[1], alloc), {}};
      },
      spec);
}

inline std::string transform_fn_name(TransformFn f) {
  switch (f) {
    case TransformFn::fillna_most_frequent: return "fillna(most_frequent)";
    case TransformFn::fillna_mean: return "fillna(mean)";
    case TransformFn::fillna_constant: return "fillna(constant)";
    case TransformFn::binarize: return "binarize";
    case TransformFn::normalize_minmax: return "normalize(minmax)";
    case TransformFn::normalize_zscore: return "normalize(zscore)";
    case TransformFn::discretize: return "discretize";
    case TransformFn::string_index: return "string_index";
    case TransformFn::value_map: return "value_map";
    case TransformFn::strip: return "strip";
    case TransformFn::expr: return "expr";
  }
  return "?";
}

/// Short human-readable name of the function an operator applies.
inline std::string describe(const OperatorSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ProjectSpec>) return "project " + print_feature_predicate(s.keep);
        if constexpr (std::is_same_v<T, SelectSpec>) return "select " + print_expr(s.condition);
        if constexpr (std::is_same_v<T, VaSpec>) {
          switch (s.fn) {
            case VaFunction::expr: return "vaugment " + print_expr(s.expr);
            case VaFunction::one_hot: return "one_hot";
            case VaFunction::split: return "split";
            case VaFunction::string_index: return "string_index";
          }
          return "vaugment";
        }
        if constexpr (std::is_same_v<T, HaSpec>) return "haugment " + std::string(aggregate_name(s.agg)) + "(" + s.target + ")";
        if constexpr (std::is_same_v<T, TransformSpec>) {
          return s.fn == TransformFn::expr ? "transform " + print_expr(s.expr) : transform_fn_name(s.fn);
        }
        if constexpr (std::is_same_v<T, JoinSpec>) return std::string("join ") + join_type_name(s.type);
        if constexpr (std::is_same_v<T, AppendSpec>) return "append";
      },
      spec);
}

}  // namespace provtrack
