#pragma once

// The thirteen provenance queries, as traversals over ProvGraph and its
// per-step records. Cell references resolve to the version current at a
// frontier op_seq; see resolve_cell.

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

#include "provtrack/graph.hpp"

namespace provtrack {

enum class QueryId : std::uint8_t { pq1 = 1, pq2, pq3, pq4, pq5, pq6, pq7, pq8, pq9, pq10, pq11, pq12, pq13 };

inline constexpr int kQueryCount = 13;

inline std::string query_name(QueryId q) { return "PQ" + std::to_string(static_cast<int>(q)); }

inline std::optional<QueryId> parse_query_id(std::string_view s) {
  if (s.size() < 3 || std::toupper(static_cast<unsigned char>(s[0])) != 'P' ||
      std::toupper(static_cast<unsigned char>(s[1])) != 'Q') {
    return std::nullopt;
  }
  int n = 0;
  auto [p, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), n);
  if (ec != std::errc() || p != s.data() + s.size() || n < 1 || n > kQueryCount) return std::nullopt;
  return static_cast<QueryId>(n);
}

inline const char* query_description(QueryId q) {
  switch (q) {
    case QueryId::pq1: return "operations applied to the dataset and the features they affect";
    case QueryId::pq2: return "input cells a cell was derived from (why)";
    case QueryId::pq3: return "input cells and operations that produced a cell (how)";
    case QueryId::pq4: return "operations applied to a feature";
    case QueryId::pq5: return "operations applied to a record";
    case QueryId::pq6: return "operations applied to a cell";
    case QueryId::pq7: return "operation that removed a feature";
    case QueryId::pq8: return "operation that removed a record";
    case QueryId::pq9: return "operation that removed or replaced a cell";
    case QueryId::pq10: return "cells a cell derives from and that derive from it";
    case QueryId::pq11: return "cells a record derives from and that derive from it";
    case QueryId::pq12: return "change in feature spread per operation";
    case QueryId::pq13: return "change in dataset spread per operation";
  }
  return "";
}

/// An activity with the edge kinds through which the query reached it.
struct ActivityHit {
  const Activity* activity = nullptr;
  std::set<RelationKind> via;
  bool operator==(const ActivityHit& o) const { return activity->id == o.activity->id && via == o.via; }
};

struct Subgraph {
  std::set<std::string> entities;
  std::set<std::string> activities;
  std::set<std::size_t> edges;  // indexes into ProvGraph::edges()
  bool operator==(const Subgraph&) const = default;
};

struct FeatureSpreadRow {
  OpSeq op_seq = 0;
  ActivityClass cls = ActivityClass::transformation;
  std::string function;
  std::optional<ColumnStats> pre;   // absent when the step created the feature
  std::optional<ColumnStats> post;  // absent when the step removed it
  bool operator==(const FeatureSpreadRow&) const = default;
};

struct DatasetSpreadRow {
  OpSeq op_seq = 0;
  ActivityClass cls = ActivityClass::transformation;
  std::string function;
  std::vector<FrameStats> pre;
  FrameStats post;
  bool operator==(const DatasetSpreadRow&) const = default;
};

inline std::size_t frame_nulls(const FrameStats& s) {
  std::size_t n = 0;
  for (const auto& c : s.columns) n += c.null_count;
  return n;
}

inline double frame_null_rate(const FrameStats& s) {
  double cells = static_cast<double>(s.rows) * static_cast<double>(s.cols);
  return cells == 0 ? 0.0 : static_cast<double>(frame_nulls(s)) / cells;
}

enum class ResultKind : std::uint8_t { activity_list, entity_set, subgraph, feature_spread, dataset_spread };

struct QueryResult {
  QueryId id = QueryId::pq1;
  ResultKind kind = ResultKind::activity_list;
  std::vector<ActivityHit> activities;
  std::vector<const Entity*> entities;
  Subgraph subgraph;
  std::vector<FeatureSpreadRow> feature_spread;
  std::vector<DatasetSpreadRow> dataset_spread;
};

namespace detail {

inline bool entity_order(const Entity* a, const Entity* b) {
  return std::tie(a->op_seq, a->row, a->feature) < std::tie(b->op_seq, b->row, b->feature);
}

inline std::vector<const Entity*> to_entities(const ProvGraph& g, const std::set<std::string>& ids) {
  std::vector<const Entity*> out;
  for (const auto& id : ids) out.push_back(g.entity(id));
  std::sort(out.begin(), out.end(), entity_order);
  return out;
}

inline std::vector<ActivityHit> to_hits(const ProvGraph& g, const std::map<std::string, std::set<RelationKind>>& m) {
  std::vector<ActivityHit> out;
  for (const auto& [id, via] : m) out.push_back({g.activity(id), via});
  std::sort(out.begin(), out.end(), [](const ActivityHit& a, const ActivityHit& b) {
    return a.activity->op_seq < b.activity->op_seq;
  });
  return out;
}

// Closure over wasDerivedFrom: towards sources (up) or towards results.
inline std::set<std::string> derivation_closure(const ProvGraph& g, const std::vector<std::string>& start, bool up) {
  std::set<std::string> seen(start.begin(), start.end());
  std::deque<std::string> q(start.begin(), start.end());
  while (!q.empty()) {
    std::string cur = std::move(q.front());
    q.pop_front();
    const auto& adj = up ? g.out_edges(cur) : g.in_edges(cur);
    for (auto i : adj) {
      const auto& e = g.edges()[i];
      if (e.kind != RelationKind::was_derived_from) continue;
      const std::string& next = up ? e.tgt : e.src;
      if (seen.insert(next).second) q.push_back(next);
    }
  }
  return seen;
}

inline const Activity* generator(const ProvGraph& g, const std::string& entity, std::size_t* edge = nullptr) {
  for (auto i : g.out_edges(entity)) {
    const auto& e = g.edges()[i];
    if (e.kind == RelationKind::was_generated_by) {
      if (edge) *edge = i;
      return g.activity(e.tgt);
    }
  }
  return nullptr;
}

// Activities incident to a set of entities, keyed by id, with edge kinds.
inline std::map<std::string, std::set<RelationKind>> incident(const ProvGraph& g, const std::vector<const Entity*>& ents,
                                                             std::optional<OpSeq> frontier) {
  std::map<std::string, std::set<RelationKind>> out;
  auto keep = [&](const std::string& a) {
    const Activity* act = g.activity(a);
    return act && (!frontier || act->op_seq <= *frontier);
  };
  for (const auto* e : ents) {
    if (frontier && e->op_seq > *frontier) continue;
    for (auto i : g.in_edges(e->id)) {
      const auto& ed = g.edges()[i];
      if (ed.kind == RelationKind::used && keep(ed.src)) out[ed.src].insert(ed.kind);
    }
    for (auto i : g.out_edges(e->id)) {
      const auto& ed = g.edges()[i];
      if ((ed.kind == RelationKind::was_generated_by || ed.kind == RelationKind::was_invalidated_by) && keep(ed.tgt)) {
        out[ed.tgt].insert(ed.kind);
      }
    }
  }
  return out;
}

// Entities of a scope current at a frontier: per cell the resolved version;
// without a frontier every version.
inline std::vector<const Entity*> scope_at(const ProvGraph& g, const std::vector<const Entity*>& all,
                                           std::optional<OpSeq> frontier) {
  if (!frontier) return all;
  std::map<std::pair<RowId, FeatureName>, const Entity*> cur;
  for (const auto* e : all) {
    if (e->op_seq > *frontier) continue;
    auto& slot = cur[{e->row, e->feature}];
    if (!slot || slot->op_seq < e->op_seq) slot = e;
  }
  std::vector<const Entity*> out;
  for (const auto& [k, e] : cur) out.push_back(e);
  (void)g;
  return out;
}

inline std::optional<ActivityHit> earliest_invalidation(const ProvGraph& g, const std::vector<const Entity*>& scope,
                                                        std::optional<ActivityClass> cls) {
  const Activity* best = nullptr;
  for (const auto* e : scope) {
    for (auto i : g.out_edges(e->id)) {
      const auto& ed = g.edges()[i];
      if (ed.kind != RelationKind::was_invalidated_by) continue;
      const Activity* a = g.activity(ed.tgt);
      if (cls && a->cls != *cls) continue;
      if (!best || a->op_seq < best->op_seq) best = a;
    }
  }
  if (!best) return std::nullopt;
  return ActivityHit{best, {RelationKind::was_invalidated_by}};
}

}  // namespace detail

/// The version of (row, feature) current at the frontier; the final frontier
/// when none is given.
inline const Entity& resolve_cell(const ProvGraph& g, RowId row, const FeatureName& feature,
                                  std::optional<OpSeq> frontier = std::nullopt) {
  OpSeq k = frontier.value_or(g.final_frontier());
  const Entity* e = g.resolve(row, feature, k);
  if (!e) {
    throw ValidationError("no version of (" + std::to_string(row) + ", " + feature + ") at frontier " + std::to_string(k));
  }
  return *e;
}

inline std::vector<ActivityHit> pq1_all_transformations(const ProvGraph& g) {
  std::vector<ActivityHit> out;
  for (const auto& a : g.activities()) out.push_back({&a, {}});
  std::sort(out.begin(), out.end(), [](const ActivityHit& a, const ActivityHit& b) {
    return a.activity->op_seq < b.activity->op_seq;
  });
  return out;
}

/// Ingestion-level cells in the derivation ancestry of a cell, itself included.
inline std::vector<const Entity*> pq2_why(const ProvGraph& g, RowId row, const FeatureName& feature,
                                          std::optional<OpSeq> frontier = std::nullopt) {
  const Entity& e = resolve_cell(g, row, feature, frontier);
  std::set<std::string> keep;
  for (const auto& id : detail::derivation_closure(g, {e.id}, true)) {
    const Activity* a = detail::generator(g, id);
    if (a && a->cls == ActivityClass::ingestion) keep.insert(id);
  }
  return detail::to_entities(g, keep);
}

/// Derivation ancestry with the activities that generated each member and
/// what those activities used. For a provlet confined to one row every used
/// edge it states is included; wider provlets contribute only used edges
/// into the ancestry.
inline Subgraph pq3_how(const ProvGraph& g, RowId row, const FeatureName& feature,
                        std::optional<OpSeq> frontier = std::nullopt) {
  const Entity& e = resolve_cell(g, row, feature, frontier);
  Subgraph s;
  s.entities = detail::derivation_closure(g, {e.id}, true);
  std::set<std::string> ancestry = s.entities;
  for (const auto& id : ancestry) {
    for (auto i : g.out_edges(id)) {
      const auto& ed = g.edges()[i];
      if (ed.kind == RelationKind::was_derived_from) s.edges.insert(i);
      if (ed.kind != RelationKind::was_generated_by) continue;
      s.edges.insert(i);
      s.activities.insert(ed.tgt);
      std::set<std::string> scoped;
      for (const auto& p : ed.provlets) {
        const ProvletInfo* info = g.provlet(p);
        if (info && info->row_scoped) scoped.insert(p);
      }
      for (auto j : g.out_edges(ed.tgt)) {
        const auto& u = g.edges()[j];
        if (u.kind != RelationKind::used) continue;
        bool in_scope = ancestry.count(u.tgt) > 0;
        for (const auto& p : u.provlets) in_scope = in_scope || scoped.count(p) > 0;
        if (!in_scope) continue;
        s.edges.insert(j);
        s.entities.insert(u.tgt);
      }
    }
  }
  return s;
}

inline std::vector<ActivityHit> pq4_feature_ops(const ProvGraph& g, const FeatureName& feature,
                                                std::optional<OpSeq> frontier = std::nullopt) {
  return detail::to_hits(g, detail::incident(g, g.entities_of_feature(feature), frontier));
}

inline std::vector<ActivityHit> pq5_record_ops(const ProvGraph& g, RowId row, std::optional<OpSeq> frontier = std::nullopt) {
  return detail::to_hits(g, detail::incident(g, g.entities_of_row(row), frontier));
}

inline std::vector<ActivityHit> pq6_item_ops(const ProvGraph& g, RowId row, const FeatureName& feature,
                                             std::optional<OpSeq> frontier = std::nullopt) {
  return detail::to_hits(g, detail::incident(g, g.versions(row, feature), frontier));
}

/// Projection that removed the feature. Without a frontier every version of
/// the feature is in scope.
inline std::optional<ActivityHit> pq7_feature_invalidation(const ProvGraph& g, const FeatureName& feature,
                                                           std::optional<OpSeq> frontier = std::nullopt) {
  auto scope = detail::scope_at(g, g.entities_of_feature(feature), frontier);
  return detail::earliest_invalidation(g, scope, ActivityClass::conditional_projection);
}

inline std::optional<ActivityHit> pq8_record_invalidation(const ProvGraph& g, RowId row,
                                                          std::optional<OpSeq> frontier = std::nullopt) {
  auto scope = detail::scope_at(g, g.entities_of_row(row), frontier);
  return detail::earliest_invalidation(g, scope, ActivityClass::selection);
}

/// First activity after which the cell's version no longer stands: it was
/// invalidated, or a newer version of the cell was generated. Starts from the
/// version current at the frontier, or the oldest version without one.
inline std::optional<ActivityHit> pq9_item_invalidation(const ProvGraph& g, RowId row, const FeatureName& feature,
                                                        std::optional<OpSeq> frontier = std::nullopt) {
  auto vs = g.versions(row, feature);
  if (vs.empty()) throw ValidationError("no version of (" + std::to_string(row) + ", " + feature + ")");
  const Entity* start = frontier ? &resolve_cell(g, row, feature, frontier) : vs.front();
  auto inv = detail::earliest_invalidation(g, {start}, std::nullopt);
  std::optional<ActivityHit> sup;
  for (const auto* v : vs) {
    if (v->op_seq <= start->op_seq) continue;
    if (const Activity* a = detail::generator(g, v->id)) sup = ActivityHit{a, {RelationKind::was_generated_by}};
    break;
  }
  if (inv && sup) return inv->activity->op_seq <= sup->activity->op_seq ? inv : sup;
  return inv ? inv : sup;
}

/// Ancestors and descendants of a cell over wasDerivedFrom, itself included.
inline std::vector<const Entity*> pq10_item_history(const ProvGraph& g, RowId row, const FeatureName& feature,
                                                    std::optional<OpSeq> frontier = std::nullopt) {
  const Entity& e = resolve_cell(g, row, feature, frontier);
  auto up = detail::derivation_closure(g, {e.id}, true);
  auto down = detail::derivation_closure(g, {e.id}, false);
  up.insert(down.begin(), down.end());
  return detail::to_entities(g, up);
}

inline std::vector<const Entity*> pq11_record_history(const ProvGraph& g, RowId row,
                                                      std::optional<OpSeq> frontier = std::nullopt) {
  OpSeq k = frontier.value_or(g.final_frontier());
  std::vector<std::string> start;
  for (const auto& f : g.features_of_row(row)) {
    if (const Entity* e = g.resolve(row, f, k)) start.push_back(e->id);
  }
  if (start.empty()) throw ValidationError("no version of record " + std::to_string(row) + " at frontier " + std::to_string(k));
  auto up = detail::derivation_closure(g, start, true);
  auto down = detail::derivation_closure(g, start, false);
  up.insert(down.begin(), down.end());
  return detail::to_entities(g, up);
}

/// Per step that touched the feature: its statistics before and after. A step
/// touches a feature when it names it, creates or removes it, or changes any
/// of its statistics.
inline std::vector<FeatureSpreadRow> pq12_feature_spread(const ProvGraph& g, const FeatureName& feature) {
  std::vector<FeatureSpreadRow> out;
  for (const auto& [k, r] : g.records()) {
    if (!r.cls) continue;
    std::optional<ColumnStats> pre, post;
    for (const auto& in : r.inputs) {
      if (const auto* c = in.find(feature)) {
        pre = *c;
        break;
      }
    }
    if (const auto* c = r.output.find(feature)) post = *c;
    if (!pre && !post) continue;
    bool named = std::find(r.features.begin(), r.features.end(), feature) != r.features.end();
    if (!named && pre == post) continue;
    out.push_back({k, *r.cls, r.function, pre, post});
  }
  return out;
}

inline std::vector<DatasetSpreadRow> pq13_dataset_spread(const ProvGraph& g) {
  std::vector<DatasetSpreadRow> out;
  for (const auto& [k, r] : g.records()) {
    if (!r.cls) continue;
    out.push_back({k, *r.cls, r.function, r.inputs, r.output});
  }
  return out;
}

struct QueryArgs {
  std::optional<RowId> row;
  std::optional<FeatureName> feature;
  std::optional<OpSeq> frontier;
};

inline QueryResult run_query(const ProvGraph& g, QueryId q, const QueryArgs& a) {
  auto need_row = [&] {
    if (!a.row) throw ValidationError(query_name(q) + " needs a row");
    return *a.row;
  };
  auto need_feature = [&] {
    if (!a.feature) throw ValidationError(query_name(q) + " needs a feature");
    return *a.feature;
  };
  QueryResult r;
  r.id = q;
  auto one = [&](std::optional<ActivityHit> h) {
    r.kind = ResultKind::activity_list;
    if (h) r.activities.push_back(*h);
  };
  switch (q) {
    case QueryId::pq1: r.activities = pq1_all_transformations(g); break;
    case QueryId::pq2: {
      RowId row = need_row();
      r.kind = ResultKind::entity_set;
      r.entities = pq2_why(g, row, need_feature(), a.frontier);
      break;
    }
    case QueryId::pq3: {
      RowId row = need_row();
      r.kind = ResultKind::subgraph;
      r.subgraph = pq3_how(g, row, need_feature(), a.frontier);
      break;
    }
    case QueryId::pq4: r.activities = pq4_feature_ops(g, need_feature(), a.frontier); break;
    case QueryId::pq5: r.activities = pq5_record_ops(g, need_row(), a.frontier); break;
    case QueryId::pq6: {
      RowId row = need_row();
      r.activities = pq6_item_ops(g, row, need_feature(), a.frontier);
      break;
    }
    case QueryId::pq7: one(pq7_feature_invalidation(g, need_feature(), a.frontier)); break;
    case QueryId::pq8: one(pq8_record_invalidation(g, need_row(), a.frontier)); break;
    case QueryId::pq9: {
      RowId row = need_row();
      one(pq9_item_invalidation(g, row, need_feature(), a.frontier));
      break;
    }
    case QueryId::pq10: {
      RowId row = need_row();
      r.kind = ResultKind::entity_set;
      r.entities = pq10_item_history(g, row, need_feature(), a.frontier);
      break;
    }
    case QueryId::pq11:
      r.kind = ResultKind::entity_set;
      r.entities = pq11_record_history(g, need_row(), a.frontier);
      break;
    case QueryId::pq12:
      r.kind = ResultKind::feature_spread;
      r.feature_spread = pq12_feature_spread(g, need_feature());
      break;
    case QueryId::pq13:
      r.kind = ResultKind::dataset_spread;
      r.dataset_spread = pq13_dataset_spread(g);
      break;
  }
  return r;
}

// --- rendering ----------------------------------------------------------------

namespace detail {

inline std::string opt_num(const std::optional<double>& d) { return d ? format_number(*d) : "-"; }

inline std::string delta(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a || !b) return "-";
  return format_number(*b - *a);
}

inline std::string sdelta(std::size_t a, std::size_t b) {
  auto d = static_cast<long long>(b) - static_cast<long long>(a);
  return (d > 0 ? "+" : "") + std::to_string(d);
}

inline std::string via_string(const std::set<RelationKind>& via) {
  std::string s;
  for (auto k : via) {
    if (!s.empty()) s += ",";
    s += relation_kind_name(k);
  }
  return s.empty() ? "-" : s;
}

inline std::string join_list(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) {
    if (!s.empty()) s += ",";
    s += x;
  }
  return s;
}

}  // namespace detail

/// Line-oriented, tab-separated text; the first line is a header.
inline std::string render_text(const ProvGraph& g, const QueryResult& r) {
  std::ostringstream out;
  switch (r.kind) {
    case ResultKind::activity_list:
      out << "activity\top_seq\tclass\tfunction\tfeatures\tvia\n";
      for (const auto& h : r.activities) {
        out << h.activity->id << '\t' << h.activity->op_seq << '\t' << activity_class_name(h.activity->cls) << '\t'
            << h.activity->function << '\t' << detail::join_list(h.activity->features) << '\t'
            << detail::via_string(h.via) << '\n';
      }
      if (r.activities.empty()) out << "(none)\n";
      break;
    case ResultKind::entity_set:
      out << "entity\top_seq\trow\tfeature\tvalue\n";
      for (const auto* e : r.entities) {
        out << e->id << '\t' << e->op_seq << '\t' << e->row << '\t' << e->feature << '\t'
            << (e->value.is_null() ? "null" : to_string(e->value)) << '\n';
      }
      break;
    case ResultKind::subgraph:
      out << "kind\tfrom\tto\n";
      for (auto i : r.subgraph.edges) {
        const auto& e = g.edges()[i];
        out << relation_kind_name(e.kind) << '\t' << e.src << '\t' << e.tgt << '\n';
      }
      break;
    case ResultKind::feature_spread:
      out << "op_seq\tclass\tfunction\tcount\tnull_count\tdistinct\tmode_count\tmean\tstddev\tmin\tmax\n";
      for (const auto& row : r.feature_spread) {
        ColumnStats none;
        const ColumnStats& a = row.pre ? *row.pre : none;
        const ColumnStats& b = row.post ? *row.post : none;
        out << row.op_seq << '\t' << activity_class_name(row.cls) << '\t' << row.function << '\t'
            << detail::sdelta(a.count, b.count) << '\t' << detail::sdelta(a.null_count, b.null_count) << '\t'
            << detail::sdelta(a.distinct_count, b.distinct_count) << '\t' << detail::sdelta(a.mode_count, b.mode_count)
            << '\t' << detail::delta(a.mean, b.mean) << '\t' << detail::delta(a.stddev, b.stddev) << '\t'
            << detail::delta(a.min, b.min) << '\t' << detail::delta(a.max, b.max) << '\n';
      }
      break;
    case ResultKind::dataset_spread:
      out << "op_seq\tclass\tfunction\trows\tcols\tnull_rate\td_rows\td_cols\td_null_rate\n";
      for (const auto& row : r.dataset_spread) {
        FrameStats none;
        const FrameStats& a = row.pre.empty() ? none : row.pre.front();
        out << row.op_seq << '\t' << activity_class_name(row.cls) << '\t' << row.function << '\t' << row.post.rows << '\t'
            << row.post.cols << '\t' << format_number(frame_null_rate(row.post)) << '\t'
            << detail::sdelta(a.rows, row.post.rows) << '\t' << detail::sdelta(a.cols, row.post.cols) << '\t'
            << format_number(frame_null_rate(row.post) - frame_null_rate(a)) << '\n';
      }
      break;
  }
  return out.str();
}

inline nlohmann::json render_json(const ProvGraph& g, const QueryResult& r) {
  using nlohmann::json;
  json doc = {{"query", query_name(r.id)}};
  auto hit_json = [](const ActivityHit& h) {
    std::vector<std::string> via;
    for (auto k : h.via) via.push_back(relation_kind_name(k));
    return json{{"id", h.activity->id},
                {"op_seq", h.activity->op_seq},
                {"class", activity_class_name(h.activity->cls)},
                {"function", h.activity->function},
                {"features", h.activity->features},
                {"via", via}};
  };
  auto ent_json = [](const Entity* e) {
    return json{{"id", e->id}, {"op_seq", e->op_seq}, {"row", e->row}, {"feature", e->feature}, {"value", logfmt::value_json(e->value)}};
  };
  switch (r.kind) {
    case ResultKind::activity_list: {
      doc["kind"] = "activities";
      json a = json::array();
      for (const auto& h : r.activities) a.push_back(hit_json(h));
      doc["activities"] = a;
      break;
    }
    case ResultKind::entity_set: {
      doc["kind"] = "entities";
      json a = json::array();
      for (const auto* e : r.entities) a.push_back(ent_json(e));
      doc["entities"] = a;
      break;
    }
    case ResultKind::subgraph: {
      doc["kind"] = "subgraph";
      json edges = json::array();
      for (auto i : r.subgraph.edges) {
        const auto& e = g.edges()[i];
        edges.push_back({{"kind", relation_kind_name(e.kind)}, {"from", e.src}, {"to", e.tgt}});
      }
      doc["entities"] = r.subgraph.entities;
      doc["activities"] = r.subgraph.activities;
      doc["edges"] = edges;
      break;
    }
    case ResultKind::feature_spread: {
      doc["kind"] = "feature_spread";
      json rows = json::array();
      for (const auto& row : r.feature_spread) {
        FrameStats wrap;
        auto cs = [&](const std::optional<ColumnStats>& c) {
          if (!c) return json();
          wrap.columns = {*c};
          return logfmt::stats_json(wrap).at("columns").at(0);
        };
        rows.push_back({{"op_seq", row.op_seq},
                        {"class", activity_class_name(row.cls)},
                        {"function", row.function},
                        {"pre", cs(row.pre)},
                        {"post", cs(row.post)}});
      }
      doc["rows"] = rows;
      break;
    }
    case ResultKind::dataset_spread: {
      doc["kind"] = "dataset_spread";
      json rows = json::array();
      for (const auto& row : r.dataset_spread) {
        json pre = json::array();
        for (const auto& p : row.pre) {
          pre.push_back({{"dataset", p.dataset_id}, {"rows", p.rows}, {"cols", p.cols}, {"null_rate", frame_null_rate(p)}});
        }
        rows.push_back({{"op_seq", row.op_seq},
                        {"class", activity_class_name(row.cls)},
                        {"function", row.function},
                        {"pre", pre},
                        {"post", {{"dataset", row.post.dataset_id},
                                  {"rows", row.post.rows},
                                  {"cols", row.post.cols},
                                  {"null_rate", frame_null_rate(row.post)}}}});
      }
      doc["rows"] = rows;
      break;
    }
  }
  return doc;
}

}  // namespace provtrack
