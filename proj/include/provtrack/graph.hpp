#pragma once

// Provenance graph assembled from a completed log: entity and activity
// tables, deduplicated edges with per-node adjacency, a latest-version index
// over (row, feature) and the per-step records.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "provtrack/error.hpp"
#include "provtrack/log.hpp"
#include "provtrack/prov_model.hpp"

namespace provtrack {

struct Edge {
  RelationKind kind = RelationKind::used;
  std::string src;
  std::string tgt;
  std::vector<std::string> provlets;  // every provlet that stated this edge, log order

  bool operator==(const Edge&) const = default;
};

struct ProvletInfo {
  std::string id;
  std::string activity;
  bool row_scoped = true;  // every entity it generated lies in one row
};

class ProvGraph {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  // --- construction -------------------------------------------------------

  void add_entity(const Entity& e) {
    auto [it, fresh] = entity_index_.emplace(e.id, entities_.size());
    if (!fresh) {
      if (!(entities_[it->second] == e)) throw IntegrityError("entity '" + e.id + "' defined twice with different content");
      return;
    }
    entities_.push_back(e);
  }

  void add_activity(const Activity& a) {
    auto [it, fresh] = activity_index_.emplace(a.id, activities_.size());
    if (!fresh) {
      if (!(activities_[it->second] == a)) throw IntegrityError("activity '" + a.id + "' defined twice with different content");
      return;
    }
    activities_.push_back(a);
  }

  void add_relation(const Relation& r, const std::string& provlet) {
    auto key = std::make_tuple(r.kind, r.src, r.tgt);
    auto [it, fresh] = edge_index_.emplace(key, edges_.size());
    if (fresh) {
      edges_.push_back({r.kind, r.src, r.tgt, {}});
    }
    auto& pl = edges_[it->second].provlets;
    if (!provlet.empty() && std::find(pl.begin(), pl.end(), provlet) == pl.end()) pl.push_back(provlet);
    ++relation_statements_;
  }

  void add_record(const OpRecord& r) {
    if (!records_.emplace(r.op_seq, r).second) {
      throw IntegrityError("duplicate op record for op_seq " + std::to_string(r.op_seq));
    }
  }

  /// Every edge endpoint must name a node of the right kind.
  void check_references(std::size_t from_edge = 0) const {
    for (std::size_t i = from_edge; i < edges_.size(); ++i) {
      const auto& e = edges_[i];
      bool src_activity = e.kind == RelationKind::used;
      bool tgt_activity = e.kind == RelationKind::was_generated_by || e.kind == RelationKind::was_invalidated_by;
      check_node(e.src, src_activity, e);
      check_node(e.tgt, tgt_activity, e);
    }
  }

  /// Rebuilds adjacency, provlet and version indexes.
  void finalize() {
    out_.assign(entities_.size() + activities_.size(), {});
    in_.assign(entities_.size() + activities_.size(), {});
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      out_[node(edges_[i].src)].push_back(i);
      in_[node(edges_[i].tgt)].push_back(i);
    }
    provlets_.clear();
    provlet_index_.clear();
    std::unordered_map<std::string, std::optional<RowId>> first_row;
    for (const auto& e : edges_) {
      for (const auto& p : e.provlets) {
        auto [it, fresh] = provlet_index_.emplace(p, provlets_.size());
        if (fresh) provlets_.push_back({p, {}, true});
        auto& info = provlets_[it->second];
        const std::string& act = e.kind == RelationKind::used ? e.src : e.kind == RelationKind::was_derived_from ? std::string() : e.tgt;
        if (!act.empty() && info.activity.empty()) info.activity = act;
        if (e.kind == RelationKind::was_generated_by) {
          RowId r = entities_[entity_index_.at(e.src)].row;
          auto& fr = first_row[p];
          if (!fr) fr = r;
          else if (*fr != r) info.row_scoped = false;
        }
      }
    }
    versions_.clear();
    by_feature_.clear();
    by_row_.clear();
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      const auto& e = entities_[i];
      versions_[{e.row, e.feature}].push_back(i);
      by_feature_[e.feature].push_back(i);
      by_row_[e.row].push_back(i);
    }
    auto by_seq = [&](std::size_t a, std::size_t b) {
      return std::tie(entities_[a].op_seq, entities_[a].id) < std::tie(entities_[b].op_seq, entities_[b].id);
    };
    for (auto& [k, v] : versions_) std::sort(v.begin(), v.end(), by_seq);
    for (auto& [k, v] : by_feature_) std::sort(v.begin(), v.end(), by_seq);
    for (auto& [k, v] : by_row_) std::sort(v.begin(), v.end(), by_seq);
  }

  // --- lookup -------------------------------------------------------------

  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Activity>& activities() const { return activities_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::map<OpSeq, OpRecord>& records() const { return records_; }
  const std::vector<ProvletInfo>& provlets() const { return provlets_; }
  std::size_t relation_statements() const { return relation_statements_; }
  bool complete() const { return complete_; }
  void set_complete(bool c) { complete_ = c; }
  bool empty() const { return entities_.empty() && activities_.empty(); }

  const Entity* entity(std::string_view id) const {
    auto it = entity_index_.find(std::string(id));
    return it == entity_index_.end() ? nullptr : &entities_[it->second];
  }
  const Activity* activity(std::string_view id) const {
    auto it = activity_index_.find(std::string(id));
    return it == activity_index_.end() ? nullptr : &activities_[it->second];
  }
  const Activity* activity(OpSeq k) const { return activity(make_activity_id(k)); }
  const ProvletInfo* provlet(std::string_view id) const {
    auto it = provlet_index_.find(std::string(id));
    return it == provlet_index_.end() ? nullptr : &provlets_[it->second];
  }

  /// Edge indexes leaving / entering a node.
  const std::vector<std::size_t>& out_edges(std::string_view id) const { return adj(out_, id); }
  const std::vector<std::size_t>& in_edges(std::string_view id) const { return adj(in_, id); }

  /// All versions of a cell, oldest first.
  std::vector<const Entity*> versions(RowId row, std::string_view feature) const {
    std::vector<const Entity*> out;
    auto it = versions_.find({row, std::string(feature)});
    if (it == versions_.end()) return out;
    for (auto i : it->second) out.push_back(&entities_[i]);
    return out;
  }

  /// The version of a cell current at frontier k: highest op_seq <= k.
  const Entity* resolve(RowId row, std::string_view feature, OpSeq k) const {
    auto it = versions_.find({row, std::string(feature)});
    if (it == versions_.end()) return nullptr;
    const Entity* best = nullptr;
    for (auto i : it->second) {
      if (entities_[i].op_seq <= k) best = &entities_[i];
    }
    return best;
  }

  std::vector<const Entity*> entities_of_feature(std::string_view f) const { return collect(by_feature_, std::string(f)); }
  std::vector<const Entity*> entities_of_row(RowId r) const { return collect(by_row_, r); }

  /// Features that have a version in the given row, first appearance order.
  std::vector<FeatureName> features_of_row(RowId r) const {
    std::vector<FeatureName> out;
    for (const auto* e : entities_of_row(r)) {
      if (std::find(out.begin(), out.end(), e->feature) == out.end()) out.push_back(e->feature);
    }
    return out;
  }

  OpSeq final_frontier() const {
    OpSeq k = 0;
    for (const auto& a : activities_) k = std::max(k, a.op_seq);
    for (const auto& e : entities_) k = std::max(k, e.op_seq);
    return k;
  }

  std::size_t node_count() const { return entities_.size() + activities_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  std::size_t edge_count(RelationKind k) const {
    return static_cast<std::size_t>(std::count_if(edges_.begin(), edges_.end(), [&](const Edge& e) { return e.kind == k; }));
  }

  /// Content equality, independent of insertion order.
  bool same_content(const ProvGraph& o) const {
    auto sorted = [](auto v, auto key) {
      std::sort(v.begin(), v.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
      return v;
    };
    auto eid = [](const Entity& e) { return e.id; };
    auto aid = [](const Activity& a) { return a.id; };
    auto ekey = [](const Edge& e) { return std::make_tuple(e.kind, e.src, e.tgt); };
    return sorted(entities_, eid) == sorted(o.entities_, eid) && sorted(activities_, aid) == sorted(o.activities_, aid) &&
           sorted(edges_, ekey) == sorted(o.edges_, ekey) && records_ == o.records_ && complete_ == o.complete_;
  }

 private:
  using VersionKey = std::pair<RowId, FeatureName>;

  std::size_t node(const std::string& id) const {
    if (auto it = entity_index_.find(id); it != entity_index_.end()) return it->second;
    if (auto it = activity_index_.find(id); it != activity_index_.end()) return entities_.size() + it->second;
    throw IntegrityError("dangling reference to '" + id + "'");
  }

  const std::vector<std::size_t>& adj(const std::vector<std::vector<std::size_t>>& a, std::string_view id) const {
    static const std::vector<std::size_t> none;
    std::string s(id);
    if (auto it = entity_index_.find(s); it != entity_index_.end()) return a.at(it->second);
    if (auto it = activity_index_.find(s); it != activity_index_.end()) return a.at(entities_.size() + it->second);
    return none;
  }

  void check_node(const std::string& id, bool want_activity, const Edge& e) const {
    bool ok = want_activity ? activity_index_.count(id) > 0 : entity_index_.count(id) > 0;
    if (!ok) {
      throw IntegrityError(std::string(relation_kind_name(e.kind)) + " edge refers to undefined " +
                           (want_activity ? "activity" : "entity") + " '" + id + "'");
    }
  }

  template <class K, class M>
  std::vector<const Entity*> collect(const M& m, const K& k) const {
    std::vector<const Entity*> out;
    auto it = m.find(k);
    if (it == m.end()) return out;
    for (auto i : it->second) out.push_back(&entities_[i]);
    return out;
  }

  std::vector<Entity> entities_;
  std::vector<Activity> activities_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> entity_index_, activity_index_;
  std::map<std::tuple<RelationKind, std::string, std::string>, std::size_t> edge_index_;
  std::map<OpSeq, OpRecord> records_;
  std::size_t relation_statements_ = 0;
  bool complete_ = false;

  std::vector<std::vector<std::size_t>> out_, in_;
  std::vector<ProvletInfo> provlets_;
  std::unordered_map<std::string, std::size_t> provlet_index_;
  std::map<VersionKey, std::vector<std::size_t>> versions_;
  std::map<FeatureName, std::vector<std::size_t>> by_feature_;
  std::map<RowId, std::vector<std::size_t>> by_row_;
};

struct BuildOptions {
  bool allow_incomplete = false;
};

/// Single pass over the committed batches. References are checked at the end
/// of each batch, so an id may be used before its definition only within the
/// batch that defines it.
inline ProvGraph build_graph(const LogContents& log, BuildOptions opt = {}) {
  if (!log.complete && !opt.allow_incomplete) {
    throw IntegrityError(log.abort_reason ? "log was aborted: " + *log.abort_reason : "log is incomplete (no end record)");
  }
  ProvGraph g;
  for (const auto& b : log.batches) {
    std::size_t first_edge = g.edge_count();
    for (const auto& a : b.activities) g.add_activity(a);
    for (const auto& p : b.provlets) {
      for (const auto& e : p.provlet.entities) g.add_entity(e);
    }
    for (const auto& p : b.provlets) {
      for (const auto& r : p.provlet.relations) g.add_relation(r, p.id);
    }
    for (const auto& r : b.records) g.add_record(r);
    g.check_references(first_edge);
  }
  g.set_complete(log.complete);
  g.finalize();
  return g;
}

inline ProvGraph build_graph_file(const std::string& path, BuildOptions opt = {}) {
  return build_graph(read_log_file(path), opt);
}

}  // namespace provtrack
