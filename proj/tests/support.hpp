#pragma once

// Shared test fixtures: the customer toy frames, a tracker wired to an
// in-memory log, independent reference oracles and random generators.

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "provtrack/provtrack.hpp"

namespace pt_test {

using namespace provtrack;

inline const Value N{};

// Customer frame used throughout the worked examples.
inline Dataset customers() {
  return Dataset::from_rows({"CId", "Gender", "Age", "Zip"},
                            {{113, "F", 24, 98567}, {241, "M", 28, N}, {375, "C", N, 32768}, {578, "F", 44, 32768}},
                            "D");
}

inline Dataset customer_names() {
  return Dataset::from_rows({"CId", "Name"}, {{241, "Jim"}, {578, "Mary"}}, "DR");
}

inline std::vector<std::vector<Value>> rows_of(const Dataset& d) {
  std::vector<std::vector<Value>> out;
  for (std::size_t i = 0; i < d.rows(); ++i) out.push_back(d.row(i));
  return out;
}

/// A tracker whose batches go to an in-memory log.
class Recorder {
 public:
  explicit Recorder(TrackerOptions opt = {})
      : writer_(out_), tracker([this](Batch&& b) {
          batches.push_back(b);
          writer_.append(b);
        }, opt) {}

  std::string log() {
    if (!writer_.closed()) writer_.close();
    return out_.str();
  }

  ProvGraph graph() {
    std::istringstream in(log());
    return build_graph(read_log(in));
  }

 private:
  std::ostringstream out_;
  ProvLogWriter writer_;

 public:
  std::vector<Batch> batches;
  Tracker tracker;
};

inline std::size_t count_entities(const std::vector<Batch>& bs, std::optional<OpSeq> k = std::nullopt) {
  std::size_t n = 0;
  for (const auto& b : bs)
    for (const auto& p : b.provlets)
      for (const auto& e : p.entities)
        if (!k || e.op_seq == *k) ++n;
  return n;
}

inline std::size_t count_relations(const std::vector<Batch>& bs) {
  std::size_t n = 0;
  for (const auto& b : bs)
    for (const auto& p : b.provlets) n += p.relations.size();
  return n;
}

inline bool has_edge(const ProvGraph& g, RelationKind k, const std::string& src, const std::string& tgt) {
  for (const auto& e : g.edges())
    if (e.kind == k && e.src == src && e.tgt == tgt) return true;
  return false;
}

// --- graph invariants --------------------------------------------------------

/// Violations of the structural rules every captured graph must obey.
inline std::vector<std::string> graph_violations(const ProvGraph& g) {
  std::vector<std::string> bad;
  std::set<std::tuple<RelationKind, std::string, std::string>> edges;
  for (const auto& e : g.edges()) edges.insert({e.kind, e.src, e.tgt});
  std::map<std::string, std::vector<std::string>> generated_by;
  for (const auto& e : g.edges()) {
    bool src_entity = g.entity(e.src) != nullptr, tgt_entity = g.entity(e.tgt) != nullptr;
    bool src_act = g.activity(e.src) != nullptr, tgt_act = g.activity(e.tgt) != nullptr;
    switch (e.kind) {
      case RelationKind::used:
        if (!src_act || !tgt_entity) bad.push_back("used edge with bad endpoints " + e.src + " -> " + e.tgt);
        break;
      case RelationKind::was_generated_by:
        if (!src_entity || !tgt_act) bad.push_back("generation edge with bad endpoints " + e.src);
        generated_by[e.src].push_back(e.tgt);
        break;
      case RelationKind::was_invalidated_by:
        if (!src_entity || !tgt_act) bad.push_back("invalidation edge with bad endpoints " + e.src);
        if (edges.count({RelationKind::was_generated_by, e.src, e.tgt})) {
          bad.push_back(e.src + " generated and invalidated by " + e.tgt);
        }
        break;
      case RelationKind::was_derived_from: break;
    }
  }
  for (const auto& e : g.entities()) {
    auto it = generated_by.find(e.id);
    if (it == generated_by.end() || it->second.size() != 1) bad.push_back(e.id + " lacks a unique generator");
  }
  for (const auto& e : g.edges()) {
    if (e.kind != RelationKind::was_derived_from) continue;
    const Entity* a = g.entity(e.src);
    const Entity* b = g.entity(e.tgt);
    if (!a || !b) {
      bad.push_back("derivation with unknown endpoint " + e.src + " -> " + e.tgt);
      continue;
    }
    if (a->op_seq <= b->op_seq) bad.push_back("derivation does not advance op_seq: " + e.src + " -> " + e.tgt);
    bool ok = false;
    for (const auto& act : generated_by[e.src]) {
      if (edges.count({RelationKind::used, act, e.tgt})) ok = true;
    }
    if (!ok) bad.push_back("derivation without matching use: " + e.src + " -> " + e.tgt);
  }
  // Acyclicity by Kahn's algorithm over derivations.
  std::map<std::string, int> indeg;
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& e : g.edges()) {
    if (e.kind != RelationKind::was_derived_from) continue;
    adj[e.src].push_back(e.tgt);
    indeg[e.tgt]++;
    indeg.emplace(e.src, 0);
  }
  std::vector<std::string> q;
  for (const auto& [n, d] : indeg)
    if (d == 0) q.push_back(n);
  std::size_t seen = 0;
  while (!q.empty()) {
    auto n = q.back();
    q.pop_back();
    ++seen;
    for (const auto& m : adj[n])
      if (--indeg[m] == 0) q.push_back(m);
  }
  if (seen != indeg.size()) bad.push_back("derivation cycle");
  return bad;
}

// --- join oracle -------------------------------------------------------------

/// Ground-truth witnesses by nested loops: an output row is explained by every
/// operand pair (or pad) whose joined tuple equals it.
inline std::vector<Witness> nested_loop_witnesses(const Dataset& l, const Dataset& r, const Dataset& out,
                                                  const JoinSpec& spec) {
  std::vector<std::pair<std::size_t, std::size_t>> kp;
  for (const auto& [a, b] : spec.keys) kp.emplace_back(*l.feature_index(a), *r.feature_index(b));
  auto match = [&](std::size_t i, std::size_t k) {
    for (auto [a, b] : kp) {
      if (l.at(i, a).is_null() || !(l.at(i, a) == r.at(k, b))) return false;
    }
    return true;
  };
  // Left columns come first, then right columns minus same-named key pairs.
  std::set<std::size_t> coalesced_right;
  std::map<std::size_t, std::size_t> coalesce_left;  // left col -> right col
  for (const auto& [a, b] : spec.keys) {
    if (a == b) {
      coalesced_right.insert(*r.feature_index(b));
      coalesce_left[*l.feature_index(a)] = *r.feature_index(b);
    }
  }
  auto tuple = [&](std::optional<std::size_t> i, std::optional<std::size_t> k) {
    std::vector<Value> t;
    for (std::size_t j = 0; j < l.cols(); ++j) {
      if (i) t.push_back(l.at(*i, j));
      else if (coalesce_left.count(j) && k) t.push_back(r.at(*k, coalesce_left[j]));
      else t.push_back(N);
    }
    for (std::size_t j = 0; j < r.cols(); ++j) {
      if (coalesced_right.count(j)) continue;
      t.push_back(k ? r.at(*k, j) : N);
    }
    return t;
  };
  std::vector<std::tuple<std::vector<Value>, std::optional<std::size_t>, std::optional<std::size_t>>> truth;
  std::vector<bool> lm(l.rows()), rm(r.rows());
  for (std::size_t i = 0; i < l.rows(); ++i)
    for (std::size_t k = 0; k < r.rows(); ++k)
      if (match(i, k)) {
        truth.emplace_back(tuple(i, k), i, k);
        lm[i] = rm[k] = true;
      }
  bool keep_l = spec.type == JoinType::left || spec.type == JoinType::full;
  bool keep_r = spec.type == JoinType::right || spec.type == JoinType::full;
  if (keep_l)
    for (std::size_t i = 0; i < l.rows(); ++i)
      if (!lm[i]) truth.emplace_back(tuple(i, std::nullopt), i, std::nullopt);
  if (keep_r)
    for (std::size_t k = 0; k < r.rows(); ++k)
      if (!rm[k]) truth.emplace_back(tuple(std::nullopt, k), std::nullopt, k);
  std::vector<Witness> res;
  for (std::size_t o = 0; o < out.rows(); ++o) {
    std::set<std::size_t> ls, rs;
    auto row = out.row(o);
    for (const auto& [t, i, k] : truth) {
      if (t != row) continue;
      if (i) ls.insert(*i);
      if (k) rs.insert(*k);
    }
    res.push_back({o, {ls.begin(), ls.end()}, {rs.begin(), rs.end()}});
  }
  return res;
}

inline std::vector<Witness> normalised(std::vector<Witness> w) {
  for (auto& x : w) {
    std::sort(x.left.begin(), x.left.end());
    x.left.erase(std::unique(x.left.begin(), x.left.end()), x.left.end());
    std::sort(x.right.begin(), x.right.end());
    x.right.erase(std::unique(x.right.begin(), x.right.end()), x.right.end());
  }
  std::sort(w.begin(), w.end());
  return w;
}

// --- query oracle ------------------------------------------------------------

/// Full-scan reference implementation of the queries. Uses only the entity,
/// activity, edge and record tables of the graph, never its indexes.
class NaiveQueries {
 public:
  explicit NaiveQueries(const ProvGraph& g) : g_(g) {}

  std::vector<std::string> run(QueryId q, const QueryArgs& a) const {
    switch (q) {
      case QueryId::pq1: {
        std::vector<const Activity*> acts;
        for (const auto& x : g_.activities()) acts.push_back(&x);
        std::stable_sort(acts.begin(), acts.end(), [](auto* x, auto* y) { return x->op_seq < y->op_seq; });
        std::vector<std::string> out;
        for (auto* x : acts) out.push_back(x->id + "|");
        return out;
      }
      case QueryId::pq2: {
        auto anc = closure({resolve(need(a.row), need(a.feature), a.frontier)}, true);
        std::vector<std::string> out;
        for (const auto& id : anc) {
          auto gen = generator(id);
          if (gen && g_.activity(*gen)->cls == ActivityClass::ingestion) out.push_back(id);
        }
        return sorted(out);
      }
      case QueryId::pq3: return how(resolve(need(a.row), need(a.feature), a.frontier));
      case QueryId::pq4: return hits(filter_feature(need(a.feature)), a.frontier);
      case QueryId::pq5: return hits(filter_row(need(a.row)), a.frontier);
      case QueryId::pq6: return hits(versions(need(a.row), need(a.feature)), a.frontier);
      case QueryId::pq7:
        return earliest(scope(filter_feature(need(a.feature)), a.frontier), ActivityClass::conditional_projection);
      case QueryId::pq8: return earliest(scope(filter_row(need(a.row)), a.frontier), ActivityClass::selection);
      case QueryId::pq9: return pq9(need(a.row), need(a.feature), a.frontier);
      case QueryId::pq10: {
        std::string e = resolve(need(a.row), need(a.feature), a.frontier);
        auto up = closure({e}, true), down = closure({e}, false);
        up.insert(down.begin(), down.end());
        return {up.begin(), up.end()};
      }
      case QueryId::pq11: {
        RowId row = need(a.row);
        OpSeq k = a.frontier.value_or(final_frontier());
        std::set<std::string> start;
        for (const auto& e : g_.entities()) {
          if (e.row != row) continue;
          auto id = resolve_opt(row, e.feature, k);
          if (id) start.insert(*id);
        }
        if (start.empty()) throw ValidationError("no record");
        auto up = closure(start, true), down = closure(start, false);
        up.insert(down.begin(), down.end());
        return {up.begin(), up.end()};
      }
      case QueryId::pq12: {
        FeatureName f = need(a.feature);
        std::vector<std::string> out;
        for (const auto& [k, r] : g_.records()) {
          if (!r.cls) continue;
          const ColumnStats* pre = nullptr;
          for (const auto& in : r.inputs) {
            for (const auto& c : in.columns)
              if (c.feature == f && !pre) pre = &c;
          }
          const ColumnStats* post = nullptr;
          for (const auto& c : r.output.columns)
            if (c.feature == f) post = &c;
          if (!pre && !post) continue;
          bool named = std::count(r.features.begin(), r.features.end(), f) > 0;
          bool same = pre && post && *pre == *post;
          if (!named && same) continue;
          out.push_back(std::to_string(k) + "|" + r.function + "|" + stats_key(pre) + "|" + stats_key(post));
        }
        return out;
      }
      case QueryId::pq13: {
        std::vector<std::string> out;
        for (const auto& [k, r] : g_.records())
          if (r.cls) out.push_back(std::to_string(k) + "|" + r.function + "|" + std::to_string(r.inputs.size()));
        return out;
      }
    }
    return {};
  }

  /// The engine's answer in the same normal form.
  static std::vector<std::string> normalise(const ProvGraph& g, const QueryResult& r) {
    std::vector<std::string> out;
    switch (r.kind) {
      case ResultKind::activity_list:
        for (const auto& h : r.activities) out.push_back(h.activity->id + "|" + kinds(h.via));
        if (r.id != QueryId::pq1) std::sort(out.begin(), out.end());
        break;
      case ResultKind::entity_set:
        for (const auto* e : r.entities) out.push_back(e->id);
        std::sort(out.begin(), out.end());
        break;
      case ResultKind::subgraph:
        for (const auto& e : r.subgraph.entities) out.push_back("E " + e);
        for (const auto& a : r.subgraph.activities) out.push_back("A " + a);
        for (auto i : r.subgraph.edges) {
          const auto& e = g.edges()[i];
          out.push_back(std::string("R ") + relation_kind_name(e.kind) + " " + e.src + " " + e.tgt);
        }
        std::sort(out.begin(), out.end());
        break;
      case ResultKind::feature_spread:
        for (const auto& s : r.feature_spread) {
          out.push_back(std::to_string(s.op_seq) + "|" + s.function + "|" + stats_key(s.pre ? &*s.pre : nullptr) + "|" +
                        stats_key(s.post ? &*s.post : nullptr));
        }
        break;
      case ResultKind::dataset_spread:
        for (const auto& s : r.dataset_spread)
          out.push_back(std::to_string(s.op_seq) + "|" + s.function + "|" + std::to_string(s.pre.size()));
        break;
    }
    return out;
  }

 private:
  template <class T>
  static T need(const std::optional<T>& v) {
    if (!v) throw ValidationError("missing argument");
    return *v;
  }

  static std::string kinds(const std::set<RelationKind>& s) {
    std::string out;
    for (auto k : kAllRelationKinds)
      if (s.count(k)) out += std::string(relation_kind_name(k)) + ",";
    return out;
  }

  static std::string stats_key(const ColumnStats* c) {
    if (!c) return "-";
    std::ostringstream os;
    os << c->count << "/" << c->null_count << "/" << c->distinct_count << "/" << (c->mean ? format_number(*c->mean) : "-");
    return os.str();
  }

  static std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
  }

  OpSeq final_frontier() const {
    OpSeq k = 0;
    for (const auto& a : g_.activities()) k = std::max(k, a.op_seq);
    for (const auto& e : g_.entities()) k = std::max(k, e.op_seq);
    return k;
  }

  std::vector<const Entity*> versions(RowId row, const FeatureName& f) const {
    std::vector<const Entity*> v;
    for (const auto& e : g_.entities())
      if (e.row == row && e.feature == f) v.push_back(&e);
    std::sort(v.begin(), v.end(), [](auto* a, auto* b) { return a->op_seq < b->op_seq; });
    return v;
  }

  std::optional<std::string> resolve_opt(RowId row, const FeatureName& f, OpSeq k) const {
    std::optional<std::string> best;
    for (auto* e : versions(row, f))
      if (e->op_seq <= k) best = e->id;
    return best;
  }

  std::string resolve(RowId row, const FeatureName& f, std::optional<OpSeq> k) const {
    auto r = resolve_opt(row, f, k.value_or(final_frontier()));
    if (!r) throw ValidationError("unresolved");
    return *r;
  }

  std::vector<const Entity*> filter_feature(const FeatureName& f) const {
    std::vector<const Entity*> v;
    for (const auto& e : g_.entities())
      if (e.feature == f) v.push_back(&e);
    return v;
  }
  std::vector<const Entity*> filter_row(RowId r) const {
    std::vector<const Entity*> v;
    for (const auto& e : g_.entities())
      if (e.row == r) v.push_back(&e);
    return v;
  }

  std::optional<std::string> generator(const std::string& id) const {
    for (const auto& e : g_.edges())
      if (e.kind == RelationKind::was_generated_by && e.src == id) return e.tgt;
    return std::nullopt;
  }

  std::set<std::string> closure(std::set<std::string> s, bool up) const {
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& e : g_.edges()) {
        if (e.kind != RelationKind::was_derived_from) continue;
        const auto& from = up ? e.src : e.tgt;
        const auto& to = up ? e.tgt : e.src;
        if (s.count(from) && s.insert(to).second) grew = true;
      }
    }
    return s;
  }

  std::vector<std::string> how(const std::string& start) const {
    std::set<std::string> anc = closure({start}, true);
    std::set<std::string> ents = anc, acts, edges;
    // Rows generated by each provlet.
    std::map<std::string, std::set<RowId>> prow;
    for (const auto& e : g_.edges()) {
      if (e.kind != RelationKind::was_generated_by) continue;
      for (const auto& p : e.provlets) prow[p].insert(g_.entity(e.src)->row);
    }
    auto key = [](const Edge& e) { return std::string("R ") + relation_kind_name(e.kind) + " " + e.src + " " + e.tgt; };
    for (const auto& e : g_.edges()) {
      if (!anc.count(e.src)) continue;
      if (e.kind == RelationKind::was_derived_from) edges.insert(key(e));
      if (e.kind != RelationKind::was_generated_by) continue;
      edges.insert(key(e));
      acts.insert(e.tgt);
      std::set<std::string> scoped;
      for (const auto& p : e.provlets)
        if (prow[p].size() == 1) scoped.insert(p);
      for (const auto& u : g_.edges()) {
        if (u.kind != RelationKind::used || u.src != e.tgt) continue;
        bool in = anc.count(u.tgt) > 0;
        for (const auto& p : u.provlets) in = in || scoped.count(p);
        if (!in) continue;
        edges.insert(key(u));
        ents.insert(u.tgt);
      }
    }
    std::vector<std::string> out;
    for (const auto& e : ents) out.push_back("E " + e);
    for (const auto& a : acts) out.push_back("A " + a);
    out.insert(out.end(), edges.begin(), edges.end());
    return sorted(out);
  }

  std::vector<std::string> hits(const std::vector<const Entity*>& scope, std::optional<OpSeq> k) const {
    std::map<std::string, std::set<RelationKind>> m;
    auto ok = [&](const std::string& a) {
      const Activity* x = g_.activity(a);
      return x && (!k || x->op_seq <= *k);
    };
    for (const auto* e : scope) {
      if (k && e->op_seq > *k) continue;
      for (const auto& ed : g_.edges()) {
        if (ed.kind == RelationKind::used && ed.tgt == e->id && ok(ed.src)) m[ed.src].insert(ed.kind);
        if ((ed.kind == RelationKind::was_generated_by || ed.kind == RelationKind::was_invalidated_by) &&
            ed.src == e->id && ok(ed.tgt)) {
          m[ed.tgt].insert(ed.kind);
        }
      }
    }
    std::vector<std::string> out;
    for (const auto& [a, s] : m) out.push_back(a + "|" + kinds(s));
    return sorted(out);
  }

  std::vector<const Entity*> scope(const std::vector<const Entity*>& all, std::optional<OpSeq> k) const {
    if (!k) return all;
    std::vector<const Entity*> out;
    for (const auto* e : all) {
      if (e->op_seq > *k) continue;
      bool newest = true;
      for (const auto* o : all)
        if (o->row == e->row && o->feature == e->feature && o->op_seq <= *k && o->op_seq > e->op_seq) newest = false;
      if (newest) out.push_back(e);
    }
    return out;
  }

  std::vector<std::string> earliest(const std::vector<const Entity*>& scope, std::optional<ActivityClass> cls) const {
    const Activity* best = nullptr;
    for (const auto* e : scope) {
      for (const auto& ed : g_.edges()) {
        if (ed.kind != RelationKind::was_invalidated_by || ed.src != e->id) continue;
        const Activity* a = g_.activity(ed.tgt);
        if (cls && a->cls != *cls) continue;
        if (!best || a->op_seq < best->op_seq) best = a;
      }
    }
    if (!best) return {};
    return {best->id + "|wasInvalidatedBy,"};
  }

  std::vector<std::string> pq9(RowId row, const FeatureName& f, std::optional<OpSeq> k) const {
    auto vs = versions(row, f);
    if (vs.empty()) throw ValidationError("no versions");
    const Entity* start = k ? g_.entity(resolve(row, f, k)) : vs.front();
    const Activity* inv = nullptr;
    for (const auto& ed : g_.edges()) {
      if (ed.kind != RelationKind::was_invalidated_by || ed.src != start->id) continue;
      const Activity* a = g_.activity(ed.tgt);
      if (!inv || a->op_seq < inv->op_seq) inv = a;
    }
    const Activity* next = nullptr;
    for (const auto* v : vs) {
      if (v->op_seq <= start->op_seq) continue;
      if (auto gen = generator(v->id)) next = g_.activity(*gen);
      break;
    }
    if (inv && (!next || inv->op_seq <= next->op_seq)) return {inv->id + "|wasInvalidatedBy,"};
    if (next) return {next->id + "|wasGeneratedBy,"};
    return {};
  }

  const ProvGraph& g_;
};

// --- random generation -------------------------------------------------------

using Rng = std::mt19937_64;

inline std::size_t pick(Rng& r, std::size_t n) { return static_cast<std::size_t>(r() % n); }
inline bool coin(Rng& r, double p) { return static_cast<double>(r() >> 11) * 0x1.0p-53 < p; }

/// Small mixed-type frame: key k, numerics n1 n2, categorical s1.
inline Dataset random_frame(Rng& r, std::size_t rows, const std::string& id, bool with_s2 = false) {
  std::vector<FeatureName> schema = {"k", "n1", "n2", "s1"};
  if (with_s2) schema.push_back("s2");
  static const char* cats[] = {"a", "b", "c", "d"};
  std::vector<std::vector<Value>> data;
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<Value> row;
    row.push_back(coin(r, 0.1) ? N : Value(static_cast<double>(pick(r, 5))));
    row.push_back(coin(r, 0.2) ? N : Value(static_cast<double>(pick(r, 100))));
    row.push_back(coin(r, 0.2) ? N : Value(static_cast<double>(pick(r, 10)) / 2));
    row.push_back(coin(r, 0.15) ? N : Value(cats[pick(r, 3)]));
    if (with_s2) row.push_back(Value(cats[pick(r, 4)]));
    data.push_back(std::move(row));
  }
  return Dataset::from_rows(schema, data, id);
}

/// A captured random pipeline of unary and binary steps.
struct RandomRun {
  std::string log;
  ProvGraph graph;
  std::vector<Batch> batches;
  Dataset final_data;
  std::vector<std::string> steps;
};

inline std::vector<OperatorSpec> unary_candidates(const Dataset& d, Rng& r) {
  std::vector<OperatorSpec> c;
  auto has = [&](const char* f) { return d.has_feature(f); };
  if (has("n1")) c.push_back(SelectSpec{parse_expr("n1 > " + std::to_string(pick(r, 80)))});
  if (has("s1")) c.push_back(SelectSpec{parse_expr("s1 != 'a'")});
  if (d.cols() > 2) {
    const auto& f = d.schema()[1 + pick(r, d.cols() - 1)];
    c.push_back(ProjectSpec{FeaturePredicate::negation(FeaturePredicate::name_in({f}))});
  }
  if (has("n1") && has("n2")) {
    VaSpec v;
    v.y = {"sum" + std::to_string(d.cols())};
    v.expr = parse_expr("n1 + n2");
    if (!d.has_feature(v.y[0])) c.push_back(v);
  }
  if (has("s1") && has("n1")) c.push_back(HaSpec{{"s1"}, Aggregate::avg, "n1"});
  if (has("k") && has("n2")) c.push_back(HaSpec{{"k"}, Aggregate::max, "n2"});
  if (has("n2")) {
    TransformSpec t;
    t.fn = TransformFn::fillna_mean;
    t.x = {"n2"};
    c.push_back(t);
  }
  if (has("s1")) {
    TransformSpec t;
    t.fn = pick(r, 2) ? TransformFn::fillna_most_frequent : TransformFn::value_map;
    t.x = {"s1"};
    t.mapping = {{"a", Value("z")}, {"b", Value("y")}};
    c.push_back(t);
  }
  if (has("n1")) {
    TransformSpec t;
    t.fn = TransformFn::normalize_minmax;
    t.x = {"n1"};
    c.push_back(t);
  }
  if (has("s1") && !has("s1_a") && !has("s1_b") && !has("s1_c") && !has("s1_z") && !has("s1_y")) {
    VaSpec v;
    v.fn = VaFunction::one_hot;
    v.x = {"s1"};
    c.push_back(v);
  }
  return c;
}

/// Runs a random pipeline of at most max_steps tracked steps while keeping
/// every frame at or below max_cells cells.
inline RandomRun random_pipeline(std::uint64_t seed, std::size_t max_steps = 6, std::size_t max_cells = 1000) {
  Rng r(seed);
  Recorder rec;
  std::size_t rows = 3 + pick(r, 25);
  Frame cur = rec.tracker.subscribe(random_frame(r, rows, "src"));
  Frame other = rec.tracker.subscribe(random_frame(r, 2 + pick(r, 12), "aux"));
  RandomRun out;
  std::size_t steps = 1 + pick(r, max_steps);
  for (std::size_t s = 0, attempts = 0; s < steps && attempts < 50; ++attempts) {
    const Dataset& d = cur.data();
    bool binary = coin(r, 0.2) && d.has_feature("k");
    OperatorSpec spec;
    std::vector<Frame> in = {cur};
    if (binary) {
      if (coin(r, 0.5)) {
        static const JoinType types[] = {JoinType::inner, JoinType::left, JoinType::right, JoinType::full};
        spec = JoinSpec{types[pick(r, 4)], {{"k", "k"}}};
      } else {
        spec = AppendSpec{};
      }
      in.push_back(other);
      Dataset probe;
      try {
        probe = apply_operator(spec, {&d, &other.data()}).data;
      } catch (const Error&) {
        continue;
      }
      if (probe.rows() * probe.cols() > max_cells || probe.rows() == 0) continue;
    } else {
      auto cands = unary_candidates(d, r);
      if (cands.empty()) break;
      spec = cands[pick(r, cands.size())];
      Dataset probe;
      try {
        probe = apply_operator(spec, {&d}).data;
      } catch (const Error&) {
        continue;
      }
      if (probe.rows() * probe.cols() > max_cells || probe.rows() == 0) continue;
    }
    cur = rec.tracker.apply(spec, in);
    out.steps.push_back(describe(spec));
    ++s;
  }
  out.final_data = cur.data();
  out.batches = rec.batches;
  out.log = rec.log();
  std::istringstream is(out.log);
  out.graph = build_graph(read_log(is));
  return out;
}

/// Random expression text over n1, n2, s1.
inline std::string random_expr(Rng& r, int depth = 0) {
  auto leaf = [&]() -> std::string {
    switch (pick(r, 7)) {
      case 0: return "n1";
      case 1: return "n2";
      case 2: return std::to_string(pick(r, 50));
      case 3: return "'" + std::string(1, static_cast<char>('a' + pick(r, 3))) + "'";
      case 4: return "s1";
      case 5: return "null";
      default: return pick(r, 2) ? "true" : "false";
    }
  };
  if (depth > 3 || coin(r, 0.3)) return leaf();
  // Operands are parenthesized wherever the grammar needs it; 'and' and
  // 'not' stay bare so their precedence is exercised.
  auto sub = [&] { return "(" + random_expr(r, depth + 1) + ")"; };
  switch (pick(r, 9)) {
    case 0: return sub() + " + " + sub();
    case 1: return sub() + " * " + sub();
    case 2: return sub() + " < " + sub();
    case 3: return sub() + " == " + sub();
    case 4: return random_expr(r, depth + 1) + " and " + random_expr(r, depth + 1);
    case 5: return "not " + random_expr(r, depth + 1);
    case 6: return sub() + " is null";
    case 7: return "abs(" + random_expr(r, depth + 1) + ")";
    default: return "-" + sub();
  }
}

// --- credit-scoring shaped pipeline -----------------------------------------

struct CategoricalSpec {
  const char* name;
  int domain;
};

// Thirteen coded categorical attributes; personal_status is later split.
inline const std::vector<CategoricalSpec>& credit_categoricals() {
  static const std::vector<CategoricalSpec> c = {
      {"checking_status", 4},   {"credit_history", 5}, {"purpose", 10},          {"savings_status", 5},
      {"employment", 5},        {"personal_status", 4}, {"other_parties", 3},    {"property_magnitude", 4},
      {"other_payment_plans", 3}, {"housing", 3},      {"job", 4},               {"own_telephone", 2},
      {"foreign_worker", 2}};
  return c;
}

inline const std::vector<std::string>& credit_numerics() {
  static const std::vector<std::string> n = {"duration", "credit_amount", "installment_commitment", "residence_since",
                                             "age", "existing_credits", "num_dependents", "class"};
  return n;
}

// Readable terms for personal_status splitting into sex and marital status
// with three marital values.
inline const char* kPersonalTerms[] = {"male:divorced", "female:married", "male:single", "male:married"};

inline std::string credit_code(std::size_t attr, int v) { return "A" + std::to_string(attr + 1) + std::to_string(v); }

inline Dataset credit_frame(std::size_t rows = 1000, std::uint64_t seed = 11) {
  Rng r(seed);
  std::vector<FeatureName> schema;
  for (const auto& c : credit_categoricals()) schema.push_back(c.name);
  for (const auto& n : credit_numerics()) schema.push_back(n);
  std::vector<std::vector<Value>> data;
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<Value> row;
    for (std::size_t a = 0; a < credit_categoricals().size(); ++a) {
      int dom = credit_categoricals()[a].domain;
      int v = i < static_cast<std::size_t>(dom) ? static_cast<int>(i) : static_cast<int>(pick(r, dom));
      row.push_back(Value(credit_code(a, v)));
    }
    row.push_back(Value(static_cast<double>(4 + pick(r, 68))));
    row.push_back(Value(static_cast<double>(250 + pick(r, 18000))));
    row.push_back(Value(static_cast<double>(1 + pick(r, 4))));
    row.push_back(Value(static_cast<double>(1 + pick(r, 4))));
    row.push_back(Value(static_cast<double>(19 + pick(r, 56))));
    row.push_back(Value(static_cast<double>(1 + pick(r, 4))));
    row.push_back(Value(static_cast<double>(1 + pick(r, 2))));
    row.push_back(Value(static_cast<double>(1 + pick(r, 2))));
    data.push_back(std::move(row));
  }
  return Dataset::from_rows(schema, data, "credit");
}

/// Step list: 13 code-to-term maps, a split of personal_status, its removal,
/// then one-hot encoding of 11 categorical columns (augment then drop each).
inline std::vector<OperatorSpec> credit_steps() {
  std::vector<OperatorSpec> steps;
  const auto& cats = credit_categoricals();
  for (std::size_t a = 0; a < cats.size(); ++a) {
    TransformSpec t;
    t.fn = TransformFn::value_map;
    t.x = {cats[a].name};
    for (int v = 0; v < cats[a].domain; ++v) {
      std::string term = std::string(cats[a].name) == "personal_status" ? kPersonalTerms[v]
                                                                        : "v" + std::to_string(v);
      t.mapping.emplace_back(credit_code(a, v), Value(term));
    }
    steps.push_back(t);
  }
  VaSpec split;
  split.fn = VaFunction::split;
  split.x = {"personal_status"};
  split.y = {"sex", "marital_status"};
  split.sep = ":";
  steps.push_back(split);
  steps.push_back(ProjectSpec{FeaturePredicate::negation(FeaturePredicate::name_in({"personal_status"}))});
  const char* encoded[] = {"checking_status", "credit_history",      "purpose", "savings_status",
                           "employment",      "other_parties",       "property_magnitude",
                           "other_payment_plans", "housing",         "job",     "marital_status"};
  for (const char* f : encoded) {
    VaSpec oh;
    oh.fn = VaFunction::one_hot;
    oh.x = {f};
    steps.push_back(oh);
    steps.push_back(ProjectSpec{FeaturePredicate::negation(FeaturePredicate::name_in({f}))});
  }
  return steps;
}

// --- classification cases ----------------------------------------------------

/// A before/after pair with the template family expected from the operator
/// that produced it. `ambiguous` marks steps that change rows and columns.
struct ClassifyCase {
  Dataset before, after;
  TemplateFamily expected = TemplateFamily::none;
  bool ambiguous = false;
  std::string what;
};

inline std::size_t null_count(const Column& c) {
  return static_cast<std::size_t>(std::count_if(c.begin(), c.end(), [](const Value& v) { return v.is_null(); }));
}

inline TemplateFamily family_for(const OperatorSpec& spec, const Dataset& before, const Dataset& after) {
  switch (kind_of(spec)) {
    case OpKind::select: return after.rows() < before.rows() ? TemplateFamily::selection : TemplateFamily::none;
    case OpKind::project: return TemplateFamily::projection;
    case OpKind::vaugment:
      return after.cols() > before.cols() ? TemplateFamily::vertical_augmentation : TemplateFamily::none;
    case OpKind::haugment:
      return after.rows() > before.rows() ? TemplateFamily::horizontal_augmentation : TemplateFamily::none;
    case OpKind::transform: {
      const auto& f = std::get<TransformSpec>(spec).x[0];
      const Column &b = before.column(f), &a = after.column(f);
      if (null_count(a) < null_count(b)) return TemplateFamily::imputation;
      return b == a ? TemplateFamily::none : TemplateFamily::transformation;
    }
    default: return TemplateFamily::none;
  }
}

inline ClassifyCase classify_case(Rng& r) {
  ClassifyCase c;
  c.before = random_frame(r, 2 + pick(r, 15), "src");
  RowIdAllocator alloc;
  alloc.reserve_through(c.before.next_row_id());
  if (coin(r, 0.15)) {
    // selection and projection observed as one step
    auto sel = select(c.before, parse_expr("n1 > " + std::to_string(pick(r, 60))));
    const auto& f = c.before.schema()[1 + pick(r, 3)];
    c.after = drop_features(sel, {f});
    c.ambiguous = sel.rows() < c.before.rows();
    c.expected = c.ambiguous ? TemplateFamily::none : TemplateFamily::projection;
    c.what = "select+drop " + f;
    return c;
  }
  if (coin(r, 0.1)) {
    // rows removed and rows appended in one step
    auto sel = select(c.before, parse_expr("s1 != 'a'"));
    auto ha = haugment(sel, HaSpec{{"k"}, Aggregate::max, "n2"}, &alloc);
    c.after = ha.data;
    bool dropped = sel.rows() < c.before.rows(), added = !ha.groups.empty();
    c.ambiguous = dropped && added;
    c.expected = c.ambiguous ? TemplateFamily::none
                 : dropped   ? TemplateFamily::selection
                 : added     ? TemplateFamily::horizontal_augmentation
                             : TemplateFamily::none;
    c.what = "select+haugment";
    return c;
  }
  auto cands = unary_candidates(c.before, r);
  while (true) {
    const auto& spec = cands[pick(r, cands.size())];
    try {
      c.after = apply_operator(spec, {&c.before}, &alloc).data;
    } catch (const Error&) {
      continue;
    }
    c.expected = family_for(spec, c.before, c.after);
    c.what = describe(spec);
    return c;
  }
}

// --- join cases --------------------------------------------------------------

struct JoinCase {
  Dataset l, r, out;
  JoinSpec spec;
};

/// Join operands with duplicate keys, null keys and exact duplicate rows; at
/// most max_rows rows per side before the optional duplicate.
inline JoinCase join_case(Rng& r, std::size_t max_rows = 12) {
  JoinCase c;
  static const JoinType types[] = {JoinType::inner, JoinType::left, JoinType::right, JoinType::full};
  c.spec.type = types[pick(r, 4)];
  c.l = random_frame(r, 1 + pick(r, max_rows), "l");
  auto rr = random_frame(r, 1 + pick(r, max_rows), "r");
  if (coin(r, 0.3)) {
    // duplicate a row of each operand
    auto dup = [&](const Dataset& d) {
      auto rows = rows_of(d);
      rows.push_back(rows[pick(r, rows.size())]);
      return Dataset::from_rows(d.schema(), rows, d.id());
    };
    c.l = dup(c.l);
    rr = dup(rr);
  }
  switch (pick(r, 3)) {
    case 0: c.spec.keys = {{"k", "k"}}; break;
    case 1: c.spec.keys = {{"k", "k"}, {"s1", "s1"}}; break;
    default: {
      // differently named key on the right
      auto rows = rows_of(rr);
      rr = Dataset::from_rows({"rk", "n1", "x2", "s1"}, rows, "r");
      c.spec.keys = {{"k", "rk"}};
    }
  }
  c.r = rr;
  c.out = join(c.l, c.r, c.spec);
  return c;
}

}  // namespace pt_test
