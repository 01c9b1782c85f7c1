#pragma once

// PROV subset (entities, activities, four relation kinds) and the template
// instantiators that turn an observed step into provlets.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "provtrack/dataset.hpp"
#include "provtrack/error.hpp"
#include "provtrack/operators.hpp"

namespace provtrack {

using OpSeq = std::uint64_t;

enum class ActivityClass : std::uint8_t {
  ingestion,
  selection,
  conditional_projection,
  vertical_augmentation,
  horizontal_augmentation,
  transformation,
  imputation,
  join,
  append,
  coarse
};

inline constexpr ActivityClass kAllActivityClasses[] = {
    ActivityClass::ingestion,      ActivityClass::selection,  ActivityClass::conditional_projection,
    ActivityClass::vertical_augmentation, ActivityClass::horizontal_augmentation, ActivityClass::transformation,
    ActivityClass::imputation,     ActivityClass::join,       ActivityClass::append,
    ActivityClass::coarse};

inline const char* activity_class_name(ActivityClass c) {
  switch (c) {
    case ActivityClass::ingestion: return "Ingestion";
    case ActivityClass::selection: return "Selection";
    case ActivityClass::conditional_projection: return "ConditionalProjection";
    case ActivityClass::vertical_augmentation: return "VerticalAugmentation";
    case ActivityClass::horizontal_augmentation: return "HorizontalAugmentation";
    case ActivityClass::transformation: return "Transformation";
    case ActivityClass::imputation: return "Imputation";
    case ActivityClass::join: return "Join";
    case ActivityClass::append: return "Append";
    case ActivityClass::coarse: return "Coarse";
  }
  return "?";
}

inline ActivityClass parse_activity_class(std::string_view s) {
  for (auto c : kAllActivityClasses) {
    if (s == activity_class_name(c)) return c;
  }
  throw IntegrityError("unknown activity class '" + std::string(s) + "'");
}

enum class RelationKind : std::uint8_t { used, was_generated_by, was_derived_from, was_invalidated_by };

inline constexpr RelationKind kAllRelationKinds[] = {RelationKind::used, RelationKind::was_generated_by,
                                                     RelationKind::was_derived_from, RelationKind::was_invalidated_by};

inline const char* relation_kind_name(RelationKind k) {
  switch (k) {
    case RelationKind::used: return "used";
    case RelationKind::was_generated_by: return "wasGeneratedBy";
    case RelationKind::was_derived_from: return "wasDerivedFrom";
    case RelationKind::was_invalidated_by: return "wasInvalidatedBy";
  }
  return "?";
}

inline RelationKind parse_relation_kind(std::string_view s) {
  for (auto k : kAllRelationKinds) {
    if (s == relation_kind_name(k)) return k;
  }
  throw IntegrityError("unknown relation kind '" + std::string(s) + "'");
}

inline std::string make_entity_id(OpSeq k, RowId row, std::string_view feature) {
  std::string id = "e:";
  id += std::to_string(k);
  id += ':';
  id += std::to_string(row);
  id += ':';
  id += feature;
  return id;
}

inline std::string make_activity_id(OpSeq k) { return "a:" + std::to_string(k); }

struct EntityKey {
  OpSeq op_seq = 0;
  RowId row = 0;
  FeatureName feature;
};

inline std::optional<EntityKey> parse_entity_id(std::string_view id) {
  if (id.substr(0, 2) != "e:") return std::nullopt;
  id.remove_prefix(2);
  auto c1 = id.find(':');
  if (c1 == std::string_view::npos) return std::nullopt;
  auto c2 = id.find(':', c1 + 1);
  if (c2 == std::string_view::npos) return std::nullopt;
  auto k = parse_number(id.substr(0, c1)), r = parse_number(id.substr(c1 + 1, c2 - c1 - 1));
  if (!k || !r || *k < 0 || *r < 0) return std::nullopt;
  return EntityKey{static_cast<OpSeq>(*k), static_cast<RowId>(*r), std::string(id.substr(c2 + 1))};
}

struct Entity {
  std::string id;
  OpSeq op_seq = 0;
  RowId row = 0;
  FeatureName feature;
  Value value;

  bool operator==(const Entity&) const = default;
};

inline Entity make_entity(OpSeq k, RowId row, const FeatureName& feature, Value v) {
  return Entity{make_entity_id(k, row, feature), k, row, feature, std::move(v)};
}

struct Activity {
  std::string id;
  OpSeq op_seq = 0;
  ActivityClass cls = ActivityClass::transformation;
  std::string function;
  std::vector<FeatureName> features;

  bool operator==(const Activity&) const = default;
};

inline Activity make_activity(OpSeq k, ActivityClass cls, std::string function, std::vector<FeatureName> features) {
  return Activity{make_activity_id(k), k, cls, std::move(function), std::move(features)};
}

struct Relation {
  RelationKind kind = RelationKind::used;
  std::string src;
  std::string tgt;

  auto operator<=>(const Relation&) const = default;
  bool operator==(const Relation&) const = default;
};

/// One template instantiation. entities holds only the versions it creates;
/// relations may also name entities emitted earlier.
struct Provlet {
  std::string activity;
  std::vector<Entity> entities;
  std::vector<Relation> relations;

  bool empty() const { return entities.empty() && relations.empty(); }
};

using VersionColumn = std::vector<OpSeq>;
using VersionPtr = std::shared_ptr<const VersionColumn>;

/// A dataset paired with, per cell, the op_seq of the entity that currently
/// represents it.
struct VersionedFrame {
  Dataset data;
  std::vector<VersionPtr> versions;  // aligned with data columns

  OpSeq version(std::size_t row, std::size_t col) const { return (*versions[col])[row]; }
  std::string entity_id(std::size_t row, std::size_t col) const {
    return make_entity_id(version(row, col), data.row_ids()[row], data.schema()[col]);
  }

  static VersionedFrame uniform(Dataset d, OpSeq k) {
    VersionedFrame f;
    auto col = std::make_shared<const VersionColumn>(d.rows(), k);
    f.versions.assign(d.cols(), col);
    f.data = std::move(d);
    return f;
  }
};

namespace detail {

struct ProvletBuilder {
  Provlet p;
  std::string act;

  explicit ProvletBuilder(std::string activity) : act(std::move(activity)) { p.activity = act; }

  const std::string& generate(OpSeq k, RowId row, const FeatureName& f, const Value& v) {
    p.entities.push_back(make_entity(k, row, f, v));
    p.relations.push_back({RelationKind::was_generated_by, p.entities.back().id, act});
    return p.entities.back().id;
  }
  void use(const std::string& e) { p.relations.push_back({RelationKind::used, act, e}); }
  void use_by(const std::string& activity, const std::string& e) { p.relations.push_back({RelationKind::used, activity, e}); }
  void derive(const std::string& generated, const std::string& used) {
    p.relations.push_back({RelationKind::was_derived_from, generated, used});
  }
  void invalidate(const std::string& e) { p.relations.push_back({RelationKind::was_invalidated_by, e, act}); }
  void invalidate_by(const std::string& e, const std::string& activity) {
    p.relations.push_back({RelationKind::was_invalidated_by, e, activity});
  }
};

inline void push_nonempty(std::vector<Provlet>& out, ProvletBuilder&& b) {
  if (!b.p.empty()) out.push_back(std::move(b.p));
}

}  // namespace detail

/// Every cell of a new source dataset, generation only.
inline std::vector<Provlet> gen_ingestion_provlets(const Dataset& d, OpSeq k) {
  detail::ProvletBuilder b(make_activity_id(k));
  b.p.entities.reserve(d.rows() * d.cols());
  b.p.relations.reserve(d.rows() * d.cols());
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.cols(); ++j) b.generate(k, d.row_ids()[i], d.schema()[j], d.at(i, j));
  }
  std::vector<Provlet> out;
  detail::push_nonempty(out, std::move(b));
  return out;
}

inline std::vector<Provlet> gen_selection_provlets(const VersionedFrame& before, const std::vector<RowId>& dropped, OpSeq k) {
  detail::ProvletBuilder b(make_activity_id(k));
  for (RowId r : dropped) {
    auto i = before.data.position_of(r);
    if (!i) throw DataError("dropped row " + std::to_string(r) + " not in input");
    for (std::size_t j = 0; j < before.data.cols(); ++j) b.invalidate(before.entity_id(*i, j));
  }
  std::vector<Provlet> out;
  detail::push_nonempty(out, std::move(b));
  return out;
}

inline std::vector<Provlet> gen_projection_provlets(const VersionedFrame& before, const std::vector<FeatureName>& dropped,
                                                    OpSeq k) {
  detail::ProvletBuilder b(make_activity_id(k));
  for (const auto& f : dropped) {
    std::size_t j = before.data.require_feature(f);
    for (std::size_t i = 0; i < before.data.rows(); ++i) b.invalidate(before.entity_id(i, j));
  }
  std::vector<Provlet> out;
  detail::push_nonempty(out, std::move(b));
  return out;
}

/// One provlet per row: the row's x cells are used, its y cells generated and
/// derived from every x cell of the same row.
inline std::vector<Provlet> gen_va_provlets(const VersionedFrame& before, const Dataset& after,
                                            const std::vector<FeatureName>& x, const std::vector<FeatureName>& y,
                                            OpSeq k) {
  std::vector<std::size_t> xi, yi;
  for (const auto& f : x) xi.push_back(before.data.require_feature(f));
  for (const auto& f : y) yi.push_back(after.require_feature(f));
  std::vector<Provlet> out;
  out.reserve(after.rows());
  for (std::size_t i = 0; i < after.rows(); ++i) {
    RowId r = after.row_ids()[i];
    auto bi = before.data.position_of(r);
    detail::ProvletBuilder b(make_activity_id(k));
    std::vector<std::string> used;
    if (bi) {
      for (auto j : xi) used.push_back(before.entity_id(*bi, j));
    }
    for (const auto& u : used) b.use(u);
    for (std::size_t n = 0; n < yi.size(); ++n) {
      std::string g = b.generate(k, r, y[n], after.at(i, yi[n]));
      for (const auto& u : used) b.derive(g, u);
    }
    detail::push_nonempty(out, std::move(b));
  }
  return out;
}

/// One provlet per emitted group row. Key and target cells derive from the
/// same-feature cells of every ginput row; all other cells are generated only.
inline std::vector<Provlet> gen_ha_provlets(const VersionedFrame& before, const Dataset& after, const GroupMapping& groups,
                                            const std::vector<FeatureName>& x, const std::vector<FeatureName>& y,
                                            OpSeq k) {
  std::set<FeatureName> derived(x.begin(), x.end());
  derived.insert(y.begin(), y.end());
  std::vector<Provlet> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    auto oi = after.position_of(g.row);
    if (!oi) throw DataError("group row " + std::to_string(g.row) + " not in output");
    std::vector<std::size_t> inputs;
    for (RowId r : g.ginput) {
      auto p = before.data.position_of(r);
      if (!p) throw DataError("group input row " + std::to_string(r) + " not in input");
      inputs.push_back(*p);
    }
    detail::ProvletBuilder b(make_activity_id(k));
    for (std::size_t j = 0; j < after.cols(); ++j) {
      const auto& f = after.schema()[j];
      std::string gen = b.generate(k, g.row, f, after.at(*oi, j));
      if (!derived.count(f)) continue;
      std::size_t bj = before.data.require_feature(f);
      for (auto p : inputs) {
        std::string u = before.entity_id(p, bj);
        b.use(u);
        b.derive(gen, u);
      }
    }
    out.push_back(std::move(b.p));
  }
  return out;
}

struct CellRef {
  RowId row = 0;
  FeatureName feature;
  auto operator<=>(const CellRef&) const = default;
};

/// One provlet per changed cell, derived from its previous version.
inline std::vector<Provlet> gen_transform_one_to_one(const VersionedFrame& before, const Dataset& after,
                                                     const std::vector<CellRef>& changed, OpSeq k) {
  std::vector<Provlet> out;
  out.reserve(changed.size());
  for (const auto& c : changed) {
    auto bi = before.data.position_of(c.row);
    auto ai = after.position_of(c.row);
    if (!bi || !ai) throw DataError("changed cell row " + std::to_string(c.row) + " missing");
    detail::ProvletBuilder b(make_activity_id(k));
    std::string u = before.entity_id(*bi, before.data.require_feature(c.feature));
    b.use(u);
    b.derive(b.generate(k, c.row, c.feature, after.at(*ai, after.require_feature(c.feature))), u);
    out.push_back(std::move(b.p));
  }
  return out;
}

/// One provlet for the column: every changed cell derives from all cells of
/// the column before the step.
inline std::vector<Provlet> gen_transform_column_wide(const VersionedFrame& before, const Dataset& after,
                                                      const FeatureName& feature, const std::vector<RowId>& changed,
                                                      OpSeq k) {
  if (changed.empty()) return {};
  std::size_t bj = before.data.require_feature(feature), aj = after.require_feature(feature);
  detail::ProvletBuilder b(make_activity_id(k));
  std::vector<std::string> used;
  used.reserve(before.data.rows());
  for (std::size_t i = 0; i < before.data.rows(); ++i) used.push_back(before.entity_id(i, bj));
  for (const auto& u : used) b.use(u);
  for (RowId r : changed) {
    auto ai = after.position_of(r);
    if (!ai) throw DataError("changed cell row " + std::to_string(r) + " missing");
    std::string g = b.generate(k, r, feature, after.at(*ai, aj));
    for (const auto& u : used) b.derive(g, u);
  }
  std::vector<Provlet> out;
  out.push_back(std::move(b.p));
  return out;
}

/// An output row of a join or append and the operand rows it came from.
/// Several candidates per side arise when operands hold duplicate rows.
struct Witness {
  std::size_t out = 0;               // output position
  std::vector<std::size_t> left;     // left operand positions
  std::vector<std::size_t> right;    // right operand positions
  auto operator<=>(const Witness&) const = default;
  bool operator==(const Witness&) const = default;
};

/// Per output row: all key cells of the witness rows are used; every output
/// cell is generated; a cell copied from an operand derives from that
/// operand's cell (coalesced keys from the left when it is present).
inline std::vector<Provlet> gen_join_provlets(const VersionedFrame& l, const VersionedFrame& r, const Dataset& out,
                                              const JoinLayout& lay, const std::vector<Witness>& witnesses, OpSeq k) {
  std::vector<Provlet> res;
  res.reserve(witnesses.size());
  for (const auto& w : witnesses) {
    detail::ProvletBuilder b(make_activity_id(k));
    for (auto li : w.left) {
      for (const auto& [kl, kr] : lay.keys) b.use(l.entity_id(li, kl));
    }
    for (auto ri : w.right) {
      for (const auto& [kl, kr] : lay.keys) b.use(r.entity_id(ri, kr));
    }
    RowId row = out.row_ids()[w.out];
    for (std::size_t j = 0; j < lay.cols.size(); ++j) {
      const auto& c = lay.cols[j];
      std::string g = b.generate(k, row, c.name, out.at(w.out, j));
      if (c.left && !w.left.empty()) {
        for (auto li : w.left) {
          std::string u = l.entity_id(li, *c.left);
          b.use(u);
          b.derive(g, u);
        }
      } else if (c.right && !w.right.empty()) {
        for (auto ri : w.right) {
          std::string u = r.entity_id(ri, *c.right);
          b.use(u);
          b.derive(g, u);
        }
      }
    }
    // Key cells may now appear twice among the used edges; keep one.
    std::sort(b.p.relations.begin(), b.p.relations.end());
    b.p.relations.erase(std::unique(b.p.relations.begin(), b.p.relations.end()), b.p.relations.end());
    res.push_back(std::move(b.p));
  }
  return res;
}

/// Per output row: cells whose feature exists in the contributing operand
/// derive from it; the other cells are Null and generated only.
inline std::vector<Provlet> gen_append_provlets(const VersionedFrame& l, const VersionedFrame& r, const Dataset& out, OpSeq k) {
  if (out.rows() != l.data.rows() + r.data.rows()) throw DataError("append output length mismatch");
  std::vector<std::optional<std::size_t>> lmap, rmap;
  for (const auto& f : out.schema()) {
    lmap.push_back(l.data.feature_index(f));
    rmap.push_back(r.data.feature_index(f));
  }
  std::vector<Provlet> res;
  res.reserve(out.rows());
  const std::size_t nl = l.data.rows();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    detail::ProvletBuilder b(make_activity_id(k));
    RowId row = out.row_ids()[i];
    for (std::size_t j = 0; j < out.cols(); ++j) {
      std::string g = b.generate(k, row, out.schema()[j], out.at(i, j));
      const auto& src = i < nl ? lmap[j] : rmap[j];
      if (!src) continue;
      std::string u = i < nl ? l.entity_id(i, *src) : r.entity_id(i - nl, *src);
      b.use(u);
      b.derive(g, u);
    }
    res.push_back(std::move(b.p));
  }
  return res;
}

/// Attribution of each added feature to the dropped features it encodes: the
/// dropped feature with the longest name that prefixes it, or every dropped
/// feature when none does.
inline std::map<FeatureName, std::vector<FeatureName>> attribute_new_features(const std::vector<FeatureName>& added,
                                                                             const std::vector<FeatureName>& dropped) {
  std::map<FeatureName, std::vector<FeatureName>> out;
  for (const auto& a : added) {
    const FeatureName* best = nullptr;
    for (const auto& d : dropped) {
      if (a.size() > d.size() && a.compare(0, d.size(), d) == 0 && (!best || d.size() > best->size())) best = &d;
    }
    out[a] = best ? std::vector<FeatureName>{*best} : dropped;
  }
  return out;
}

struct CompositeInput {
  const VersionedFrame* before = nullptr;  // frame holding the dropped source features
  const Dataset* added = nullptr;          // frame holding the new features (rows aligned by id)
  std::vector<FeatureName> sources;        // dropped features
  std::vector<FeatureName> new_features;
  OpSeq va_seq = 0;      // activity that generated the new features
  OpSeq proj_seq = 0;    // activity that drops the sources
  bool generate = true;  // false when the new-feature entities were emitted by an earlier step
  // (new feature, source feature) pairs whose derivations already exist.
  std::set<std::pair<FeatureName, FeatureName>> already_derived;
};

/// A single provlet joining the augmentation and the projection of a composite
/// step: the augmentation used the source cells, each new cell derives from the
/// source cells of its row, and the sources are invalidated by the projection.
inline std::vector<Provlet> gen_composite_onehot_provlets(const CompositeInput& in) {
  const VersionedFrame& before = *in.before;
  const Dataset& added = *in.added;
  const std::string va = make_activity_id(in.va_seq), proj = make_activity_id(in.proj_seq);
  detail::ProvletBuilder b(va);
  auto attribution = attribute_new_features(in.new_features, in.sources);
  std::vector<std::size_t> src_idx;
  for (const auto& s : in.sources) src_idx.push_back(before.data.require_feature(s));
  std::vector<std::size_t> new_idx;
  for (const auto& f : in.new_features) new_idx.push_back(added.require_feature(f));

  for (std::size_t i = 0; i < added.rows(); ++i) {
    RowId row = added.row_ids()[i];
    auto bi = before.data.position_of(row);
    std::set<std::string> used_here;
    for (std::size_t n = 0; n < in.new_features.size(); ++n) {
      const auto& f = in.new_features[n];
      std::string g;
      if (in.generate) {
        g = b.generate(in.va_seq, row, f, added.at(i, new_idx[n]));
      } else if (bi) {
        g = before.entity_id(*bi, before.data.require_feature(f));
      }
      if (!bi) continue;
      for (const auto& s : attribution[f]) {
        if (in.already_derived.count({f, s})) continue;
        std::string u = before.entity_id(*bi, before.data.require_feature(s));
        if (used_here.insert(u).second) b.use(u);
        b.derive(g, u);
      }
    }
  }
  for (auto j : src_idx) {
    for (std::size_t i = 0; i < before.data.rows(); ++i) b.invalidate_by(before.entity_id(i, j), proj);
  }
  std::vector<Provlet> out;
  detail::push_nonempty(out, std::move(b));
  return out;
}

/// Fallback when a step changes rows and columns together: the activity used
/// every cell that disappeared and generated every new or changed cell.
inline std::vector<Provlet> gen_coarse_provlets(const VersionedFrame& before, const Dataset& after,
                                                const std::vector<CellRef>& generated, OpSeq k) {
  detail::ProvletBuilder b(make_activity_id(k));
  std::set<CellRef> after_cells;
  for (std::size_t j = 0; j < before.data.cols(); ++j) {
    const auto& f = before.data.schema()[j];
    auto aj = after.feature_index(f);
    for (std::size_t i = 0; i < before.data.rows(); ++i) {
      if (!aj || !after.position_of(before.data.row_ids()[i])) b.use(before.entity_id(i, j));
    }
  }
  for (const auto& c : generated) {
    auto ai = after.position_of(c.row);
    if (!ai) throw DataError("generated cell row " + std::to_string(c.row) + " missing");
    b.generate(k, c.row, c.feature, after.at(*ai, after.require_feature(c.feature)));
  }
  std::vector<Provlet> out;
  detail::push_nonempty(out, std::move(b));
  return out;
}

/// Shape and per-feature statistics of one frame.
struct FrameStats {
  std::string dataset_id;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<ColumnStats> columns;

  const ColumnStats* find(std::string_view feature) const {
    for (const auto& c : columns) {
      if (c.feature == feature) return &c;
    }
    return nullptr;
  }
  bool operator==(const FrameStats&) const = default;
};

inline FrameStats frame_stats(const Dataset& d) { return FrameStats{d.id(), d.rows(), d.cols(), all_column_stats(d)}; }

/// Per-step metadata. cls is empty for a step that changed nothing.
struct OpRecord {
  OpSeq op_seq = 0;
  std::optional<ActivityClass> cls;
  std::string function;
  std::vector<FeatureName> features;
  std::vector<FrameStats> inputs;
  FrameStats output;

  bool operator==(const OpRecord&) const = default;
};

/// Everything one observed step emits: written to the log as one batch.
struct Batch {
  std::vector<Activity> activities;
  std::vector<Provlet> provlets;
  std::vector<OpRecord> records;

  bool empty() const { return activities.empty() && provlets.empty() && records.empty(); }
};

}  // namespace provtrack
