#pragma once

// Change-based provenance capture. The tracker never looks inside an operator:
// it diffs the frame before a step against the frame after it, picks a
// template family from the shape and value changes, and instantiates it.

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "provtrack/dataset.hpp"
#include "provtrack/error.hpp"
#include "provtrack/operators.hpp"
#include "provtrack/parallel.hpp"
#include "provtrack/prov_model.hpp"

namespace provtrack {

struct ShapeChange {
  std::int64_t dn_rows = 0;
  std::int64_t dn_cols = 0;
  std::vector<FeatureName> added_features;    // after-schema order
  std::vector<FeatureName> dropped_features;  // before-schema order
  std::vector<RowId> added_row_ids;           // after order
  std::vector<RowId> dropped_row_ids;         // before order

  bool rows_changed() const { return !added_row_ids.empty() || !dropped_row_ids.empty(); }
  bool cols_changed() const { return !added_features.empty() || !dropped_features.empty(); }
  bool empty() const { return !rows_changed() && !cols_changed(); }
};

struct CellChange {
  RowId row = 0;
  Value old_value;
  Value new_value;
  bool operator==(const CellChange&) const = default;
};

struct ColumnChange {
  FeatureName feature;
  std::vector<CellChange> cells;  // after row order
  std::int64_t null_delta = 0;    // nulls after minus nulls before, over surviving rows
};

struct ValueChange {
  std::vector<ColumnChange> columns;  // only features with at least one changed cell, after-schema order

  bool empty() const { return columns.empty(); }
  std::size_t cell_count() const {
    std::size_t n = 0;
    for (const auto& c : columns) n += c.cells.size();
    return n;
  }
  const ColumnChange* find(std::string_view f) const {
    for (const auto& c : columns) {
      if (c.feature == f) return &c;
    }
    return nullptr;
  }
};

struct Diff {
  ShapeChange shape;
  ValueChange values;
};

/// Row diff by row-id set difference; value diff cell by cell over surviving
/// rows and shared features.
inline Diff diff(const Dataset& before, const Dataset& after, unsigned workers = 1) {
  Diff out;
  auto& sh = out.shape;
  sh.dn_rows = static_cast<std::int64_t>(after.rows()) - static_cast<std::int64_t>(before.rows());
  sh.dn_cols = static_cast<std::int64_t>(after.cols()) - static_cast<std::int64_t>(before.cols());
  for (const auto& f : after.schema()) {
    if (!before.has_feature(f)) sh.added_features.push_back(f);
  }
  for (const auto& f : before.schema()) {
    if (!after.has_feature(f)) sh.dropped_features.push_back(f);
  }

  const bool same_ids = std::equal(before.row_ids().begin(), before.row_ids().end(), after.row_ids().begin(),
                                   after.row_ids().end());
  // Position in `before` of each after row, or npos for a new row.
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> bpos;
  if (!same_ids) {
    bpos.resize(after.rows());
    for (std::size_t i = 0; i < after.rows(); ++i) {
      auto p = before.position_of(after.row_ids()[i]);
      bpos[i] = p ? *p : npos;
      if (!p) sh.added_row_ids.push_back(after.row_ids()[i]);
    }
    for (std::size_t i = 0; i < before.rows(); ++i) {
      if (!after.position_of(before.row_ids()[i])) sh.dropped_row_ids.push_back(before.row_ids()[i]);
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> shared;  // (before col, after col)
  for (std::size_t j = 0; j < after.cols(); ++j) {
    if (auto bj = before.feature_index(after.schema()[j])) shared.emplace_back(*bj, j);
  }
  std::vector<ColumnChange> cols(shared.size());
  parallel_chunks(shared.size(), workers, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t s = b; s < e; ++s) {
      auto [bj, aj] = shared[s];
      auto& cc = cols[s];
      cc.feature = after.schema()[aj];
      if (same_ids && before.column_ptr(bj) == after.column_ptr(aj)) continue;
      const Column& bc = before.column(bj);
      const Column& ac = after.column(aj);
      for (std::size_t i = 0; i < after.rows(); ++i) {
        std::size_t p = same_ids ? i : bpos[i];
        if (p == npos) continue;
        if (!(bc[p] == ac[i])) {
          cc.cells.push_back({after.row_ids()[i], bc[p], ac[i]});
          cc.null_delta += (ac[i].is_null() ? 1 : 0) - (bc[p].is_null() ? 1 : 0);
        }
      }
    }
  });
  for (auto& c : cols) {
    if (!c.cells.empty()) out.values.columns.push_back(std::move(c));
  }
  return out;
}

enum class TemplateFamily : std::uint8_t {
  none,
  selection,
  projection,
  vertical_augmentation,
  horizontal_augmentation,
  transformation,
  imputation,
  composite
};

inline const char* template_family_name(TemplateFamily f) {
  switch (f) {
    case TemplateFamily::none: return "none";
    case TemplateFamily::selection: return "selection";
    case TemplateFamily::projection: return "projection";
    case TemplateFamily::vertical_augmentation: return "vertical_augmentation";
    case TemplateFamily::horizontal_augmentation: return "horizontal_augmentation";
    case TemplateFamily::transformation: return "transformation";
    case TemplateFamily::imputation: return "imputation";
    case TemplateFamily::composite: return "composite";
  }
  return "?";
}

/// Columns added by the previous tracked step, open for one more step.
struct PendingColumns {
  std::vector<FeatureName> features;
  OpSeq va_seq = 0;
  std::vector<FeatureName> inputs;  // features the augmentation was told it read
};

struct TrackerState {
  std::optional<PendingColumns> pending;
  bool tracking_enabled = true;
  OpSeq next_op_seq = 0;
};

struct TemplateSelection {
  TemplateFamily family = TemplateFamily::none;
  std::vector<FeatureName> imputed;      // column-wide derivations
  std::vector<FeatureName> transformed;  // one-to-one derivations
  bool uses_pending = false;             // composite completing an earlier augmentation
};

inline TemplateSelection classify(const ShapeChange& shape, const ValueChange& values, const TrackerState& state) {
  if (shape.rows_changed() && shape.cols_changed()) {
    throw AmbiguousChange("step changed rows (" + std::to_string(shape.dn_rows) + ") and columns (" +
                          std::to_string(shape.dn_cols) + ") at once");
  }
  if (!shape.added_row_ids.empty() && !shape.dropped_row_ids.empty()) {
    throw AmbiguousChange("step both added and removed rows");
  }
  TemplateSelection sel;
  for (const auto& c : values.columns) (c.null_delta < 0 ? sel.imputed : sel.transformed).push_back(c.feature);

  if (!shape.dropped_row_ids.empty()) {
    sel.family = TemplateFamily::selection;
  } else if (!shape.added_row_ids.empty()) {
    sel.family = TemplateFamily::horizontal_augmentation;
  } else if (!shape.dropped_features.empty()) {
    bool pending = false;
    if (shape.added_features.empty() && state.pending) {
      for (const auto& f : state.pending->features) {
        if (std::find(shape.dropped_features.begin(), shape.dropped_features.end(), f) == shape.dropped_features.end()) {
          pending = true;
        }
      }
      // Dropping only the pending columns themselves is an ordinary projection.
      bool drops_source = false;
      for (const auto& f : shape.dropped_features) {
        if (std::find(state.pending->features.begin(), state.pending->features.end(), f) == state.pending->features.end()) {
          drops_source = true;
        }
      }
      pending = pending && drops_source;
    }
    if (!shape.added_features.empty() || pending) {
      sel.family = TemplateFamily::composite;
      sel.uses_pending = shape.added_features.empty();
    } else {
      sel.family = TemplateFamily::projection;
    }
  } else if (!shape.added_features.empty()) {
    sel.family = TemplateFamily::vertical_augmentation;
  } else if (!sel.imputed.empty()) {
    sel.family = TemplateFamily::imputation;
  } else if (!sel.transformed.empty()) {
    sel.family = TemplateFamily::transformation;
  }
  return sel;
}

/// Optional facts a caller may pass about a step. Absent facts are inferred
/// from the data.
struct StepHints {
  std::optional<std::vector<FeatureName>> inputs;      // features a new column was computed from
  std::optional<std::vector<FeatureName>> group_keys;  // grouping features of a horizontal augmentation
  std::string function;
};

struct ReconstructedGroups {
  GroupMapping groups;
  std::vector<FeatureName> keys;     // X
  std::vector<FeatureName> targets;  // Y
};

namespace detail {

inline std::vector<std::size_t> rows_matching(const Dataset& before, const std::vector<std::size_t>& key_cols,
                                              const std::vector<Value>& key) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < before.rows(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < key_cols.size() && ok; ++k) {
      const Value& v = before.at(i, key_cols[k]);
      ok = !v.is_null() && v == key[k];
    }
    if (ok) out.push_back(i);
  }
  return out;
}

// Combinations of `n` items taken `k` at a time, lexicographic.
inline bool next_combination(std::vector<std::size_t>& c, std::size_t n) {
  std::size_t k = c.size();
  for (std::size_t i = k; i-- > 0;) {
    if (c[i] < n - k + i) {
      ++c[i];
      for (std::size_t j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Recovers ginput for appended rows. With key hints the keys are given;
/// otherwise the largest subset of the features non-null in every appended
/// row under which each appended row matches at least one input row.
inline ReconstructedGroups reconstruct_groups(const Dataset& before, const Dataset& after,
                                              const std::vector<RowId>& added,
                                              const std::optional<std::vector<FeatureName>>& key_hint) {
  std::vector<std::size_t> apos;
  for (RowId r : added) apos.push_back(*after.position_of(r));

  // Features non-null in every appended row, schema order.
  std::vector<std::size_t> nonnull;
  for (std::size_t j = 0; j < after.cols(); ++j) {
    if (!before.has_feature(after.schema()[j])) continue;
    bool all = !apos.empty();
    for (auto p : apos) all = all && !after.at(p, j).is_null();
    if (all) nonnull.push_back(j);
  }

  auto try_keys = [&](const std::vector<std::size_t>& after_cols) -> std::optional<GroupMapping> {
    std::vector<std::size_t> bcols;
    for (auto j : after_cols) bcols.push_back(*before.feature_index(after.schema()[j]));
    GroupMapping gm;
    for (std::size_t g = 0; g < apos.size(); ++g) {
      std::vector<Value> key;
      for (auto j : after_cols) key.push_back(after.at(apos[g], j));
      auto rows = detail::rows_matching(before, bcols, key);
      if (rows.empty()) return std::nullopt;
      Group grp{added[g], {}};
      for (auto i : rows) grp.ginput.push_back(before.row_ids()[i]);
      gm.push_back(std::move(grp));
    }
    return gm;
  };

  ReconstructedGroups out;
  std::vector<std::size_t> chosen;
  if (key_hint) {
    for (const auto& k : *key_hint) chosen.push_back(after.require_feature(k));
    auto gm = try_keys(chosen);
    if (!gm) throw DataError("appended rows do not match any input group under the given keys");
    out.groups = std::move(*gm);
  } else {
    bool found = false;
    const std::size_t n = nonnull.size();
    // Exhaustive for modest widths; wider rows fall back to dropping trailing features.
    if (n <= 16) {
      for (std::size_t k = n + 1; k-- > 0 && !found;) {
        std::vector<std::size_t> c(k);
        for (std::size_t i = 0; i < k; ++i) c[i] = i;
        do {
          std::vector<std::size_t> cols;
          for (auto i : c) cols.push_back(nonnull[i]);
          if (auto gm = try_keys(cols)) {
            out.groups = std::move(*gm);
            chosen = cols;
            found = true;
            break;
          }
        } while (k > 0 && detail::next_combination(c, n));
      }
    } else {
      std::vector<std::size_t> cols = nonnull;
      while (true) {
        if (auto gm = try_keys(cols)) {
          out.groups = std::move(*gm);
          chosen = cols;
          break;
        }
        cols.pop_back();
      }
    }
  }
  std::set<std::size_t> keyset(chosen.begin(), chosen.end());
  for (auto j : chosen) out.keys.push_back(after.schema()[j]);
  for (std::size_t j = 0; j < after.cols(); ++j) {
    if (keyset.count(j)) continue;
    bool any = false;
    for (auto p : apos) any = any || !after.at(p, j).is_null();
    if (any && before.has_feature(after.schema()[j])) out.targets.push_back(after.schema()[j]);
  }
  return out;
}

/// Hash-based reconstruction of join witnesses. Each operand row is hashed
/// over its own schema; each output row is projected back onto each operand
/// and hashed the same way. Hash hits are confirmed by value comparison.
inline std::vector<Witness> reconstruct_join_witnesses(const Dataset& l, const Dataset& r, const Dataset& out,
                                                       const JoinLayout& lay, JoinType type, unsigned workers = 1) {
  if (out.schema() != lay.schema()) throw IntegrityError("join output schema does not match its operands");
  // For each operand column, the output column carrying it.
  std::vector<std::size_t> lcol(l.cols()), rcol(r.cols());
  std::vector<bool> lshared(l.cols(), false);  // coalesced key columns
  for (std::size_t j = 0; j < lay.cols.size(); ++j) {
    if (lay.cols[j].left) lcol[*lay.cols[j].left] = j;
    if (lay.cols[j].right) rcol[*lay.cols[j].right] = j;
    if (lay.cols[j].left && lay.cols[j].right) lshared[*lay.cols[j].left] = true;
  }
  std::vector<bool> rshared(r.cols(), false);
  for (const auto& c : lay.cols) {
    if (c.left && c.right) rshared[*c.right] = true;
  }

  auto row_hash = [](const Dataset& d, std::size_t i) {
    std::string buf;
    for (std::size_t j = 0; j < d.cols(); ++j) append_canonical(buf, d.at(i, j));
    return fnv1a64(buf);
  };
  auto proj_hash = [&](std::size_t h, const std::vector<std::size_t>& cols) {
    std::string buf;
    for (auto j : cols) append_canonical(buf, out.at(h, j));
    return fnv1a64(buf);
  };
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> lidx, ridx;
  for (std::size_t i = 0; i < l.rows(); ++i) lidx[row_hash(l, i)].push_back(i);
  for (std::size_t i = 0; i < r.rows(); ++i) ridx[row_hash(r, i)].push_back(i);

  auto candidates = [&](const Dataset& d, const std::unordered_map<std::uint64_t, std::vector<std::size_t>>& idx,
                        const std::vector<std::size_t>& cols, std::size_t h) {
    std::vector<std::size_t> found;
    auto it = idx.find(proj_hash(h, cols));
    if (it == idx.end()) return found;
    for (auto i : it->second) {
      bool eq = true;
      for (std::size_t j = 0; j < cols.size() && eq; ++j) eq = d.at(i, j) == out.at(h, cols[j]);
      if (eq) found.push_back(i);
    }
    return found;
  };
  auto is_pad = [&](const std::vector<std::size_t>& cols, const std::vector<bool>& shared, std::size_t h) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (!shared[j] && !out.at(h, cols[j]).is_null()) return false;
    }
    return true;
  };
  auto keys_ok = [&](std::size_t li, std::size_t ri) {
    for (const auto& [kl, kr] : lay.keys) {
      if (l.at(li, kl).is_null() || !(l.at(li, kl) == r.at(ri, kr))) return false;
    }
    return true;
  };
  const bool left_pads = type == JoinType::right || type == JoinType::full;   // rows with no left side
  const bool right_pads = type == JoinType::left || type == JoinType::full;  // rows with no right side

  std::vector<Witness> res(out.rows());
  parallel_chunks(out.rows(), workers, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t h = b; h < e; ++h) {
      Witness w{h, candidates(l, lidx, lcol, h), candidates(r, ridx, rcol, h)};
      // Candidates on one side agree on every operand column, keys included,
      // so one pair decides whether the sides matched.
      if (!w.left.empty() && !w.right.empty() && !keys_ok(w.left.front(), w.right.front())) {
        // Not a match: a pad of whichever side leaves the other side's columns empty.
        if (!(right_pads && is_pad(rcol, rshared, h))) w.left.clear();
        if (!(left_pads && is_pad(lcol, lshared, h))) w.right.clear();
      }
      if (w.left.empty() && w.right.empty()) {
        throw IntegrityError("join output row " + std::to_string(out.row_ids()[h]) + " matches no operand row");
      }
      if (w.left.empty() && !(left_pads && is_pad(lcol, lshared, h))) {
        throw IntegrityError("join output row " + std::to_string(out.row_ids()[h]) + " has no left witness");
      }
      if (w.right.empty() && !(right_pads && is_pad(rcol, rshared, h))) {
        throw IntegrityError("join output row " + std::to_string(out.row_ids()[h]) + " has no right witness");
      }
      res[h] = std::move(w);
    }
  });
  return res;
}

/// A frame as seen by the tracker: the current data plus the versioned
/// snapshot taken at the last tracked step. They differ only after untracked
/// steps.
class Frame {
 public:
  Frame() = default;

  const Dataset& data() const { return node_->current; }
  const VersionedFrame& snapshot() const { return node_->snapshot; }
  bool dirty() const { return node_->dirty; }
  explicit operator bool() const { return node_ != nullptr; }

 private:
  friend class Tracker;
  struct Node {
    VersionedFrame snapshot;
    Dataset current;
    bool dirty = false;
  };
  explicit Frame(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

struct TrackerOptions {
  unsigned workers = 1;
  bool record_stats = true;
};

using BatchSink = std::function<void(Batch&&)>;

class Tracker {
 public:
  explicit Tracker(BatchSink sink = {}, TrackerOptions opt = {}) : sink_(std::move(sink)), opt_(opt) {}

  Frame subscribe(Dataset d) {
    std::string id = d.id().empty() ? "source" + std::to_string(state_.next_op_seq) : d.id();
    if (!subscribed_.insert(id).second) throw ValidationError("dataset '" + id + "' is already subscribed");
    d = rebase(d.with_id(id));
    OpSeq k = state_.next_op_seq++;
    Batch b;
    b.activities.push_back(make_activity(k, ActivityClass::ingestion, "ingest " + id, d.schema()));
    b.provlets = gen_ingestion_provlets(d, k);
    if (opt_.record_stats) b.records.push_back(record(k, ActivityClass::ingestion, "ingest " + id, d.schema(), {}, d));
    emit(std::move(b));
    return make_frame(VersionedFrame::uniform(d, k));
  }

  std::vector<Frame> subscribe(std::vector<Dataset> ds) {
    std::vector<Frame> out;
    for (auto& d : ds) out.push_back(subscribe(std::move(d)));
    return out;
  }

  void set_tracking(bool enabled) { state_.tracking_enabled = enabled; }
  bool tracking() const { return state_.tracking_enabled; }
  const TrackerState& state() const { return state_; }
  RowIdAllocator& allocator() { return alloc_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Runs a built-in operator on tracked frames and observes its effect.
  /// Hints are taken from the operator specification.
  Frame apply(const OperatorSpec& spec, const std::vector<Frame>& in, std::string out_id = {}) {
    if (is_binary(spec)) {
      if (in.size() != 2) throw ValidationError(std::string(op_kind_name(kind_of(spec))) + " takes two inputs");
      if (!state_.tracking_enabled) {
        throw ValidationError("binary operators cannot run with tracking disabled");
      }
      Frame l = settle(in[0]), r = settle(in[1]);
      Dataset out = apply_operator(spec, {&l.data(), &r.data()}, &alloc_).data;
      if (!out_id.empty()) out = out.with_id(out_id);
      if (kind_of(spec) == OpKind::join) return observe_join(l, r, std::move(out), std::get<JoinSpec>(spec));
      return observe_append(l, r, std::move(out));
    }
    if (in.size() != 1) throw ValidationError(std::string(op_kind_name(kind_of(spec))) + " takes one input");
    StepHints hints;
    hints.function = describe(spec);
    if (auto* va = std::get_if<VaSpec>(&spec)) hints.inputs = va_input_features(*va);
    if (auto* ha = std::get_if<HaSpec>(&spec)) hints.group_keys = ha->keys;
    Dataset out = apply_operator(spec, {&in[0].data()}, &alloc_).data;
    out = out.with_id(out_id.empty() ? in[0].data().id() : out_id);
    return observe(in[0], std::move(out), hints);
  }

  /// Records the step that turned `in` into `after`. With tracking disabled
  /// the change is only accumulated.
  Frame observe(const Frame& in, Dataset after, const StepHints& hints = {}) {
    if (!state_.tracking_enabled) {
      auto n = std::make_shared<Frame::Node>();
      n->snapshot = in.snapshot();
      n->current = std::move(after);
      n->dirty = true;
      return Frame(std::move(n));
    }
    return track_unary(in.snapshot(), std::move(after), hints);
  }

  Frame observe_join(const Frame& l, const Frame& r, Dataset out, const JoinSpec& spec) {
    if (!state_.tracking_enabled) throw ValidationError("binary operators cannot run with tracking disabled");
    Frame ls = settle(l), rs = settle(r);
    JoinLayout lay = join_layout(ls.data().schema(), rs.data().schema(), spec.keys);
    auto witnesses = reconstruct_join_witnesses(ls.data(), rs.data(), out, lay, spec.type, opt_.workers);
    OpSeq k = state_.next_op_seq++;
    Batch b;
    std::string fn = std::string("join ") + join_type_name(spec.type);
    b.activities.push_back(make_activity(k, ActivityClass::join, fn, out.schema()));
    b.provlets = gen_join_provlets(ls.snapshot(), rs.snapshot(), out, lay, witnesses, k);
    if (opt_.record_stats) b.records.push_back(record(k, ActivityClass::join, fn, out.schema(), {&ls.data(), &rs.data()}, out));
    expire_pending();
    emit(std::move(b));
    alloc_reserve(out);
    return make_frame(VersionedFrame::uniform(std::move(out), k));
  }

  Frame observe_append(const Frame& l, const Frame& r, Dataset out) {
    if (!state_.tracking_enabled) throw ValidationError("binary operators cannot run with tracking disabled");
    Frame ls = settle(l), rs = settle(r);
    if (out.rows() != ls.data().rows() + rs.data().rows() ||
        out.schema() != append_schema(ls.data().schema(), rs.data().schema())) {
      throw IntegrityError("append output does not match its operands");
    }
    OpSeq k = state_.next_op_seq++;
    Batch b;
    b.activities.push_back(make_activity(k, ActivityClass::append, "append", out.schema()));
    b.provlets = gen_append_provlets(ls.snapshot(), rs.snapshot(), out, k);
    if (opt_.record_stats) b.records.push_back(record(k, ActivityClass::append, "append", out.schema(), {&ls.data(), &rs.data()}, out));
    expire_pending();
    emit(std::move(b));
    alloc_reserve(out);
    return make_frame(VersionedFrame::uniform(std::move(out), k));
  }

  /// Flushes untracked changes on a frame into a tracked step.
  Frame settle(const Frame& f) {
    if (!f.dirty()) return f;
    if (!state_.tracking_enabled) throw ValidationError("cannot settle a frame while tracking is disabled");
    return track_unary(f.snapshot(), f.data(), {});
  }

 private:
  Frame make_frame(VersionedFrame vf) {
    auto n = std::make_shared<Frame::Node>();
    n->current = vf.data;
    n->snapshot = std::move(vf);
    return Frame(std::move(n));
  }

  void emit(Batch&& b) {
    if (sink_) sink_(std::move(b));
  }

  void expire_pending() { state_.pending.reset(); }

  void alloc_reserve(const Dataset& d) {
    if (d.rows()) alloc_.reserve_through(d.next_row_id() - 1);
  }

  // Keeps row ids unique across everything the tracker has seen.
  Dataset rebase(const Dataset& d) {
    if (d.rows() == 0) return d;
    RowId lo = *std::min_element(d.row_ids().begin(), d.row_ids().end());
    if (lo >= alloc_.peek()) {
      alloc_reserve(d);
      return d;
    }
    RowId shift = alloc_.peek() - lo;
    std::vector<RowId> ids(d.row_ids().begin(), d.row_ids().end());
    for (auto& id : ids) id += shift;
    Dataset out(d.schema(), d.column_ptrs(), std::move(ids), d.id());
    alloc_reserve(out);
    return out;
  }

  OpRecord record(OpSeq k, std::optional<ActivityClass> cls, std::string fn, std::vector<FeatureName> features,
                  const std::vector<const Dataset*>& inputs, const Dataset& output) const {
    OpRecord r;
    r.op_seq = k;
    r.cls = cls;
    r.function = std::move(fn);
    r.features = std::move(features);
    for (const auto* d : inputs) r.inputs.push_back(frame_stats(*d));
    r.output = frame_stats(output);
    return r;
  }

  // Versions after a step: carried over from `before`, overwritten by every
  // entity the step generated.
  static VersionedFrame advance(const VersionedFrame& before, const Dataset& after, const std::vector<Provlet>& provlets) {
    VersionedFrame out;
    out.data = after;
    const bool same_ids = std::equal(before.data.row_ids().begin(), before.data.row_ids().end(),
                                     after.row_ids().begin(), after.row_ids().end());
    constexpr OpSeq unset = static_cast<OpSeq>(-1);
    std::vector<std::vector<OpSeq>> cols(after.cols());
    std::vector<bool> touched(after.cols(), false);
    std::unordered_map<std::string_view, std::size_t> fidx;
    for (std::size_t j = 0; j < after.cols(); ++j) fidx.emplace(after.schema()[j], j);
    auto materialise = [&](std::size_t j) {
      if (touched[j]) return;
      touched[j] = true;
      auto bj = before.data.feature_index(after.schema()[j]);
      auto& c = cols[j];
      c.assign(after.rows(), unset);
      if (!bj) return;
      for (std::size_t i = 0; i < after.rows(); ++i) {
        if (same_ids) {
          c[i] = before.version(i, *bj);
        } else if (auto p = before.data.position_of(after.row_ids()[i])) {
          c[i] = before.version(*p, *bj);
        }
      }
    };
    for (const auto& p : provlets) {
      for (const auto& e : p.entities) {
        auto it = fidx.find(e.feature);
        if (it == fidx.end()) continue;
        auto i = after.position_of(e.row);
        if (!i) continue;
        materialise(it->second);
        auto& slot = cols[it->second][*i];
        slot = slot == unset ? e.op_seq : std::max(slot, e.op_seq);
      }
    }
    out.versions.resize(after.cols());
    for (std::size_t j = 0; j < after.cols(); ++j) {
      if (!touched[j]) {
        auto bj = before.data.feature_index(after.schema()[j]);
        if (bj && same_ids) {
          out.versions[j] = before.versions[*bj];
          continue;
        }
        materialise(j);
      }
      for (auto v : cols[j]) {
        if (v == unset) throw IntegrityError("cell of feature '" + after.schema()[j] + "' has no entity");
      }
      out.versions[j] = std::make_shared<const VersionColumn>(std::move(cols[j]));
    }
    return out;
  }

  void value_provlets(const VersionedFrame& before, const Dataset& after, const ValueChange& values,
                      const TemplateSelection& sel, OpSeq k, std::vector<Provlet>& out) const {
    for (const auto& f : sel.imputed) {
      std::vector<RowId> rows;
      for (const auto& c : values.find(f)->cells) rows.push_back(c.row);
      auto p = gen_transform_column_wide(before, after, f, rows, k);
      std::move(p.begin(), p.end(), std::back_inserter(out));
    }
    std::vector<CellRef> cells;
    for (const auto& f : sel.transformed) {
      for (const auto& c : values.find(f)->cells) cells.push_back({c.row, f});
    }
    auto p = gen_transform_one_to_one(before, after, cells, k);
    std::move(p.begin(), p.end(), std::back_inserter(out));
  }

  static std::vector<FeatureName> changed_features(const ValueChange& v) {
    std::vector<FeatureName> out;
    for (const auto& c : v.columns) out.push_back(c.feature);
    return out;
  }

  Frame coarse_step(const VersionedFrame& before, Dataset after, const Diff& df, const std::string& fn,
                    const std::string& why) {
    warnings_.push_back("op " + std::to_string(state_.next_op_seq) + ": " + why + "; recorded as a coarse step");
    OpSeq k = state_.next_op_seq++;
    std::vector<CellRef> generated;
    std::set<RowId> new_rows(df.shape.added_row_ids.begin(), df.shape.added_row_ids.end());
    std::set<FeatureName> new_cols(df.shape.added_features.begin(), df.shape.added_features.end());
    std::set<CellRef> changed;
    for (const auto& c : df.values.columns) {
      for (const auto& cell : c.cells) changed.insert({cell.row, c.feature});
    }
    for (std::size_t i = 0; i < after.rows(); ++i) {
      RowId r = after.row_ids()[i];
      for (const auto& f : after.schema()) {
        if (new_rows.count(r) || new_cols.count(f) || changed.count({r, f})) generated.push_back({r, f});
      }
    }
    Batch b;
    std::vector<FeatureName> feats = df.shape.added_features;
    feats.insert(feats.end(), df.shape.dropped_features.begin(), df.shape.dropped_features.end());
    for (const auto& f : changed_features(df.values)) feats.push_back(f);
    b.activities.push_back(make_activity(k, ActivityClass::coarse, fn, feats));
    b.provlets = gen_coarse_provlets(before, after, generated, k);
    if (opt_.record_stats) b.records.push_back(record(k, ActivityClass::coarse, fn, feats, {&before.data}, after));
    expire_pending();
    VersionedFrame next = advance(before, after, b.provlets);
    emit(std::move(b));
    alloc_reserve(next.data);
    return make_frame(std::move(next));
  }

  Frame track_unary(const VersionedFrame& before, Dataset after, const StepHints& hints) {
    Diff df = diff(before.data, after, opt_.workers);
    const std::string fn = hints.function.empty() ? "observed" : hints.function;
    TemplateSelection sel;
    try {
      sel = classify(df.shape, df.values, state_);
    } catch (const AmbiguousChange& e) {
      return coarse_step(before, std::move(after), df, fn, e.what());
    }
    std::optional<PendingColumns> pending = std::move(state_.pending);
    state_.pending.reset();

    OpSeq k = state_.next_op_seq++;
    Batch b;
    auto add_record = [&](OpSeq seq, std::optional<ActivityClass> cls, const std::vector<FeatureName>& feats,
                          const Dataset& in, const Dataset& out) {
      if (opt_.record_stats) b.records.push_back(record(seq, cls, fn, feats, {&in}, out));
    };
    auto simple = [&](ActivityClass cls, std::vector<FeatureName> feats) {
      b.activities.push_back(make_activity(k, cls, fn, feats));
      add_record(k, cls, feats, before.data, after);
    };

    switch (sel.family) {
      case TemplateFamily::none:
        add_record(k, std::nullopt, {}, before.data, after);
        break;
      case TemplateFamily::selection:
        simple(ActivityClass::selection, before.data.schema());
        b.provlets = gen_selection_provlets(before, df.shape.dropped_row_ids, k);
        value_provlets(before, after, df.values, sel, k, b.provlets);
        break;
      case TemplateFamily::projection:
        simple(ActivityClass::conditional_projection, df.shape.dropped_features);
        b.provlets = gen_projection_provlets(before, df.shape.dropped_features, k);
        value_provlets(before, after, df.values, sel, k, b.provlets);
        break;
      case TemplateFamily::vertical_augmentation: {
        std::vector<FeatureName> x;
        if (hints.inputs) {
          for (const auto& f : *hints.inputs) {
            if (before.data.has_feature(f)) x.push_back(f);
          }
        }
        simple(ActivityClass::vertical_augmentation, df.shape.added_features);
        b.provlets = gen_va_provlets(before, after, x, df.shape.added_features, k);
        value_provlets(before, after, df.values, sel, k, b.provlets);
        state_.pending = PendingColumns{df.shape.added_features, k, x};
        break;
      }
      case TemplateFamily::horizontal_augmentation: {
        auto groups = reconstruct_groups(before.data, after, df.shape.added_row_ids, hints.group_keys);
        std::vector<FeatureName> feats = groups.keys;
        feats.insert(feats.end(), groups.targets.begin(), groups.targets.end());
        simple(ActivityClass::horizontal_augmentation, feats);
        b.provlets = gen_ha_provlets(before, after, groups.groups, groups.keys, groups.targets, k);
        value_provlets(before, after, df.values, sel, k, b.provlets);
        break;
      }
      case TemplateFamily::transformation:
      case TemplateFamily::imputation: {
        auto cls = sel.family == TemplateFamily::imputation ? ActivityClass::imputation : ActivityClass::transformation;
        simple(cls, changed_features(df.values));
        value_provlets(before, after, df.values, sel, k, b.provlets);
        break;
      }
      case TemplateFamily::composite:
        if (sel.uses_pending) {
          composite_with_pending(before, after, df, sel, *pending, k, fn, b);
        } else {
          composite_single_step(before, after, df, sel, k, fn, b);
        }
        break;
    }
    VersionedFrame next = advance(before, after, b.provlets);
    emit(std::move(b));
    alloc_reserve(next.data);
    return make_frame(std::move(next));
  }

  // Columns added and removed in one observed step: an augmentation at k and a
  // projection at k + 1.
  void composite_single_step(const VersionedFrame& before, const Dataset& after, const Diff& df,
                             const TemplateSelection& sel, OpSeq k, const std::string& fn, Batch& b) {
    OpSeq kp = state_.next_op_seq++;
    const auto& added = df.shape.added_features;
    const auto& dropped = df.shape.dropped_features;
    b.activities.push_back(make_activity(k, ActivityClass::vertical_augmentation, fn, added));
    b.activities.push_back(make_activity(kp, ActivityClass::conditional_projection, fn, dropped));
    if (opt_.record_stats) {
      std::vector<FeatureName> schema = before.data.schema();
      std::vector<ColumnPtr> cols = before.data.column_ptrs();
      for (const auto& f : added) {
        const Column& src = after.column(f);
        Column c(before.data.rows());
        for (std::size_t i = 0; i < before.data.rows(); ++i) c[i] = src[*after.position_of(before.data.row_ids()[i])];
        schema.push_back(f);
        cols.push_back(std::make_shared<const Column>(std::move(c)));
      }
      Dataset mid(std::move(schema), std::move(cols), {before.data.row_ids().begin(), before.data.row_ids().end()},
                  after.id());
      b.records.push_back(record(k, ActivityClass::vertical_augmentation, fn, added, {&before.data}, mid));
      b.records.push_back(record(kp, ActivityClass::conditional_projection, fn, dropped, {&mid}, after));
    }
    CompositeInput in;
    in.before = &before;
    in.added = &after;
    in.sources = dropped;
    in.new_features = added;
    in.va_seq = k;
    in.proj_seq = kp;
    in.generate = true;
    b.provlets = gen_composite_onehot_provlets(in);
    value_provlets(before, after, df.values, sel, kp, b.provlets);
  }

  // Projection completing the augmentation of the previous step.
  void composite_with_pending(const VersionedFrame& before, const Dataset& after, const Diff& df,
                              const TemplateSelection& sel, const PendingColumns& pending, OpSeq k,
                              const std::string& fn, Batch& b) {
    const auto& dropped = df.shape.dropped_features;
    auto is_pending = [&](const FeatureName& f) {
      return std::find(pending.features.begin(), pending.features.end(), f) != pending.features.end();
    };
    CompositeInput in;
    in.before = &before;
    in.added = &after;
    for (const auto& f : dropped) {
      if (!is_pending(f)) in.sources.push_back(f);
    }
    for (const auto& f : pending.features) {
      if (after.has_feature(f)) in.new_features.push_back(f);
    }
    in.va_seq = pending.va_seq;
    in.proj_seq = k;
    in.generate = false;
    for (const auto& y : pending.features) {
      for (const auto& x : pending.inputs) in.already_derived.insert({y, x});
    }
    b.activities.push_back(make_activity(k, ActivityClass::conditional_projection, fn, dropped));
    if (opt_.record_stats) b.records.push_back(record(k, ActivityClass::conditional_projection, fn, dropped, {&before.data}, after));
    b.provlets = gen_composite_onehot_provlets(in);
    std::vector<FeatureName> dropped_pending;
    for (const auto& f : dropped) {
      if (is_pending(f)) dropped_pending.push_back(f);
    }
    auto extra = gen_projection_provlets(before, dropped_pending, k);
    std::move(extra.begin(), extra.end(), std::back_inserter(b.provlets));
    value_provlets(before, after, df.values, sel, k, b.provlets);
  }

  BatchSink sink_;
  TrackerOptions opt_;
  TrackerState state_;
  RowIdAllocator alloc_;
  std::set<std::string> subscribed_;
  std::vector<std::string> warnings_;
};

}  // namespace provtrack
