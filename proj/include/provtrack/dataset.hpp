#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "provtrack/error.hpp"
#include "provtrack/value.hpp"

namespace provtrack {

using RowId = std::uint64_t;
using FeatureName = std::string;
using Column = std::vector<Value>;
using ColumnPtr = std::shared_ptr<const Column>;

/// Source of fresh row ids. Every id handed out is larger than any id the
/// allocator has seen.
class RowIdAllocator {
 public:
  RowId take() { return next_++; }
  void reserve_through(RowId id) { next_ = std::max(next_, id + 1); }
  RowId peek() const { return next_; }

 private:
  RowId next_ = 0;
};

/// Ordered columnar table with a schema of distinct feature names and one
/// stable RowId per row. Immutable once built; columns are shared between
/// datasets derived from one another.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<FeatureName> schema, std::vector<ColumnPtr> columns, std::vector<RowId> row_ids,
          std::string id = {})
      : id_(std::move(id)), schema_(std::move(schema)), columns_(std::move(columns)), row_ids_(std::move(row_ids)) {
    if (schema_.size() != columns_.size()) {
      throw DataError("schema has " + std::to_string(schema_.size()) + " features but " +
                      std::to_string(columns_.size()) + " columns were given");
    }
    index_.reserve(schema_.size());
    for (std::size_t j = 0; j < schema_.size(); ++j) {
      if (!index_.emplace(schema_[j], j).second) throw DataError("duplicate feature name '" + schema_[j] + "'");
      if (!columns_[j]) throw DataError("column '" + schema_[j] + "' is missing");
      if (columns_[j]->size() != row_ids_.size()) {
        throw DataError("column '" + schema_[j] + "' has " + std::to_string(columns_[j]->size()) +
                        " values, expected " + std::to_string(row_ids_.size()));
      }
    }
    sorted_ids_ = std::is_sorted(row_ids_.begin(), row_ids_.end());
    if (sorted_ids_) {
      if (std::adjacent_find(row_ids_.begin(), row_ids_.end()) != row_ids_.end()) throw DataError("duplicate row id");
    } else {
      positions_.reserve(row_ids_.size());
      for (std::size_t i = 0; i < row_ids_.size(); ++i) {
        if (!positions_.emplace(row_ids_[i], i).second) {
          throw DataError("duplicate row id " + std::to_string(row_ids_[i]));
        }
      }
    }
  }

  /// Row-major convenience constructor; row ids are 0..n-1 unless given.
  static Dataset from_rows(std::vector<FeatureName> schema, const std::vector<std::vector<Value>>& rows,
                           std::string id = {}, std::optional<std::vector<RowId>> row_ids = std::nullopt) {
    std::vector<Column> cols(schema.size());
    for (auto& c : cols) c.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != schema.size()) {
        throw DataError("row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) + " values, expected " +
                        std::to_string(schema.size()));
      }
      for (std::size_t j = 0; j < schema.size(); ++j) cols[j].push_back(rows[i][j]);
    }
    std::vector<RowId> ids;
    if (row_ids) {
      ids = std::move(*row_ids);
    } else {
      ids.resize(rows.size());
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    }
    std::vector<ColumnPtr> ptrs;
    ptrs.reserve(cols.size());
    for (auto& c : cols) ptrs.push_back(std::make_shared<const Column>(std::move(c)));
    return Dataset(std::move(schema), std::move(ptrs), std::move(ids), std::move(id));
  }

  const std::string& id() const noexcept { return id_; }
  Dataset with_id(std::string id) const {
    Dataset d = *this;
    d.id_ = std::move(id);
    return d;
  }

  std::size_t rows() const noexcept { return row_ids_.size(); }
  std::size_t cols() const noexcept { return schema_.size(); }

  const std::vector<FeatureName>& schema() const noexcept { return schema_; }
  std::span<const RowId> row_ids() const noexcept { return row_ids_; }
  const std::vector<ColumnPtr>& column_ptrs() const noexcept { return columns_; }

  bool has_feature(std::string_view f) const { return index_.find(std::string(f)) != index_.end(); }

  std::optional<std::size_t> feature_index(std::string_view f) const {
    auto it = index_.find(std::string(f));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t require_feature(std::string_view f) const {
    auto j = feature_index(f);
    if (!j) throw UnknownFeature(std::string(f));
    return *j;
  }

  const Column& column(std::size_t j) const { return *columns_.at(j); }
  const Column& column(std::string_view f) const { return *columns_[require_feature(f)]; }
  const ColumnPtr& column_ptr(std::size_t j) const { return columns_.at(j); }

  const Value& at(std::size_t row, std::size_t col) const { return (*columns_[col])[row]; }

  std::optional<std::size_t> position_of(RowId id) const {
    if (sorted_ids_) {
      auto it = std::lower_bound(row_ids_.begin(), row_ids_.end(), id);
      if (it == row_ids_.end() || *it != id) return std::nullopt;
      return static_cast<std::size_t>(it - row_ids_.begin());
    }
    auto it = positions_.find(id);
    if (it == positions_.end()) return std::nullopt;
    return it->second;
  }

  /// One past the largest row id present (0 for an empty dataset).
  RowId next_row_id() const {
    if (row_ids_.empty()) return 0;
    if (sorted_ids_) return row_ids_.back() + 1;
    return *std::max_element(row_ids_.begin(), row_ids_.end()) + 1;
  }

  std::vector<Value> row(std::size_t i) const {
    std::vector<Value> out;
    out.reserve(cols());
    for (const auto& c : columns_) out.push_back((*c)[i]);
    return out;
  }

  /// Same schema, same values in the same order. Row ids and dataset id are ignored.
  bool same_content(const Dataset& o) const {
    if (schema_ != o.schema_ || rows() != o.rows()) return false;
    for (std::size_t j = 0; j < cols(); ++j) {
      if (columns_[j] != o.columns_[j] && *columns_[j] != *o.columns_[j]) return false;
    }
    return true;
  }

  bool operator==(const Dataset& o) const { return same_content(o) && row_ids_ == o.row_ids_; }

 private:
  std::string id_;
  std::vector<FeatureName> schema_;
  std::vector<ColumnPtr> columns_;
  std::vector<RowId> row_ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<RowId, std::size_t> positions_;
  bool sorted_ids_ = true;
};

/// Per-feature summary used for spread queries.
struct ColumnStats {
  FeatureName feature;
  std::size_t count = 0;
  std::size_t null_count = 0;
  // Present only when the column has at least one value and every non-null value is a number.
  std::optional<double> min;
  std::optional<double> max;
  std::optional<double> mean;
  std::optional<double> stddev;  // population standard deviation
  std::size_t distinct_count = 0;
  Value mode;  // Null when the column has no non-null values
  std::size_t mode_count = 0;

  bool numeric() const { return mean.has_value(); }
  bool operator==(const ColumnStats&) const = default;
};

inline ColumnStats column_stats(const Column& col, FeatureName feature) {
  ColumnStats s;
  s.feature = std::move(feature);
  s.count = col.size();
  std::map<Value, std::size_t> freq;
  bool all_numeric = true;
  double sum = 0;
  std::size_t numeric_n = 0;
  for (const auto& v : col) {
    if (v.is_null()) {
      ++s.null_count;
      continue;
    }
    ++freq[v];
    if (v.is_number()) {
      sum += v.as_number();
      ++numeric_n;
    } else {
      all_numeric = false;
    }
  }
  s.distinct_count = freq.size();
  for (const auto& [v, c] : freq) {
    if (c > s.mode_count) {  // std::map iterates ascending, so ties keep the smallest value
      s.mode = v;
      s.mode_count = c;
    }
  }
  if (all_numeric && numeric_n > 0) {
    double mean = sum / static_cast<double>(numeric_n);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, ss = 0;
    for (const auto& v : col) {
      if (!v.is_number()) continue;
      double x = v.as_number();
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      ss += (x - mean) * (x - mean);
    }
    s.min = lo;
    s.max = hi;
    s.mean = mean;
    s.stddev = std::sqrt(ss / static_cast<double>(numeric_n));
  }
  return s;
}

inline ColumnStats column_stats(const Dataset& d, std::string_view feature) {
  return column_stats(d.column(feature), std::string(feature));
}

inline std::vector<ColumnStats> all_column_stats(const Dataset& d) {
  std::vector<ColumnStats> out;
  out.reserve(d.cols());
  for (std::size_t j = 0; j < d.cols(); ++j) out.push_back(column_stats(d.column(j), d.schema()[j]));
  return out;
}

inline std::size_t null_count(const Dataset& d) {
  std::size_t n = 0;
  for (const auto& c : d.column_ptrs()) n += static_cast<std::size_t>(std::count_if(c->begin(), c->end(), [](const Value& v) { return v.is_null(); }));
  return n;
}

}  // namespace provtrack
