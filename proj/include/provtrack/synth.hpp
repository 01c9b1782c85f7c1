#pragma once

// Deterministic synthetic tables shaped after a trade fact table, a holdings
// dimension and a split financial-records pair.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "provtrack/csv.hpp"
#include "provtrack/dataset.hpp"

namespace provtrack {

struct SynthOptions {
  std::size_t rows = 1000;
  std::size_t features = 8;  // width of the unary table, at least 6
  double null_rate = 0.05;   // nulls in the generic columns
  std::uint64_t seed = 7;
  // Cells left null in T_COMM and made invalid in C_DOB, independent of
  // the row count.
  std::size_t sparse_defects = 10;
};

struct SynthTables {
  Dataset unary;        // trade facts
  Dataset join_left;    // trade facts, keyed by T_ID
  Dataset join_right;   // holdings, every HH_T_ID present on the left
  Dataset append_left;  // older financial records
  Dataset append_right; // newer financial records, same 17 features
};

inline constexpr std::size_t kAppendFeatures = 17;
inline constexpr std::size_t kJoinLeftMax = 14;
inline constexpr std::size_t kJoinRightFeatures = 5;

namespace detail {

// Bit-exact across standard libraries, unlike the <random> distributions.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : g_(seed) {}
  double uniform() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(g_() % n); }
  bool chance(double p) { return uniform() < p; }

 private:
  std::mt19937_64 g_;
};

inline Dataset build(std::vector<FeatureName> schema, std::vector<Column> cols, std::string id) {
  std::size_t n = cols.empty() ? 0 : cols[0].size();
  std::vector<ColumnPtr> ptrs;
  for (auto& c : cols) ptrs.push_back(std::make_shared<const Column>(std::move(c)));
  std::vector<RowId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return Dataset(std::move(schema), std::move(ptrs), std::move(ids), std::move(id));
}

inline std::string dob(SynthRng& r) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu-%02zu-%02zu", 1940 + r.below(60), 1 + r.below(12), 1 + r.below(28));
  return buf;
}

// Positions of `k` distinct rows out of n, sorted.
inline std::vector<std::size_t> pick(SynthRng& r, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + r.below(n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline Dataset trade_table(SynthRng& r, std::size_t n, std::size_t width, const SynthOptions& o, std::string id) {
  width = std::max<std::size_t>(width, 6);
  std::vector<FeatureName> schema = {"T_ID", "C_GNDR", "T_COMM", "C_DOB", "T_QTY", "T_PRICE"};
  for (std::size_t g = schema.size(); g < width; ++g) schema.push_back("G" + std::to_string(g - 5));
  std::vector<Column> cols(schema.size());
  static const char* genders[] = {"M", "F", "m", "f", "M", "F"};
  for (std::size_t i = 0; i < n; ++i) {
    cols[0].push_back(Value(static_cast<double>(i + 1)));
    cols[1].push_back(Value(genders[r.below(6)]));
    cols[2].push_back(Value(std::round(r.uniform() * 5000) / 100));
    cols[3].push_back(Value(dob(r)));
    cols[4].push_back(Value(static_cast<double>(1 + r.below(1000))));
    cols[5].push_back(Value(std::round(r.uniform() * 100000) / 100));
    for (std::size_t g = 6; g < schema.size(); ++g) {
      if (r.chance(o.null_rate)) cols[g].push_back(Value());
      else if (g % 2) cols[g].push_back(Value("c" + std::to_string(r.below(20))));
      else cols[g].push_back(Value(static_cast<double>(r.below(10000))));
    }
  }
  for (auto i : pick(r, n, o.sparse_defects)) cols[2][i] = Value();
  for (auto i : pick(r, n, o.sparse_defects)) cols[3][i] = Value("0000-00-00");
  return build(std::move(schema), std::move(cols), std::move(id));
}

}  // namespace detail

inline SynthTables gen_synth(const SynthOptions& o) {
  detail::SynthRng r(o.seed);
  SynthTables t;
  t.unary = detail::trade_table(r, o.rows, o.features, o, "unary");
  t.join_left = detail::trade_table(r, o.rows, std::min(o.features, kJoinLeftMax), o, "join_left");

  // Holdings: a subset of trades, each key at most once.
  std::size_t nr = o.rows * 93 / 100;
  auto keys = detail::pick(r, o.rows, nr);
  std::vector<FeatureName> rs = {"HH_T_ID", "HH_H_T_ID", "HH_BEFORE_QTY", "HH_AFTER_QTY", "HH_DTS"};
  std::vector<Column> rc(rs.size());
  for (auto k : keys) {
    rc[0].push_back(Value(static_cast<double>(k + 1)));
    rc[1].push_back(Value(static_cast<double>(1 + r.below(o.rows + 1))));
    rc[2].push_back(Value(static_cast<double>(r.below(1000))));
    rc[3].push_back(Value(static_cast<double>(r.below(1000))));
    rc[4].push_back(Value(detail::dob(r)));
  }
  t.join_right = detail::build(std::move(rs), std::move(rc), "join_right");

  std::vector<FeatureName> fs;
  for (std::size_t j = 0; j < kAppendFeatures; ++j) fs.push_back("F" + std::to_string(j + 1));
  auto fin = [&](std::size_t n, const std::string& id) {
    std::vector<Column> c(fs.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < fs.size(); ++j) {
        if (j > 0 && r.chance(o.null_rate)) c[j].push_back(Value());
        else if (j % 3 == 0) c[j].push_back(Value(static_cast<double>(r.below(100000))));
        else c[j].push_back(Value("v" + std::to_string(r.below(50))));
      }
    }
    return detail::build(fs, std::move(c), id);
  };
  std::size_t na = o.rows * 32 / 100;
  t.append_left = fin(na, "append_left");
  t.append_right = fin(o.rows - na, "append_right");
  return t;
}

/// Writes synth_<name>.csv files into dir; returns the paths.
inline std::vector<std::string> write_synth(const SynthTables& t, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> out;
  auto put = [&](const Dataset& d, const char* name) {
    auto p = dir / (std::string("synth_") + name + ".csv");
    std::ofstream f(p, std::ios::binary);
    if (!f) throw DataError("cannot write '" + p.string() + "'");
    write_csv(f, d);
    out.push_back(p.string());
  };
  put(t.unary, "unary");
  put(t.join_left, "join_left");
  put(t.join_right, "join_right");
  put(t.append_left, "append_left");
  put(t.append_right, "append_right");
  return out;
}

}  // namespace provtrack
