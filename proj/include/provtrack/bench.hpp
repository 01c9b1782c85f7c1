#pragma once

// Capture-overhead benchmark over synthetic trade tables. Each op class is
// timed twice: the bare operator, and the tracker observing its effect.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "provtrack/log.hpp"
#include "provtrack/synth.hpp"
#include "provtrack/tracker.hpp"

namespace provtrack {

enum class BenchOp : std::uint8_t { dr, ft, i, st, ig, vt, jo, ap };

inline constexpr BenchOp kAllBenchOps[] = {BenchOp::dr, BenchOp::ft, BenchOp::i,  BenchOp::st,
                                           BenchOp::ig, BenchOp::vt, BenchOp::jo, BenchOp::ap};

inline const char* bench_op_name(BenchOp o) {
  switch (o) {
    case BenchOp::dr: return "DR";
    case BenchOp::ft: return "FT";
    case BenchOp::i: return "I";
    case BenchOp::st: return "ST";
    case BenchOp::ig: return "IG";
    case BenchOp::vt: return "VT";
    case BenchOp::jo: return "JO";
    case BenchOp::ap: return "AP";
  }
  return "?";
}

inline BenchOp parse_bench_op(std::string_view s) {
  for (auto o : kAllBenchOps)
    if (s == bench_op_name(o)) return o;
  throw ValidationError("unknown bench op '" + std::string(s) + "' (expected DR, FT, I, ST, IG, VT, JO or AP)");
}

inline OperatorSpec bench_spec(BenchOp o) {
  switch (o) {
    case BenchOp::dr: return ProjectSpec{FeaturePredicate::negation(FeaturePredicate::name_in({"T_PRICE"}))};
    case BenchOp::ft: {
      TransformSpec t;
      t.fn = TransformFn::value_map;
      t.x = {"C_GNDR"};
      t.mapping = {{"m", Value("M")}, {"f", Value("F")}};
      return t;
    }
    case BenchOp::i: {
      TransformSpec t;
      t.fn = TransformFn::fillna_mean;
      t.x = {"T_COMM"};
      return t;
    }
    case BenchOp::st: {
      VaSpec v;
      v.x = {"T_COMM"};
      v.y = {"T_HAS_COMM"};
      v.expr = parse_expr("if(T_COMM is null, 0, 1)");
      return v;
    }
    case BenchOp::ig: return HaSpec{{}, Aggregate::max, "T_QTY"};
    case BenchOp::vt: {
      TransformSpec t;
      t.fn = TransformFn::value_map;
      t.x = {"C_DOB"};
      t.mapping = {{"0000-00-00", Value()}};
      return t;
    }
    case BenchOp::jo: return JoinSpec{JoinType::left, {{"T_ID", "HH_T_ID"}}};
    case BenchOp::ap: return AppendSpec{};
  }
  return AppendSpec{};
}

struct BenchOptions {
  std::vector<std::size_t> sizes = {10000, 50000, 100000};
  std::vector<BenchOp> ops{std::begin(kAllBenchOps), std::end(kAllBenchOps)};
  std::size_t features = 6;
  std::size_t repeats = 3;
  unsigned workers = 1;
  std::uint64_t seed = 7;
};

struct BenchSample {
  BenchOp op;
  std::size_t rows = 0;       // input rows
  double op_seconds = 0;      // operator alone, median
  double capture_seconds = 0; // tracker observing the step, median
  std::size_t provlets = 0, entities = 0, relations = 0, log_bytes = 0;
};

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
};

inline LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit f;
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0 ? 1.0 : sxy * sxy / (sxx * syy);
  return f;
}

struct BenchReport {
  std::vector<BenchSample> samples;
  std::vector<std::pair<BenchOp, LinearFit>> fits;  // capture seconds against rows
};

namespace detail {

using BenchClock = std::chrono::steady_clock;

inline double seconds_since(BenchClock::time_point t0) {
  return std::chrono::duration<double>(BenchClock::now() - t0).count();
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0;
  return v.size() % 2 ? v[v.size() / 2] : (v[v.size() / 2 - 1] + v[v.size() / 2]) / 2;
}

}  // namespace detail

inline BenchSample bench_one(BenchOp op, const SynthTables& t, const BenchOptions& o) {
  BenchSample s;
  s.op = op;
  const OperatorSpec spec = bench_spec(op);
  const bool binary = op == BenchOp::jo || op == BenchOp::ap;
  const Dataset& a = op == BenchOp::jo ? t.join_left : op == BenchOp::ap ? t.append_left : t.unary;
  const Dataset* b = op == BenchOp::jo ? &t.join_right : op == BenchOp::ap ? &t.append_right : nullptr;
  s.rows = a.rows() + (b ? b->rows() : 0);

  std::vector<double> op_t, cap_t;
  Batch last;
  for (std::size_t rep = 0; rep < std::max<std::size_t>(o.repeats, 1); ++rep) {
    Batch got;
    Tracker tr([&](Batch&& x) { got = std::move(x); }, TrackerOptions{o.workers, true});
    Frame fa = tr.subscribe(a);
    Frame fb = b ? tr.subscribe(*b) : Frame();
    RowIdAllocator alloc = tr.allocator();
    std::vector<const Dataset*> in = {&fa.data()};
    if (b) in.push_back(&fb.data());

    auto t0 = detail::BenchClock::now();
    Dataset out = apply_operator(spec, in, &alloc).data;
    op_t.push_back(detail::seconds_since(t0));

    StepHints hints;
    hints.function = describe(spec);
    if (auto* va = std::get_if<VaSpec>(&spec)) hints.inputs = va_input_features(*va);
    if (auto* ha = std::get_if<HaSpec>(&spec)) hints.group_keys = ha->keys;
    if (op == BenchOp::ig) tr.allocator() = alloc;
    t0 = detail::BenchClock::now();
    if (!binary) tr.observe(fa, std::move(out), hints);
    else if (op == BenchOp::jo) tr.observe_join(fa, fb, std::move(out), std::get<JoinSpec>(spec));
    else tr.observe_append(fa, fb, std::move(out));
    cap_t.push_back(detail::seconds_since(t0));
    last = std::move(got);
  }
  s.op_seconds = detail::median(op_t);
  s.capture_seconds = detail::median(cap_t);
  s.provlets = last.provlets.size();
  for (const auto& p : last.provlets) {
    s.entities += p.entities.size();
    s.relations += p.relations.size();
  }
  s.log_bytes = logfmt::encode_batch_body(last, 1).size();
  return s;
}

inline BenchReport run_bench(const BenchOptions& o) {
  BenchReport rep;
  std::vector<SynthTables> tables;
  for (auto n : o.sizes) {
    SynthOptions so;
    so.rows = n;
    so.features = o.features;
    so.seed = o.seed;
    tables.push_back(gen_synth(so));
  }
  // Repeats run in rounds over every (size, op) point so that a slow spell on
  // the host spreads across the fit instead of skewing one point.
  BenchOptions once = o;
  once.repeats = 1;
  std::vector<std::vector<double>> op_t(o.sizes.size() * o.ops.size()), cap_t(op_t.size());
  for (std::size_t round = 0; round < std::max<std::size_t>(o.repeats, 1); ++round) {
    for (std::size_t i = 0; i < tables.size(); ++i) {
      for (std::size_t k = 0; k < o.ops.size(); ++k) {
        BenchSample s = bench_one(o.ops[k], tables[i], once);
        std::size_t at = i * o.ops.size() + k;
        op_t[at].push_back(s.op_seconds);
        cap_t[at].push_back(s.capture_seconds);
        if (round == 0) rep.samples.push_back(s);
      }
    }
  }
  for (std::size_t at = 0; at < rep.samples.size(); ++at) {
    rep.samples[at].op_seconds = detail::median(op_t[at]);
    rep.samples[at].capture_seconds = detail::median(cap_t[at]);
  }
  for (auto op : o.ops) {
    std::vector<double> x, y;
    for (const auto& s : rep.samples) {
      if (s.op != op) continue;
      x.push_back(static_cast<double>(s.rows));
      y.push_back(s.capture_seconds);
    }
    rep.fits.emplace_back(op, fit_linear(x, y));
  }
  return rep;
}

inline void print_bench_text(std::ostream& os, const BenchReport& r) {
  os << "op\trows\top_s\tcapture_s\tprovlets\tentities\trelations\tlog_bytes\n";
  char buf[64];
  for (const auto& s : r.samples) {
    os << bench_op_name(s.op) << '\t' << s.rows << '\t';
    std::snprintf(buf, sizeof buf, "%.6f\t%.6f", s.op_seconds, s.capture_seconds);
    os << buf << '\t' << s.provlets << '\t' << s.entities << '\t' << s.relations << '\t' << s.log_bytes << '\n';
  }
  os << "\nop\tslope_s_per_row\tr2\n";
  for (const auto& [op, f] : r.fits) {
    std::snprintf(buf, sizeof buf, "%.3e\t%.4f", f.slope, f.r2);
    os << bench_op_name(op) << '\t' << buf << '\n';
  }
}

inline nlohmann::json bench_json(const BenchReport& r) {
  nlohmann::json j;
  j["samples"] = nlohmann::json::array();
  for (const auto& s : r.samples) {
    j["samples"].push_back({{"op", bench_op_name(s.op)},
                            {"rows", s.rows},
                            {"op_seconds", s.op_seconds},
                            {"capture_seconds", s.capture_seconds},
                            {"provlets", s.provlets},
                            {"entities", s.entities},
                            {"relations", s.relations},
                            {"log_bytes", s.log_bytes}});
  }
  j["fits"] = nlohmann::json::object();
  for (const auto& [op, f] : r.fits) j["fits"][bench_op_name(op)] = {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
  return j;
}

}  // namespace provtrack
