// provtrack command line: run pipelines, query and export provenance logs,
// generate synthetic data and benchmark capture.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "provtrack/provtrack.hpp"

using namespace provtrack;

namespace {

int exit_code(const Error& e) { return static_cast<int>(e.kind()); }

ProvGraph load_graph(const std::string& path, bool allow_incomplete) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (text.rfind("PROVLOG/", 0) == 0) {
    std::istringstream is(text);
    return build_graph(read_log(is), BuildOptions{allow_incomplete});
  }
  return import_prov_json(text);
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      unsigned long long v = std::stoull(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw ValidationError("bad size '" + tok + "'");
    }
  }
  if (out.empty()) throw ValidationError("no sizes given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fine-grained provenance capture for dataframe pipelines"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Execute a pipeline and capture its provenance");
  std::string pipeline_path, log_path, out_dir;
  bool no_track = false, quiet = false;
  unsigned workers = 1;
  run->add_option("pipeline", pipeline_path, "pipeline JSON file")->required();
  run->add_flag("--track,!--no-track", [&](std::int64_t n) { no_track = n < 0; }, "capture provenance (default on)");
  run->add_option("--log", log_path, "provenance log path (overrides the pipeline)");
  run->add_option("--workers", workers, "worker threads per step")->check(CLI::Range(1u, 256u));
  run->add_option("--out-dir", out_dir, "directory for output CSVs");
  run->add_flag("-q,--quiet", quiet, "suppress the summary");

  // query
  auto* query = app.add_subcommand("query", "Run a provenance query against a log or PROV-JSON file");
  std::string q_log, q_id, q_feature;
  std::optional<RowId> q_row, q_row_id;
  std::optional<OpSeq> q_frontier;
  bool q_json = false, q_incomplete = false;
  query->add_option("log", q_log, "provenance log or PROV-JSON file")->required();
  query->add_option("query", q_id, "PQ1 .. PQ13")->required();
  auto* row_opt = query->add_option("--row", q_row, "row position, 1-based");
  query->add_option("--row-id", q_row_id, "row id as stored in the log")->excludes(row_opt);
  query->add_option("--feature", q_feature, "feature name");
  query->add_option("--frontier", q_frontier, "resolve references as of this op_seq");
  query->add_flag("--json", q_json, "JSON output");
  query->add_flag("--allow-incomplete", q_incomplete, "accept a log without an end record");

  // export
  auto* exp = app.add_subcommand("export", "Convert a provenance log to PROV-JSON");
  std::string e_log, e_out;
  exp->add_option("log", e_log, "provenance log")->required();
  exp->add_option("-o,--output", e_out, "output file (default stdout)");

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Write synthetic benchmark tables as CSV");
  SynthOptions so;
  std::string g_dir = ".";
  gen->add_option("--rows", so.rows, "rows in the unary table")->required();
  gen->add_option("--features", so.features, "unary table width")->check(CLI::Range(6, 1000));
  gen->add_option("--null-rate", so.null_rate, "null rate of generic columns")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", so.seed, "random seed");
  gen->add_option("--out-dir", g_dir, "output directory");

  // bench
  auto* bench = app.add_subcommand("bench", "Measure capture overhead per operation class");
  BenchOptions bo;
  std::string b_sizes = "10000,50000,100000", b_ops;
  bool b_json = false;
  bench->add_option("--sizes", b_sizes, "comma-separated row counts");
  bench->add_option("--ops", b_ops, "comma-separated subset of DR,FT,I,ST,IG,VT,JO,AP");
  bench->add_option("--features", bo.features, "unary table width")->check(CLI::Range(6, 1000));
  bench->add_option("--repeats", bo.repeats, "repeats per measurement (median is reported)")->check(CLI::Range(1, 100));
  bench->add_option("--workers", bo.workers, "worker threads")->check(CLI::Range(1u, 256u));
  bench->add_option("--seed", bo.seed, "random seed");
  bench->add_flag("--json", b_json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      PipelineSpec p = load_pipeline(pipeline_path);
      RunOptions opt;
      opt.track = !no_track;
      opt.workers = workers;
      if (!log_path.empty()) opt.log_path = log_path;
      if (!out_dir.empty()) opt.output_dir = out_dir;
      RunResult r = run_pipeline(p, opt);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      if (!quiet) {
        std::cout << "steps\t" << p.steps.size() << "\nactivities\t" << r.activities << "\nprovlets\t" << r.provlets
                  << "\nentities\t" << r.entities << "\nrelations\t" << r.relations << "\nlog_bytes\t" << r.log_bytes
                  << "\n";
      }
      return 0;
    }
    if (*query) {
      auto id = parse_query_id(q_id);
      if (!id) {
        std::cerr << "error: unknown query '" << q_id << "'; expected one of PQ1 .. PQ13\n";
        for (int i = 1; i <= kQueryCount; ++i) {
          auto qi = static_cast<QueryId>(i);
          std::cerr << "  " << query_name(qi) << "  " << query_description(qi) << "\n";
        }
        return 2;
      }
      ProvGraph g = load_graph(q_log, q_incomplete);
      QueryArgs a;
      if (q_row) {
        if (*q_row == 0) throw ValidationError("--row is 1-based");
        a.row = *q_row - 1;
      }
      if (q_row_id) a.row = *q_row_id;
      if (!q_feature.empty()) a.feature = q_feature;
      a.frontier = q_frontier;
      QueryResult r = run_query(g, *id, a);
      if (q_json) std::cout << render_json(g, r).dump(1) << "\n";
      else std::cout << render_text(g, r);
      return 0;
    }
    if (*exp) {
      ProvGraph g = build_graph_file(e_log);
      std::string text = export_prov_json(g);
      if (e_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream f(e_out, std::ios::binary);
        if (!f) throw DataError("cannot write '" + e_out + "'");
        f << text;
      }
      return 0;
    }
    if (*gen) {
      for (const auto& p : write_synth(gen_synth(so), g_dir)) std::cout << p << "\n";
      return 0;
    }
    if (*bench) {
      bo.sizes = parse_sizes(b_sizes);
      if (!b_ops.empty()) {
        bo.ops.clear();
        std::stringstream ss(b_ops);
        std::string tok;
        while (std::getline(ss, tok, ',')) bo.ops.push_back(parse_bench_op(tok));
      }
      BenchReport rep = run_bench(bo);
      if (b_json) std::cout << bench_json(rep).dump(1) << "\n";
      else print_bench_text(std::cout, rep);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
