#pragma once

// Append-only provenance log.
//
//   PROVLOG/1\n
//   <len> <tag><payload>\n      (len = byte length of tag + payload)
//
// Payload fields are tab separated; \\ \t \n inside a field are escaped.
// Tags:
//   B  batch begin      seq, checksum, record count
//   A  activity         id, op_seq, class, function, features...
//   P  provlet begin    provlet id, activity id
//   E  entity           id, op_seq, row, feature, value
//   R  relation         kind, src, tgt
//   O  op record        JSON document
//   C  batch commit     seq, checksum
//   Z  log complete
//   X  log aborted      reason
// Values: N null, B1/B0 booleans, D<number>, S<string>.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "provtrack/error.hpp"
#include "provtrack/hash.hpp"
#include "provtrack/prov_model.hpp"

namespace provtrack {

inline constexpr std::string_view kLogMagic = "PROVLOG/1";

namespace logfmt {

inline std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out.push_back(s[i]);
      continue;
    }
    if (++i == s.size()) throw IntegrityError("dangling escape in log field");
    switch (s[i]) {
      case '\\': out.push_back('\\'); break;
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      default: throw IntegrityError(std::string("bad escape \\") + s[i] + " in log field");
    }
  }
  return out;
}

inline std::vector<std::string> split_fields(std::string_view payload) {
  std::vector<std::string> out;
  std::size_t b = 0;
  while (true) {
    auto e = payload.find('\t', b);
    out.push_back(unescape(payload.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b)));
    if (e == std::string_view::npos) break;
    b = e + 1;
  }
  return out;
}

inline std::string encode_value(const Value& v) {
  switch (v.type()) {
    case ValueType::null: return "N";
    case ValueType::boolean: return v.as_bool() ? "B1" : "B0";
    case ValueType::number: return "D" + format_number(v.as_number());
    case ValueType::string: return "S" + v.as_string();
  }
  return "N";
}

inline Value decode_value(std::string_view s) {
  if (s == "N") return Value();
  if (s == "B1") return Value(true);
  if (s == "B0") return Value(false);
  if (!s.empty() && s[0] == 'S') return Value(std::string(s.substr(1)));
  if (!s.empty() && s[0] == 'D') {
    auto body = s.substr(1);
    if (body == "nan") return Value(std::nan(""));
    if (body == "inf") return Value(HUGE_VAL);
    if (body == "-inf") return Value(-HUGE_VAL);
    if (auto d = parse_number(body)) return Value(*d);
  }
  throw IntegrityError("bad value encoding '" + std::string(s) + "'");
}

inline std::uint64_t parse_u64(const std::string& s, const char* what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw IntegrityError(std::string("bad ") + what + " '" + s + "'");
  return v;
}

inline nlohmann::json opt_json(const std::optional<double>& d) { return d ? nlohmann::json(*d) : nlohmann::json(); }

inline nlohmann::json value_json(const Value& v) {
  switch (v.type()) {
    case ValueType::null: return nullptr;
    case ValueType::boolean: return v.as_bool();
    case ValueType::number: return v.as_number();
    case ValueType::string: return v.as_string();
  }
  return nullptr;
}

inline Value json_value(const nlohmann::json& j) {
  if (j.is_null()) return Value();
  if (j.is_boolean()) return Value(j.get<bool>());
  if (j.is_number()) return Value(j.get<double>());
  if (j.is_string()) return Value(j.get<std::string>());
  throw IntegrityError("unsupported JSON value " + j.dump());
}

inline nlohmann::json stats_json(const FrameStats& s) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : s.columns) {
    cols.push_back({{"feature", c.feature},
                    {"count", c.count},
                    {"null_count", c.null_count},
                    {"min", opt_json(c.min)},
                    {"max", opt_json(c.max)},
                    {"mean", opt_json(c.mean)},
                    {"stddev", opt_json(c.stddev)},
                    {"distinct_count", c.distinct_count},
                    {"mode", value_json(c.mode)},
                    {"mode_count", c.mode_count}});
  }
  return {{"dataset", s.dataset_id}, {"rows", s.rows}, {"cols", s.cols}, {"columns", cols}};
}

inline std::optional<double> json_opt(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline FrameStats json_stats(const nlohmann::json& j) {
  FrameStats s;
  s.dataset_id = j.at("dataset").get<std::string>();
  s.rows = j.at("rows").get<std::size_t>();
  s.cols = j.at("cols").get<std::size_t>();
  for (const auto& c : j.at("columns")) {
    ColumnStats cs;
    cs.feature = c.at("feature").get<std::string>();
    cs.count = c.at("count").get<std::size_t>();
    cs.null_count = c.at("null_count").get<std::size_t>();
    cs.min = json_opt(c.at("min"));
    cs.max = json_opt(c.at("max"));
    cs.mean = json_opt(c.at("mean"));
    cs.stddev = json_opt(c.at("stddev"));
    cs.distinct_count = c.at("distinct_count").get<std::size_t>();
    cs.mode = json_value(c.at("mode"));
    cs.mode_count = c.at("mode_count").get<std::size_t>();
    s.columns.push_back(std::move(cs));
  }
  return s;
}

inline nlohmann::json op_record_json(const OpRecord& r) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& s : r.inputs) inputs.push_back(stats_json(s));
  return {{"op_seq", r.op_seq},
          {"class", r.cls ? nlohmann::json(activity_class_name(*r.cls)) : nlohmann::json()},
          {"function", r.function},
          {"features", r.features},
          {"inputs", inputs},
          {"output", stats_json(r.output)}};
}

inline OpRecord json_op_record(const nlohmann::json& j) {
  OpRecord r;
  r.op_seq = j.at("op_seq").get<OpSeq>();
  if (!j.at("class").is_null()) r.cls = parse_activity_class(j.at("class").get<std::string>());
  r.function = j.at("function").get<std::string>();
  r.features = j.at("features").get<std::vector<FeatureName>>();
  for (const auto& s : j.at("inputs")) r.inputs.push_back(json_stats(s));
  r.output = json_stats(j.at("output"));
  return r;
}

inline void put_record(std::string& out, char tag, const std::string& payload) {
  out += std::to_string(payload.size() + 1);
  out.push_back(' ');
  out.push_back(tag);
  out += payload;
  out.push_back('\n');
}

inline std::string join_fields(std::initializer_list<std::string> fields) {
  std::string s;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) s.push_back('\t');
    s += escape(f);
    first = false;
  }
  return s;
}

// Records of a batch between its B and C lines. Provlet ids are filled in
// from the batch sequence number at write time.
inline std::string encode_batch_body(const Batch& b, std::uint64_t seq) {
  std::string out;
  for (const auto& a : b.activities) {
    std::string p = join_fields({a.id, std::to_string(a.op_seq), activity_class_name(a.cls), a.function});
    for (const auto& f : a.features) {
      p.push_back('\t');
      p += escape(f);
    }
    put_record(out, 'A', p);
  }
  for (std::size_t i = 0; i < b.provlets.size(); ++i) {
    const auto& pl = b.provlets[i];
    put_record(out, 'P', join_fields({"p:" + std::to_string(seq) + ":" + std::to_string(i), pl.activity}));
    for (const auto& e : pl.entities) {
      put_record(out, 'E', join_fields({e.id, std::to_string(e.op_seq), std::to_string(e.row), e.feature,
                                        encode_value(e.value)}));
    }
    for (const auto& r : pl.relations) put_record(out, 'R', join_fields({relation_kind_name(r.kind), r.src, r.tgt}));
  }
  for (const auto& r : b.records) put_record(out, 'O', escape(op_record_json(r).dump()));
  return out;
}

inline std::size_t batch_record_count(const Batch& b) {
  std::size_t n = b.activities.size() + b.records.size();
  for (const auto& p : b.provlets) n += 1 + p.entities.size() + p.relations.size();
  return n;
}

}  // namespace logfmt

/// Checksum of a batch's content, independent of where it lands in the log.
inline std::uint64_t batch_checksum(const Batch& b) { return fnv1a64(logfmt::encode_batch_body(b, 0)); }

struct AppendResult {
  std::uint64_t offset = 0;  // bytes committed after this call
  bool duplicate = false;
  bool written = false;
};

/// Log writer. Thread safe; batches are written whole. With `background`
/// set, append_async hands batches to a writer thread.
class ProvLogWriter {
 public:
  explicit ProvLogWriter(std::ostream& out, bool background = false) : out_(&out) { start(background); }

  explicit ProvLogWriter(const std::string& path, bool background = false)
      : file_(std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc)) {
    if (!*file_) throw DataError("cannot open log file '" + path + "'");
    out_ = file_.get();
    start(background);
  }

  ProvLogWriter(const ProvLogWriter&) = delete;
  ProvLogWriter& operator=(const ProvLogWriter&) = delete;

  ~ProvLogWriter() {
    try {
      stop_worker();
    } catch (...) {
    }
  }

  AppendResult append(const Batch& b) {
    std::lock_guard lk(mu_);
    return append_locked(b);
  }

  void append_async(Batch b) {
    if (!worker_.joinable()) {
      append(b);
      return;
    }
    {
      std::lock_guard lk(qmu_);
      queue_.push_back(std::move(b));
    }
    qcv_.notify_one();
  }

  /// Waits for queued batches and flushes the stream.
  void flush() {
    if (worker_.joinable()) {
      std::unique_lock lk(qmu_);
      idle_cv_.wait(lk, [&] { return queue_.empty() && !busy_; });
    }
    std::lock_guard lk(mu_);
    rethrow_worker_error();
    out_->flush();
  }

  void close() { finish('Z', ""); }
  void abort(const std::string& reason) { finish('X', reason); }

  std::uint64_t offset() const {
    std::lock_guard lk(mu_);
    return offset_;
  }
  std::size_t duplicate_batches() const {
    std::lock_guard lk(mu_);
    return duplicates_;
  }
  bool closed() const {
    std::lock_guard lk(mu_);
    return closed_;
  }

 private:
  void start(bool background) {
    std::string hdr(kLogMagic);
    hdr.push_back('\n');
    out_->write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    offset_ = hdr.size();
    if (background) worker_ = std::thread([this] { run_worker(); });
  }

  void finish(char tag, const std::string& payload) {
    flush();
    stop_worker();
    std::lock_guard lk(mu_);
    if (closed_) return;
    std::string rec;
    logfmt::put_record(rec, tag, logfmt::escape(payload));
    write_locked(rec);
    out_->flush();
    closed_ = true;
  }

  AppendResult append_locked(const Batch& b) {
    if (closed_) throw DataError("log is closed");
    AppendResult res{offset_, false, false};
    if (b.empty()) return res;
    std::string body = logfmt::encode_batch_body(b, seq_);
    std::uint64_t sum = fnv1a64(logfmt::encode_batch_body(b, 0));
    if (!checksums_.insert(sum).second) {
      ++duplicates_;
      res.duplicate = true;
      return res;
    }
    for (const auto& r : b.records) {
      if (op_seqs_.count(r.op_seq)) {
        checksums_.erase(sum);
        throw IntegrityError("duplicate op record for op_seq " + std::to_string(r.op_seq));
      }
    }
    for (const auto& r : b.records) op_seqs_.insert(r.op_seq);
    std::string rec;
    logfmt::put_record(rec, 'B', logfmt::join_fields({std::to_string(seq_), to_hex(sum),
                                                      std::to_string(logfmt::batch_record_count(b))}));
    rec += body;
    logfmt::put_record(rec, 'C', logfmt::join_fields({std::to_string(seq_), to_hex(sum)}));
    write_locked(rec);
    ++seq_;
    res.offset = offset_;
    res.written = true;
    return res;
  }

  void write_locked(const std::string& s) {
    out_->write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!*out_) throw DataError("log write failed");
    offset_ += s.size();
  }

  void run_worker() {
    while (true) {
      std::unique_lock lk(qmu_);
      qcv_.wait(lk, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      Batch b = std::move(queue_.front());
      queue_.pop_front();
      busy_ = true;
      lk.unlock();
      try {
        append(b);
      } catch (...) {
        std::lock_guard g(mu_);
        if (!worker_error_) worker_error_ = std::current_exception();
      }
      lk.lock();
      busy_ = false;
      if (queue_.empty()) idle_cv_.notify_all();
    }
  }

  void stop_worker() {
    if (!worker_.joinable()) return;
    {
      std::lock_guard lk(qmu_);
      stopping_ = true;
    }
    qcv_.notify_all();
    worker_.join();
  }

  void rethrow_worker_error() {
    if (worker_error_) {
      auto e = worker_error_;
      worker_error_ = nullptr;
      std::rethrow_exception(e);
    }
  }

  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_ = nullptr;
  mutable std::mutex mu_;
  std::uint64_t offset_ = 0;
  std::uint64_t seq_ = 0;
  std::size_t duplicates_ = 0;
  std::set<std::uint64_t> checksums_;
  std::set<OpSeq> op_seqs_;
  bool closed_ = false;
  std::exception_ptr worker_error_;

  std::thread worker_;
  std::mutex qmu_;
  std::condition_variable qcv_, idle_cv_;
  std::deque<Batch> queue_;
  bool stopping_ = false;
  bool busy_ = false;
};

/// One committed batch as read back. Provlets carry their log ids.
struct LoggedProvlet {
  std::string id;
  Provlet provlet;
};

struct LoggedBatch {
  std::uint64_t seq = 0;
  std::uint64_t checksum = 0;
  std::vector<Activity> activities;
  std::vector<LoggedProvlet> provlets;
  std::vector<OpRecord> records;
};

struct LogContents {
  std::vector<LoggedBatch> batches;
  bool complete = false;
  std::optional<std::string> abort_reason;
  std::size_t duplicate_batches = 0;
  std::size_t uncommitted_records = 0;  // trailing records of a batch with no commit line
};

/// Reads a log. Framing and field errors raise IntegrityError; a trailing
/// batch without its commit line is dropped and counted.
inline LogContents read_log(std::istream& in) {
  LogContents out;
  std::string line;
  if (!std::getline(in, line) || line != kLogMagic) throw IntegrityError("not a provenance log (bad header)");
  std::optional<LoggedBatch> cur;
  std::size_t cur_records = 0;
  std::size_t expected = 0;
  std::set<std::uint64_t> seen;
  LoggedProvlet* provlet = nullptr;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto sp = line.find(' ');
    if (sp == std::string::npos || sp == 0) throw IntegrityError("log line " + std::to_string(lineno) + ": bad framing");
    std::uint64_t len = logfmt::parse_u64(line.substr(0, sp), "record length");
    if (len != line.size() - sp - 1 || len == 0) {
      throw IntegrityError("log line " + std::to_string(lineno) + ": length prefix mismatch");
    }
    char tag = line[sp + 1];
    std::string_view payload = std::string_view(line).substr(sp + 2);
    auto fields = logfmt::split_fields(payload);
    auto need = [&](std::size_t n) {
      if (fields.size() < n) throw IntegrityError("log line " + std::to_string(lineno) + ": too few fields");
    };
    auto in_batch = [&] {
      if (!cur) throw IntegrityError("log line " + std::to_string(lineno) + ": record outside a batch");
      ++cur_records;
    };
    switch (tag) {
      case 'B':
        if (cur) throw IntegrityError("log line " + std::to_string(lineno) + ": nested batch");
        need(3);
        cur.emplace();
        cur->seq = logfmt::parse_u64(fields[0], "batch seq");
        try {
          std::size_t pos = 0;
          cur->checksum = std::stoull(fields[1], &pos, 16);
          if (pos != fields[1].size()) throw std::invalid_argument(fields[1]);
        } catch (const std::logic_error&) {
          throw IntegrityError("log line " + std::to_string(lineno) + ": bad checksum field");
        }
        expected = logfmt::parse_u64(fields[2], "record count");
        cur_records = 0;
        provlet = nullptr;
        break;
      case 'A': {
        in_batch();
        need(4);
        Activity a;
        a.id = fields[0];
        a.op_seq = logfmt::parse_u64(fields[1], "op_seq");
        a.cls = parse_activity_class(fields[2]);
        a.function = fields[3];
        a.features.assign(fields.begin() + 4, fields.end());
        cur->activities.push_back(std::move(a));
        break;
      }
      case 'P':
        in_batch();
        need(2);
        cur->provlets.push_back({fields[0], Provlet{fields[1], {}, {}}});
        provlet = &cur->provlets.back();
        break;
      case 'E': {
        in_batch();
        need(5);
        if (!provlet) throw IntegrityError("log line " + std::to_string(lineno) + ": entity outside a provlet");
        Entity e;
        e.id = fields[0];
        e.op_seq = logfmt::parse_u64(fields[1], "op_seq");
        e.row = logfmt::parse_u64(fields[2], "row");
        e.feature = fields[3];
        e.value = logfmt::decode_value(fields[4]);
        provlet->provlet.entities.push_back(std::move(e));
        break;
      }
      case 'R':
        in_batch();
        need(3);
        if (!provlet) throw IntegrityError("log line " + std::to_string(lineno) + ": relation outside a provlet");
        provlet->provlet.relations.push_back({parse_relation_kind(fields[0]), fields[1], fields[2]});
        break;
      case 'O':
        in_batch();
        try {
          cur->records.push_back(logfmt::json_op_record(nlohmann::json::parse(fields[0])));
        } catch (const nlohmann::json::exception& e) {
          throw IntegrityError("log line " + std::to_string(lineno) + ": bad op record: " + e.what());
        }
        break;
      case 'C':
        if (!cur) throw IntegrityError("log line " + std::to_string(lineno) + ": commit outside a batch");
        if (cur_records != expected) {
          throw IntegrityError("batch " + std::to_string(cur->seq) + " holds " + std::to_string(cur_records) +
                               " records, header says " + std::to_string(expected));
        }
        {
          Batch body{cur->activities, {}, cur->records};
          for (const auto& lp : cur->provlets) body.provlets.push_back(lp.provlet);
          if (batch_checksum(body) != cur->checksum) {
            throw IntegrityError("batch " + std::to_string(cur->seq) + " fails its checksum");
          }
        }
        if (seen.insert(cur->checksum).second) {
          out.batches.push_back(std::move(*cur));
        } else {
          ++out.duplicate_batches;
        }
        cur.reset();
        break;
      case 'Z':
        out.complete = true;
        break;
      case 'X':
        out.abort_reason = fields.empty() ? std::string() : fields[0];
        break;
      default:
        throw IntegrityError("log line " + std::to_string(lineno) + ": unknown record tag '" + std::string(1, tag) + "'");
    }
  }
  if (cur) out.uncommitted_records = cur_records;
  return out;
}

inline LogContents read_log_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open log file '" + path + "'");
  return read_log(in);
}

}  // namespace provtrack
