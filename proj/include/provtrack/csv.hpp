#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "provtrack/dataset.hpp"

namespace provtrack {

struct CsvOptions {
  bool header = true;
  bool infer_types = true;
  char delimiter = ',';
};

namespace detail {

struct CsvField {
  std::string text;
  bool quoted = false;
};

// RFC 4180 record splitter. Returns false at end of input. Quoted fields may span lines.
inline bool read_csv_record(std::istream& in, char delim, std::vector<CsvField>& out, std::size_t& line) {
  out.clear();
  int c = in.peek();
  if (c == EOF) return false;
  CsvField field;
  bool in_quotes = false, after_quote = false, any = false;
  while (true) {
    c = in.get();
    if (c == EOF) {
      if (in_quotes) throw DataError("unterminated quoted field starting before line " + std::to_string(line));
      break;
    }
    any = true;
    char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.text.push_back('"');
        } else {
          in_quotes = false;
          after_quote = true;
        }
      } else {
        if (ch == '\n') ++line;
        field.text.push_back(ch);
      }
      continue;
    }
    if (ch == delim) {
      out.push_back(std::move(field));
      field = {};
      after_quote = false;
      continue;
    }
    if (ch == '\r' && in.peek() == '\n') continue;
    if (ch == '\n') break;
    if (ch == '"' && field.text.empty() && !field.quoted) {
      in_quotes = true;
      field.quoted = true;
      continue;
    }
    if (after_quote) throw DataError("characters after closing quote on line " + std::to_string(line));
    field.text.push_back(ch);
  }
  ++line;
  if (any) out.push_back(std::move(field));
  return any;
}

}  // namespace detail

/// Reads a CSV stream. Unquoted empty fields become Null; a quoted empty field
/// is the empty string. With type inference a column whose non-null fields all
/// parse as numbers becomes numeric, one holding only true/false becomes
/// boolean, anything else stays string.
inline Dataset ingest_csv(std::istream& in, const CsvOptions& opt = {}, std::string id = {}) {
  std::vector<detail::CsvField> rec;
  std::size_t line = 1;
  std::vector<FeatureName> schema;
  std::vector<std::vector<detail::CsvField>> raw;
  bool have_width = false;
  std::size_t width = 0;
  if (opt.header) {
    if (!detail::read_csv_record(in, opt.delimiter, rec, line)) {
      return Dataset({}, {}, {}, std::move(id));
    }
    for (auto& f : rec) schema.push_back(std::move(f.text));
    width = schema.size();
    have_width = true;
  }
  while (true) {
    std::size_t start_line = line;
    if (!detail::read_csv_record(in, opt.delimiter, rec, line)) break;
    if (!have_width) {
      width = rec.size();
      have_width = true;
      for (std::size_t j = 0; j < width; ++j) schema.push_back("c" + std::to_string(j));
    }
    if (rec.size() != width) {
      throw DataError("ragged row on line " + std::to_string(start_line) + ": " + std::to_string(rec.size()) +
                      " fields, expected " + std::to_string(width));
    }
    raw.push_back(rec);
  }
  {
    std::unordered_set<std::string> seen;
    for (const auto& f : schema) {
      if (!seen.insert(f).second) throw DataError("duplicate header name '" + f + "'");
    }
  }
  std::vector<ColumnPtr> cols;
  cols.reserve(width);
  for (std::size_t j = 0; j < width; ++j) {
    enum class Kind { number, boolean, string } kind = Kind::number;
    bool any_value = false;
    if (!opt.infer_types) {
      kind = Kind::string;
    } else {
      bool num_ok = true, bool_ok = true;
      for (const auto& r : raw) {
        const auto& f = r[j];
        if (!f.quoted && f.text.empty()) continue;
        any_value = true;
        if (num_ok && (f.quoted || !parse_number(f.text))) num_ok = false;
        if (bool_ok && f.text != "true" && f.text != "false") bool_ok = false;
        if (!num_ok && !bool_ok) break;
      }
      kind = !any_value ? Kind::string : num_ok ? Kind::number : bool_ok ? Kind::boolean : Kind::string;
    }
    Column c;
    c.reserve(raw.size());
    for (const auto& r : raw) {
      const auto& f = r[j];
      if (!f.quoted && f.text.empty()) {
        c.emplace_back(Null{});
      } else if (kind == Kind::number) {
        c.emplace_back(*parse_number(f.text));
      } else if (kind == Kind::boolean) {
        c.emplace_back(f.text == "true");
      } else {
        c.emplace_back(f.text);
      }
    }
    cols.push_back(std::make_shared<const Column>(std::move(c)));
  }
  std::vector<RowId> ids(raw.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  return Dataset(std::move(schema), std::move(cols), std::move(ids), std::move(id));
}

inline Dataset ingest_csv_text(const std::string& text, const CsvOptions& opt = {}, std::string id = {}) {
  std::istringstream in(text);
  return ingest_csv(in, opt, std::move(id));
}

inline Dataset ingest_csv_file(const std::string& path, const CsvOptions& opt = {}, std::string id = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return ingest_csv(in, opt, std::move(id));
}

namespace detail {

inline void write_csv_field(std::ostream& out, const std::string& s, bool force_quote, char delim) {
  bool quote = force_quote || s.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string::npos;
  if (!quote) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

}  // namespace detail

/// Null is written as an empty field; an empty string is written as "".
inline void write_csv(std::ostream& out, const Dataset& d, char delim = ',') {
  for (std::size_t j = 0; j < d.cols(); ++j) {
    if (j) out << delim;
    detail::write_csv_field(out, d.schema()[j], false, delim);
  }
  out << '\n';
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.cols(); ++j) {
      if (j) out << delim;
      const Value& v = d.at(i, j);
      if (v.is_null()) continue;
      // Strings that would read back as another type are quoted to keep their type.
      bool force = v.is_string() && (v.as_string().empty() || parse_number(v.as_string()) ||
                                     v.as_string() == "true" || v.as_string() == "false");
      detail::write_csv_field(out, to_string(v), force, delim);
    }
    out << '\n';
  }
}

inline std::string to_csv(const Dataset& d) {
  std::ostringstream out;
  write_csv(out, d);
  return out.str();
}

}  // namespace provtrack
