#pragma once

// Condition and function mini-language.
//
//   expr     := or_expr
//   or_expr  := and_expr { "or" and_expr }
//   and_expr := not_expr { "and" not_expr }
//   not_expr := "not" not_expr | cmp_expr
//   cmp_expr := add_expr [ cmp_op add_expr ] [ "is" ["not"] "null" ]
//   add_expr := mul_expr { ("+" | "-") mul_expr }
//   mul_expr := unary { ("*" | "/" | "%") unary }
//   unary    := "-" unary | primary
//   primary  := number | string | "true" | "false" | "null" | "@"
//             | ident | "`" chars "`" | builtin "(" [ expr { "," expr } ] ")" | "(" expr ")"
//
// Strings are single quoted ('' escapes a quote). "@" is the current cell in a
// column transformation. Builtins: abs(x), len(s), if(c, a, b).
//
// Evaluation uses three-valued logic internally; a Null condition counts as
// false when a row condition is tested. Any arithmetic or comparison touching
// Null yields Null. Comparing values of different types is a TypeError.

#include <cctype>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "provtrack/dataset.hpp"
#include "provtrack/error.hpp"
#include "provtrack/value.hpp"

namespace provtrack {

enum class ExprKind : std::uint8_t {
  literal,
  column,
  current,
  compare,
  logical_and,
  logical_or,
  logical_not,
  is_null,
  is_not_null,
  arith,
  negate,
  call
};

enum class CompareOp : std::uint8_t { eq, ne, lt, le, gt, ge };
enum class ArithOp : std::uint8_t { add, sub, mul, div, mod };
enum class Builtin : std::uint8_t { none, abs, len, if_ };

struct Expr {
  ExprKind kind = ExprKind::literal;
  Value literal;
  std::string name;  // column name for column refs
  CompareOp cmp = CompareOp::eq;
  ArithOp arith = ArithOp::add;
  Builtin builtin = Builtin::none;
  std::vector<Expr> children;

  bool operator==(const Expr&) const = default;
};

namespace expr {

inline Expr lit(Value v) {
  Expr e;
  e.kind = ExprKind::literal;
  e.literal = std::move(v);
  return e;
}
inline Expr col(std::string name) {
  Expr e;
  e.kind = ExprKind::column;
  e.name = std::move(name);
  return e;
}
inline Expr current() {
  Expr e;
  e.kind = ExprKind::current;
  return e;
}
inline Expr compare(CompareOp op, Expr a, Expr b) {
  Expr e;
  e.kind = ExprKind::compare;
  e.cmp = op;
  e.children = {std::move(a), std::move(b)};
  return e;
}
inline Expr binary(ExprKind kind, Expr a, Expr b) {
  Expr e;
  e.kind = kind;
  e.children = {std::move(a), std::move(b)};
  return e;
}
inline Expr and_(Expr a, Expr b) { return binary(ExprKind::logical_and, std::move(a), std::move(b)); }
inline Expr or_(Expr a, Expr b) { return binary(ExprKind::logical_or, std::move(a), std::move(b)); }
inline Expr unary(ExprKind kind, Expr a) {
  Expr e;
  e.kind = kind;
  e.children = {std::move(a)};
  return e;
}
inline Expr not_(Expr a) { return unary(ExprKind::logical_not, std::move(a)); }
inline Expr is_null(Expr a) { return unary(ExprKind::is_null, std::move(a)); }
inline Expr arith(ArithOp op, Expr a, Expr b) {
  Expr e;
  e.kind = ExprKind::arith;
  e.arith = op;
  e.children = {std::move(a), std::move(b)};
  return e;
}
inline Expr call(Builtin b, std::vector<Expr> args) {
  Expr e;
  e.kind = ExprKind::call;
  e.builtin = b;
  e.children = std::move(args);
  return e;
}

}  // namespace expr

namespace detail {

enum class Tok : std::uint8_t {
  end,
  number,
  string,
  ident,
  quoted_ident,
  lparen,
  rparen,
  comma,
  at,
  plus,
  minus,
  star,
  slash,
  percent,
  eq,
  ne,
  lt,
  le,
  gt,
  ge
};

struct Token {
  Tok kind = Tok::end;
  std::string text;
  std::size_t offset = 0;
};

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

inline std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto push = [&](Tok k, std::size_t at, std::string text = {}) { out.push_back({k, std::move(text), at}); };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
      if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
        if (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
          i = j;
          while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        }
      }
      std::string text(s.substr(start, i - start));
      if (!parse_number(text)) throw SyntaxError("malformed number '" + text + "'", start);
      push(Tok::number, start, std::move(text));
      continue;
    }
    if (ident_start(c)) {
      while (i < s.size() && ident_char(s[i])) ++i;
      push(Tok::ident, start, std::string(s.substr(start, i - start)));
      continue;
    }
    if (c == '\'' || c == '`') {
      std::string text;
      ++i;
      bool closed = false;
      while (i < s.size()) {
        if (s[i] == c) {
          if (i + 1 < s.size() && s[i + 1] == c) {
            text.push_back(c);
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        text.push_back(s[i++]);
      }
      if (!closed) throw SyntaxError(c == '\'' ? "unterminated string literal" : "unterminated quoted name", start);
      push(c == '\'' ? Tok::string : Tok::quoted_ident, start, std::move(text));
      continue;
    }
    auto two = s.substr(i, 2);
    if (two == "==") { push(Tok::eq, start); i += 2; continue; }
    if (two == "!=") { push(Tok::ne, start); i += 2; continue; }
    if (two == "<=") { push(Tok::le, start); i += 2; continue; }
    if (two == ">=") { push(Tok::ge, start); i += 2; continue; }
    switch (c) {
      case '<': push(Tok::lt, start); break;
      case '>': push(Tok::gt, start); break;
      case '(': push(Tok::lparen, start); break;
      case ')': push(Tok::rparen, start); break;
      case ',': push(Tok::comma, start); break;
      case '@': push(Tok::at, start); break;
      case '+': push(Tok::plus, start); break;
      case '-': push(Tok::minus, start); break;
      case '*': push(Tok::star, start); break;
      case '/': push(Tok::slash, start); break;
      case '%': push(Tok::percent, start); break;
      default: throw SyntaxError(std::string("unexpected character '") + c + "'", start);
    }
    ++i;
  }
  out.push_back({Tok::end, {}, s.size()});
  return out;
}

inline bool keyword_eq(const Token& t, std::string_view kw) {
  if (t.kind != Tok::ident || t.text.size() != kw.size()) return false;
  for (std::size_t i = 0; i < kw.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(t.text[i])) != kw[i]) return false;
  }
  return true;
}

inline bool is_keyword(std::string_view word) {
  Token t{Tok::ident, std::string(word), 0};
  for (auto kw : {"and", "or", "not", "is", "null", "true", "false", "in"}) {
    if (keyword_eq(t, kw)) return true;
  }
  return false;
}

class ExprParser {
 public:
  explicit ExprParser(std::string_view text) : toks_(lex(text)) {}

  Expr parse_all() {
    Expr e = parse_or();
    if (peek().kind != Tok::end) fail("unexpected input");
    return e;
  }

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  bool accept_kw(std::string_view kw) {
    if (keyword_eq(peek(), kw)) {
      ++pos_;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    if (peek().kind == Tok::end) throw SyntaxError("unexpected end of input", peek().offset);
    throw SyntaxError(what, peek().offset);
  }
  void expect(Tok k, const char* what) {
    if (peek().kind != k) fail(std::string("expected ") + what);
    ++pos_;
  }

  Expr parse_or() {
    Expr e = parse_and();
    while (accept_kw("or")) e = expr::or_(std::move(e), parse_and());
    return e;
  }
  Expr parse_and() {
    Expr e = parse_not();
    while (accept_kw("and")) e = expr::and_(std::move(e), parse_not());
    return e;
  }
  Expr parse_not() {
    if (accept_kw("not")) return expr::not_(parse_not());
    return parse_cmp();
  }
  Expr parse_cmp() {
    Expr e = parse_add();
    std::optional<CompareOp> op;
    switch (peek().kind) {
      case Tok::eq: op = CompareOp::eq; break;
      case Tok::ne: op = CompareOp::ne; break;
      case Tok::lt: op = CompareOp::lt; break;
      case Tok::le: op = CompareOp::le; break;
      case Tok::gt: op = CompareOp::gt; break;
      case Tok::ge: op = CompareOp::ge; break;
      default: break;
    }
    if (op) {
      ++pos_;
      e = expr::compare(*op, std::move(e), parse_add());
    }
    if (accept_kw("is")) {
      bool negated = accept_kw("not");
      if (!accept_kw("null")) fail("expected 'null'");
      e = expr::unary(negated ? ExprKind::is_not_null : ExprKind::is_null, std::move(e));
    }
    return e;
  }
  Expr parse_add() {
    Expr e = parse_mul();
    while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
      ArithOp op = next().kind == Tok::plus ? ArithOp::add : ArithOp::sub;
      e = expr::arith(op, std::move(e), parse_mul());
    }
    return e;
  }
  Expr parse_mul() {
    Expr e = parse_unary();
    while (peek().kind == Tok::star || peek().kind == Tok::slash || peek().kind == Tok::percent) {
      Tok k = next().kind;
      ArithOp op = k == Tok::star ? ArithOp::mul : k == Tok::slash ? ArithOp::div : ArithOp::mod;
      e = expr::arith(op, std::move(e), parse_unary());
    }
    return e;
  }
  Expr parse_unary() {
    if (peek().kind == Tok::minus) {
      ++pos_;
      return expr::unary(ExprKind::negate, parse_unary());
    }
    return parse_primary();
  }
  Expr parse_primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::number: ++pos_; return expr::lit(*parse_number(t.text));
      case Tok::string: ++pos_; return expr::lit(t.text);
      case Tok::at: ++pos_; return expr::current();
      case Tok::quoted_ident: ++pos_; return expr::col(t.text);
      case Tok::lparen: {
        ++pos_;
        Expr e = parse_or();
        expect(Tok::rparen, "')'");
        return e;
      }
      case Tok::ident: {
        if (keyword_eq(t, "true")) { ++pos_; return expr::lit(true); }
        if (keyword_eq(t, "false")) { ++pos_; return expr::lit(false); }
        if (keyword_eq(t, "null")) { ++pos_; return expr::lit(Null{}); }
        if (is_keyword(t.text)) fail("unexpected keyword '" + t.text + "'");
        std::string name = t.text;
        std::size_t at = t.offset;
        ++pos_;
        if (peek().kind != Tok::lparen) return expr::col(std::move(name));
        Builtin b = name == "abs" ? Builtin::abs : name == "len" ? Builtin::len : name == "if" ? Builtin::if_ : Builtin::none;
        if (b == Builtin::none) throw SyntaxError("unknown builtin '" + name + "'", at);
        ++pos_;
        std::vector<Expr> args;
        if (peek().kind != Tok::rparen) {
          args.push_back(parse_or());
          while (peek().kind == Tok::comma) {
            ++pos_;
            args.push_back(parse_or());
          }
        }
        expect(Tok::rparen, "')'");
        std::size_t want = b == Builtin::if_ ? 3 : 1;
        if (args.size() != want) {
          throw SyntaxError("builtin '" + name + "' takes " + std::to_string(want) + " argument(s)", at);
        }
        return expr::call(b, std::move(args));
      }
      default: fail("expected operand");
    }
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline std::string quote_string(const std::string& s, char q) {
  std::string out(1, q);
  for (char c : s) {
    if (c == q) out.push_back(q);
    out.push_back(c);
  }
  out.push_back(q);
  return out;
}

inline bool plain_identifier(const std::string& s) {
  if (s.empty() || !ident_start(s[0]) || is_keyword(s)) return false;
  for (char c : s) {
    if (!ident_char(c)) return false;
  }
  return true;
}

inline const char* compare_symbol(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "==";
    case CompareOp::ne: return "!=";
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
  }
  return "?";
}

inline const char* arith_symbol(ArithOp op) {
  switch (op) {
    case ArithOp::add: return "+";
    case ArithOp::sub: return "-";
    case ArithOp::mul: return "*";
    case ArithOp::div: return "/";
    case ArithOp::mod: return "%";
  }
  return "?";
}

}  // namespace detail

inline Expr parse_expr(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) throw SyntaxError("empty expression", 0);
  return detail::ExprParser(text).parse_all();
}

/// Canonical, fully parenthesised form. parse_expr(print_expr(e)) == e for any parsed e.
inline std::string print_expr(const Expr& e) {
  using detail::quote_string;
  switch (e.kind) {
    case ExprKind::literal:
      if (e.literal.is_null()) return "null";
      if (e.literal.is_string()) return quote_string(e.literal.as_string(), '\'');
      if (e.literal.is_number() && e.literal.as_number() < 0) return "(-" + format_number(-e.literal.as_number()) + ")";
      return to_string(e.literal);
    case ExprKind::column: return detail::plain_identifier(e.name) ? e.name : quote_string(e.name, '`');
    case ExprKind::current: return "@";
    case ExprKind::compare:
      return "(" + print_expr(e.children[0]) + " " + detail::compare_symbol(e.cmp) + " " + print_expr(e.children[1]) + ")";
    case ExprKind::logical_and: return "(" + print_expr(e.children[0]) + " and " + print_expr(e.children[1]) + ")";
    case ExprKind::logical_or: return "(" + print_expr(e.children[0]) + " or " + print_expr(e.children[1]) + ")";
    case ExprKind::logical_not: return "(not " + print_expr(e.children[0]) + ")";
    case ExprKind::is_null: return "(" + print_expr(e.children[0]) + " is null)";
    case ExprKind::is_not_null: return "(" + print_expr(e.children[0]) + " is not null)";
    case ExprKind::arith:
      return "(" + print_expr(e.children[0]) + " " + detail::arith_symbol(e.arith) + " " + print_expr(e.children[1]) + ")";
    case ExprKind::negate: return "(-" + print_expr(e.children[0]) + ")";
    case ExprKind::call: {
      std::string out = e.builtin == Builtin::abs ? "abs(" : e.builtin == Builtin::len ? "len(" : "if(";
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out += ", ";
        out += print_expr(e.children[i]);
      }
      return out + ")";
    }
  }
  return "?";
}

/// Feature names an expression reads, in first-reference order.
inline std::vector<FeatureName> referenced_features(const Expr& e) {
  std::vector<FeatureName> out;
  auto walk = [&](auto&& self, const Expr& n) -> void {
    if (n.kind == ExprKind::column && std::find(out.begin(), out.end(), n.name) == out.end()) out.push_back(n.name);
    for (const auto& c : n.children) self(self, c);
  };
  walk(walk, e);
  return out;
}

/// An expression with column references resolved to positions in one schema.
/// Immutable; safe to evaluate concurrently.
class BoundExpr {
 public:
  BoundExpr() = default;

  BoundExpr(const Expr& e, const std::vector<FeatureName>& schema, bool allow_current = false) {
    std::unordered_map<std::string_view, std::size_t> idx;
    for (std::size_t j = 0; j < schema.size(); ++j) idx.emplace(schema[j], j);
    root_ = compile(e, idx, allow_current);
  }

  Value eval(const Dataset& d, std::size_t row, const Value* current = nullptr) const {
    return eval_node(root_, d, row, current);
  }

  /// Row condition: a Null outcome counts as false.
  bool test(const Dataset& d, std::size_t row) const {
    Value v = eval(d, row);
    if (v.is_null()) return false;
    if (!v.is_bool()) throw TypeError("condition evaluated to " + std::string(type_name(v.type())) + ", expected boolean");
    return v.as_bool();
  }

 private:
  struct Node {
    ExprKind kind = ExprKind::literal;
    CompareOp cmp = CompareOp::eq;
    ArithOp arith = ArithOp::add;
    Builtin builtin = Builtin::none;
    Value literal;
    std::size_t column = 0;
    std::vector<Node> children;
  };

  static Node compile(const Expr& e, const std::unordered_map<std::string_view, std::size_t>& idx, bool allow_current) {
    Node n;
    n.kind = e.kind;
    n.cmp = e.cmp;
    n.arith = e.arith;
    n.builtin = e.builtin;
    n.literal = e.literal;
    if (e.kind == ExprKind::column) {
      auto it = idx.find(e.name);
      if (it == idx.end()) throw UnknownFeature(e.name);
      n.column = it->second;
    }
    if (e.kind == ExprKind::current && !allow_current) {
      throw ValidationError("'@' is only meaningful in a column transformation");
    }
    for (const auto& c : e.children) n.children.push_back(compile(c, idx, allow_current));
    return n;
  }

  static bool truth(const Value& v, const char* ctx) {
    if (!v.is_bool()) {
      throw TypeError(std::string(ctx) + " expects boolean operands, got " + type_name(v.type()));
    }
    return v.as_bool();
  }

  static Value compare_values(CompareOp op, const Value& a, const Value& b) {
    if (a.is_null() || b.is_null()) return Null{};
    if (a.type() != b.type()) {
      throw TypeError(std::string("cannot compare ") + type_name(a.type()) + " with " + type_name(b.type()));
    }
    auto ord = a <=> b;
    switch (op) {
      case CompareOp::eq: return ord == 0;
      case CompareOp::ne: return ord != 0;
      case CompareOp::lt: return ord < 0;
      case CompareOp::le: return ord <= 0;
      case CompareOp::gt: return ord > 0;
      case CompareOp::ge: return ord >= 0;
    }
    return Null{};
  }

  static Value eval_node(const Node& n, const Dataset& d, std::size_t row, const Value* current) {
    switch (n.kind) {
      case ExprKind::literal: return n.literal;
      case ExprKind::column: return d.at(row, n.column);
      case ExprKind::current: return current ? *current : Value(Null{});
      case ExprKind::compare:
        return compare_values(n.cmp, eval_node(n.children[0], d, row, current), eval_node(n.children[1], d, row, current));
      case ExprKind::logical_and: {
        Value a = eval_node(n.children[0], d, row, current);
        if (!a.is_null() && !truth(a, "and")) return false;
        Value b = eval_node(n.children[1], d, row, current);
        if (!b.is_null() && !truth(b, "and")) return false;
        if (a.is_null() || b.is_null()) return Null{};
        return true;
      }
      case ExprKind::logical_or: {
        Value a = eval_node(n.children[0], d, row, current);
        if (!a.is_null() && truth(a, "or")) return true;
        Value b = eval_node(n.children[1], d, row, current);
        if (!b.is_null() && truth(b, "or")) return true;
        if (a.is_null() || b.is_null()) return Null{};
        return false;
      }
      case ExprKind::logical_not: {
        Value a = eval_node(n.children[0], d, row, current);
        if (a.is_null()) return Null{};
        return !truth(a, "not");
      }
      case ExprKind::is_null: return eval_node(n.children[0], d, row, current).is_null();
      case ExprKind::is_not_null: return !eval_node(n.children[0], d, row, current).is_null();
      case ExprKind::arith: {
        Value a = eval_node(n.children[0], d, row, current);
        Value b = eval_node(n.children[1], d, row, current);
        if (a.is_null() || b.is_null()) return Null{};
        if (!a.is_number() || !b.is_number()) {
          throw TypeError(std::string("arithmetic on ") + type_name(a.type()) + " and " + type_name(b.type()));
        }
        double x = a.as_number(), y = b.as_number();
        switch (n.arith) {
          case ArithOp::add: return x + y;
          case ArithOp::sub: return x - y;
          case ArithOp::mul: return x * y;
          case ArithOp::div: return y == 0 ? Value(Null{}) : Value(x / y);
          case ArithOp::mod: return y == 0 ? Value(Null{}) : Value(std::fmod(x, y));
        }
        return Null{};
      }
      case ExprKind::negate: {
        Value a = eval_node(n.children[0], d, row, current);
        if (a.is_null()) return Null{};
        if (!a.is_number()) throw TypeError(std::string("cannot negate ") + type_name(a.type()));
        return -a.as_number();
      }
      case ExprKind::call: {
        if (n.builtin == Builtin::if_) {
          Value c = eval_node(n.children[0], d, row, current);
          if (c.is_null()) return Null{};
          return truth(c, "if") ? eval_node(n.children[1], d, row, current) : eval_node(n.children[2], d, row, current);
        }
        Value a = eval_node(n.children[0], d, row, current);
        if (a.is_null()) return Null{};
        if (n.builtin == Builtin::abs) {
          if (!a.is_number()) throw TypeError(std::string("abs() of ") + type_name(a.type()));
          return std::fabs(a.as_number());
        }
        if (!a.is_string()) throw TypeError(std::string("len() of ") + type_name(a.type()));
        return static_cast<double>(a.as_string().size());
      }
    }
    return Null{};
  }

  Node root_;
};

/// Evaluates expr on the row with the given id.
inline Value eval_row(const Expr& e, const Dataset& d, RowId row_id) {
  auto pos = d.position_of(row_id);
  if (!pos) throw DataError("row id " + std::to_string(row_id) + " not in dataset");
  return BoundExpr(e, d.schema()).eval(d, *pos);
}

/// Condition over feature metadata, used by conditional projection.
struct FeaturePredicate {
  enum class Kind : std::uint8_t { name_in, nullrate_lt, negation, conjunction };

  Kind kind = Kind::name_in;
  std::vector<FeatureName> names;
  double threshold = 0;
  std::vector<FeaturePredicate> args;

  static FeaturePredicate name_in(std::vector<FeatureName> names) {
    FeaturePredicate p;
    p.kind = Kind::name_in;
    p.names = std::move(names);
    return p;
  }
  static FeaturePredicate nullrate_lt(double t) {
    if (!(t >= 0 && t <= 1)) throw ValidationError("null-rate threshold must lie in [0,1], got " + format_number(t));
    FeaturePredicate p;
    p.kind = Kind::nullrate_lt;
    p.threshold = t;
    return p;
  }
  static FeaturePredicate negation(FeaturePredicate a) {
    FeaturePredicate p;
    p.kind = Kind::negation;
    p.args.push_back(std::move(a));
    return p;
  }
  static FeaturePredicate conjunction(FeaturePredicate a, FeaturePredicate b) {
    FeaturePredicate p;
    p.kind = Kind::conjunction;
    p.args.push_back(std::move(a));
    p.args.push_back(std::move(b));
    return p;
  }

  bool operator==(const FeaturePredicate&) const = default;
};

inline double null_rate(const Dataset& d, std::string_view feature) {
  const Column& c = d.column(feature);
  if (c.empty()) return 0;
  auto nulls = std::count_if(c.begin(), c.end(), [](const Value& v) { return v.is_null(); });
  return static_cast<double>(nulls) / static_cast<double>(c.size());
}

inline bool eval_feature_predicate(const FeaturePredicate& p, const Dataset& d, std::string_view feature) {
  d.require_feature(feature);
  switch (p.kind) {
    case FeaturePredicate::Kind::name_in:
      return std::find(p.names.begin(), p.names.end(), feature) != p.names.end();
    case FeaturePredicate::Kind::nullrate_lt: return null_rate(d, feature) < p.threshold;
    case FeaturePredicate::Kind::negation: return !eval_feature_predicate(p.args.at(0), d, feature);
    case FeaturePredicate::Kind::conjunction:
      return eval_feature_predicate(p.args.at(0), d, feature) && eval_feature_predicate(p.args.at(1), d, feature);
  }
  return false;
}

// Text form:  pred := term { "and" term } ;  term := "not" term | "(" pred ")"
//             | "nullrate" "<" number | "name" "in" "(" name { "," name } ")"
// where a name is an identifier, a `quoted name` or a 'string'.
inline FeaturePredicate parse_feature_predicate(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) throw SyntaxError("empty predicate", 0);
  detail::ExprParser p(text);
  auto term = [&](auto&& self_pred, auto&& self_term) -> FeaturePredicate {
    if (p.accept_kw("not")) return FeaturePredicate::negation(self_term(self_pred, self_term));
    if (p.peek().kind == detail::Tok::lparen) {
      p.next();
      FeaturePredicate inner = self_pred(self_pred, self_term);
      p.expect(detail::Tok::rparen, "')'");
      return inner;
    }
    if (p.accept_kw("nullrate")) {
      p.expect(detail::Tok::lt, "'<'");
      if (p.peek().kind != detail::Tok::number) p.fail("expected threshold");
      double t = *parse_number(p.next().text);
      if (!(t >= 0 && t <= 1)) throw SyntaxError("threshold must lie in [0,1]", p.peek().offset);
      return FeaturePredicate::nullrate_lt(t);
    }
    if (p.accept_kw("name")) {
      if (!p.accept_kw("in")) p.fail("expected 'in'");
      p.expect(detail::Tok::lparen, "'('");
      std::vector<FeatureName> names;
      while (true) {
        auto k = p.peek().kind;
        if (k != detail::Tok::ident && k != detail::Tok::quoted_ident && k != detail::Tok::string) p.fail("expected feature name");
        names.push_back(p.next().text);
        if (p.peek().kind == detail::Tok::comma) {
          p.next();
          continue;
        }
        break;
      }
      p.expect(detail::Tok::rparen, "')'");
      return FeaturePredicate::name_in(std::move(names));
    }
    p.fail("expected 'nullrate', 'name', 'not' or '('");
  };
  auto pred = [&](auto&& self_pred, auto&& self_term) -> FeaturePredicate {
    FeaturePredicate left = self_term(self_pred, self_term);
    while (p.accept_kw("and")) left = FeaturePredicate::conjunction(std::move(left), self_term(self_pred, self_term));
    return left;
  };
  FeaturePredicate out = pred(pred, term);
  if (p.peek().kind != detail::Tok::end) p.fail("unexpected input");
  return out;
}

inline std::string print_feature_predicate(const FeaturePredicate& p) {
  switch (p.kind) {
    case FeaturePredicate::Kind::name_in: {
      std::string out = "name in (";
      for (std::size_t i = 0; i < p.names.size(); ++i) {
        if (i) out += ", ";
        out += detail::quote_string(p.names[i], '\'');
      }
      return out + ")";
    }
    case FeaturePredicate::Kind::nullrate_lt: return "nullrate < " + format_number(p.threshold);
    case FeaturePredicate::Kind::negation: return "(not " + print_feature_predicate(p.args.at(0)) + ")";
    case FeaturePredicate::Kind::conjunction:
      return "(" + print_feature_predicate(p.args.at(0)) + " and " + print_feature_predicate(p.args.at(1)) + ")";
  }
  return "?";
}

}  // namespace provtrack
