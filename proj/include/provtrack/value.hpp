#pragma once

#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>

#include "provtrack/hash.hpp"

namespace provtrack {

/// The missing value. A distinct alternative of Value, never a sentinel.
struct Null {
  bool operator==(const Null&) const = default;
};

enum class ValueType : std::uint8_t { null = 0, boolean = 1, number = 2, string = 3 };

inline const char* type_name(ValueType t) {
  switch (t) {
    case ValueType::null: return "null";
    case ValueType::boolean: return "boolean";
    case ValueType::number: return "number";
    case ValueType::string: return "string";
  }
  return "?";
}

/// Atomic cell value: number (f64), string, boolean or Null.
///
/// Values order totally: null < boolean < number < string, then by payload. The
/// order is only used for deterministic tie breaking (modes, distinct listings),
/// never for expression comparison, which rejects mixed types.
class Value {
 public:
  Value() = default;
  Value(Null) {}
  Value(double d) : v_(d) {}
  Value(int i) : v_(static_cast<double>(i)) {}
  Value(long i) : v_(static_cast<double>(i)) {}
  Value(long long i) : v_(static_cast<double>(i)) {}
  Value(unsigned long i) : v_(static_cast<double>(i)) {}
  Value(bool b) : v_(b) {}
  Value(std::string s) : v_(std::move(s)) {}
  Value(const char* s) : v_(std::string(s)) {}

  ValueType type() const noexcept {
    switch (v_.index()) {
      case 0: return ValueType::null;
      case 1: return ValueType::number;
      case 2: return ValueType::string;
      default: return ValueType::boolean;
    }
  }

  bool is_null() const noexcept { return v_.index() == 0; }
  bool is_number() const noexcept { return v_.index() == 1; }
  bool is_string() const noexcept { return v_.index() == 2; }
  bool is_bool() const noexcept { return v_.index() == 3; }

  double as_number() const { return std::get<double>(v_); }
  const std::string& as_string() const { return std::get<std::string>(v_); }
  bool as_bool() const { return std::get<bool>(v_); }

  bool operator==(const Value& o) const {
    if (v_.index() != o.v_.index()) return false;
    // NaN never enters a dataset (ingestion maps it to Null) but keep equality reflexive anyway.
    if (is_number()) {
      double a = as_number(), b = o.as_number();
      return a == b || (std::isnan(a) && std::isnan(b));
    }
    return v_ == o.v_;
  }

  std::strong_ordering operator<=>(const Value& o) const {
    auto ta = static_cast<int>(type()), tb = static_cast<int>(o.type());
    if (ta != tb) return ta <=> tb;
    switch (type()) {
      case ValueType::null: return std::strong_ordering::equal;
      case ValueType::boolean: return as_bool() <=> o.as_bool();
      case ValueType::number: {
        double a = as_number(), b = o.as_number();
        if (a < b) return std::strong_ordering::less;
        if (a > b) return std::strong_ordering::greater;
        return std::strong_ordering::equal;
      }
      case ValueType::string: return as_string().compare(o.as_string()) <=> 0;
    }
    return std::strong_ordering::equal;
  }

 private:
  std::variant<Null, double, std::string, bool> v_;
};

/// Integral values print without a fractional part; everything else uses the
/// shortest representation that round-trips.
inline std::string format_number(double d) {
  if (std::isnan(d)) return "nan";
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  if (d == std::floor(d) && std::fabs(d) < 1e15) {
    return std::to_string(static_cast<long long>(d));
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, res.ptr);
}

/// Display form: Null prints as the empty string.
inline std::string to_string(const Value& v) {
  switch (v.type()) {
    case ValueType::null: return "";
    case ValueType::boolean: return v.as_bool() ? "true" : "false";
    case ValueType::number: return format_number(v.as_number());
    case ValueType::string: return v.as_string();
  }
  return "";
}

/// Strict decimal parse of the whole string. Accepts what from_chars accepts
/// plus a leading '+'.
inline std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double d = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  if (std::isnan(d) || std::isinf(d)) return std::nullopt;
  return d;
}

// Canonical byte encoding: one type tag byte followed by the payload. Numbers are
// encoded by their bit pattern after normalising -0 to +0.
inline void append_canonical(std::string& out, const Value& v) {
  out.push_back(static_cast<char>('0' + static_cast<int>(v.type())));
  switch (v.type()) {
    case ValueType::null: break;
    case ValueType::boolean: out.push_back(v.as_bool() ? '1' : '0'); break;
    case ValueType::number: {
      double d = v.as_number();
      if (d == 0) d = 0.0;
      std::uint64_t bits;
      static_assert(sizeof bits == sizeof d);
      std::memcpy(&bits, &d, sizeof d);
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
      break;
    }
    case ValueType::string: {
      auto n = static_cast<std::uint32_t>(v.as_string().size());
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((n >> (8 * i)) & 0xff));
      out += v.as_string();
      break;
    }
  }
}

struct ValueHash {
  std::size_t operator()(const Value& v) const {
    std::string buf;
    append_canonical(buf, v);
    return static_cast<std::size_t>(fnv1a64(buf));
  }
};

}  // namespace provtrack
