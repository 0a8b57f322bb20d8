#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "envsmith/decimal.hpp"
#include "envsmith/errors.hpp"

namespace envsmith {

/// One stored state value: text, arbitrary-precision integer, fixed-scale
/// decimal, boolean, ordered list, or record with sorted keys. Construction
/// goes through the named factories; there is no implicit char* -> bool
/// conversion to fall into.
class Value {
 public:
  enum class Kind { Text, Integer, Decimal, Boolean, List, Record };

  using List = std::vector<Value>;
  using Record = std::map<std::string, Value>;

  Value() : v_(std::string()) {}

  static Value text(std::string s) { return Value(Repr(std::move(s))); }
  static Value integer(BigInt i) { return Value(Repr(std::move(i))); }
  static Value integer(long long i) { return Value(Repr(BigInt(i))); }
  static Value decimal(Decimal d) { return Value(Repr(std::move(d))); }
  static Value boolean(bool b) { return Value(Repr(b)); }
  static Value list(List xs = {}) { return Value(Repr(std::move(xs))); }
  static Value record(Record r = {}) { return Value(Repr(std::move(r))); }

  Kind kind() const { return static_cast<Kind>(v_.index()); }
  bool is_scalar() const {
    return kind() != Kind::List && kind() != Kind::Record;
  }
  bool is_text() const { return kind() == Kind::Text; }
  bool is_integer() const { return kind() == Kind::Integer; }
  bool is_decimal() const { return kind() == Kind::Decimal; }
  bool is_boolean() const { return kind() == Kind::Boolean; }
  bool is_list() const { return kind() == Kind::List; }
  bool is_record() const { return kind() == Kind::Record; }

  const std::string& as_text() const { return expect<std::string>(Kind::Text); }
  const BigInt& as_integer() const { return expect<BigInt>(Kind::Integer); }
  const Decimal& as_decimal() const { return expect<Decimal>(Kind::Decimal); }
  bool as_boolean() const { return expect<bool>(Kind::Boolean); }
  const List& as_list() const { return expect<List>(Kind::List); }
  const Record& as_record() const { return expect<Record>(Kind::Record); }
  List& as_list() { return std::get<List>(v_); }
  Record& as_record() { return std::get<Record>(v_); }

  /// Structural equality. Decimal 1.5 and 1.50 differ here; canonical docs
  /// carry schema scales so structural and numeric equality coincide there.
  bool operator==(const Value& o) const { return v_ == o.v_; }
  bool operator!=(const Value& o) const { return !(v_ == o.v_); }

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::Text: return "text";
      case Kind::Integer: return "integer";
      case Kind::Decimal: return "decimal";
      case Kind::Boolean: return "boolean";
      case Kind::List: return "list";
      case Kind::Record: return "record";
    }
    return "?";
  }

 private:
  using Repr = std::variant<std::string, BigInt, Decimal, bool, List, Record>;
  explicit Value(Repr r) : v_(std::move(r)) {}

  template <typename T>
  const T& expect(Kind k) const {
    if (kind() != k)
      throw Error(std::string("value kind mismatch: wanted ") + kind_name(k) + ", have " +
                  kind_name(kind()));
    return std::get<T>(v_);
  }

  Repr v_;
};

/// Numeric-aware deep equality used by the effect language: decimals compare
/// across scales, integers compare with decimals by value.
inline bool semantic_equal(const Value& a, const Value& b) {
  auto numeric = [](const Value& v) {
    return v.kind() == Value::Kind::Integer || v.kind() == Value::Kind::Decimal;
  };
  if (numeric(a) && numeric(b)) {
    Decimal da = a.kind() == Value::Kind::Integer ? Decimal::from_int(a.as_integer()) : a.as_decimal();
    Decimal db = b.kind() == Value::Kind::Integer ? Decimal::from_int(b.as_integer()) : b.as_decimal();
    return da.compare(db) == 0;
  }
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Value::Kind::List: {
      const auto& xs = a.as_list();
      const auto& ys = b.as_list();
      if (xs.size() != ys.size()) return false;
      for (size_t i = 0; i < xs.size(); ++i)
        if (!semantic_equal(xs[i], ys[i])) return false;
      return true;
    }
    case Value::Kind::Record: {
      const auto& ra = a.as_record();
      const auto& rb = b.as_record();
      if (ra.size() != rb.size()) return false;
      auto it = rb.begin();
      for (const auto& [k, v] : ra) {
        if (it->first != k || !semantic_equal(v, it->second)) return false;
        ++it;
      }
      return true;
    }
    default:
      return a == b;
  }
}

inline void json_escape_to(std::string& out, const std::string& s) {
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          static const char* hex = "0123456789abcdef";
          out += "\\u00";
          out.push_back(hex[c >> 4]);
          out.push_back(hex[c & 0xf]);
        } else {
          out.push_back(char(c));
        }
    }
  }
}

/// Canonical serialization: compact JSON, record keys in byte order,
/// integers and decimals as strings so no reader ever routes them through
/// floating point. This is the byte form behind doc hashes and Eq-style
/// state comparison, so it must stay stable.
inline void canonical_json_to(std::string& out, const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Text:
      out.push_back('"');
      json_escape_to(out, v.as_text());
      out.push_back('"');
      break;
    case Value::Kind::Integer:
      out.push_back('"');
      out += v.as_integer().str();
      out.push_back('"');
      break;
    case Value::Kind::Decimal:
      out.push_back('"');
      out += v.as_decimal().str();
      out.push_back('"');
      break;
    case Value::Kind::Boolean:
      out += v.as_boolean() ? "true" : "false";
      break;
    case Value::Kind::List: {
      out.push_back('[');
      bool first = true;
      for (const auto& x : v.as_list()) {
        if (!first) out.push_back(',');
        first = false;
        canonical_json_to(out, x);
      }
      out.push_back(']');
      break;
    }
    case Value::Kind::Record: {
      out.push_back('{');
      bool first = true;
      for (const auto& [k, x] : v.as_record()) {
        if (!first) out.push_back(',');
        first = false;
        out.push_back('"');
        json_escape_to(out, k);
        out.push_back('"');
        out.push_back(':');
        canonical_json_to(out, x);
      }
      out.push_back('}');
      break;
    }
  }
}

inline std::string canonical_json(const Value& v) {
  std::string out;
  canonical_json_to(out, v);
  return out;
}

/// Scalar canonical text without JSON quoting ("42", "1.50", "true", raw text).
inline std::string scalar_text(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Text: return v.as_text();
    case Value::Kind::Integer: return v.as_integer().str();
    case Value::Kind::Decimal: return v.as_decimal().str();
    case Value::Kind::Boolean: return v.as_boolean() ? "true" : "false";
    default:
      throw Error("scalar_text on composite value");
  }
}

}  // namespace envsmith
