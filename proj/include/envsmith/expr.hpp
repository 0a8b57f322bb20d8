#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "envsmith/errors.hpp"
#include "envsmith/schema.hpp"
#include "envsmith/value.hpp"

namespace envsmith {

/// Compile-time shape of an expression or schema location.
struct StaticType {
  enum class Tag { Text, Integer, Decimal, Boolean, List, Record };
  Tag tag = Tag::Text;
  bool open = false;                         // Record: keyed collection
  std::vector<StaticType> elem;              // List element / open Record entry
  std::map<std::string, StaticType> fields;  // closed Record

  static StaticType text() { return {Tag::Text, false, {}, {}}; }
  static StaticType integer() { return {Tag::Integer, false, {}, {}}; }
  static StaticType decimal() { return {Tag::Decimal, false, {}, {}}; }
  static StaticType boolean() { return {Tag::Boolean, false, {}, {}}; }
  static StaticType list(StaticType e) { return {Tag::List, false, {std::move(e)}, {}}; }
  static StaticType open_record(StaticType entry) {
    return {Tag::Record, true, {std::move(entry)}, {}};
  }
  static StaticType closed_record(std::map<std::string, StaticType> fs) {
    return {Tag::Record, false, {}, std::move(fs)};
  }

  bool is_numeric() const { return tag == Tag::Integer || tag == Tag::Decimal; }

  bool operator==(const StaticType& o) const {
    return tag == o.tag && open == o.open && elem == o.elem && fields == o.fields;
  }

  std::string str() const {
    switch (tag) {
      case Tag::Text: return "text";
      case Tag::Integer: return "integer";
      case Tag::Decimal: return "decimal";
      case Tag::Boolean: return "boolean";
      case Tag::List: return "list<" + (elem.empty() ? std::string("?") : elem[0].str()) + ">";
      case Tag::Record: {
        if (open) return "record<open>";
        std::string out = "record{";
        bool first = true;
        for (const auto& [k, v] : fields) {
          (void)v;
          if (!first) out += ",";
          first = false;
          out += k;
        }
        return out + "}";
      }
    }
    return "?";
  }
};

/// Static type of a schema location, for checking tool effects.
inline StaticType static_type_of(const AttributeSchema& schema, SchemaNode node) {
  const AttributeDef& d = *node.def;
  bool struct_like =
      (node.view == SchemaNode::View::Whole && d.kind == AttrKind::Record && !d.open) ||
      (node.view == SchemaNode::View::Entity) ||
      (node.view == SchemaNode::View::Element && d.list_of_records());
  if (struct_like) {
    std::map<std::string, StaticType> fs;
    for (const auto& f : d.fields)
      fs.emplace(f.name, static_type_of(schema, {&f, SchemaNode::View::Whole}));
    return StaticType::closed_record(std::move(fs));
  }
  if (node.view == SchemaNode::View::Whole && d.kind == AttrKind::Record && d.open)
    return StaticType::open_record(static_type_of(schema, {&d, SchemaNode::View::Entity}));
  if (node.view == SchemaNode::View::Whole && d.kind == AttrKind::List)
    return StaticType::list(static_type_of(schema, {&d, SchemaNode::View::Element}));
  switch (d.value_kind) {
    case ValueKind::Text:
    case ValueKind::Reference: return StaticType::text();
    case ValueKind::Integer: return StaticType::integer();
    case ValueKind::Decimal: return StaticType::decimal();
    case ValueKind::Boolean: return StaticType::boolean();
  }
  return StaticType::text();
}

// ---------------------------------------------------------------------------
// AST

struct Expr {
  enum class Op {
    LitText, LitInt, LitDec, LitBool,
    Binding, Field,
    ListLit, RecordLit,
    Or, And, Not,
    Eq, Ne, Lt, Le, Gt, Ge,
    Add, Sub, Mul, Div, Neg,
    Call,
  };
  Op op = Op::LitBool;
  std::string name;  // binding / field / function / text literal
  BigInt int_val = 0;
  Decimal dec_val;
  bool bool_val = false;
  std::vector<Expr> children;
  std::vector<std::string> names;  // RecordLit keys, aligned with children
};

// ---------------------------------------------------------------------------
// Parser

namespace detail {

class ExprParser {
 public:
  explicit ExprParser(std::string_view src) : src_(src) {}

  Expr parse() {
    Expr e = or_expr();
    skip_ws();
    if (pos_ != src_.size()) fail("trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) {
    throw Error("expression error at offset " + std::to_string(pos_) + ": " + msg + " in '" +
                std::string(src_) + "'");
  }

  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
  }

  bool eat(std::string_view tok) {
    skip_ws();
    if (src_.substr(pos_).starts_with(tok)) {
      // Keep identifier-like tokens from swallowing a prefix of a name.
      if ((tok == "true" || tok == "false") && pos_ + tok.size() < src_.size()) {
        char c = src_[pos_ + tok.size()];
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_') return false;
      }
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  Expr or_expr() {
    Expr e = and_expr();
    while (true) {
      skip_ws();
      if (!eat("||")) return e;
      Expr rhs = and_expr();
      Expr n;
      n.op = Expr::Op::Or;
      n.children = {std::move(e), std::move(rhs)};
      e = std::move(n);
    }
  }

  Expr and_expr() {
    Expr e = cmp_expr();
    while (true) {
      skip_ws();
      if (!eat("&&")) return e;
      Expr rhs = cmp_expr();
      Expr n;
      n.op = Expr::Op::And;
      n.children = {std::move(e), std::move(rhs)};
      e = std::move(n);
    }
  }

  Expr cmp_expr() {
    Expr e = add_expr();
    skip_ws();
    Expr::Op op;
    if (eat("==")) op = Expr::Op::Eq;
    else if (eat("!=")) op = Expr::Op::Ne;
    else if (eat("<=")) op = Expr::Op::Le;
    else if (eat(">=")) op = Expr::Op::Ge;
    else if (eat("<")) op = Expr::Op::Lt;
    else if (eat(">")) op = Expr::Op::Gt;
    else return e;
    Expr rhs = add_expr();
    Expr n;
    n.op = op;
    n.children = {std::move(e), std::move(rhs)};
    return n;
  }

  Expr add_expr() {
    Expr e = mul_expr();
    while (true) {
      skip_ws();
      Expr::Op op;
      if (eat("+")) op = Expr::Op::Add;
      else if (peek() == '-' && !src_.substr(pos_).starts_with("->")) {
        ++pos_;
        op = Expr::Op::Sub;
      } else return e;
      Expr rhs = mul_expr();
      Expr n;
      n.op = op;
      n.children = {std::move(e), std::move(rhs)};
      e = std::move(n);
    }
  }

  Expr mul_expr() {
    Expr e = unary_expr();
    while (true) {
      skip_ws();
      Expr::Op op;
      if (eat("*")) op = Expr::Op::Mul;
      else if (eat("/")) op = Expr::Op::Div;
      else return e;
      Expr rhs = unary_expr();
      Expr n;
      n.op = op;
      n.children = {std::move(e), std::move(rhs)};
      e = std::move(n);
    }
  }

  Expr unary_expr() {
    skip_ws();
    if (eat("!")) {
      Expr n;
      n.op = Expr::Op::Not;
      n.children = {unary_expr()};
      return n;
    }
    if (peek() == '-') {
      ++pos_;
      Expr n;
      n.op = Expr::Op::Neg;
      n.children = {unary_expr()};
      return n;
    }
    return postfix_expr();
  }

  Expr postfix_expr() {
    Expr e = primary();
    while (true) {
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == '.' && pos_ + 1 < src_.size() &&
          ((src_[pos_ + 1] >= 'a' && src_[pos_ + 1] <= 'z') || src_[pos_ + 1] == '_')) {
        ++pos_;
        Expr n;
        n.op = Expr::Op::Field;
        n.name = ident();
        n.children = {std::move(e)};
        e = std::move(n);
      } else {
        return e;
      }
    }
  }

  std::string ident() {
    skip_ws();
    size_t start = pos_;
    while (pos_ < src_.size() &&
           ((src_[pos_] >= 'a' && src_[pos_] <= 'z') || (src_[pos_] >= '0' && src_[pos_] <= '9') ||
            src_[pos_] == '_'))
      ++pos_;
    if (pos_ == start) fail("expected identifier");
    std::string s(src_.substr(start, pos_ - start));
    if (s[0] >= '0' && s[0] <= '9') fail("identifier cannot start with a digit");
    return s;
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of expression");
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = or_expr();
      if (!eat(")")) fail("expected ')'");
      return e;
    }
    if (c == '[') {
      ++pos_;
      Expr n;
      n.op = Expr::Op::ListLit;
      if (!eat("]")) {
        while (true) {
          n.children.push_back(or_expr());
          if (eat("]")) break;
          if (!eat(",")) fail("expected ',' or ']'");
        }
      }
      return n;
    }
    if (c == '{') {
      ++pos_;
      Expr n;
      n.op = Expr::Op::RecordLit;
      if (!eat("}")) {
        while (true) {
          std::string key = ident();
          if (!eat(":")) fail("expected ':' after record key");
          n.names.push_back(key);
          n.children.push_back(or_expr());
          if (eat("}")) break;
          if (!eat(",")) fail("expected ',' or '}'");
        }
      }
      return n;
    }
    if (c == '\'') {
      ++pos_;
      std::string s;
      while (pos_ < src_.size() && src_[pos_] != '\'') {
        if (src_[pos_] == '\\' && pos_ + 1 < src_.size() &&
            (src_[pos_ + 1] == '\'' || src_[pos_ + 1] == '\\')) {
          s.push_back(src_[pos_ + 1]);
          pos_ += 2;
        } else {
          s.push_back(src_[pos_]);
          ++pos_;
        }
      }
      if (pos_ >= src_.size()) fail("unterminated text literal");
      ++pos_;
      Expr n;
      n.op = Expr::Op::LitText;
      n.name = std::move(s);
      return n;
    }
    if (c >= '0' && c <= '9') {
      size_t start = pos_;
      while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_;
      if (pos_ < src_.size() && src_[pos_] == '.' && pos_ + 1 < src_.size() &&
          src_[pos_ + 1] >= '0' && src_[pos_ + 1] <= '9') {
        ++pos_;
        while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_;
        auto d = Decimal::parse(src_.substr(start, pos_ - start));
        if (!d) fail("bad decimal literal");
        Expr n;
        n.op = Expr::Op::LitDec;
        n.dec_val = *d;
        return n;
      }
      Expr n;
      n.op = Expr::Op::LitInt;
      n.int_val = BigInt(std::string(src_.substr(start, pos_ - start)));
      return n;
    }
    if (eat("true")) {
      Expr n;
      n.op = Expr::Op::LitBool;
      n.bool_val = true;
      return n;
    }
    if (eat("false")) {
      Expr n;
      n.op = Expr::Op::LitBool;
      n.bool_val = false;
      return n;
    }
    if ((c >= 'a' && c <= 'z') || c == '_') {
      std::string name = ident();
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == '(') {
        ++pos_;
        Expr n;
        n.op = Expr::Op::Call;
        n.name = std::move(name);
        if (!eat(")")) {
          while (true) {
            n.children.push_back(or_expr());
            if (eat(")")) break;
            if (!eat(",")) fail("expected ',' or ')'");
          }
        }
        return n;
      }
      Expr n;
      n.op = Expr::Op::Binding;
      n.name = std::move(name);
      return n;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view src_;
  size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse_expr(std::string_view src) { return detail::ExprParser(src).parse(); }

// ---------------------------------------------------------------------------
// Typechecking

using TypeEnv = std::map<std::string, StaticType>;

/// Infers the static type of an expression over known bindings; throws
/// Error with a readable message on any mismatch.
inline StaticType type_expr(const Expr& e, const TypeEnv& env) {
  using Op = Expr::Op;
  auto want_numeric = [](const StaticType& t, const char* where) {
    if (!t.is_numeric()) throw Error(std::string(where) + " needs a number, got " + t.str());
  };
  switch (e.op) {
    case Op::LitText: return StaticType::text();
    case Op::LitInt: return StaticType::integer();
    case Op::LitDec: return StaticType::decimal();
    case Op::LitBool: return StaticType::boolean();
    case Op::Binding: {
      auto it = env.find(e.name);
      if (it == env.end()) throw Error("unknown binding '" + e.name + "'");
      return it->second;
    }
    case Op::Field: {
      StaticType base = type_expr(e.children[0], env);
      if (base.tag != StaticType::Tag::Record || base.open)
        throw Error("field '" + e.name + "' on " + base.str());
      auto it = base.fields.find(e.name);
      if (it == base.fields.end())
        throw Error("no field '" + e.name + "' in " + base.str());
      return it->second;
    }
    case Op::ListLit: {
      if (e.children.empty()) throw Error("empty list literal has no element type");
      StaticType first = type_expr(e.children[0], env);
      for (size_t i = 1; i < e.children.size(); ++i) {
        StaticType t = type_expr(e.children[i], env);
        if (!(t == first))
          throw Error("list literal mixes " + first.str() + " and " + t.str());
      }
      return StaticType::list(first);
    }
    case Op::RecordLit: {
      std::map<std::string, StaticType> fs;
      for (size_t i = 0; i < e.children.size(); ++i) {
        if (fs.count(e.names[i])) throw Error("duplicate record key '" + e.names[i] + "'");
        fs.emplace(e.names[i], type_expr(e.children[i], env));
      }
      return StaticType::closed_record(std::move(fs));
    }
    case Op::Or:
    case Op::And: {
      for (const auto& c : e.children) {
        StaticType t = type_expr(c, env);
        if (t.tag != StaticType::Tag::Boolean)
          throw Error("logical operator needs booleans, got " + t.str());
      }
      return StaticType::boolean();
    }
    case Op::Not: {
      StaticType t = type_expr(e.children[0], env);
      if (t.tag != StaticType::Tag::Boolean) throw Error("'!' needs a boolean, got " + t.str());
      return StaticType::boolean();
    }
    case Op::Eq:
    case Op::Ne: {
      StaticType a = type_expr(e.children[0], env);
      StaticType b = type_expr(e.children[1], env);
      bool ok = (a.is_numeric() && b.is_numeric()) || a.tag == b.tag;
      if (!ok) throw Error("cannot compare " + a.str() + " with " + b.str());
      return StaticType::boolean();
    }
    case Op::Lt:
    case Op::Le:
    case Op::Gt:
    case Op::Ge: {
      StaticType a = type_expr(e.children[0], env);
      StaticType b = type_expr(e.children[1], env);
      bool ok = (a.is_numeric() && b.is_numeric()) ||
                (a.tag == StaticType::Tag::Text && b.tag == StaticType::Tag::Text);
      if (!ok) throw Error("cannot order " + a.str() + " against " + b.str());
      return StaticType::boolean();
    }
    case Op::Add: {
      StaticType a = type_expr(e.children[0], env);
      StaticType b = type_expr(e.children[1], env);
      if (a.tag == StaticType::Tag::Text && b.tag == StaticType::Tag::Text)
        return StaticType::text();
      want_numeric(a, "'+'");
      want_numeric(b, "'+'");
      return (a.tag == StaticType::Tag::Decimal || b.tag == StaticType::Tag::Decimal)
                 ? StaticType::decimal()
                 : StaticType::integer();
    }
    case Op::Sub:
    case Op::Mul: {
      StaticType a = type_expr(e.children[0], env);
      StaticType b = type_expr(e.children[1], env);
      want_numeric(a, "arithmetic");
      want_numeric(b, "arithmetic");
      return (a.tag == StaticType::Tag::Decimal || b.tag == StaticType::Tag::Decimal)
                 ? StaticType::decimal()
                 : StaticType::integer();
    }
    case Op::Div: {
      want_numeric(type_expr(e.children[0], env), "'/'");
      want_numeric(type_expr(e.children[1], env), "'/'");
      return StaticType::decimal();
    }
    case Op::Neg: {
      StaticType t = type_expr(e.children[0], env);
      want_numeric(t, "'-'");
      return t;
    }
    case Op::Call: {
      auto arity = [&](size_t n) {
        if (e.children.size() != n)
          throw Error("'" + e.name + "' takes " + std::to_string(n) + " arguments");
      };
      if (e.name == "len") {
        arity(1);
        StaticType t = type_expr(e.children[0], env);
        if (t.tag != StaticType::Tag::List && t.tag != StaticType::Tag::Record)
          throw Error("'len' needs a list or record, got " + t.str());
        return StaticType::integer();
      }
      if (e.name == "sum") {
        arity(1);
        StaticType t = type_expr(e.children[0], env);
        if (t.tag != StaticType::Tag::List || t.elem.empty() || !t.elem[0].is_numeric())
          throw Error("'sum' needs a list of numbers, got " + t.str());
        return t.elem[0];
      }
      if (e.name == "first" || e.name == "last") {
        arity(1);
        StaticType t = type_expr(e.children[0], env);
        if (t.tag != StaticType::Tag::List || t.elem.empty())
          throw Error("'" + e.name + "' needs a list, got " + t.str());
        return t.elem[0];
      }
      if (e.name == "pluck") {
        arity(2);
        StaticType t = type_expr(e.children[0], env);
        const Expr& key = e.children[1];
        if (key.op != Op::LitText) throw Error("'pluck' needs a literal field name");
        if (t.tag != StaticType::Tag::List || t.elem.empty() ||
            t.elem[0].tag != StaticType::Tag::Record || t.elem[0].open)
          throw Error("'pluck' needs a list of records, got " + t.str());
        auto it = t.elem[0].fields.find(key.name);
        if (it == t.elem[0].fields.end())
          throw Error("'pluck': no field '" + key.name + "' in " + t.elem[0].str());
        return StaticType::list(it->second);
      }
      if (e.name == "contains") {
        arity(2);
        StaticType t = type_expr(e.children[0], env);
        StaticType x = type_expr(e.children[1], env);
        if (t.tag == StaticType::Tag::Record && t.open) {
          if (x.tag != StaticType::Tag::Text)
            throw Error("'contains' on a keyed record needs a text key");
          return StaticType::boolean();
        }
        if (t.tag == StaticType::Tag::List && !t.elem.empty()) {
          bool ok = (t.elem[0].is_numeric() && x.is_numeric()) || t.elem[0].tag == x.tag;
          if (!ok)
            throw Error("'contains': list of " + t.elem[0].str() + " cannot hold " + x.str());
          return StaticType::boolean();
        }
        throw Error("'contains' needs a list or keyed record, got " + t.str());
      }
      if (e.name == "str") {
        arity(1);
        StaticType t = type_expr(e.children[0], env);
        if (t.tag == StaticType::Tag::List || t.tag == StaticType::Tag::Record)
          throw Error("'str' needs a scalar, got " + t.str());
        return StaticType::text();
      }
      throw Error("unknown function '" + e.name + "'");
    }
  }
  throw Error("unhandled expression");
}

// ---------------------------------------------------------------------------
// Evaluation

using EvalEnv = std::map<std::string, Value>;

namespace detail {

inline Decimal as_dec(const Value& v) {
  return v.is_integer() ? Decimal::from_int(v.as_integer()) : v.as_decimal();
}

[[noreturn]] inline void kind_fail(const char* what) {
  throw EffectRuntimeError("kind_mismatch", std::string("unexpected operand kind in ") + what);
}

}  // namespace detail

/// Evaluates an expression over concrete bindings. Data problems (empty
/// list, division by zero) surface as EffectRuntimeError; kind guards stay
/// on even though typechecked tools cannot trip them.
inline Value eval_expr(const Expr& e, const EvalEnv& env) {
  using Op = Expr::Op;
  switch (e.op) {
    case Op::LitText: return Value::text(e.name);
    case Op::LitInt: return Value::integer(e.int_val);
    case Op::LitDec: return Value::decimal(e.dec_val);
    case Op::LitBool: return Value::boolean(e.bool_val);
    case Op::Binding: {
      auto it = env.find(e.name);
      if (it == env.end())
        throw EffectRuntimeError("unknown_binding", "no binding '" + e.name + "'");
      return it->second;
    }
    case Op::Field: {
      Value base = eval_expr(e.children[0], env);
      if (!base.is_record()) detail::kind_fail("field access");
      auto it = base.as_record().find(e.name);
      if (it == base.as_record().end())
        throw EffectRuntimeError("kind_mismatch", "no field '" + e.name + "'");
      return it->second;
    }
    case Op::ListLit: {
      Value::List xs;
      for (const auto& c : e.children) xs.push_back(eval_expr(c, env));
      return Value::list(std::move(xs));
    }
    case Op::RecordLit: {
      Value::Record r;
      for (size_t i = 0; i < e.children.size(); ++i)
        r[e.names[i]] = eval_expr(e.children[i], env);
      return Value::record(std::move(r));
    }
    case Op::Or: {
      Value a = eval_expr(e.children[0], env);
      if (!a.is_boolean()) detail::kind_fail("'||'");
      if (a.as_boolean()) return Value::boolean(true);
      Value b = eval_expr(e.children[1], env);
      if (!b.is_boolean()) detail::kind_fail("'||'");
      return b;
    }
    case Op::And: {
      Value a = eval_expr(e.children[0], env);
      if (!a.is_boolean()) detail::kind_fail("'&&'");
      if (!a.as_boolean()) return Value::boolean(false);
      Value b = eval_expr(e.children[1], env);
      if (!b.is_boolean()) detail::kind_fail("'&&'");
      return b;
    }
    case Op::Not: {
      Value a = eval_expr(e.children[0], env);
      if (!a.is_boolean()) detail::kind_fail("'!'");
      return Value::boolean(!a.as_boolean());
    }
    case Op::Eq:
    case Op::Ne: {
      bool eq = semantic_equal(eval_expr(e.children[0], env), eval_expr(e.children[1], env));
      return Value::boolean(e.op == Op::Eq ? eq : !eq);
    }
    case Op::Lt:
    case Op::Le:
    case Op::Gt:
    case Op::Ge: {
      Value a = eval_expr(e.children[0], env);
      Value b = eval_expr(e.children[1], env);
      int c;
      if (a.is_text() && b.is_text())
        c = a.as_text().compare(b.as_text()) < 0 ? -1 : (a.as_text() == b.as_text() ? 0 : 1);
      else if ((a.is_integer() || a.is_decimal()) && (b.is_integer() || b.is_decimal()))
        c = detail::as_dec(a).compare(detail::as_dec(b));
      else {
        detail::kind_fail("comparison");
      }
      switch (e.op) {
        case Op::Lt: return Value::boolean(c < 0);
        case Op::Le: return Value::boolean(c <= 0);
        case Op::Gt: return Value::boolean(c > 0);
        default: return Value::boolean(c >= 0);
      }
    }
    case Op::Add: {
      Value a = eval_expr(e.children[0], env);
      Value b = eval_expr(e.children[1], env);
      if (a.is_text() && b.is_text()) return Value::text(a.as_text() + b.as_text());
      if (a.is_integer() && b.is_integer()) return Value::integer(a.as_integer() + b.as_integer());
      if ((a.is_integer() || a.is_decimal()) && (b.is_integer() || b.is_decimal()))
        return Value::decimal(detail::as_dec(a).add(detail::as_dec(b)));
      detail::kind_fail("'+'");
    }
    case Op::Sub: {
      Value a = eval_expr(e.children[0], env);
      Value b = eval_expr(e.children[1], env);
      if (a.is_integer() && b.is_integer()) return Value::integer(a.as_integer() - b.as_integer());
      if ((a.is_integer() || a.is_decimal()) && (b.is_integer() || b.is_decimal()))
        return Value::decimal(detail::as_dec(a).sub(detail::as_dec(b)));
      detail::kind_fail("'-'");
    }
    case Op::Mul: {
      Value a = eval_expr(e.children[0], env);
      Value b = eval_expr(e.children[1], env);
      if (a.is_integer() && b.is_integer()) return Value::integer(a.as_integer() * b.as_integer());
      if ((a.is_integer() || a.is_decimal()) && (b.is_integer() || b.is_decimal()))
        return Value::decimal(detail::as_dec(a).mul(detail::as_dec(b)));
      detail::kind_fail("'*'");
    }
    case Op::Div: {
      Value a = eval_expr(e.children[0], env);
      Value b = eval_expr(e.children[1], env);
      if ((a.is_integer() || a.is_decimal()) && (b.is_integer() || b.is_decimal()))
        return Value::decimal(detail::as_dec(a).div(detail::as_dec(b)));
      detail::kind_fail("'/'");
    }
    case Op::Neg: {
      Value a = eval_expr(e.children[0], env);
      if (a.is_integer()) return Value::integer(-a.as_integer());
      if (a.is_decimal()) return Value::decimal(Decimal(BigInt(0), 0).sub(a.as_decimal()));
      detail::kind_fail("'-'");
    }
    case Op::Call: {
      if (e.name == "len") {
        Value v = eval_expr(e.children[0], env);
        if (v.is_list()) return Value::integer(BigInt(v.as_list().size()));
        if (v.is_record()) return Value::integer(BigInt(v.as_record().size()));
        detail::kind_fail("'len'");
      }
      if (e.name == "sum") {
        Value v = eval_expr(e.children[0], env);
        if (!v.is_list()) detail::kind_fail("'sum'");
        bool any_dec = false;
        for (const auto& x : v.as_list())
          if (x.is_decimal()) any_dec = true;
        if (any_dec) {
          Decimal acc(BigInt(0), 0);
          for (const auto& x : v.as_list()) {
            if (!x.is_integer() && !x.is_decimal()) detail::kind_fail("'sum'");
            acc = acc.add(detail::as_dec(x));
          }
          return Value::decimal(acc);
        }
        BigInt acc = 0;
        for (const auto& x : v.as_list()) {
          if (!x.is_integer()) detail::kind_fail("'sum'");
          acc += x.as_integer();
        }
        return Value::integer(std::move(acc));
      }
      if (e.name == "first" || e.name == "last") {
        Value v = eval_expr(e.children[0], env);
        if (!v.is_list()) detail::kind_fail("'first'");
        if (v.as_list().empty())
          throw EffectRuntimeError("empty_list", "'" + e.name + "' on an empty list");
        return e.name == "first" ? v.as_list().front() : v.as_list().back();
      }
      if (e.name == "pluck") {
        Value v = eval_expr(e.children[0], env);
        if (!v.is_list()) detail::kind_fail("'pluck'");
        const std::string& field = e.children[1].name;
        Value::List out;
        for (const auto& x : v.as_list()) {
          if (!x.is_record()) detail::kind_fail("'pluck'");
          auto it = x.as_record().find(field);
          if (it == x.as_record().end())
            throw EffectRuntimeError("kind_mismatch", "'pluck': no field '" + field + "'");
          out.push_back(it->second);
        }
        return Value::list(std::move(out));
      }
      if (e.name == "contains") {
        Value v = eval_expr(e.children[0], env);
        Value x = eval_expr(e.children[1], env);
        if (v.is_record()) {
          if (!x.is_text()) detail::kind_fail("'contains'");
          return Value::boolean(v.as_record().count(x.as_text()) > 0);
        }
        if (v.is_list()) {
          for (const auto& y : v.as_list())
            if (semantic_equal(y, x)) return Value::boolean(true);
          return Value::boolean(false);
        }
        detail::kind_fail("'contains'");
      }
      if (e.name == "str") {
        Value v = eval_expr(e.children[0], env);
        if (!v.is_scalar()) detail::kind_fail("'str'");
        return Value::text(scalar_text(v));
      }
      throw EffectRuntimeError("unknown_binding", "unknown function '" + e.name + "'");
    }
  }
  throw EffectRuntimeError("kind_mismatch", "unhandled expression");
}

}  // namespace envsmith
