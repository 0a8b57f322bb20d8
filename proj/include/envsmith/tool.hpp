#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "envsmith/digest.hpp"
#include "envsmith/expr.hpp"
#include "envsmith/schema.hpp"

namespace envsmith {

struct ParamSpec {
  std::string name;
  ValueKind kind = ValueKind::Text;
  bool required = true;
  std::optional<Value> default_value;
  std::string ref_target;  // kind == Reference
  std::string description;
};

struct ReturnField {
  std::string name;
  ValueKind kind = ValueKind::Text;
  std::string ref_target;
};

/// Shape of a tool's return value. Scalars and lists carry a field name so
/// tool outputs can be matched against parameter names downstream.
struct ReturnSpec {
  enum class Shape { Scalar, Record, List };
  Shape shape = Shape::Scalar;
  ValueKind kind = ValueKind::Text;  // scalar / list element
  std::string name;                  // scalar / list
  std::vector<ReturnField> fields;   // record
  std::string ref_target;

  /// Output fields visible to graph construction and argument binding.
  std::vector<ReturnField> output_fields() const {
    if (shape == Shape::Record) return fields;
    return {{name, kind, ref_target}};
  }
};

struct EffectStep {
  enum class Op { Get, Filter, Compute, Set, Append, Assert, Return };
  Op op = Op::Get;
  std::string path;    // Get / Set / Append, may hold {binding} segments
  std::string out;     // Get / Filter / Compute
  std::string bind;    // Filter element binding
  std::string code;    // Assert failure code
  std::string expr;    // value / cond / return / filter predicate
  std::string in;      // Filter source
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
  ReturnSpec returns;
  std::vector<std::string> reads;
  std::vector<std::string> writes;
  std::vector<EffectStep> effect;

  const ParamSpec* find_param(const std::string& n) const {
    for (const auto& p : params)
      if (p.name == n) return &p;
    return nullptr;
  }

  /// True when no effect step writes state.
  bool pure_read() const {
    for (const auto& s : effect)
      if (s.op == EffectStep::Op::Set || s.op == EffectStep::Op::Append) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// JSON form

inline json param_to_json(const ParamSpec& p) {
  json out = json::object();
  out["name"] = p.name;
  out["kind"] = value_kind_name(p.kind);
  out["required"] = p.required;
  if (p.default_value) {
    const Value& v = *p.default_value;
    if (v.is_boolean())
      out["default"] = v.as_boolean();
    else
      out["default"] = scalar_text(v);
  }
  if (!p.ref_target.empty()) out["ref"] = p.ref_target;
  if (!p.description.empty()) out["description"] = p.description;
  return out;
}

inline ParamSpec param_from_json(const json& j) {
  ParamSpec p;
  p.name = j.value("name", "");
  auto k = value_kind_from(j.value("kind", "text"));
  if (!k) throw SchemaViolation("unknown param kind in '" + p.name + "'");
  p.kind = *k;
  p.required = j.value("required", true);
  p.ref_target = j.value("ref", "");
  p.description = j.value("description", "");
  if (j.contains("default")) {
    const json& d = j.at("default");
    switch (p.kind) {
      case ValueKind::Boolean:
        if (!d.is_boolean()) throw SchemaViolation("default for '" + p.name + "' must be boolean");
        p.default_value = Value::boolean(d.get<bool>());
        break;
      case ValueKind::Integer: {
        BigInt n;
        if (d.is_number_integer())
          n = BigInt(d.get<int64_t>());
        else if (!d.is_string() || !parse_bigint(d.get<std::string>(), n))
          throw SchemaViolation("default for '" + p.name + "' must be an integer");
        p.default_value = Value::integer(std::move(n));
        break;
      }
      case ValueKind::Decimal: {
        std::optional<Decimal> dec;
        if (d.is_number_integer())
          dec = Decimal::from_int(BigInt(d.get<int64_t>()));
        else if (d.is_string())
          dec = Decimal::parse(d.get<std::string>());
        if (!dec) throw SchemaViolation("default for '" + p.name + "' must be a decimal");
        p.default_value = Value::decimal(*dec);
        break;
      }
      default:
        if (!d.is_string()) throw SchemaViolation("default for '" + p.name + "' must be text");
        p.default_value = Value::text(d.get<std::string>());
    }
  }
  return p;
}

inline json return_to_json(const ReturnSpec& r) {
  json out = json::object();
  switch (r.shape) {
    case ReturnSpec::Shape::Scalar:
      out["shape"] = "scalar";
      out["kind"] = value_kind_name(r.kind);
      out["name"] = r.name;
      if (!r.ref_target.empty()) out["ref"] = r.ref_target;
      break;
    case ReturnSpec::Shape::List:
      out["shape"] = "list";
      out["kind"] = value_kind_name(r.kind);
      out["name"] = r.name;
      if (!r.ref_target.empty()) out["ref"] = r.ref_target;
      break;
    case ReturnSpec::Shape::Record: {
      out["shape"] = "record";
      json fs = json::array();
      for (const auto& f : r.fields) {
        json fj = json::object();
        fj["name"] = f.name;
        fj["kind"] = value_kind_name(f.kind);
        if (!f.ref_target.empty()) fj["ref"] = f.ref_target;
        fs.push_back(fj);
      }
      out["fields"] = fs;
      break;
    }
  }
  return out;
}

inline ReturnSpec return_from_json(const json& j) {
  ReturnSpec r;
  std::string shape = j.value("shape", "scalar");
  if (shape == "scalar")
    r.shape = ReturnSpec::Shape::Scalar;
  else if (shape == "list")
    r.shape = ReturnSpec::Shape::List;
  else if (shape == "record")
    r.shape = ReturnSpec::Shape::Record;
  else
    throw SchemaViolation("unknown return shape '" + shape + "'");
  if (r.shape == ReturnSpec::Shape::Record) {
    for (const auto& fj : j.value("fields", json::array())) {
      ReturnField f;
      f.name = fj.value("name", "");
      auto k = value_kind_from(fj.value("kind", "text"));
      if (!k) throw SchemaViolation("unknown return field kind");
      f.kind = *k;
      f.ref_target = fj.value("ref", "");
      r.fields.push_back(f);
    }
  } else {
    auto k = value_kind_from(j.value("kind", "text"));
    if (!k) throw SchemaViolation("unknown return kind");
    r.kind = *k;
    r.name = j.value("name", "");
    r.ref_target = j.value("ref", "");
  }
  return r;
}

inline const char* step_op_name(EffectStep::Op op) {
  switch (op) {
    case EffectStep::Op::Get: return "GET";
    case EffectStep::Op::Filter: return "FILTER";
    case EffectStep::Op::Compute: return "COMPUTE";
    case EffectStep::Op::Set: return "SET";
    case EffectStep::Op::Append: return "APPEND";
    case EffectStep::Op::Assert: return "ASSERT";
    case EffectStep::Op::Return: return "RETURN";
  }
  return "?";
}

inline json step_to_json(const EffectStep& s) {
  json out = json::object();
  out["op"] = step_op_name(s.op);
  switch (s.op) {
    case EffectStep::Op::Get:
      out["path"] = s.path;
      out["out"] = s.out;
      break;
    case EffectStep::Op::Filter:
      out["in"] = s.in;
      out["bind"] = s.bind;
      out["where"] = s.expr;
      out["out"] = s.out;
      break;
    case EffectStep::Op::Compute:
      out["expr"] = s.expr;
      out["out"] = s.out;
      break;
    case EffectStep::Op::Set:
    case EffectStep::Op::Append:
      out["path"] = s.path;
      out["value"] = s.expr;
      break;
    case EffectStep::Op::Assert:
      out["cond"] = s.expr;
      out["code"] = s.code;
      break;
    case EffectStep::Op::Return:
      out["expr"] = s.expr;
      break;
  }
  return out;
}

inline EffectStep step_from_json(const json& j) {
  EffectStep s;
  std::string op = j.value("op", "");
  if (op == "GET") {
    s.op = EffectStep::Op::Get;
    s.path = j.value("path", "");
    s.out = j.value("out", "");
  } else if (op == "FILTER") {
    s.op = EffectStep::Op::Filter;
    s.in = j.value("in", "");
    s.bind = j.value("bind", "");
    s.expr = j.value("where", "");
    s.out = j.value("out", "");
  } else if (op == "COMPUTE") {
    s.op = EffectStep::Op::Compute;
    s.expr = j.value("expr", "");
    s.out = j.value("out", "");
  } else if (op == "SET" || op == "APPEND") {
    s.op = op == "SET" ? EffectStep::Op::Set : EffectStep::Op::Append;
    s.path = j.value("path", "");
    s.expr = j.value("value", "");
  } else if (op == "ASSERT") {
    s.op = EffectStep::Op::Assert;
    s.expr = j.value("cond", "");
    s.code = j.value("code", "");
  } else if (op == "RETURN") {
    s.op = EffectStep::Op::Return;
    s.expr = j.value("expr", "");
  } else {
    throw SchemaViolation("unknown effect op '" + op + "'");
  }
  return s;
}

inline json tool_to_json(const ToolSpec& t) {
  json out = json::object();
  out["name"] = t.name;
  if (!t.description.empty()) out["description"] = t.description;
  json ps = json::array();
  for (const auto& p : t.params) ps.push_back(param_to_json(p));
  out["params"] = ps;
  out["returns"] = return_to_json(t.returns);
  out["reads"] = t.reads;
  out["writes"] = t.writes;
  json es = json::array();
  for (const auto& s : t.effect) es.push_back(step_to_json(s));
  out["effect"] = es;
  return out;
}

inline ToolSpec tool_from_json(const json& j) {
  ToolSpec t;
  t.name = j.value("name", "");
  t.description = j.value("description", "");
  for (const auto& pj : j.value("params", json::array())) t.params.push_back(param_from_json(pj));
  if (j.contains("returns")) t.returns = return_from_json(j.at("returns"));
  t.reads = j.value("reads", std::vector<std::string>{});
  t.writes = j.value("writes", std::vector<std::string>{});
  for (const auto& sj : j.value("effect", json::array())) t.effect.push_back(step_from_json(sj));
  return t;
}

inline std::string tool_digest(const ToolSpec& t) { return sha256_hex(tool_to_json(t).dump()); }

/// Whether a tool's output field can plausibly feed a parameter: the kinds
/// line up (integers feed decimal slots, entity keys are text) and either
/// the names match or both sides reference the same collection.
inline bool output_feeds_param(const ReturnField& out, const ParamSpec& param) {
  auto base = [](ValueKind k) { return k == ValueKind::Reference ? ValueKind::Text : k; };
  bool kind_ok = base(out.kind) == base(param.kind) ||
                 (out.kind == ValueKind::Integer && param.kind == ValueKind::Decimal);
  if (!kind_ok) return false;
  if (!out.ref_target.empty() && out.ref_target == param.ref_target) return true;
  return out.name == param.name;
}

// ---------------------------------------------------------------------------
// Access patterns

/// An access pattern is a dotted path whose segments may be '*', matching
/// any one segment. A pattern covers a path when it matches a prefix of it:
/// the pattern names a subtree that contains the path's subtree.
inline std::vector<std::string> split_pattern(const std::string& pattern) {
  std::vector<std::string> segs;
  size_t i = 0;
  while (i <= pattern.size()) {
    size_t dot = pattern.find('.', i);
    segs.push_back(pattern.substr(i, dot == std::string::npos ? std::string::npos : dot - i));
    if (dot == std::string::npos) break;
    i = dot + 1;
  }
  return segs;
}

inline bool pattern_covers(const std::string& pattern, const Path& path) {
  auto segs = split_pattern(pattern);
  if (segs.size() > path.size()) return false;
  for (size_t i = 0; i < segs.size(); ++i) {
    if (segs[i] == "*") continue;
    if (path[i].tag == PathSeg::Tag::Template) return false;
    if (segs[i] != path[i].text) return false;
  }
  return true;
}

inline bool any_pattern_covers(const std::vector<std::string>& patterns, const Path& path) {
  for (const auto& p : patterns)
    if (pattern_covers(p, path)) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Static validation

namespace detail {

/// Walks a templated path through the schema, checking that each template
/// binding has a usable kind for its position (text for entity keys,
/// integer or text for list indices).
inline std::optional<SchemaNode> check_path(const AttributeSchema& schema, const Path& path,
                                            const TypeEnv& env, std::string& err) {
  if (path.empty()) {
    err = "empty path";
    return std::nullopt;
  }
  if (path[0].tag != PathSeg::Tag::Literal) {
    err = "path must start with an attribute name";
    return std::nullopt;
  }
  for (const auto& seg : path)
    if (seg.tag == PathSeg::Tag::Template) {
      auto it = env.find(seg.text);
      if (it == env.end()) {
        err = "path binding '" + seg.text + "' is not defined";
        return std::nullopt;
      }
      if (it->second.tag != StaticType::Tag::Text &&
          it->second.tag != StaticType::Tag::Integer) {
        err = "path binding '" + seg.text + "' must be text or integer, is " + it->second.str();
        return std::nullopt;
      }
    }
  auto node = resolve_schema_path(schema, path, &err);
  if (!node) return std::nullopt;
  return node;
}

inline bool assignable(const StaticType& target, const StaticType& value) {
  if (target == value) return true;
  // Integers widen into decimal slots.
  if (target.tag == StaticType::Tag::Decimal && value.tag == StaticType::Tag::Integer) return true;
  if (target.tag == StaticType::Tag::List && value.tag == StaticType::Tag::List &&
      !target.elem.empty() && !value.elem.empty())
    return assignable(target.elem[0], value.elem[0]);
  if (target.tag == StaticType::Tag::Record && value.tag == StaticType::Tag::Record &&
      !target.open && !value.open) {
    if (target.fields.size() != value.fields.size()) return false;
    for (const auto& [k, t] : target.fields) {
      auto it = value.fields.find(k);
      if (it == value.fields.end() || !assignable(t, it->second)) return false;
    }
    return true;
  }
  return false;
}

inline StaticType kind_static(ValueKind k) {
  switch (k) {
    case ValueKind::Text:
    case ValueKind::Reference: return StaticType::text();
    case ValueKind::Integer: return StaticType::integer();
    case ValueKind::Decimal: return StaticType::decimal();
    case ValueKind::Boolean: return StaticType::boolean();
  }
  return StaticType::text();
}

}  // namespace detail

/// Static checks for one tool against a schema: parameter sanity, binding
/// discipline (single assignment, no use before definition), expression and
/// path types, declared read/write coverage of every state access, and a
/// single trailing RETURN matching the declared shape. Returns diagnostics;
/// a valid tool yields none.
inline std::vector<std::string> validate_tool(const AttributeSchema& schema, const ToolSpec& tool) {
  std::vector<std::string> diags;
  auto diag = [&](const std::string& m) { diags.push_back(tool.name + ": " + m); };
  if (!is_identifier(tool.name)) diags.push_back("bad tool name '" + tool.name + "'");

  TypeEnv env;
  std::set<std::string> names;
  for (const auto& p : tool.params) {
    if (!is_identifier(p.name)) diag("bad parameter name '" + p.name + "'");
    if (!names.insert(p.name).second) diag("duplicate parameter '" + p.name + "'");
    if (p.kind == ValueKind::Reference) {
      const AttributeDef* target = schema.find(p.ref_target);
      if (!target || target->kind != AttrKind::Record || !target->open)
        diag("parameter '" + p.name + "' references '" + p.ref_target +
             "', which is not an open record");
    }
    if (p.default_value && p.required) diag("required parameter '" + p.name + "' has a default");
    env.emplace(p.name, detail::kind_static(p.kind));
  }
  if (tool.returns.shape == ReturnSpec::Shape::Record) {
    std::set<std::string> fnames;
    for (const auto& f : tool.returns.fields) {
      if (!is_identifier(f.name)) diag("bad return field name '" + f.name + "'");
      if (!fnames.insert(f.name).second) diag("duplicate return field '" + f.name + "'");
    }
    if (tool.returns.fields.empty()) diag("record return needs fields");
  } else if (!is_identifier(tool.returns.name)) {
    diag("return value needs an identifier name");
  }

  auto bind_out = [&](const std::string& out, const StaticType& t, const char* op) {
    if (!is_identifier(out)) {
      diag(std::string(op) + " output '" + out + "' is not an identifier");
      return;
    }
    if (!names.insert(out).second) {
      diag(std::string(op) + " rebinds '" + out + "'");
      return;
    }
    env.emplace(out, t);
  };

  size_t returns_seen = 0;
  for (size_t i = 0; i < tool.effect.size(); ++i) {
    const EffectStep& s = tool.effect[i];
    std::string at = "step " + std::to_string(i) + " (" + step_op_name(s.op) + ")";
    try {
      switch (s.op) {
        case EffectStep::Op::Get: {
          Path p = parse_path(s.path, true);
          std::string err;
          auto node = detail::check_path(schema, p, env, err);
          if (!node) {
            diag(at + ": " + err);
            break;
          }
          bind_out(s.out, static_type_of(schema, *node), "GET");
          if (!any_pattern_covers(tool.reads, p))
            diag(at + ": path '" + s.path + "' not covered by declared reads");
          break;
        }
        case EffectStep::Op::Filter: {
          StaticType src = type_expr(parse_expr(s.in), env);
          StaticType elem;
          if (src.tag == StaticType::Tag::List && !src.elem.empty()) {
            elem = src.elem[0];
          } else if (src.tag == StaticType::Tag::Record && src.open && !src.elem.empty()) {
            elem = src.elem[0];
            if (elem.tag == StaticType::Tag::Record)
              elem.fields.emplace("_key", StaticType::text());
          } else {
            diag(at + ": source must be a list or keyed record, got " + src.str());
            break;
          }
          if (!is_identifier(s.bind) || names.count(s.bind)) {
            diag(at + ": bad or reused element binding '" + s.bind + "'");
            break;
          }
          TypeEnv inner = env;
          inner.emplace(s.bind, elem);
          StaticType cond = type_expr(parse_expr(s.expr), inner);
          if (cond.tag != StaticType::Tag::Boolean)
            diag(at + ": predicate must be boolean, got " + cond.str());
          bind_out(s.out, StaticType::list(elem), "FILTER");
          break;
        }
        case EffectStep::Op::Compute: {
          bind_out(s.out, type_expr(parse_expr(s.expr), env), "COMPUTE");
          break;
        }
        case EffectStep::Op::Set: {
          Path p = parse_path(s.path, true);
          std::string err;
          auto node = detail::check_path(schema, p, env, err);
          if (!node) {
            diag(at + ": " + err);
            break;
          }
          StaticType target = static_type_of(schema, *node);
          StaticType value = type_expr(parse_expr(s.expr), env);
          if (!detail::assignable(target, value))
            diag(at + ": cannot write " + value.str() + " into " + target.str());
          if (!any_pattern_covers(tool.writes, p))
            diag(at + ": path '" + s.path + "' not covered by declared writes");
          break;
        }
        case EffectStep::Op::Append: {
          Path p = parse_path(s.path, true);
          std::string err;
          auto node = detail::check_path(schema, p, env, err);
          if (!node) {
            diag(at + ": " + err);
            break;
          }
          if (node->view != SchemaNode::View::Whole || node->def->kind != AttrKind::List) {
            diag(at + ": '" + s.path + "' is not a list");
            break;
          }
          StaticType target = static_type_of(schema, *node);
          StaticType value = type_expr(parse_expr(s.expr), env);
          if (!detail::assignable(target.elem[0], value))
            diag(at + ": cannot append " + value.str() + " to " + target.str());
          if (!any_pattern_covers(tool.writes, p))
            diag(at + ": path '" + s.path + "' not covered by declared writes");
          break;
        }
        case EffectStep::Op::Assert: {
          StaticType cond = type_expr(parse_expr(s.expr), env);
          if (cond.tag != StaticType::Tag::Boolean)
            diag(at + ": condition must be boolean, got " + cond.str());
          if (!is_identifier(s.code)) diag(at + ": failure code must be an identifier");
          break;
        }
        case EffectStep::Op::Return: {
          ++returns_seen;
          if (i + 1 != tool.effect.size()) diag(at + ": RETURN must be the last step");
          StaticType value = type_expr(parse_expr(s.expr), env);
          StaticType declared;
          switch (tool.returns.shape) {
            case ReturnSpec::Shape::Scalar:
              declared = detail::kind_static(tool.returns.kind);
              break;
            case ReturnSpec::Shape::List:
              declared = StaticType::list(detail::kind_static(tool.returns.kind));
              break;
            case ReturnSpec::Shape::Record: {
              std::map<std::string, StaticType> fs;
              for (const auto& f : tool.returns.fields)
                fs.emplace(f.name, detail::kind_static(f.kind));
              declared = StaticType::closed_record(std::move(fs));
              break;
            }
          }
          if (!detail::assignable(declared, value))
            diag(at + ": returns " + value.str() + ", declared " + declared.str());
          break;
        }
      }
    } catch (const Error& e) {
      diag(at + ": " + e.what());
    }
  }
  if (returns_seen != 1) diag("tool needs exactly one RETURN step, has " +
                              std::to_string(returns_seen));

  for (const auto& pat : tool.reads)
    if (split_pattern(pat).empty() || !schema.find(split_pattern(pat)[0]))
      diag("read pattern '" + pat + "' does not start at a schema attribute");
  for (const auto& pat : tool.writes)
    if (split_pattern(pat).empty() || !schema.find(split_pattern(pat)[0]))
      diag("write pattern '" + pat + "' does not start at a schema attribute");
  return diags;
}

}  // namespace envsmith
