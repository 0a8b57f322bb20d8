#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "envsmith/statedoc.hpp"
#include "envsmith/tool.hpp"

namespace envsmith {

/// Outcome of one tool call. Failures are data, not exceptions: the error
/// code is stable and machine-readable, and the state hash always reflects
/// the document after the call (unchanged on failure).
struct ToolCallResult {
  bool ok = false;
  Value value;
  std::string error_code;
  std::string error_detail;
  std::string state_after_hash;

  json to_json() const {
    json out = json::object();
    out["ok"] = ok;
    if (ok)
      out["value"] = json::parse(canonical_json(value));
    else {
      out["error_code"] = error_code;
      out["error_detail"] = error_detail;
    }
    out["state_after_hash"] = state_after_hash;
    return out;
  }

  static ToolCallResult from_json(const json& j);
};

/// Reads a value back from canonical JSON without schema context. Digit
/// strings come back as numbers; the canonical form renders those the same
/// either way, so re-serialization is byte-faithful regardless.
inline Value value_from_canonical(const json& j) {
  if (j.is_boolean()) return Value::boolean(j.get<bool>());
  if (j.is_string()) {
    const std::string& s = j.get<std::string>();
    BigInt n;
    if (parse_bigint(s, n)) return Value::integer(std::move(n));
    if (s.find('.') != std::string::npos)
      if (auto d = Decimal::parse(s)) return Value::decimal(*d);
    return Value::text(s);
  }
  if (j.is_array()) {
    Value::List xs;
    for (const auto& e : j) xs.push_back(value_from_canonical(e));
    return Value::list(std::move(xs));
  }
  if (j.is_object()) {
    Value::Record r;
    for (auto it = j.begin(); it != j.end(); ++it)
      r.emplace(it.key(), value_from_canonical(it.value()));
    return Value::record(std::move(r));
  }
  throw SchemaViolation("not a canonical value: " + j.dump());
}

inline ToolCallResult ToolCallResult::from_json(const json& j) {
  ToolCallResult r;
  r.ok = j.value("ok", false);
  if (r.ok && j.contains("value")) r.value = value_from_canonical(j.at("value"));
  r.error_code = j.value("error_code", "");
  r.error_detail = j.value("error_detail", "");
  r.state_after_hash = j.value("state_after_hash", "");
  return r;
}

struct ExecOutcome {
  StateDoc doc;
  ToolCallResult result;
};

using ArgMap = std::map<std::string, Value>;

namespace detail {

struct UndoEntry {
  enum class Kind { SetBack, Remove, Truncate };
  Kind kind = Kind::SetBack;
  Path path;
  Value old;
  size_t length = 0;
};

inline void rollback(StateDoc& doc, std::vector<UndoEntry>& journal) {
  for (auto it = journal.rbegin(); it != journal.rend(); ++it) {
    switch (it->kind) {
      case UndoEntry::Kind::SetBack: doc.raw_set(it->path, std::move(it->old)); break;
      case UndoEntry::Kind::Remove: doc.raw_remove(it->path); break;
      case UndoEntry::Kind::Truncate: doc.list_truncate(it->path, it->length); break;
    }
  }
  journal.clear();
}

/// Replaces template segments with bound values: text becomes a key
/// segment, integer becomes a list index.
inline Path instantiate_path(const Path& pattern, const EvalEnv& env) {
  Path out;
  out.reserve(pattern.size());
  for (const auto& seg : pattern) {
    if (seg.tag != PathSeg::Tag::Template) {
      out.push_back(seg);
      continue;
    }
    auto it = env.find(seg.text);
    if (it == env.end())
      throw EffectRuntimeError("unknown_binding", "path binding '" + seg.text + "' missing");
    const Value& v = it->second;
    PathSeg s;
    if (v.is_text()) {
      const std::string& key = v.as_text();
      if (key.find_first_not_of("0123456789") == std::string::npos) {
        if (key.empty())
          throw EffectRuntimeError("unknown_path", "empty key for '" + seg.text + "'");
        s.tag = PathSeg::Tag::Index;
        s.index = std::stoull(key);
        s.text = key;
      } else {
        bool ok = true;
        for (char c : key)
          if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) ok = false;
        if (!ok)
          throw EffectRuntimeError("unknown_path",
                                   "'" + key + "' is not a usable key for '" + seg.text + "'");
        s.tag = PathSeg::Tag::Literal;
        s.text = key;
      }
    } else if (v.is_integer()) {
      if (v.as_integer() < 0)
        throw EffectRuntimeError("index_out_of_range", "negative index for '" + seg.text + "'");
      s.tag = PathSeg::Tag::Index;
      s.index = static_cast<size_t>(v.as_integer().convert_to<unsigned long long>());
      s.text = v.as_integer().str();
    } else {
      throw EffectRuntimeError("kind_mismatch", "path binding '" + seg.text +
                                                    "' must be text or integer");
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Widens a returned value toward the declared return kinds so callers see
/// stable kinds (a computed integer in a decimal slot comes back decimal).
inline Value conform_return(const ReturnSpec& rs, Value v) {
  auto widen = [](ValueKind k, Value x) {
    if (k == ValueKind::Decimal && x.is_integer())
      return Value::decimal(Decimal::from_int(x.as_integer()));
    return x;
  };
  switch (rs.shape) {
    case ReturnSpec::Shape::Scalar: return widen(rs.kind, std::move(v));
    case ReturnSpec::Shape::List: {
      if (!v.is_list()) return v;
      for (auto& x : v.as_list()) x = widen(rs.kind, std::move(x));
      return v;
    }
    case ReturnSpec::Shape::Record: {
      if (!v.is_record()) return v;
      for (const auto& f : rs.fields) {
        auto it = v.as_record().find(f.name);
        if (it != v.as_record().end()) it->second = widen(f.kind, std::move(it->second));
      }
      return v;
    }
  }
  return v;
}

}  // namespace detail

/// Checks arguments against a tool's parameters: unknown names rejected,
/// required ones present, kinds matching (integers widen into decimal
/// parameters), optional ones defaulted. Throws EffectRuntimeError.
inline EvalEnv conform_args(const ToolSpec& tool, const ArgMap& args) {
  for (const auto& [name, v] : args) {
    (void)v;
    if (!tool.find_param(name))
      throw EffectRuntimeError("unknown_argument", "tool '" + tool.name +
                                                       "' has no parameter '" + name + "'");
  }
  EvalEnv env;
  for (const auto& p : tool.params) {
    auto it = args.find(p.name);
    if (it == args.end()) {
      if (p.required)
        throw EffectRuntimeError("missing_argument", "'" + p.name + "' is required");
      if (p.default_value)
        env.emplace(p.name, *p.default_value);
      else
        switch (p.kind) {
          case ValueKind::Integer: env.emplace(p.name, Value::integer(0)); break;
          case ValueKind::Decimal:
            env.emplace(p.name, Value::decimal(Decimal(BigInt(0), 0)));
            break;
          case ValueKind::Boolean: env.emplace(p.name, Value::boolean(false)); break;
          default: env.emplace(p.name, Value::text("")); break;
        }
      continue;
    }
    Value v = it->second;
    switch (p.kind) {
      case ValueKind::Text:
      case ValueKind::Reference:
        if (!v.is_text())
          throw EffectRuntimeError("arg_kind_mismatch", "'" + p.name + "' needs text");
        break;
      case ValueKind::Integer:
        if (!v.is_integer())
          throw EffectRuntimeError("arg_kind_mismatch", "'" + p.name + "' needs an integer");
        break;
      case ValueKind::Decimal:
        if (v.is_integer()) v = Value::decimal(Decimal::from_int(v.as_integer()));
        if (!v.is_decimal())
          throw EffectRuntimeError("arg_kind_mismatch", "'" + p.name + "' needs a decimal");
        break;
      case ValueKind::Boolean:
        if (!v.is_boolean())
          throw EffectRuntimeError("arg_kind_mismatch", "'" + p.name + "' needs a boolean");
        break;
    }
    env.emplace(p.name, std::move(v));
  }
  return env;
}

/// Runs one tool call against the document. All-or-nothing: a failing step
/// rolls back every write the call made, and the failure comes back as an
/// error code in the result. The tool must have passed validate_tool for
/// the document's schema.
inline ExecOutcome execute_tool(const ToolSpec& tool, const ArgMap& args, StateDoc doc) {
  std::vector<detail::UndoEntry> journal;
  try {
    EvalEnv env = conform_args(tool, args);
    Value returned;
    for (const auto& step : tool.effect) {
      switch (step.op) {
        case EffectStep::Op::Get: {
          Path p = detail::instantiate_path(parse_path(step.path, true), env);
          const Value* v = doc.get(p);
          if (!v) throw EffectRuntimeError("not_found", "nothing at '" + path_str(p) + "'");
          env.emplace(step.out, *v);
          break;
        }
        case EffectStep::Op::Filter: {
          Value src = eval_expr(parse_expr(step.in), env);
          Value::List elems;
          if (src.is_list()) {
            elems = src.as_list();
          } else if (src.is_record()) {
            for (const auto& [key, ev] : src.as_record()) {
              Value e = ev;
              if (e.is_record()) e.as_record().emplace("_key", Value::text(key));
              elems.push_back(std::move(e));
            }
          } else {
            throw EffectRuntimeError("kind_mismatch", "FILTER source must be list or record");
          }
          Expr pred = parse_expr(step.expr);
          Value::List kept;
          for (auto& e : elems) {
            EvalEnv inner = env;
            inner.emplace(step.bind, e);
            Value c = eval_expr(pred, inner);
            if (!c.is_boolean())
              throw EffectRuntimeError("kind_mismatch", "FILTER predicate must be boolean");
            if (c.as_boolean()) kept.push_back(std::move(e));
          }
          env.emplace(step.out, Value::list(std::move(kept)));
          break;
        }
        case EffectStep::Op::Compute: {
          env.emplace(step.out, eval_expr(parse_expr(step.expr), env));
          break;
        }
        case EffectStep::Op::Set: {
          Path p = detail::instantiate_path(parse_path(step.path, true), env);
          Value v = eval_expr(parse_expr(step.expr), env);
          detail::UndoEntry u;
          u.path = p;
          if (const Value* cur = doc.get(p)) {
            u.kind = detail::UndoEntry::Kind::SetBack;
            u.old = *cur;
          } else {
            u.kind = detail::UndoEntry::Kind::Remove;
          }
          doc.set_checked(p, std::move(v));
          journal.push_back(std::move(u));
          break;
        }
        case EffectStep::Op::Append: {
          Path p = detail::instantiate_path(parse_path(step.path, true), env);
          Value v = eval_expr(parse_expr(step.expr), env);
          const Value* cur = doc.get(p);
          if (!cur || !cur->is_list())
            throw EffectRuntimeError("unknown_path", "no list at '" + path_str(p) + "'");
          detail::UndoEntry u;
          u.kind = detail::UndoEntry::Kind::Truncate;
          u.path = p;
          u.length = cur->as_list().size();
          doc.append_checked(p, std::move(v));
          journal.push_back(std::move(u));
          break;
        }
        case EffectStep::Op::Assert: {
          Value c = eval_expr(parse_expr(step.expr), env);
          if (!c.is_boolean())
            throw EffectRuntimeError("kind_mismatch", "ASSERT condition must be boolean");
          if (!c.as_boolean())
            throw EffectRuntimeError(step.code, "assertion failed in '" + tool.name + "'");
          break;
        }
        case EffectStep::Op::Return: {
          returned = detail::conform_return(tool.returns, eval_expr(parse_expr(step.expr), env));
          break;
        }
      }
    }
    ToolCallResult res;
    res.ok = true;
    res.value = std::move(returned);
    res.state_after_hash = doc.doc_hash();
    return {std::move(doc), std::move(res)};
  } catch (const EffectRuntimeError& e) {
    detail::rollback(doc, journal);
    ToolCallResult res;
    res.ok = false;
    res.error_code = e.code();
    res.error_detail = e.what();
    res.state_after_hash = doc.doc_hash();
    return {std::move(doc), std::move(res)};
  }
}

struct SequenceStep {
  std::string tool;
  ArgMap args;
};

struct SequenceResult {
  StateDoc doc;
  std::vector<ToolCallResult> results;
  std::optional<size_t> failed_index;

  bool ok() const { return !failed_index.has_value(); }
};

/// Runs tool calls in order, stopping at the first failure. An unknown tool
/// name is a programming error and throws.
template <typename ToolLookup>
inline SequenceResult execute_sequence(const ToolLookup& find_tool,
                                       const std::vector<SequenceStep>& steps, StateDoc doc) {
  SequenceResult out;
  for (size_t i = 0; i < steps.size(); ++i) {
    const ToolSpec* tool = find_tool(steps[i].tool);
    if (!tool) throw Error("no tool named '" + steps[i].tool + "'");
    ExecOutcome o = execute_tool(*tool, steps[i].args, std::move(doc));
    doc = std::move(o.doc);
    out.results.push_back(std::move(o.result));
    if (!out.results.back().ok) {
      out.failed_index = i;
      break;
    }
  }
  out.doc = std::move(doc);
  return out;
}

}  // namespace envsmith
