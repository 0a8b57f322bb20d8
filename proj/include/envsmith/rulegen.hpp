#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "envsmith/client.hpp"
#include "envsmith/tool.hpp"

namespace envsmith {

namespace detail {

/// Collects numeric leaves (canonical integer/decimal strings) from a
/// canonical JSON value.
inline void numeric_leaves(const json& j, std::vector<Decimal>& out) {
  if (j.is_string()) {
    auto d = Decimal::parse(j.get<std::string>());
    if (d) out.push_back(*d);
    return;
  }
  if (j.is_array())
    for (const auto& e : j) numeric_leaves(e, out);
  if (j.is_object())
    for (const auto& [k, e] : j.items()) {
      (void)k;
      numeric_leaves(e, out);
    }
}

inline std::string humanize(const std::string& name) {
  std::string out = name;
  for (auto& c : out)
    if (c == '_') c = ' ';
  return out;
}

}  // namespace detail

/// Deterministic offline generation backend. Every response is a pure
/// function of the request payload, so pipelines built on it are exactly
/// reproducible without recordings. Environment synthesis stages are out of
/// its reach and fail as unavailable.
class RuleBasedGenerator : public GenClient {
 public:
  GenResponse generate(const GenRequest& req) override {
    const json& p = req.payload;
    if (req.stage == "edge_judgement") return {edge_judgement(p)};
    if (req.stage == "merge_redundancy") return {merge_redundancy(p)};
    if (req.stage == "reasoning_nodes") return {reasoning_nodes(p)};
    if (req.stage == "reasoning_edges") return {reasoning_edges(p)};
    if (req.stage == "reasoning_eval") return {reasoning_eval(p)};
    if (req.stage == "question") return {question(p)};
    if (req.stage == "refine") return {p.value("question", "")};
    if (req.stage == "args") return {args(p)};
    if (req.stage == "meu_judge") return {"False"};
    throw ClientUnavailable("builtin backend cannot serve stage '" + req.stage + "'");
  }

 private:
  static bool feeds(const json& out, const json& param) {
    ReturnField f;
    f.name = out.value("name", "");
    f.kind = value_kind_from(out.value("kind", "text")).value_or(ValueKind::Text);
    f.ref_target = out.value("ref", "");
    ParamSpec ps;
    ps.name = param.value("name", "");
    ps.kind = value_kind_from(param.value("kind", "text")).value_or(ValueKind::Text);
    ps.ref_target = param.value("ref", "");
    return output_feeds_param(f, ps);
  }

  static std::string edge_judgement(const json& p) {
    for (const auto& out : p.at("from").value("outputs", json::array()))
      for (const auto& param : p.at("to").value("params", json::array()))
        if (feeds(out, param)) return "yes";
    return "no";
  }

  static std::string merge_redundancy(const json& p) {
    // A later pure-read tool whose outputs duplicate an earlier tool's adds
    // nothing to the merged sequence.
    std::set<std::string> seen_output_sets;
    json drop = json::array();
    for (const auto& t : p.value("tools", json::array())) {
      std::vector<std::string> outs = t.value("outputs", std::vector<std::string>{});
      std::sort(outs.begin(), outs.end());
      std::string key;
      for (const auto& o : outs) key += o + ",";
      if (t.value("pure_read", false)) {
        if (!seen_output_sets.insert(key).second) drop.push_back(t.value("name", ""));
      } else {
        seen_output_sets.insert(key);
      }
    }
    return drop.dump();
  }

  static std::string reasoning_nodes(const json& p) {
    struct NumOut {
      size_t index;
      std::string tool;
      std::string field;
      std::string kind;
    };
    std::vector<NumOut> numeric;
    for (const auto& t : p.value("sequence", json::array())) {
      for (const auto& o : t.value("outputs", json::array())) {
        std::string k = o.value("kind", "text");
        if (k == "integer" || k == "decimal") {
          numeric.push_back({t.value("index", size_t(0)), t.value("name", ""),
                             o.value("name", ""), k});
          break;
        }
      }
    }
    size_t cap = p.value("max", size_t(2));
    json out = json::array();
    if (!numeric.empty() && cap > 0) {
      const NumOut& a = numeric.front();
      json n = json::object();
      n["after"] = a.index;
      n["prompt"] = "Report the " + a.field + " value returned by " + detail::humanize(a.tool) +
                    " exactly as given.";
      n["output_kind"] = a.kind;
      n["inputs"] = json::array({a.index});
      out.push_back(std::move(n));
    }
    if (numeric.size() >= 2 && cap > 1) {
      const NumOut& a = numeric[numeric.size() - 2];
      const NumOut& b = numeric.back();
      json n = json::object();
      n["after"] = b.index;
      n["prompt"] = "Add the " + a.field + " value from " + detail::humanize(a.tool) + " to the " +
                    b.field + " value from " + detail::humanize(b.tool) +
                    " and report the total.";
      n["output_kind"] = (a.kind == "integer" && b.kind == "integer") ? "integer" : "decimal";
      n["inputs"] = json::array({a.index, b.index});
      out.push_back(std::move(n));
    }
    return out.dump();
  }

  static std::string reasoning_edges(const json& p) {
    // One extra dataflow edge from the first node to the last when they are
    // distinct; the integration step checks direction anyway.
    auto nodes = p.value("nodes", std::vector<std::string>{});
    json out = json::array();
    if (nodes.size() >= 2) {
      json e = json::object();
      e["from"] = nodes.front();
      e["to"] = nodes.back();
      out.push_back(std::move(e));
    }
    return out.dump();
  }

  static std::string reasoning_eval(const json& p) {
    std::vector<Decimal> leaves;
    for (const auto& in : p.value("inputs", json::array()))
      detail::numeric_leaves(in.value("value", json()), leaves);
    Decimal sum(BigInt(0), 0);
    for (const auto& d : leaves) sum = sum.add(d);
    if (p.value("output_kind", "decimal") == "integer") {
      auto scaled = sum.rescaled(0);
      if (scaled) return scaled->str();
    }
    return sum.str();
  }

  static std::string question(const json& p) {
    std::string text = "In the " + p.value("env", std::string("current")) + " workspace, ";
    std::vector<std::string> tools = p.value("tools", std::vector<std::string>{});
    if (!tools.empty()) {
      text += "please ";
      for (size_t i = 0; i < tools.size(); ++i) {
        if (i) text += i + 1 == tools.size() ? " and then " : ", ";
        text += detail::humanize(tools[i]);
      }
    }
    std::string entity = p.value("entity", "");
    if (!entity.empty())
      text += ", starting from " + p.value("collection", std::string("entry")) + " " + entity;
    text += ".";
    return text;
  }

  // Pull a literal for an unfed parameter out of the example entities, matching
  // the parameter name against record fields.
  static json sample_field(const json& p, const std::string& name) {
    json samples = p.value("samples", json::object());
    for (const auto& [coll, rows] : samples.items()) {
      (void)coll;
      if (!rows.is_array()) continue;
      for (const auto& row : rows) {
        if (!row.is_object() || !row.contains(name)) continue;
        const json& v = row.at(name);
        if (v.is_string() || v.is_boolean()) return v;
      }
    }
    return json();
  }

  static std::string args(const json& p) {
    json out = json::object();
    const json& prior = p.value("prior", json::array());
    const json& entities = p.value("entities", json::object());
    std::map<std::string, size_t> ref_cursor;  // distinct keys per target collection
    for (const auto& param : p.at("tool").value("params", json::array())) {
      std::string name = param.value("name", "");
      bool bound = false;
      for (auto it = prior.rbegin(); it != prior.rend() && !bound; ++it) {
        for (const auto& o : it->value("outputs", json::array())) {
          if (feeds(o, param)) {
            json b = json::object();
            b["ref"] = it->value("node", "");
            b["field"] = o.value("name", "");
            out[name] = std::move(b);
            bound = true;
            break;
          }
        }
      }
      if (bound) continue;
      std::string kind = param.value("kind", "text");
      std::string ref = param.value("ref", "");
      json b = json::object();
      json sampled = sample_field(p, name);
      if (kind == "reference" && entities.contains(ref) && !entities.at(ref).empty()) {
        size_t n = entities.at(ref).size();
        size_t& cur = ref_cursor[ref];
        b["lit"] = entities.at(ref).at(std::min(cur, n - 1));
        ++cur;
      } else if (kind != "reference" && !sampled.is_null()) {
        b["lit"] = std::move(sampled);
      } else if (kind == "integer") {
        b["lit"] = "1";
      } else if (kind == "decimal") {
        b["lit"] = "5.00";
      } else if (kind == "boolean") {
        b["lit"] = true;
      } else {
        b["lit"] = "note";
      }
      out[name] = std::move(b);
    }
    return out.dump();
  }
};

}  // namespace envsmith
