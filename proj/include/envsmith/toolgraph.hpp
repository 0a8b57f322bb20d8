#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "envsmith/client.hpp"
#include "envsmith/envdir.hpp"
#include "envsmith/tool.hpp"

namespace envsmith {

/// Directed dependency graph over an environment's tools: an edge u -> v
/// says running u can produce something v consumes. Node and edge lists
/// stay sorted so traversal order never depends on construction order.
struct ToolGraph {
  std::vector<std::string> nodes;
  std::map<std::string, std::vector<std::string>> edges;

  bool has_edge(const std::string& u, const std::string& v) const {
    auto it = edges.find(u);
    if (it == edges.end()) return false;
    return std::binary_search(it->second.begin(), it->second.end(), v);
  }

  size_t edge_count() const {
    size_t n = 0;
    for (const auto& [u, vs] : edges) {
      (void)u;
      n += vs.size();
    }
    return n;
  }

  const std::vector<std::string>& out_edges(const std::string& u) const {
    static const std::vector<std::string> none;
    auto it = edges.find(u);
    return it == edges.end() ? none : it->second;
  }

  json to_json() const {
    json j = json::object();
    j["nodes"] = nodes;
    json es = json::array();
    for (const auto& [u, vs] : edges)
      for (const auto& v : vs) es.push_back(json::array({u, v}));
    j["edges"] = es;
    return j;
  }

  static ToolGraph from_json(const json& j) {
    ToolGraph g;
    g.nodes = j.value("nodes", std::vector<std::string>{});
    std::sort(g.nodes.begin(), g.nodes.end());
    for (const auto& e : j.value("edges", json::array())) {
      if (!e.is_array() || e.size() != 2) throw SchemaViolation("graph edge must be a pair");
      g.edges[e.at(0).get<std::string>()].push_back(e.at(1).get<std::string>());
    }
    for (auto& [u, vs] : g.edges) {
      (void)u;
      std::sort(vs.begin(), vs.end());
      vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    }
    return g;
  }
};

inline json tool_outputs_json(const ToolSpec& t) {
  json out = json::array();
  for (const auto& f : t.returns.output_fields()) {
    json fj = json::object();
    fj["name"] = f.name;
    fj["kind"] = value_kind_name(f.kind);
    if (!f.ref_target.empty()) fj["ref"] = f.ref_target;
    out.push_back(std::move(fj));
  }
  return out;
}

inline json tool_params_json(const ToolSpec& t) {
  json out = json::array();
  for (const auto& p : t.params) {
    json pj = json::object();
    pj["name"] = p.name;
    pj["kind"] = value_kind_name(p.kind);
    pj["required"] = p.required;
    if (!p.ref_target.empty()) pj["ref"] = p.ref_target;
    out.push_back(std::move(pj));
  }
  return out;
}

/// Edge rule without any generation backend: u -> v when some output field
/// of u can feed some parameter of v.
inline ToolGraph build_tool_graph(const Environment& env) {
  ToolGraph g;
  for (const auto& t : env.tools) g.nodes.push_back(t.name);
  std::sort(g.nodes.begin(), g.nodes.end());
  for (const auto& u : env.tools) {
    for (const auto& v : env.tools) {
      if (u.name == v.name) continue;
      bool edge = false;
      for (const auto& out : u.returns.output_fields()) {
        for (const auto& p : v.params)
          if (output_feeds_param(out, p)) {
            edge = true;
            break;
          }
        if (edge) break;
      }
      if (edge) g.edges[u.name].push_back(v.name);
    }
  }
  for (auto& [u, vs] : g.edges) {
    (void)u;
    std::sort(vs.begin(), vs.end());
  }
  return g;
}

/// Edge rule by judgement: every ordered pair of distinct tools is put to
/// the client, which answers yes or no.
inline ToolGraph build_tool_graph_judged(const Environment& env, GenClient& client) {
  ToolGraph g;
  for (const auto& t : env.tools) g.nodes.push_back(t.name);
  std::sort(g.nodes.begin(), g.nodes.end());
  for (const auto& u : env.tools) {
    for (const auto& v : env.tools) {
      if (u.name == v.name) continue;
      GenRequest req;
      req.stage = "edge_judgement";
      req.payload = json::object();
      req.payload["from"] = json{{"name", u.name}, {"outputs", tool_outputs_json(u)}};
      req.payload["to"] = json{{"name", v.name}, {"params", tool_params_json(v)}};
      req.prompt =
          "Tool '" + u.name + "' (" + u.description + ") returns: " + tool_outputs_json(u).dump() +
          ". Tool '" + v.name + "' (" + v.description + ") accepts: " + tool_params_json(v).dump() +
          ". Could the output of '" + u.name + "' directly supply an argument of '" + v.name +
          "'? Answer yes or no.";
      std::string text = client.generate(req).text;
      auto pos = text.find_first_not_of(" \t\r\n");
      bool yes = pos != std::string::npos &&
                 (text.compare(pos, 3, "yes") == 0 || text.compare(pos, 3, "Yes") == 0 ||
                  text.compare(pos, 3, "YES") == 0);
      if (yes) g.edges[u.name].push_back(v.name);
    }
  }
  for (auto& [u, vs] : g.edges) {
    (void)u;
    std::sort(vs.begin(), vs.end());
  }
  return g;
}

}  // namespace envsmith
