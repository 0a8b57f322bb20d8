#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "envsmith/client.hpp"
#include "envsmith/envdir.hpp"
#include "envsmith/toolgraph.hpp"

namespace envsmith {

/// One node in a task blueprint: either a tool invocation or a reasoning
/// step whose textual instruction is later answered from its input values.
struct TaskNode {
  enum class Kind { Tool, Reasoning };
  std::string id;
  Kind kind = Kind::Tool;
  std::string tool;                     // Kind::Tool
  std::string prompt;                   // Kind::Reasoning
  std::string output_kind = "decimal";  // Kind::Reasoning: integer|decimal|text
  std::vector<std::string> inputs;      // ids of nodes whose outputs feed this one
};

/// A task blueprint: nodes stored in topological order plus the ordering
/// edges over them. Construction only ever adds forward edges, so the graph
/// is acyclic by construction; is_acyclic re-derives that independently.
struct TaskGraph {
  std::string id;
  std::vector<TaskNode> nodes;
  std::vector<std::pair<std::string, std::string>> edges;

  const TaskNode* find(const std::string& node_id) const {
    for (const auto& n : nodes)
      if (n.id == node_id) return &n;
    return nullptr;
  }

  std::optional<size_t> index_of(const std::string& node_id) const {
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == node_id) return i;
    return std::nullopt;
  }

  size_t tool_count() const {
    size_t n = 0;
    for (const auto& node : nodes)
      if (node.kind == TaskNode::Kind::Tool) ++n;
    return n;
  }

  json to_json() const {
    json j = json::object();
    j["id"] = id;
    json ns = json::array();
    for (const auto& n : nodes) {
      json nj = json::object();
      nj["id"] = n.id;
      nj["kind"] = n.kind == TaskNode::Kind::Tool ? "tool" : "reasoning";
      if (n.kind == TaskNode::Kind::Tool) {
        nj["tool"] = n.tool;
      } else {
        nj["prompt"] = n.prompt;
        nj["output_kind"] = n.output_kind;
      }
      nj["inputs"] = n.inputs;
      ns.push_back(std::move(nj));
    }
    j["nodes"] = ns;
    json es = json::array();
    for (const auto& [a, b] : edges) es.push_back(json::array({a, b}));
    j["edges"] = es;
    return j;
  }

  static TaskGraph from_json(const json& j) {
    TaskGraph g;
    g.id = j.value("id", "");
    for (const auto& nj : j.value("nodes", json::array())) {
      TaskNode n;
      n.id = nj.value("id", "");
      n.kind = nj.value("kind", "tool") == "tool" ? TaskNode::Kind::Tool
                                                  : TaskNode::Kind::Reasoning;
      n.tool = nj.value("tool", "");
      n.prompt = nj.value("prompt", "");
      n.output_kind = nj.value("output_kind", "decimal");
      n.inputs = nj.value("inputs", std::vector<std::string>{});
      g.nodes.push_back(std::move(n));
    }
    for (const auto& e : j.value("edges", json::array())) {
      if (!e.is_array() || e.size() != 2) throw SchemaViolation("task graph edge must be a pair");
      g.edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    }
    return g;
  }
};

/// Depth-first cycle check over the ordering edges.
inline bool is_acyclic(const TaskGraph& g) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [a, b] : g.edges) adj[a].push_back(b);
  std::map<std::string, int> state;  // 0 new, 1 open, 2 done
  std::vector<std::pair<std::string, size_t>> stack;
  for (const auto& n : g.nodes) {
    if (state[n.id] != 0) continue;
    stack.emplace_back(n.id, 0);
    state[n.id] = 1;
    while (!stack.empty()) {
      auto& [cur, next] = stack.back();
      auto& outs = adj[cur];
      if (next < outs.size()) {
        const std::string& child = outs[next++];
        if (state[child] == 1) return false;
        if (state[child] == 0) {
          state[child] = 1;
          stack.emplace_back(child, 0);
        }
      } else {
        state[cur] = 2;
        stack.pop_back();
      }
    }
  }
  return true;
}

struct ProposalRejection {
  json proposal;
  std::string reason;

  json to_json() const {
    json j = json::object();
    j["proposal"] = proposal;
    j["reason"] = reason;
    return j;
  }
};

/// Builds a task blueprint from a merged tool sequence. Tool nodes are
/// chained; the client may propose reasoning nodes anchored after a tool
/// (consuming only outputs available at that point) and extra dataflow
/// edges (accepted only pointing forward). Invalid proposals are dropped
/// and reported, never inserted.
inline TaskGraph build_task_graph(const std::string& graph_id,
                                  const std::vector<std::string>& sequence,
                                  const Environment& env, GenClient* client,
                                  size_t max_reasoning,
                                  std::vector<ProposalRejection>* rejections = nullptr) {
  TaskGraph g;
  g.id = graph_id;
  auto reject = [&](json proposal, const std::string& reason) {
    if (rejections) rejections->push_back({std::move(proposal), reason});
  };

  std::vector<std::string> tool_ids;
  for (size_t i = 0; i < sequence.size(); ++i) {
    if (!env.find_tool(sequence[i])) throw Error("no tool named '" + sequence[i] + "'");
    TaskNode n;
    n.id = "t" + std::to_string(i);
    n.kind = TaskNode::Kind::Tool;
    n.tool = sequence[i];
    if (i > 0) n.inputs.push_back("t" + std::to_string(i - 1));
    tool_ids.push_back(n.id);
    g.nodes.push_back(std::move(n));
    if (i > 0) g.edges.emplace_back("t" + std::to_string(i - 1), "t" + std::to_string(i));
  }

  if (client && max_reasoning > 0 && !sequence.empty()) {
    // Reasoning node proposals.
    json seq = json::array();
    for (size_t i = 0; i < sequence.size(); ++i) {
      const ToolSpec* t = env.find_tool(sequence[i]);
      json tj = json::object();
      tj["index"] = i;
      tj["name"] = t->name;
      tj["outputs"] = tool_outputs_json(*t);
      seq.push_back(std::move(tj));
    }
    GenRequest req;
    req.stage = "reasoning_nodes";
    req.payload = json::object();
    req.payload["sequence"] = seq;
    req.payload["max"] = max_reasoning;
    req.prompt =
        "For this tool sequence, propose up to " + std::to_string(max_reasoning) +
        " reasoning steps as a JSON array of {after, prompt, output_kind, inputs}, where 'after' "
        "is the index of the tool the step follows, 'inputs' lists the tool indices whose outputs "
        "the step uses (all at or before 'after'), and output_kind is integer, decimal or text: " +
        seq.dump();
    std::vector<std::vector<TaskNode>> anchored(sequence.size());
    size_t accepted = 0;
    try {
      json resp = json::parse(client->generate(req).text);
      if (!resp.is_array()) throw json::parse_error::create(101, 0, "not an array", nullptr);
      size_t serial = 0;
      for (const auto& prop : resp) {
        if (accepted >= max_reasoning) {
          reject(prop, "over the reasoning node budget");
          continue;
        }
        if (!prop.is_object() || !prop.contains("after") || !prop.contains("inputs") ||
            !prop.value("after", json()).is_number_unsigned()) {
          reject(prop, "malformed proposal");
          continue;
        }
        size_t after = prop.value("after", size_t(0));
        if (after >= sequence.size()) {
          reject(prop, "anchor index past the end of the sequence");
          continue;
        }
        std::string prompt = prop.value("prompt", "");
        if (prompt.empty()) {
          reject(prop, "empty prompt");
          continue;
        }
        std::string kind = prop.value("output_kind", "decimal");
        if (kind != "integer" && kind != "decimal" && kind != "text") {
          reject(prop, "unknown output kind '" + kind + "'");
          continue;
        }
        std::vector<size_t> inputs;
        bool ok = prop.at("inputs").is_array() && !prop.at("inputs").empty();
        if (ok)
          for (const auto& in : prop.at("inputs")) {
            if (!in.is_number_unsigned() || in.get<size_t>() > after) {
              ok = false;
              break;
            }
            inputs.push_back(in.get<size_t>());
          }
        if (!ok) {
          reject(prop, "inputs must be tool indices at or before the anchor");
          continue;
        }
        TaskNode n;
        n.id = "r" + std::to_string(serial++);
        n.kind = TaskNode::Kind::Reasoning;
        n.prompt = prompt;
        n.output_kind = kind;
        for (size_t in : inputs) n.inputs.push_back(tool_ids[in]);
        anchored[after].push_back(std::move(n));
        ++accepted;
      }
    } catch (const ClientUnavailable&) {
    } catch (const json::exception&) {
    }
    if (accepted > 0) {
      TaskGraph merged;
      merged.id = g.id;
      merged.edges = g.edges;
      for (size_t i = 0; i < sequence.size(); ++i) {
        merged.nodes.push_back(g.nodes[i]);
        for (auto& r : anchored[i]) {
          merged.edges.emplace_back(tool_ids[i], r.id);
          for (const auto& in : r.inputs)
            if (in != tool_ids[i]) merged.edges.emplace_back(in, r.id);
          merged.nodes.push_back(std::move(r));
        }
      }
      g = std::move(merged);
    }

    // Extra dataflow edge proposals, accepted only pointing forward.
    std::vector<std::string> ids;
    for (const auto& n : g.nodes) ids.push_back(n.id);
    GenRequest ereq;
    ereq.stage = "reasoning_edges";
    ereq.payload = json::object();
    ereq.payload["nodes"] = ids;
    ereq.prompt = "Propose extra dependency edges for these ordered task nodes as a JSON array "
                  "of {from, to} pairs; only forward edges are valid: " +
                  json(ids).dump();
    try {
      json resp = json::parse(client->generate(ereq).text);
      if (resp.is_array())
        for (const auto& e : resp) {
          std::string from = e.value("from", "");
          std::string to = e.value("to", "");
          auto fi = g.index_of(from);
          auto ti = g.index_of(to);
          if (!fi || !ti) {
            reject(e, "edge endpoint is not a node");
            continue;
          }
          if (*fi >= *ti) {
            reject(e, "edge does not point forward");
            continue;
          }
          bool dup = false;
          for (const auto& [a, b] : g.edges) dup = dup || (a == from && b == to);
          if (dup) continue;
          g.edges.emplace_back(from, to);
        }
    } catch (const ClientUnavailable&) {
    } catch (const json::exception&) {
    }
  }
  return g;
}

/// Graphviz text for a task graph.
inline std::string to_dot(const TaskGraph& g) {
  std::string out = "digraph \"" + g.id + "\" {\n";
  for (const auto& n : g.nodes) {
    out += "  \"" + n.id + "\" [label=\"" +
           (n.kind == TaskNode::Kind::Tool ? n.id + ": " + n.tool : n.id) + "\"";
    if (n.kind == TaskNode::Kind::Reasoning) out += ", shape=diamond";
    out += "];\n";
  }
  for (const auto& [a, b] : g.edges) out += "  \"" + a + "\" -> \"" + b + "\";\n";
  out += "}\n";
  return out;
}

}  // namespace envsmith
