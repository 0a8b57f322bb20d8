#pragma once

#include <random>
#include <string>
#include <vector>

#include "envsmith/rulegen.hpp"
#include "envsmith/toolgraph.hpp"

namespace envsmith {

/// Uniform random walk over the tool graph. The target length is drawn
/// uniformly from [min_len, max_len]; each step picks uniformly among the
/// current node's successors (in sorted order, so the distribution depends
/// only on the seed); a node with no successors ends the walk early.
inline std::vector<std::string> random_walk(const ToolGraph& graph, uint64_t seed, size_t min_len,
                                            size_t max_len, const std::string& start = "") {
  if (graph.nodes.empty()) throw EmptyGraph("cannot walk an empty tool graph");
  if (min_len == 0 || max_len < min_len) throw Error("bad walk length bounds");
  std::mt19937_64 rng(seed);
  size_t target = std::uniform_int_distribution<size_t>(min_len, max_len)(rng);
  std::string cur;
  if (start.empty()) {
    cur = graph.nodes[std::uniform_int_distribution<size_t>(0, graph.nodes.size() - 1)(rng)];
  } else {
    if (!std::binary_search(graph.nodes.begin(), graph.nodes.end(), start))
      throw Error("walk start '" + start + "' is not in the graph");
    cur = start;
  }
  std::vector<std::string> walk{cur};
  while (walk.size() < target) {
    const auto& outs = graph.out_edges(cur);
    if (outs.empty()) break;
    cur = outs[std::uniform_int_distribution<size_t>(0, outs.size() - 1)(rng)];
    walk.push_back(cur);
  }
  return walk;
}

/// Merges walks into one tool sequence: concatenation, first occurrence
/// wins. With a client, a redundancy pass may drop later pure-read tools
/// the client judges redundant; without one (or on a malformed answer) the
/// dedupe result stands.
inline std::vector<std::string> merge_sequences(const std::vector<std::vector<std::string>>& seqs,
                                                const Environment& env, GenClient* client) {
  std::vector<std::string> merged;
  std::set<std::string> seen;
  for (const auto& seq : seqs)
    for (const auto& t : seq)
      if (seen.insert(t).second) merged.push_back(t);
  if (!client || merged.size() < 2) return merged;

  json tools = json::array();
  for (const auto& name : merged) {
    const ToolSpec* t = env.find_tool(name);
    if (!t) continue;
    json tj = json::object();
    tj["name"] = name;
    tj["pure_read"] = t->pure_read();
    std::vector<std::string> outs;
    for (const auto& f : t->returns.output_fields()) outs.push_back(f.name);
    tj["outputs"] = outs;
    tools.push_back(std::move(tj));
  }
  GenRequest req;
  req.stage = "merge_redundancy";
  req.payload = json::object();
  req.payload["tools"] = tools;
  req.prompt = "Given this tool sequence with their outputs, list as a JSON array the names of "
               "tools that add nothing because an earlier tool already provides the same data: " +
               tools.dump();
  std::set<std::string> drop;
  try {
    json resp = json::parse(client->generate(req).text);
    if (resp.is_array())
      for (const auto& n : resp)
        if (n.is_string()) drop.insert(n.get<std::string>());
  } catch (const ClientUnavailable&) {
    return merged;
  } catch (const json::parse_error&) {
    return merged;
  }
  std::vector<std::string> out;
  for (const auto& t : merged)
    if (!drop.count(t)) out.push_back(t);
  if (out.empty()) return merged;
  return out;
}

}  // namespace envsmith
