#pragma once

// Shared fixtures and independent oracles for the test suite. The oracles
// deliberately recompute what the library computes through a different
// route (structural recursion instead of canonical bytes, exact rationals
// instead of counts) so agreement is evidence, not tautology.

#include <envsmith.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <chrono>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace support {

using namespace envsmith;
using Rat = boost::multiprecision::cpp_rational;

// ---------------------------------------------------------------------------
// Small environment with hand-checkable tools.

inline Environment minienv() {
  json sj = json::parse(R"fx({
    "id": "minishop",
    "attributes": [
      {"name": "users", "kind": "record", "open": true, "fields": [
        {"name": "email", "kind": "scalar", "value_kind": "text"},
        {"name": "balance", "kind": "scalar", "value_kind": "decimal", "scale": 2},
        {"name": "points", "kind": "scalar", "value_kind": "integer"}
      ]},
      {"name": "transactions", "kind": "list", "fields": [
        {"name": "who", "kind": "scalar", "value_kind": "reference", "ref": "users"},
        {"name": "amount", "kind": "scalar", "value_kind": "decimal", "scale": 2}
      ]},
      {"name": "ops_count", "kind": "scalar", "value_kind": "integer", "volatile": true}
    ]
  })fx");
  const char* tool_srcs[] = {
      R"fx({
        "name": "find_user",
        "description": "Look up a user id by email.",
        "params": [{"name": "email", "kind": "text"}],
        "returns": {"shape": "scalar", "kind": "reference", "name": "user_id", "ref": "users"},
        "reads": ["users"],
        "writes": [],
        "effect": [
          {"op": "GET", "path": "users", "out": "all"},
          {"op": "FILTER", "in": "all", "bind": "u", "where": "u.email == email", "out": "ms"},
          {"op": "ASSERT", "cond": "len(ms) > 0", "code": "no_such_user"},
          {"op": "RETURN", "expr": "first(ms)._key"}
        ]
      })fx",
      R"fx({
        "name": "get_balance",
        "description": "Read one user's balance.",
        "params": [{"name": "user_id", "kind": "reference", "ref": "users"}],
        "returns": {"shape": "record", "fields": [
          {"name": "balance", "kind": "decimal"}
        ]},
        "reads": ["users.*"],
        "writes": [],
        "effect": [
          {"op": "GET", "path": "users.{user_id}.balance", "out": "b"},
          {"op": "RETURN", "expr": "{balance: b}"}
        ]
      })fx",
      R"fx({
        "name": "deposit",
        "description": "Add funds to a user's balance.",
        "params": [
          {"name": "user_id", "kind": "reference", "ref": "users"},
          {"name": "amount", "kind": "decimal"}
        ],
        "returns": {"shape": "record", "fields": [
          {"name": "balance", "kind": "decimal"}
        ]},
        "reads": ["users.*", "ops_count"],
        "writes": ["users.*.balance", "transactions", "ops_count"],
        "effect": [
          {"op": "ASSERT", "cond": "amount > 0.00", "code": "bad_amount"},
          {"op": "GET", "path": "users.{user_id}.balance", "out": "b"},
          {"op": "COMPUTE", "expr": "b + amount", "out": "nb"},
          {"op": "SET", "path": "users.{user_id}.balance", "value": "nb"},
          {"op": "APPEND", "path": "transactions", "value": "{who: user_id, amount: amount}"},
          {"op": "GET", "path": "ops_count", "out": "oc"},
          {"op": "SET", "path": "ops_count", "value": "oc + 1"},
          {"op": "RETURN", "expr": "{balance: nb}"}
        ]
      })fx",
      R"fx({
        "name": "split_amount",
        "description": "Divide an amount into equal parts.",
        "params": [
          {"name": "amount", "kind": "decimal"},
          {"name": "parts", "kind": "integer", "required": false, "default": "2"}
        ],
        "returns": {"shape": "record", "fields": [
          {"name": "share", "kind": "decimal"}
        ]},
        "reads": [],
        "writes": [],
        "effect": [
          {"op": "COMPUTE", "expr": "amount / parts", "out": "share"},
          {"op": "RETURN", "expr": "{share: share}"}
        ]
      })fx"};
  Environment env;
  env.schema = load_schema(sj);
  for (const char* src : tool_srcs) {
    ToolSpec t = tool_from_json(json::parse(src));
    auto diags = validate_tool(*env.schema, t);
    if (!diags.empty()) throw Error("minienv tool '" + t.name + "': " + diags.front());
    env.tools.push_back(std::move(t));
  }
  env.manifest_digest = environment_digest(*env.schema, env.tools);
  return env;
}

inline StateDoc mini_doc(const Environment& env) {
  json payload = json::parse(R"fx({
    "users": {
      "ann": {"email": "ann@example.com", "balance": "135.95", "points": "10"},
      "bob": {"email": "bob@example.com", "balance": "20.00", "points": "3"}
    },
    "transactions": [],
    "ops_count": "0"
  })fx");
  return StateDoc::decode(env.schema, payload);
}

// ---------------------------------------------------------------------------
// Deep-compare oracle: structural recursion over values, nothing shared
// with canonical serialization.

inline bool oracle_value_equal(const Value& a, const Value& b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Value::Kind::Text: return a.as_text() == b.as_text();
    case Value::Kind::Integer: return a.as_integer() == b.as_integer();
    case Value::Kind::Decimal:
      return a.as_decimal().mantissa() == b.as_decimal().mantissa() &&
             a.as_decimal().scale() == b.as_decimal().scale();
    case Value::Kind::Boolean: return a.as_boolean() == b.as_boolean();
    case Value::Kind::List: {
      const auto& xs = a.as_list();
      const auto& ys = b.as_list();
      if (xs.size() != ys.size()) return false;
      for (size_t i = 0; i < xs.size(); ++i)
        if (!oracle_value_equal(xs[i], ys[i])) return false;
      return true;
    }
    case Value::Kind::Record: {
      const auto& xs = a.as_record();
      const auto& ys = b.as_record();
      if (xs.size() != ys.size()) return false;
      auto it = ys.begin();
      for (const auto& [k, v] : xs) {
        if (it->first != k || !oracle_value_equal(v, it->second)) return false;
        ++it;
      }
      return true;
    }
  }
  return false;
}

/// The contract under test: states agree exactly on every attribute that is
/// not declared volatile.
inline bool oracle_state_equal(const StateDoc& a, const StateDoc& b) {
  const auto& ra = a.root().as_record();
  const auto& rb = b.root().as_record();
  for (const auto& attr : a.schema().attributes) {
    if (attr.volatile_excluded) continue;
    if (!oracle_value_equal(ra.at(attr.name), rb.at(attr.name))) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Exact-rational advantage oracles.

inline Rat rat_mean(const std::vector<int>& r) {
  Rat s = 0;
  for (int x : r) s += x;
  return s / Rat(static_cast<int>(r.size()));
}

inline Rat rat_variance(const std::vector<int>& r) {
  Rat mu = rat_mean(r);
  Rat s = 0;
  for (int x : r) s += (Rat(x) - mu) * (Rat(x) - mu);
  return s / Rat(static_cast<int>(r.size()));
}

/// Group-normalized advantages with the variance kept rational until the
/// final square root.
inline std::vector<double> oracle_group_adv(const std::vector<int>& r) {
  Rat mu = rat_mean(r);
  double sd = std::sqrt(rat_variance(r).convert_to<double>());
  std::vector<double> out;
  for (int x : r) out.push_back((Rat(x) - mu).convert_to<double>() / sd);
  return out;
}

/// Environment-pooled advantages: per-question mean numerator, one std over
/// every reward in the environment.
inline std::vector<std::vector<double>> oracle_env_adv(const std::vector<std::vector<int>>& qs) {
  std::vector<int> all;
  for (const auto& q : qs) all.insert(all.end(), q.begin(), q.end());
  double sd = std::sqrt(rat_variance(all).convert_to<double>());
  std::vector<std::vector<double>> out;
  for (const auto& q : qs) {
    Rat mu = rat_mean(q);
    std::vector<double> row;
    for (int x : q) row.push_back((Rat(x) - mu).convert_to<double>() / sd);
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph oracles: recursive three-color DFS plus Kahn's algorithm, both
// independent of the library's iterative checker.

inline bool dfs_acyclic_oracle(const TaskGraph& g) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [a, b] : g.edges) adj[a].push_back(b);
  std::map<std::string, int> color;
  std::function<bool(const std::string&)> visit = [&](const std::string& u) {
    color[u] = 1;
    for (const auto& v : adj[u]) {
      if (color[v] == 1) return false;
      if (color[v] == 0 && !visit(v)) return false;
    }
    color[u] = 2;
    return true;
  };
  for (const auto& n : g.nodes)
    if (color[n.id] == 0 && !visit(n.id)) return false;
  return true;
}

inline bool topo_order_exists(const TaskGraph& g) {
  std::map<std::string, size_t> indeg;
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& n : g.nodes) indeg[n.id] = 0;
  for (const auto& [a, b] : g.edges) {
    adj[a].push_back(b);
    ++indeg[b];
  }
  std::vector<std::string> ready;
  for (const auto& [n, d] : indeg)
    if (d == 0) ready.push_back(n);
  size_t seen = 0;
  while (!ready.empty()) {
    std::string u = ready.back();
    ready.pop_back();
    ++seen;
    for (const auto& v : adj[u])
      if (--indeg[v] == 0) ready.push_back(v);
  }
  return seen == g.nodes.size();
}

// ---------------------------------------------------------------------------
// Random environments whose tool graph topology is chosen up front: tool i
// gains an edge to tool j by returning a field named like j's parameter.

struct WiredEnv {
  Environment env;
  std::vector<std::vector<size_t>> adj;
};

inline WiredEnv random_wired_env(std::mt19937_64& rng, size_t n, double density) {
  WiredEnv w;
  w.adj.resize(n);
  std::bernoulli_distribution flip(density);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if (i != j && flip(rng)) w.adj[i].push_back(j);

  json sj = json::object();
  sj["id"] = "wired";
  sj["attributes"] = json::array({json{{"name", "counter"},
                                       {"kind", "scalar"},
                                       {"value_kind", "integer"}}});
  Environment env;
  env.schema = load_schema(sj);
  for (size_t i = 0; i < n; ++i) {
    json t = json::object();
    t["name"] = "t" + std::to_string(i);
    t["description"] = "step " + std::to_string(i);
    t["params"] = json::array({json{{"name", "p" + std::to_string(i)},
                                    {"kind", "integer"},
                                    {"required", true}}});
    t["reads"] = json::array({"counter"});
    t["writes"] = json::array({"counter"});
    json effect = json::array();
    effect.push_back(json{{"op", "GET"}, {"path", "counter"}, {"out", "c"}});
    effect.push_back(json{{"op", "SET"}, {"path", "counter"},
                          {"value", "c + p" + std::to_string(i)}});
    json fields = json::array();
    std::string ret = "{";
    if (w.adj[i].empty()) {
      fields.push_back(json{{"name", "z" + std::to_string(i)}, {"kind", "integer"}});
      ret += "z" + std::to_string(i) + ": c";
    } else {
      bool first = true;
      for (size_t j : w.adj[i]) {
        fields.push_back(json{{"name", "p" + std::to_string(j)}, {"kind", "integer"}});
        if (!first) ret += ", ";
        first = false;
        ret += "p" + std::to_string(j) + ": c + 1";
      }
    }
    ret += "}";
    effect.push_back(json{{"op", "RETURN"}, {"expr", ret}});
    t["effect"] = std::move(effect);
    t["returns"] = json{{"shape", "record"}, {"fields", fields}};
    ToolSpec spec = tool_from_json(t);
    auto diags = validate_tool(*env.schema, spec);
    if (!diags.empty()) throw Error("wired tool: " + diags.front());
    env.tools.push_back(std::move(spec));
  }
  env.manifest_digest = environment_digest(*env.schema, env.tools);
  w.env = std::move(env);
  return w;
}

// ---------------------------------------------------------------------------
// Randomized state mutation for reward-oracle pairs. Only paths that keep
// the document schema-valid are touched.

enum class MutationKind { None, VolatileOnly, Real };

inline MutationKind mutate_doc_json(json& j, std::mt19937_64& rng) {
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: return MutationKind::None;
    case 1: {
      BigInt v(j.at("audit_events").get<std::string>());
      j["audit_events"] = BigInt(v + 1).str();
      return MutationKind::VolatileOnly;
    }
    default: break;
  }
  auto pick_key = [&](const json& obj) {
    std::vector<std::string> keys;
    for (auto it = obj.begin(); it != obj.end(); ++it) keys.push_back(it.key());
    return keys[std::uniform_int_distribution<size_t>(0, keys.size() - 1)(rng)];
  };
  switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
    case 0: {
      std::string k = pick_key(j.at("users"));
      Decimal d = *Decimal::parse(j["users"][k]["balance"].get<std::string>());
      j["users"][k]["balance"] = Decimal(d.mantissa() + 1, d.scale()).str();
      break;
    }
    case 1: {
      std::string k = pick_key(j.at("products"));
      BigInt v(j["products"][k]["stock"].get<std::string>());
      j["products"][k]["stock"] = BigInt(v + 1).str();
      break;
    }
    case 2: {
      std::string k = pick_key(j.at("orders"));
      j["orders"][k]["status"] = j["orders"][k]["status"].get<std::string>() + "x";
      break;
    }
    default: {
      BigInt v(j.at("next_order_seq").get<std::string>());
      j["next_order_seq"] = BigInt(v + 1).str();
      break;
    }
  }
  return MutationKind::Real;
}

// ---------------------------------------------------------------------------
// Scratch directories.

struct TempDir {
  fs::path path;

  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           (tag + "_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline std::string read_all(const fs::path& p) { return read_file(p); }

}  // namespace support
