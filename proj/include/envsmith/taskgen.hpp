#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "envsmith/client.hpp"
#include "envsmith/exec.hpp"
#include "envsmith/statedoc.hpp"
#include "envsmith/taskgraph.hpp"

namespace envsmith {

namespace detail {

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> words = {
      "alder", "birch", "cedar",  "dahlia", "elm",    "fern",  "hazel",
      "iris",  "jasmine", "laurel", "maple", "nettle", "oak",  "poppy",
      "quince", "rowan", "sage",   "thyme",  "violet", "willow"};
  return words;
}

inline std::string singular(const std::string& name) {
  if (name.size() > 1 && name.back() == 's') return name.substr(0, name.size() - 1);
  return name;
}

inline bool name_has(const std::string& name, std::initializer_list<const char*> hints) {
  for (const char* h : hints)
    if (name.find(h) != std::string::npos) return true;
  return false;
}

/// Seeded scalar for one named field. Ranges follow common naming so the
/// data reads plausibly and downstream argument defaults stay in range.
inline Value seeded_scalar(const AttributeDef& d, std::mt19937_64& rng) {
  switch (d.value_kind) {
    case ValueKind::Integer: {
      long lo = 1, hi = 100;
      if (name_has(d.name, {"stock", "quantity", "count"})) lo = 5, hi = 50;
      else if (name_has(d.name, {"point", "score"})) lo = 0, hi = 1000;
      else if (name_has(d.name, {"seq", "next"})) return Value::integer(1);
      return Value::integer(std::uniform_int_distribution<long>(lo, hi)(rng));
    }
    case ValueKind::Decimal: {
      long lo = 100, hi = 10000;  // cents
      if (name_has(d.name, {"balance", "amount", "total"})) lo = 5000, hi = 50000;
      else if (name_has(d.name, {"price", "cost", "fee"})) lo = 100, hi = 2000;
      BigInt cents(std::uniform_int_distribution<long>(lo, hi)(rng));
      auto v = Decimal(cents, 2).rescaled(d.scale);
      return Value::decimal(v ? *v : Decimal(cents, 2));
    }
    case ValueKind::Boolean:
      return Value::boolean(std::uniform_int_distribution<int>(0, 1)(rng) == 1);
    case ValueKind::Text: {
      if (name_has(d.name, {"status"})) return Value::text("pending");
      const auto& words = word_pool();
      std::string w = words[std::uniform_int_distribution<size_t>(0, words.size() - 1)(rng)];
      if (name_has(d.name, {"email"}))
        return Value::text(w + std::to_string(std::uniform_int_distribution<int>(1, 99)(rng)) +
                           "@example.com");
      return Value::text(w);
    }
    case ValueKind::Reference: return Value::text("");
  }
  return Value::text("");
}

inline Value seeded_struct(const AttributeDef& d, std::mt19937_64& rng,
                           const std::map<std::string, std::vector<std::string>>& keys_by_attr) {
  Value::Record r;
  for (const auto& f : d.fields) {
    if (f.kind == AttrKind::List) {
      r.emplace(f.name, Value::list({}));
    } else if (f.kind == AttrKind::Record && !f.open) {
      r.emplace(f.name, seeded_struct(f, rng, keys_by_attr));
    } else if (f.kind == AttrKind::Record) {
      r.emplace(f.name, Value::record({}));
    } else if (f.value_kind == ValueKind::Reference) {
      auto it = keys_by_attr.find(f.ref_target);
      if (it == keys_by_attr.end() || it->second.empty())
        throw SchemaViolation("cannot seed reference '" + f.name + "' before '" + f.ref_target +
                              "'");
      const auto& keys = it->second;
      r.emplace(f.name,
                Value::text(keys[std::uniform_int_distribution<size_t>(0, keys.size() - 1)(rng)]));
    } else {
      r.emplace(f.name, seeded_scalar(f, rng));
    }
  }
  return Value::record(std::move(r));
}

}  // namespace detail

/// Populates a fresh state document from a seed alone. Open records get
/// `population` entities with readable sequential keys; reference fields
/// point at already-seeded collections (ordered by dependency); logs start
/// empty. The result depends only on schema and seed.
inline StateDoc seed_environment(SchemaPtr schema, uint64_t seed, size_t population = 20) {
  // Order open records so reference targets are seeded first.
  std::vector<const AttributeDef*> open_records;
  for (const auto& a : schema->attributes)
    if (a.kind == AttrKind::Record && a.open) open_records.push_back(&a);
  std::vector<const AttributeDef*> ordered;
  std::set<std::string> done;
  while (ordered.size() < open_records.size()) {
    bool progress = false;
    for (const AttributeDef* a : open_records) {
      if (done.count(a->name)) continue;
      bool ready = true;
      for (const auto& f : a->fields)
        if (f.value_kind == ValueKind::Reference && f.fields.empty() && !done.count(f.ref_target) &&
            f.ref_target != a->name)
          ready = false;
      if (ready) {
        ordered.push_back(a);
        done.insert(a->name);
        progress = true;
      }
    }
    if (!progress) throw SchemaViolation("reference cycle among open records");
  }

  StateDoc doc = StateDoc::empty(schema);
  std::map<std::string, std::vector<std::string>> keys_by_attr;
  json payload = json::object();
  Value::Record root;
  for (const AttributeDef* a : ordered) {
    std::mt19937_64 rng(fnv1a64(a->name, seed));
    Value::Record entities;
    std::vector<std::string> keys;
    std::string prefix = detail::singular(a->name) + "_";
    for (size_t i = 1; i <= population; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%04zu", i);
      std::string key = prefix + buf;
      entities.emplace(key, detail::seeded_struct(*a, rng, keys_by_attr));
      keys.push_back(key);
    }
    keys_by_attr[a->name] = std::move(keys);
    root.emplace(a->name, Value::record(std::move(entities)));
  }
  for (const auto& a : schema->attributes) {
    if (root.count(a.name)) continue;
    std::mt19937_64 rng(fnv1a64(a.name, seed));
    if (a.kind == AttrKind::List) {
      root.emplace(a.name, Value::list({}));
    } else if (a.kind == AttrKind::Record) {
      root.emplace(a.name, detail::seeded_struct(a, rng, keys_by_attr));
    } else if (a.volatile_excluded) {
      root.emplace(a.name, StateDoc::zero_value(*schema, {&a, SchemaNode::View::Whole}));
    } else {
      root.emplace(a.name, detail::seeded_scalar(a, rng));
    }
  }
  json state = json::parse(canonical_json(Value::record(std::move(root))));
  return StateDoc::decode(schema, state);
}

/// Builds the initial state, preferring a generation backend when one can
/// serve it and falling back to the seeded generator. A backend answer that
/// fails validation gets one repair round before the violation propagates.
inline StateDoc instantiate_environment(SchemaPtr schema, uint64_t seed, size_t population = 20,
                                        GenClient* client = nullptr) {
  if (client) {
    GenRequest req;
    req.stage = "instantiate";
    req.payload = json::object();
    req.payload["schema"] = schema_to_json(*schema);
    req.payload["population"] = population;
    req.payload["seed"] = seed;
    req.prompt = "Produce a JSON state document for this schema with about " +
                 std::to_string(population) +
                 " entities per keyed collection. Numbers must be strings; no floats: " +
                 schema_to_json(*schema).dump();
    try {
      std::string text = client->generate(req).text;
      try {
        return StateDoc::decode(schema, json::parse(text));
      } catch (const std::exception& first) {
        GenRequest fix;
        fix.stage = "instantiate_repair";
        fix.payload = json::object();
        fix.payload["schema"] = schema_to_json(*schema);
        fix.payload["previous"] = text;
        fix.payload["error"] = first.what();
        fix.prompt = std::string("The previous state document was invalid (") + first.what() +
                     "). Produce a corrected JSON state document.";
        std::string repaired = client->generate(fix).text;
        return StateDoc::decode(schema, json::parse(repaired));
      }
    } catch (const ClientUnavailable&) {
    }
  }
  return seed_environment(std::move(schema), seed, population);
}

struct QuestionDraft {
  std::string text;
  std::string entity;
  std::string collection;
};

/// Asks the client for the user-facing request behind a task blueprint. The
/// prompt pins a concrete starting entity so the question grounds itself in
/// state that actually exists.
inline QuestionDraft generate_question(const TaskGraph& graph, const Environment& env,
                                       const StateDoc& doc, GenClient& client) {
  std::vector<std::string> tools;
  for (const auto& n : graph.nodes)
    if (n.kind == TaskNode::Kind::Tool) tools.push_back(n.tool);
  if (tools.empty()) throw EmptyGraph("task graph '" + graph.id + "' has no tool nodes");

  QuestionDraft draft;
  for (const auto& a : env.schema->attributes)
    if (a.kind == AttrKind::Record && a.open) {
      const Value& coll = doc.root().as_record().at(a.name);
      if (!coll.as_record().empty()) {
        draft.collection = a.name;
        draft.entity = coll.as_record().begin()->first;
        break;
      }
    }

  GenRequest req;
  req.stage = "question";
  req.payload = json::object();
  req.payload["env"] = env.schema->id;
  req.payload["tools"] = tools;
  req.payload["entity"] = draft.entity;
  req.payload["collection"] = draft.collection;
  req.prompt = "Write a single user request that would require this ordered tool sequence in the '" +
               env.schema->id + "' environment: " + json(tools).dump() +
               (draft.entity.empty()
                    ? std::string()
                    : ". Anchor it on " + detail::singular(draft.collection) + " '" + draft.entity +
                          "'.");
  draft.text = client.generate(req).text;
  return draft;
}

// ---------------------------------------------------------------------------
// Binding and execution

struct ArgumentBinding {
  std::string param;
  Value value;  // the concrete value used
  bool from_output = false;
  std::string from_node;  // when from_output
  std::string field;      // "" means the whole returned value
};

struct NodeBinding {
  std::string node;
  std::string tool;                   // tool nodes
  std::vector<ArgumentBinding> args;  // tool nodes
  std::optional<Value> reasoning_value;
};

/// Why a task blueprint failed to become a task.
struct TaskRejection {
  std::string taskgraph_id;
  std::string stage;  // question | binding | execution | reasoning | refinement | replay
  std::string reason;
  std::string error_code;
  std::string node;

  json to_json() const {
    json j = json::object();
    j["taskgraph_id"] = taskgraph_id;
    j["stage"] = stage;
    j["reason"] = reason;
    if (!error_code.empty()) j["error_code"] = error_code;
    if (!node.empty()) j["node"] = node;
    return j;
  }
};

struct BindOutcome {
  bool ok = false;
  std::vector<NodeBinding> bindings;
  StateDoc final_doc;
  TaskRejection rejection;
};

namespace detail {

inline json reasoning_outputs_json(const TaskNode& n) {
  json out = json::array();
  json f = json::object();
  f["name"] = "value";
  f["kind"] = n.output_kind;
  out.push_back(std::move(f));
  return out;
}

inline std::string trim_copy(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::optional<Value> decode_scalar_text(const std::string& kind, const std::string& raw) {
  std::string text = trim_copy(raw);
  if (kind == "integer") {
    BigInt n;
    if (!parse_bigint(text, n)) return std::nullopt;
    return Value::integer(std::move(n));
  }
  if (kind == "decimal") {
    auto d = Decimal::parse(text);
    if (!d) return std::nullopt;
    return Value::decimal(*d);
  }
  return Value::text(text);
}

inline std::optional<Value> decode_literal(ValueKind kind, const json& lit) {
  switch (kind) {
    case ValueKind::Boolean:
      if (lit.is_boolean()) return Value::boolean(lit.get<bool>());
      return std::nullopt;
    case ValueKind::Integer: {
      if (lit.is_number_integer()) return Value::integer(BigInt(lit.get<int64_t>()));
      if (lit.is_string()) {
        BigInt n;
        if (parse_bigint(lit.get<std::string>(), n)) return Value::integer(std::move(n));
      }
      return std::nullopt;
    }
    case ValueKind::Decimal: {
      if (lit.is_number_integer()) return Value::decimal(Decimal::from_int(BigInt(lit.get<int64_t>())));
      if (lit.is_string()) {
        auto d = Decimal::parse(lit.get<std::string>());
        if (d) return Value::decimal(*d);
      }
      return std::nullopt;
    }
    default:
      if (lit.is_string()) return Value::text(lit.get<std::string>());
      return std::nullopt;
  }
}

/// Extracts the value an argument reference points at. A list output means
/// "the first result"; a scalar output answers to any field name since it
/// has exactly one.
inline std::optional<Value> pick_output(const Value& output, const std::string& field) {
  if (output.is_list()) {
    if (output.as_list().empty()) return std::nullopt;
    return pick_output(output.as_list().front(), field);
  }
  if (output.is_record()) {
    if (field.empty()) return output;
    auto it = output.as_record().find(field);
    if (it == output.as_record().end()) return std::nullopt;
    return it->second;
  }
  return output;
}

}  // namespace detail

/// Walks the blueprint in order, asking the client to bind each tool's
/// arguments (to literals or to earlier outputs) and to answer reasoning
/// prompts from their input values, executing tools as it goes. Every
/// argument lands in the record as the concrete value that was used, so the
/// whole run can be replayed without any client. Failures produce a
/// rejection, not an exception; infrastructure unavailability propagates.
inline BindOutcome bind_and_execute(const TaskGraph& graph, const Environment& env, StateDoc doc,
                                    GenClient& client) {
  BindOutcome out;
  out.rejection.taskgraph_id = graph.id;

  std::map<std::string, std::vector<std::string>> entity_keys;
  for (const auto& a : env.schema->attributes)
    if (a.kind == AttrKind::Record && a.open) {
      std::vector<std::string> keys;
      for (const auto& [k, v] : doc.root().as_record().at(a.name).as_record()) {
        (void)v;
        keys.push_back(k);
      }
      entity_keys[a.name] = std::move(keys);
    }
  json entities = json::object();
  for (const auto& [name, keys] : entity_keys) entities[name] = keys;

  // A few concrete entities per collection so literal arguments can quote
  // real field values instead of guessing.
  json samples = json::object();
  for (const auto& [name, keys] : entity_keys) {
    json rows = json::array();
    for (size_t i = 0; i < keys.size() && i < 2; ++i) {
      const Value* v = doc.get(parse_path(name + "." + keys[i], false));
      if (!v) continue;
      json row = json::parse(canonical_json(*v));
      row["_key"] = keys[i];
      rows.push_back(std::move(row));
    }
    samples[name] = std::move(rows);
  }

  std::map<std::string, Value> outputs;
  json prior = json::array();

  auto fail = [&](const std::string& stage, const std::string& node, const std::string& reason,
                  const std::string& code = "") {
    out.ok = false;
    out.rejection.stage = stage;
    out.rejection.node = node;
    out.rejection.reason = reason;
    out.rejection.error_code = code;
    out.final_doc = std::move(doc);
    return out;
  };

  for (const auto& node : graph.nodes) {
    if (node.kind == TaskNode::Kind::Tool) {
      const ToolSpec* tool = env.find_tool(node.tool);
      if (!tool) return fail("binding", node.id, "no tool named '" + node.tool + "'");
      GenRequest req;
      req.stage = "args";
      req.payload = json::object();
      req.payload["node"] = node.id;
      req.payload["tool"] = json{{"name", tool->name}, {"params", tool_params_json(*tool)}};
      req.payload["prior"] = prior;
      req.payload["entities"] = entities;
      req.payload["samples"] = samples;
      req.prompt = "Bind arguments for tool '" + tool->name + "' with parameters " +
                   tool_params_json(*tool).dump() + ". Earlier outputs: " + prior.dump() +
                   ". Existing entities: " + entities.dump() +
                   ". Example entities: " + samples.dump() +
                   ". Answer as a JSON object mapping each parameter to {\"lit\": value} or "
                   "{\"ref\": node, \"field\": name}.";
      json resp;
      try {
        resp = json::parse(client.generate(req).text);
      } catch (const json::parse_error&) {
        return fail("binding", node.id, "argument answer was not JSON");
      }
      if (!resp.is_object()) return fail("binding", node.id, "argument answer was not an object");

      NodeBinding nb;
      nb.node = node.id;
      nb.tool = node.tool;
      ArgMap args;
      for (const auto& p : tool->params) {
        if (!resp.contains(p.name)) {
          if (p.required)
            return fail("binding", node.id, "required parameter '" + p.name + "' left unbound");
          continue;
        }
        const json& b = resp.at(p.name);
        ArgumentBinding ab;
        ab.param = p.name;
        if (b.is_object() && b.contains("ref")) {
          std::string ref = b.value("ref", "");
          auto it = outputs.find(ref);
          if (it == outputs.end())
            return fail("binding", node.id,
                        "parameter '" + p.name + "' references unknown node '" + ref + "'");
          std::string field = b.value("field", "");
          auto v = detail::pick_output(it->second, field);
          if (!v)
            return fail("binding", node.id, "node '" + ref + "' has no output field '" + field +
                                                "' for parameter '" + p.name + "'");
          ab.from_output = true;
          ab.from_node = ref;
          ab.field = field;
          ab.value = *v;
        } else if (b.is_object() && b.contains("lit")) {
          auto v = detail::decode_literal(p.kind, b.at("lit"));
          if (!v)
            return fail("binding", node.id, "bad literal for parameter '" + p.name + "'");
          ab.value = *v;
        } else {
          return fail("binding", node.id, "parameter '" + p.name + "' bound to neither lit nor ref");
        }
        args.emplace(p.name, ab.value);
        nb.args.push_back(std::move(ab));
      }

      ExecOutcome eo = execute_tool(*tool, args, std::move(doc));
      doc = std::move(eo.doc);
      if (!eo.result.ok)
        return fail("execution", node.id, "tool '" + node.tool + "' failed", eo.result.error_code);
      outputs[node.id] = eo.result.value;
      json pj = json::object();
      pj["node"] = node.id;
      pj["outputs"] = tool_outputs_json(*tool);
      prior.push_back(std::move(pj));
      out.bindings.push_back(std::move(nb));
    } else {
      json inputs = json::array();
      for (const auto& in : node.inputs) {
        auto it = outputs.find(in);
        if (it == outputs.end())
          return fail("reasoning", node.id, "input node '" + in + "' has no output yet");
        json ij = json::object();
        ij["node"] = in;
        ij["value"] = json::parse(canonical_json(it->second));
        inputs.push_back(std::move(ij));
      }
      GenRequest req;
      req.stage = "reasoning_eval";
      req.payload = json::object();
      req.payload["prompt"] = node.prompt;
      req.payload["output_kind"] = node.output_kind;
      req.payload["inputs"] = inputs;
      req.prompt = node.prompt + "\nInput values: " + inputs.dump() +
                   "\nAnswer with a single " + node.output_kind + " value.";
      std::string text = client.generate(req).text;
      auto v = detail::decode_scalar_text(node.output_kind, text);
      if (!v)
        return fail("reasoning", node.id,
                    "answer '" + detail::trim_copy(text) + "' is not a " + node.output_kind);
      outputs[node.id] = *v;
      NodeBinding nb;
      nb.node = node.id;
      nb.reasoning_value = *v;
      json pj = json::object();
      pj["node"] = node.id;
      pj["outputs"] = detail::reasoning_outputs_json(node);
      prior.push_back(std::move(pj));
      out.bindings.push_back(std::move(nb));
    }
  }
  out.ok = true;
  out.final_doc = std::move(doc);
  return out;
}

/// Replays recorded bindings without any client: argument references are
/// re-resolved from live outputs, reasoning nodes reuse their recorded
/// values. Deterministic given the same initial state.
inline SequenceResult replay_bindings(const TaskGraph& graph, const Environment& env,
                                      const std::vector<NodeBinding>& bindings, StateDoc doc) {
  SequenceResult out;
  std::map<std::string, Value> outputs;
  size_t call_index = 0;
  for (const auto& nb : bindings) {
    const TaskNode* node = graph.find(nb.node);
    if (!node) throw Error("binding references unknown node '" + nb.node + "'");
    if (node->kind == TaskNode::Kind::Reasoning) {
      if (!nb.reasoning_value) throw Error("reasoning node '" + nb.node + "' has no stored value");
      outputs[nb.node] = *nb.reasoning_value;
      continue;
    }
    const ToolSpec* tool = env.find_tool(nb.tool);
    if (!tool) throw Error("no tool named '" + nb.tool + "'");
    ArgMap args;
    for (const auto& ab : nb.args) {
      if (ab.from_output) {
        auto it = outputs.find(ab.from_node);
        if (it == outputs.end()) throw Error("no output for node '" + ab.from_node + "'");
        auto v = detail::pick_output(it->second, ab.field);
        if (!v) throw Error("output of '" + ab.from_node + "' lost field '" + ab.field + "'");
        args.emplace(ab.param, *v);
      } else {
        args.emplace(ab.param, ab.value);
      }
    }
    ExecOutcome eo = execute_tool(*tool, args, std::move(doc));
    doc = std::move(eo.doc);
    out.results.push_back(std::move(eo.result));
    if (!out.results.back().ok) {
      out.failed_index = call_index;
      break;
    }
    outputs[nb.node] = out.results.back().value;
    ++call_index;
  }
  out.doc = std::move(doc);
  return out;
}

// ---------------------------------------------------------------------------
// Question refinement

/// Identifier-shaped tokens (containing an underscore) in free text; the
/// shape entity keys, tool names and schema paths share.
inline std::vector<std::string> identifier_tokens(const std::string& text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_') {
      size_t start = i;
      while (i < text.size() && ((text[i] >= 'a' && text[i] <= 'z') ||
                                 (text[i] >= '0' && text[i] <= '9') || text[i] == '_'))
        ++i;
      std::string tok = text.substr(start, i - start);
      if (tok.find('_') != std::string::npos) out.push_back(tok);
    } else {
      ++i;
    }
  }
  return out;
}

/// Names a refined question may mention: entity keys in the current state,
/// tool names, and schema attribute and field names.
inline std::set<std::string> build_allowlist(const Environment& env, const StateDoc& doc) {
  std::set<std::string> allow;
  for (const auto& t : env.tools) {
    allow.insert(t.name);
    for (const auto& p : t.params) allow.insert(p.name);
    for (const auto& f : t.returns.output_fields()) allow.insert(f.name);
  }
  std::vector<const AttributeDef*> stack;
  for (const auto& a : env.schema->attributes) stack.push_back(&a);
  while (!stack.empty()) {
    const AttributeDef* d = stack.back();
    stack.pop_back();
    allow.insert(d->name);
    for (const auto& f : d->fields) stack.push_back(&f);
  }
  for (const auto& a : env.schema->attributes)
    if (a.kind == AttrKind::Record && a.open)
      for (const auto& [k, v] : doc.root().as_record().at(a.name).as_record()) {
        (void)v;
        allow.insert(k);
      }
  return allow;
}

struct RefineOutcome {
  std::string text;
  bool refined = false;
};

/// Asks the client to polish a question without inventing identifiers: any
/// identifier-shaped token in the answer must come from the allowlist. One
/// retry, then the refinement is rejected. An unavailable client leaves the
/// question as it was.
inline RefineOutcome refine_question(const std::string& question,
                                     const std::set<std::string>& allowlist, GenClient& client) {
  auto check = [&](const std::string& text) -> std::optional<std::string> {
    for (const auto& tok : identifier_tokens(text))
      if (!allowlist.count(tok)) return tok;
    return std::nullopt;
  };
  json allowed = json::array();
  for (const auto& a : allowlist) allowed.push_back(a);
  GenRequest req;
  req.stage = "refine";
  req.payload = json::object();
  req.payload["question"] = question;
  req.payload["allowed"] = allowed;
  req.prompt = "Rewrite this user request to read naturally, mentioning only identifiers from the "
               "allowed list: " +
               question;
  try {
    std::string text = detail::trim_copy(client.generate(req).text);
    auto bad = check(text);
    if (!bad && !text.empty()) return {text, true};
    GenRequest retry = req;
    retry.stage = "refine";
    retry.payload["rejected"] = text;
    retry.payload["offending"] = bad ? *bad : "";
    retry.prompt += bad ? ("\nYour previous answer used '" + *bad + "', which does not exist.")
                        : "\nYour previous answer was empty.";
    text = detail::trim_copy(client.generate(retry).text);
    bad = check(text);
    if (!bad && !text.empty()) return {text, true};
    throw RefinementRejected("refined question still mentions unknown identifier '" +
                             (bad ? *bad : std::string("<empty>")) + "'");
  } catch (const ClientUnavailable&) {
    return {question, false};
  }
}

// ---------------------------------------------------------------------------
// Task samples

/// A fully specified, verifiable task: the question, the recorded bindings
/// that realize it, and the initial and golden final states. Equality of a
/// policy's final state with the golden one is the entire reward.
struct TaskSample {
  std::string task_id;
  std::string env_id;
  std::string taskgraph_id;
  uint64_t seed = 0;
  std::string question;       // as first generated
  std::string question_final; // after refinement (equal when unrefined)
  bool refined = false;
  std::vector<NodeBinding> bindings;
  Snapshot initial;
  Snapshot golden;
  std::string env_digest;

  json to_json() const {
    json j = json::object();
    j["task_id"] = task_id;
    j["env_id"] = env_id;
    j["taskgraph_id"] = taskgraph_id;
    j["seed"] = seed;
    j["question"] = question;
    j["question_final"] = question_final;
    j["refined"] = refined;
    json bs = json::array();
    for (const auto& nb : bindings) {
      json bj = json::object();
      bj["node"] = nb.node;
      if (!nb.tool.empty()) bj["tool"] = nb.tool;
      if (nb.reasoning_value) {
        bj["value"] = json::parse(canonical_json(*nb.reasoning_value));
        bj["value_kind"] = scalar_kind_tag(*nb.reasoning_value);
      }
      json as = json::array();
      for (const auto& ab : nb.args) {
        json aj = json::object();
        aj["param"] = ab.param;
        aj["value"] = json::parse(canonical_json(ab.value));
        aj["kind"] = scalar_kind_tag(ab.value);
        if (ab.from_output) {
          aj["from"] = ab.from_node;
          if (!ab.field.empty()) aj["field"] = ab.field;
        }
        as.push_back(std::move(aj));
      }
      if (!as.empty()) bj["args"] = std::move(as);
      bs.push_back(std::move(bj));
    }
    j["bindings"] = std::move(bs);
    j["initial"] = json{{"hash", initial.doc_hash}, {"state", json::parse(initial.payload)}};
    j["golden"] = json{{"hash", golden.doc_hash}, {"state", json::parse(golden.payload)}};
    j["env_digest"] = env_digest;
    return j;
  }

  static std::string scalar_kind_tag(const Value& v) {
    if (v.is_integer()) return "integer";
    if (v.is_decimal()) return "decimal";
    if (v.is_boolean()) return "boolean";
    if (v.is_text()) return "text";
    throw SchemaViolation("bound values must be scalar");
  }

  static Value scalar_from_tagged(const std::string& kind, const json& v) {
    if (kind == "boolean" && v.is_boolean()) return Value::boolean(v.get<bool>());
    if (v.is_string()) {
      const std::string& s = v.get<std::string>();
      if (kind == "integer") {
        BigInt n;
        if (parse_bigint(s, n)) return Value::integer(std::move(n));
      } else if (kind == "decimal") {
        if (auto d = Decimal::parse(s)) return Value::decimal(*d);
      } else if (kind == "text") {
        return Value::text(s);
      }
    }
    throw SchemaViolation("bad '" + kind + "' value in task sample: " + v.dump());
  }

  static TaskSample from_json(const json& j, SchemaPtr schema) {
    TaskSample t;
    t.task_id = j.value("task_id", "");
    t.env_id = j.value("env_id", "");
    t.taskgraph_id = j.value("taskgraph_id", "");
    t.seed = j.value("seed", uint64_t(0));
    t.question = j.value("question", "");
    t.question_final = j.value("question_final", "");
    t.refined = j.value("refined", false);
    for (const auto& bj : j.value("bindings", json::array())) {
      NodeBinding nb;
      nb.node = bj.value("node", "");
      nb.tool = bj.value("tool", "");
      if (bj.contains("value"))
        nb.reasoning_value = scalar_from_tagged(bj.value("value_kind", "text"), bj.at("value"));
      for (const auto& aj : bj.value("args", json::array())) {
        ArgumentBinding ab;
        ab.param = aj.value("param", "");
        ab.value = scalar_from_tagged(aj.value("kind", "text"), aj.at("value"));
        if (aj.contains("from")) {
          ab.from_output = true;
          ab.from_node = aj.value("from", "");
          ab.field = aj.value("field", "");
        }
        nb.args.push_back(std::move(ab));
      }
      t.bindings.push_back(std::move(nb));
    }
    auto load_snap = [&](const char* key) {
      StateDoc doc = StateDoc::decode(schema, j.at(key).at("state"));
      Snapshot s = make_snapshot(doc);
      std::string declared = j.at(key).value("hash", "");
      if (declared != s.doc_hash)
        throw SchemaViolation("task '" + t.task_id + "': stored " + key +
                              " hash does not match its state");
      return s;
    };
    t.initial = load_snap("initial");
    t.golden = load_snap("golden");
    t.env_digest = j.value("env_digest", "");
    return t;
  }
};

}  // namespace envsmith
