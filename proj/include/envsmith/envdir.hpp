#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "envsmith/exec.hpp"
#include "envsmith/schema.hpp"
#include "envsmith/tool.hpp"

namespace envsmith {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingInput("cannot read '" + p.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << content;
}

inline json read_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw SchemaViolation("'" + p.string() + "' is not valid JSON: " + e.what());
  }
}

inline void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

/// A loaded environment: schema, validated tools sorted by name, and a
/// digest covering all of it so tasks can pin the tool set they were built
/// against.
struct Environment {
  SchemaPtr schema;
  std::vector<ToolSpec> tools;
  std::string manifest_digest;

  const ToolSpec* find_tool(const std::string& name) const {
    for (const auto& t : tools)
      if (t.name == name) return &t;
    return nullptr;
  }
};

inline std::string environment_digest(const AttributeSchema& schema,
                                      const std::vector<ToolSpec>& tools) {
  json j = json::object();
  j["schema"] = schema_to_json(schema);
  std::vector<const ToolSpec*> ordered;
  for (const auto& t : tools) ordered.push_back(&t);
  std::sort(ordered.begin(), ordered.end(),
            [](const ToolSpec* a, const ToolSpec* b) { return a->name < b->name; });
  json ts = json::array();
  for (const ToolSpec* t : ordered) ts.push_back(tool_to_json(*t));
  j["tools"] = ts;
  return sha256_hex(j.dump());
}

/// Layout on disk: <dir>/schema.json, <dir>/tools/manifest.json naming the
/// tools, and <dir>/tools/<name>.json for each one.
inline Environment load_environment(const fs::path& dir) {
  Environment env;
  env.schema = load_schema(read_json(dir / "schema.json"));
  json manifest = read_json(dir / "tools" / "manifest.json");
  if (!manifest.contains("tools") || !manifest.at("tools").is_array())
    throw SchemaViolation("'" + (dir / "tools" / "manifest.json").string() +
                          "' needs a 'tools' array");
  std::vector<std::string> names = manifest.at("tools").get<std::vector<std::string>>();
  std::sort(names.begin(), names.end());
  std::vector<std::string> diags;
  for (const auto& name : names) {
    ToolSpec t = tool_from_json(read_json(dir / "tools" / (name + ".json")));
    if (t.name != name)
      throw SchemaViolation("tool file '" + name + ".json' declares name '" + t.name + "'");
    auto d = validate_tool(*env.schema, t);
    diags.insert(diags.end(), d.begin(), d.end());
    env.tools.push_back(std::move(t));
  }
  if (!diags.empty()) {
    std::string msg = "invalid tools in '" + dir.string() + "'";
    for (const auto& d : diags) msg += "; " + d;
    throw SchemaViolation(msg);
  }
  std::set<std::string> seen(names.begin(), names.end());
  if (seen.size() != names.size()) throw SchemaViolation("duplicate tool in manifest");
  env.manifest_digest = environment_digest(*env.schema, env.tools);
  return env;
}

inline void save_environment(const fs::path& dir, const AttributeSchema& schema,
                             const std::vector<ToolSpec>& tools) {
  write_json(dir / "schema.json", schema_to_json(schema));
  json manifest = json::object();
  std::vector<std::string> names;
  for (const auto& t : tools) names.push_back(t.name);
  std::sort(names.begin(), names.end());
  manifest["tools"] = names;
  write_json(dir / "tools" / "manifest.json", manifest);
  for (const auto& t : tools) write_json(dir / "tools" / (t.name + ".json"), tool_to_json(t));
}

}  // namespace envsmith
