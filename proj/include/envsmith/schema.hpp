#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "envsmith/errors.hpp"
#include "envsmith/value.hpp"

namespace envsmith {

using json = nlohmann::json;

enum class AttrKind { Scalar, List, Record };
enum class ValueKind { Text, Integer, Decimal, Boolean, Reference };

inline const char* attr_kind_name(AttrKind k) {
  switch (k) {
    case AttrKind::Scalar: return "scalar";
    case AttrKind::List: return "list";
    case AttrKind::Record: return "record";
  }
  return "?";
}

inline const char* value_kind_name(ValueKind k) {
  switch (k) {
    case ValueKind::Text: return "text";
    case ValueKind::Integer: return "integer";
    case ValueKind::Decimal: return "decimal";
    case ValueKind::Boolean: return "boolean";
    case ValueKind::Reference: return "reference";
  }
  return "?";
}

inline std::optional<AttrKind> attr_kind_from(const std::string& s) {
  if (s == "scalar") return AttrKind::Scalar;
  if (s == "list") return AttrKind::List;
  if (s == "record") return AttrKind::Record;
  return std::nullopt;
}

inline std::optional<ValueKind> value_kind_from(const std::string& s) {
  if (s == "text") return ValueKind::Text;
  if (s == "integer") return ValueKind::Integer;
  if (s == "decimal") return ValueKind::Decimal;
  if (s == "boolean") return ValueKind::Boolean;
  if (s == "reference") return ValueKind::Reference;
  return std::nullopt;
}

inline bool is_identifier(const std::string& s) {
  if (s.empty() || s[0] < 'a' || s[0] > 'z') return false;
  for (char c : s)
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
  return true;
}

/// Entity keys inside open records: lowercase/digit/underscore, not purely
/// numeric (a purely numeric segment is a list index).
inline bool is_entity_key(const std::string& s) {
  if (s.empty()) return false;
  bool all_digits = true;
  for (char c : s) {
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
    if (c < '0' || c > '9') all_digits = false;
  }
  return !all_digits;
}

/// One attribute declaration. Records come in two flavors: a closed record
/// has the exact fields listed; an open record is a keyed collection whose
/// every value is shaped by `fields` (entity ids as keys). A list holds
/// scalars of `value_kind`, or records shaped by `fields` when present.
struct AttributeDef {
  std::string name;
  AttrKind kind = AttrKind::Scalar;
  ValueKind value_kind = ValueKind::Text;
  std::vector<AttributeDef> fields;
  bool open = false;
  std::string ref_target;  // value_kind == Reference: top-level open record
  uint32_t scale = 2;      // decimal kinds only
  bool volatile_excluded = false;
  std::string description;

  bool list_of_records() const { return kind == AttrKind::List && !fields.empty(); }
};

struct AttributeSchema {
  std::string id;
  std::vector<AttributeDef> attributes;

  const AttributeDef* find(const std::string& name) const {
    for (const auto& a : attributes)
      if (a.name == name) return &a;
    return nullptr;
  }
};

using SchemaPtr = std::shared_ptr<const AttributeSchema>;

// ---------------------------------------------------------------------------
// JSON form

inline void attribute_def_to_json(const AttributeDef& d, json& out) {
  out = json::object();
  out["name"] = d.name;
  out["kind"] = attr_kind_name(d.kind);
  if (d.kind == AttrKind::Scalar || (d.kind == AttrKind::List && d.fields.empty()))
    out["value_kind"] = value_kind_name(d.value_kind);
  if (!d.fields.empty()) {
    json fs = json::array();
    for (const auto& f : d.fields) {
      json fj;
      attribute_def_to_json(f, fj);
      fs.push_back(fj);
    }
    out["fields"] = fs;
  }
  if (d.open) out["open"] = true;
  if (!d.ref_target.empty()) out["ref"] = d.ref_target;
  if (d.value_kind == ValueKind::Decimal &&
      (d.kind == AttrKind::Scalar || (d.kind == AttrKind::List && d.fields.empty())))
    out["scale"] = d.scale;
  if (d.volatile_excluded) out["volatile"] = true;
  if (!d.description.empty()) out["description"] = d.description;
}

inline AttributeDef attribute_def_from_json(const json& j) {
  if (!j.is_object()) throw SchemaViolation("attribute def must be an object");
  AttributeDef d;
  d.name = j.value("name", "");
  auto k = attr_kind_from(j.value("kind", "scalar"));
  if (!k) throw SchemaViolation("unknown attribute kind in '" + d.name + "'");
  d.kind = *k;
  if (j.contains("value_kind")) {
    auto vk = value_kind_from(j.at("value_kind").get<std::string>());
    if (!vk) throw SchemaViolation("unknown value kind in '" + d.name + "'");
    d.value_kind = *vk;
  }
  if (j.contains("fields"))
    for (const auto& f : j.at("fields")) d.fields.push_back(attribute_def_from_json(f));
  d.open = j.value("open", false);
  d.ref_target = j.value("ref", "");
  d.scale = j.value("scale", 2u);
  d.volatile_excluded = j.value("volatile", false);
  d.description = j.value("description", "");
  return d;
}

inline json schema_to_json(const AttributeSchema& s) {
  json out = json::object();
  out["id"] = s.id;
  json attrs = json::array();
  for (const auto& a : s.attributes) {
    json aj;
    attribute_def_to_json(a, aj);
    attrs.push_back(aj);
  }
  out["attributes"] = attrs;
  return out;
}

inline AttributeSchema schema_from_json(const json& j) {
  AttributeSchema s;
  s.id = j.value("id", "");
  if (!j.contains("attributes") || !j.at("attributes").is_array())
    throw SchemaViolation("schema needs an 'attributes' array");
  for (const auto& a : j.at("attributes")) s.attributes.push_back(attribute_def_from_json(a));
  return s;
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline void validate_def(const AttributeSchema& schema, const AttributeDef& d,
                         const std::string& where, std::vector<std::string>& diags) {
  std::string at = where.empty() ? d.name : where + "." + d.name;
  if (!is_identifier(d.name)) diags.push_back("bad attribute name '" + at + "'");
  switch (d.kind) {
    case AttrKind::Scalar:
      if (!d.fields.empty()) diags.push_back(at + ": scalar cannot have fields");
      break;
    case AttrKind::List:
      if (d.fields.empty() && d.value_kind == ValueKind::Reference && d.ref_target.empty())
        diags.push_back(at + ": reference list needs a ref target");
      break;
    case AttrKind::Record:
      if (d.fields.empty()) diags.push_back(at + ": record needs fields");
      break;
  }
  if (d.kind != AttrKind::Record && d.open) diags.push_back(at + ": only records can be open");
  if (d.value_kind == ValueKind::Reference && d.fields.empty()) {
    const AttributeDef* target = schema.find(d.ref_target);
    if (!target)
      diags.push_back(at + ": reference target '" + d.ref_target + "' not in schema");
    else if (target->kind != AttrKind::Record || !target->open)
      diags.push_back(at + ": reference target '" + d.ref_target + "' is not an open record");
  }
  if (d.value_kind == ValueKind::Decimal && d.scale > 30)
    diags.push_back(at + ": decimal scale above 30");
  std::map<std::string, int> seen;
  for (const auto& f : d.fields) {
    if (++seen[f.name] == 2) diags.push_back(at + ": duplicate field '" + f.name + "'");
    validate_def(schema, f, at, diags);
  }
}

}  // namespace detail

inline std::vector<std::string> validate_schema(const AttributeSchema& s) {
  std::vector<std::string> diags;
  if (s.id.empty() || !is_identifier(s.id)) diags.push_back("bad schema id '" + s.id + "'");
  if (s.attributes.empty()) diags.push_back("schema has no attributes");
  std::map<std::string, int> seen;
  for (const auto& a : s.attributes) {
    if (++seen[a.name] == 2) diags.push_back("duplicate attribute '" + a.name + "'");
    detail::validate_def(s, a, "", diags);
  }
  return diags;
}

inline SchemaPtr load_schema(const json& j) {
  auto s = std::make_shared<AttributeSchema>(schema_from_json(j));
  auto diags = validate_schema(*s);
  if (!diags.empty()) {
    std::string msg = "invalid schema";
    for (const auto& d : diags) msg += "; " + d;
    throw SchemaViolation(msg);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Paths

struct PathSeg {
  enum class Tag { Literal, Index, Template };
  Tag tag = Tag::Literal;
  std::string text;  // literal segment or template binding name
  size_t index = 0;

  bool operator==(const PathSeg&) const = default;
};

using Path = std::vector<PathSeg>;

inline Path parse_path(const std::string& s, bool allow_templates = false) {
  Path out;
  if (s.empty()) throw Error("empty path");
  size_t i = 0;
  while (i <= s.size()) {
    size_t dot = s.find('.', i);
    std::string seg = s.substr(i, dot == std::string::npos ? std::string::npos : dot - i);
    if (seg.empty()) throw Error("empty segment in path '" + s + "'");
    PathSeg p;
    if (seg.front() == '{' && seg.back() == '}') {
      if (!allow_templates) throw Error("template segment not allowed in path '" + s + "'");
      p.tag = PathSeg::Tag::Template;
      p.text = seg.substr(1, seg.size() - 2);
      if (!is_identifier(p.text)) throw Error("bad template binding in path '" + s + "'");
    } else if (seg.find_first_not_of("0123456789") == std::string::npos) {
      p.tag = PathSeg::Tag::Index;
      p.index = std::stoull(seg);
      p.text = seg;
    } else {
      bool ok = !seg.empty();
      for (char c : seg)
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) ok = false;
      if (!ok) throw Error("bad segment '" + seg + "' in path '" + s + "'");
      p.tag = PathSeg::Tag::Literal;
      p.text = seg;
    }
    out.push_back(std::move(p));
    if (dot == std::string::npos) break;
    i = dot + 1;
  }
  return out;
}

inline std::string path_str(const Path& p) {
  std::string out;
  for (size_t i = 0; i < p.size(); ++i) {
    if (i) out.push_back('.');
    if (p[i].tag == PathSeg::Tag::Template)
      out += "{" + p[i].text + "}";
    else
      out += p[i].text;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Static schema location of a (possibly templated) path

/// Where a path lands in the schema, with enough context to check a value
/// written there. Entity: one value of an open record. Element: one list
/// element.
struct SchemaNode {
  const AttributeDef* def = nullptr;
  enum class View { Whole, Entity, Element } view = View::Whole;
};

inline std::optional<SchemaNode> resolve_schema_path(const AttributeSchema& schema,
                                                     const Path& path,
                                                     std::string* error = nullptr) {
  auto fail = [&](const std::string& msg) -> std::optional<SchemaNode> {
    if (error) *error = msg;
    return std::nullopt;
  };
  if (path.empty()) return fail("empty path");
  if (path[0].tag != PathSeg::Tag::Literal) return fail("path must start with an attribute name");
  const AttributeDef* def = schema.find(path[0].text);
  if (!def) return fail("unknown attribute '" + path[0].text + "'");
  SchemaNode node{def, SchemaNode::View::Whole};
  for (size_t i = 1; i < path.size(); ++i) {
    const PathSeg& seg = path[i];
    // Step from the current node into one child.
    const AttributeDef* d = node.def;
    bool struct_like =
        (node.view == SchemaNode::View::Whole && d->kind == AttrKind::Record && !d->open) ||
        (node.view == SchemaNode::View::Entity) ||
        (node.view == SchemaNode::View::Element && d->list_of_records());
    if (struct_like) {
      if (seg.tag == PathSeg::Tag::Index) return fail("index into record at '" + path_str(path) + "'");
      if (seg.tag == PathSeg::Tag::Template)
        return fail("template key into closed record at '" + path_str(path) + "'");
      const AttributeDef* f = nullptr;
      for (const auto& fd : d->fields)
        if (fd.name == seg.text) f = &fd;
      if (!f) return fail("unknown field '" + seg.text + "' at '" + path_str(path) + "'");
      node = {f, SchemaNode::View::Whole};
      continue;
    }
    if (node.view == SchemaNode::View::Whole && d->kind == AttrKind::Record && d->open) {
      if (seg.tag == PathSeg::Tag::Index) return fail("index used as entity key");
      node = {d, SchemaNode::View::Entity};
      continue;
    }
    if (node.view == SchemaNode::View::Whole && d->kind == AttrKind::List) {
      if (seg.tag == PathSeg::Tag::Literal) return fail("list index must be numeric");
      node = {d, SchemaNode::View::Element};
      continue;
    }
    return fail("cannot descend into scalar at '" + path_str(path) + "'");
  }
  return node;
}

}  // namespace envsmith
