#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "envsmith/digest.hpp"
#include "envsmith/schema.hpp"
#include "envsmith/value.hpp"

namespace envsmith {

namespace detail {

/// Serializes a subtree as canonical JSON, skipping volatile fields.
/// Shape mirrors Value::canonical_json_to so the stripped form of a doc is
/// byte-identical to canonical JSON of a stripped copy.
inline void strip_serialize(const AttributeSchema& schema, SchemaNode node, const Value& v,
                            std::string& out) {
  const AttributeDef& d = *node.def;
  bool struct_like =
      (node.view == SchemaNode::View::Whole && d.kind == AttrKind::Record && !d.open) ||
      (node.view == SchemaNode::View::Entity) ||
      (node.view == SchemaNode::View::Element && d.list_of_records());
  if (struct_like) {
    out.push_back('{');
    bool first = true;
    for (const auto& [name, fv] : v.as_record()) {
      const AttributeDef* fd = nullptr;
      for (const auto& f : d.fields)
        if (f.name == name) fd = &f;
      if (!fd || fd->volatile_excluded) continue;
      if (!first) out.push_back(',');
      first = false;
      out.push_back('"');
      json_escape_to(out, name);
      out += "\":";
      strip_serialize(schema, {fd, SchemaNode::View::Whole}, fv, out);
    }
    out.push_back('}');
    return;
  }
  if (node.view == SchemaNode::View::Whole && d.kind == AttrKind::Record && d.open) {
    out.push_back('{');
    bool first = true;
    for (const auto& [key, ev] : v.as_record()) {
      if (!first) out.push_back(',');
      first = false;
      out.push_back('"');
      json_escape_to(out, key);
      out += "\":";
      strip_serialize(schema, {&d, SchemaNode::View::Entity}, ev, out);
    }
    out.push_back('}');
    return;
  }
  if (node.view == SchemaNode::View::Whole && d.kind == AttrKind::List) {
    out.push_back('[');
    bool first = true;
    for (const auto& ev : v.as_list()) {
      if (!first) out.push_back(',');
      first = false;
      strip_serialize(schema, {&d, SchemaNode::View::Element}, ev, out);
    }
    out.push_back(']');
    return;
  }
  canonical_json_to(out, v);
}

}  // namespace detail

/// A validated state document: value tree plus the schema it conforms to.
/// All contents are canonical (decimals at schema scale, integers exact),
/// so serialization is deterministic and equality is byte equality of the
/// comparable form.
class StateDoc {
 public:
  StateDoc() = default;

  static StateDoc empty(SchemaPtr schema) {
    StateDoc doc;
    doc.schema_ = std::move(schema);
    Value::Record root;
    for (const auto& a : doc.schema_->attributes)
      root.emplace(a.name, zero_value(*doc.schema_, {&a, SchemaNode::View::Whole}));
    doc.root_ = Value::record(std::move(root));
    doc.reset_cache();
    return doc;
  }

  /// Builds a document from JSON, validating shape, kinds, scales and
  /// references. Floating-point numbers are rejected outright.
  static StateDoc decode(SchemaPtr schema, const json& payload) {
    if (!payload.is_object()) throw SchemaViolation("state payload must be an object");
    StateDoc doc;
    doc.schema_ = std::move(schema);
    Value::Record root;
    for (const auto& a : doc.schema_->attributes) {
      auto it = payload.find(a.name);
      if (it == payload.end())
        throw SchemaViolation("state payload missing attribute '" + a.name + "'");
      root.emplace(a.name, decode_value(*doc.schema_, {&a, SchemaNode::View::Whole}, *it, a.name));
    }
    for (auto it = payload.begin(); it != payload.end(); ++it)
      if (!doc.schema_->find(it.key()))
        throw SchemaViolation("state payload has undeclared attribute '" + it.key() + "'");
    doc.root_ = Value::record(std::move(root));
    doc.check_references();
    doc.reset_cache();
    return doc;
  }

  static StateDoc decode_text(SchemaPtr schema, const std::string& canonical) {
    return decode(std::move(schema), json::parse(canonical));
  }

  const AttributeSchema& schema() const { return *schema_; }
  const SchemaPtr& schema_ptr() const { return schema_; }
  const Value& root() const { return root_; }

  /// Full canonical JSON text, volatile attributes included.
  std::string canonical_text() const { return canonical_json(root_); }

  json to_json() const { return json::parse(canonical_text()); }

  /// Canonical JSON text with volatile attributes removed; the byte form
  /// behind document hashing and state comparison.
  std::string comparable_text() const {
    std::string out;
    out.reserve(last_size_ + 64);
    out.push_back('{');
    bool first = true;
    for (const auto& a : schema_->attributes) cache_entry(a.name);
    for (const auto& [name, text] : cache_)
      if (!text->empty()) {
        if (!first) out.push_back(',');
        first = false;
        out += *text;
      }
    out.push_back('}');
    last_size_ = out.size();
    return out;
  }

  std::string doc_hash() const { return sha256_hex(comparable_text()); }

  /// Scalar leaves in the document (lists and records contribute their
  /// elements, not themselves).
  size_t entry_count() const { return count_entries(root_); }

  const Value* get(const Path& path) const {
    const Value* cur = &root_;
    for (const auto& seg : path) {
      if (seg.tag == PathSeg::Tag::Index) {
        if (!cur->is_list() || seg.index >= cur->as_list().size()) return nullptr;
        cur = &cur->as_list()[seg.index];
      } else {
        if (!cur->is_record()) return nullptr;
        auto it = cur->as_record().find(seg.text);
        if (it == cur->as_record().end()) return nullptr;
        cur = &it->second;
      }
    }
    return cur;
  }

  const Value* get(const std::string& path) const { return get(parse_path(path)); }

  /// Schema-checked write. The value is conformed to the target's shape
  /// (integer widened to decimal, decimals rescaled losslessly); failures
  /// surface as EffectRuntimeError with a stable code. Creating a new
  /// entity key in an open record is a write of its full record value.
  void set_checked(const Path& path, Value v) {
    std::string err;
    auto node = resolve_schema_path(*schema_, path, &err);
    if (!node) throw EffectRuntimeError("unknown_path", err);
    conform_value(*schema_, *node, v, &root_);
    Value* parent = walk_parent(path);
    const PathSeg& last = path.back();
    if (last.tag == PathSeg::Tag::Index) {
      if (!parent->is_list())
        throw EffectRuntimeError("unknown_path", "no list at '" + path_str(path) + "'");
      if (last.index >= parent->as_list().size())
        throw EffectRuntimeError("index_out_of_range",
                                 "index " + last.text + " past end of '" + path_str(path) + "'");
      parent->as_list()[last.index] = std::move(v);
    } else {
      if (!parent->is_record())
        throw EffectRuntimeError("unknown_path", "no record at '" + path_str(path) + "'");
      if (node->view == SchemaNode::View::Entity && !is_entity_key(last.text))
        throw EffectRuntimeError("schema_violation", "bad entity key '" + last.text + "'");
      parent->as_record()[last.text] = std::move(v);
    }
    invalidate(path.front().text);
  }

  /// Appends to a list attribute; the only way lists grow.
  void append_checked(const Path& path, Value v) {
    std::string err;
    auto node = resolve_schema_path(*schema_, path, &err);
    if (!node) throw EffectRuntimeError("unknown_path", err);
    if (node->view != SchemaNode::View::Whole || node->def->kind != AttrKind::List)
      throw EffectRuntimeError("schema_violation", "'" + path_str(path) + "' is not a list");
    conform_value(*schema_, {node->def, SchemaNode::View::Element}, v, &root_);
    const Value* target = get(path);
    if (!target) throw EffectRuntimeError("unknown_path", "no list at '" + path_str(path) + "'");
    const_cast<Value*>(target)->as_list().push_back(std::move(v));
    invalidate(path.front().text);
  }

  // Unchecked mutations, for rollback journals and diff application. The
  // caller is responsible for keeping the document conformant.
  void raw_set(const Path& path, Value v) {
    Value* parent = walk_parent(path, true);
    const PathSeg& last = path.back();
    if (last.tag == PathSeg::Tag::Index) {
      auto& list = parent->as_list();
      if (last.index >= list.size()) list.resize(last.index + 1, Value::text(""));
      list[last.index] = std::move(v);
    } else {
      parent->as_record()[last.text] = std::move(v);
    }
    invalidate(path.front().text);
  }

  void raw_remove(const Path& path) {
    Value* parent = walk_parent(path);
    const PathSeg& last = path.back();
    if (last.tag == PathSeg::Tag::Index) {
      auto& list = parent->as_list();
      if (last.index < list.size()) list.erase(list.begin() + static_cast<long>(last.index));
    } else {
      parent->as_record().erase(last.text);
    }
    invalidate(path.front().text);
  }

  void list_truncate(const Path& path, size_t n) {
    const Value* target = get(path);
    if (!target || !target->is_list()) throw Error("no list at '" + path_str(path) + "'");
    auto& list = const_cast<Value*>(target)->as_list();
    if (list.size() > n) list.resize(n, Value::text(""));
    invalidate(path.front().text);
  }

  /// Revalidates the whole document; used after raw mutations.
  void revalidate() {
    for (const auto& a : schema_->attributes) {
      auto it = root_.as_record().find(a.name);
      if (it == root_.as_record().end())
        throw SchemaViolation("attribute '" + a.name + "' missing");
      try {
        conform_value(*schema_, {&a, SchemaNode::View::Whole}, it->second, &root_);
      } catch (const EffectRuntimeError& e) {
        throw SchemaViolation("attribute '" + a.name + "': " + e.what());
      }
    }
    reset_cache();
  }

  // -- value construction helpers ------------------------------------------

  static Value zero_value(const AttributeSchema& schema, SchemaNode node) {
    const AttributeDef& d = *node.def;
    bool struct_like =
        (node.view == SchemaNode::View::Whole && d.kind == AttrKind::Record && !d.open) ||
        (node.view == SchemaNode::View::Entity) ||
        (node.view == SchemaNode::View::Element && d.list_of_records());
    if (struct_like) {
      Value::Record r;
      for (const auto& f : d.fields)
        r.emplace(f.name, zero_value(schema, {&f, SchemaNode::View::Whole}));
      return Value::record(std::move(r));
    }
    if (node.view == SchemaNode::View::Whole && d.kind == AttrKind::Record && d.open)
      return Value::record({});
    if (node.view == SchemaNode::View::Whole && d.kind == AttrKind::List)
      return Value::list({});
    switch (d.value_kind) {
      case ValueKind::Text:
      case ValueKind::Reference: return Value::text("");
      case ValueKind::Integer: return Value::integer(0);
      case ValueKind::Decimal: return Value::decimal(Decimal(BigInt(0), d.scale));
      case ValueKind::Boolean: return Value::boolean(false);
    }
    return Value::text("");
  }

  /// Conforms a value to a schema location in place: integers widen to
  /// decimals, decimals rescale losslessly, records must carry exactly the
  /// declared fields, references must name an existing entity. Throws
  /// EffectRuntimeError with a stable code. `doc_root` enables reference
  /// checks; pass nullptr to skip them.
  static void conform_value(const AttributeSchema& schema, SchemaNode node, Value& v,
                            const Value* doc_root) {
    const AttributeDef& d = *node.def;
    bool struct_like =
        (node.view == SchemaNode::View::Whole && d.kind == AttrKind::Record && !d.open) ||
        (node.view == SchemaNode::View::Entity) ||
        (node.view == SchemaNode::View::Element && d.list_of_records());
    if (struct_like) {
      if (!v.is_record())
        throw EffectRuntimeError("schema_violation", "'" + d.name + "' needs a record value");
      for (const auto& f : d.fields) {
        auto it = v.as_record().find(f.name);
        if (it == v.as_record().end())
          throw EffectRuntimeError("schema_violation",
                                   "record for '" + d.name + "' missing field '" + f.name + "'");
        conform_value(schema, {&f, SchemaNode::View::Whole}, it->second, doc_root);
      }
      if (v.as_record().size() != d.fields.size())
        for (const auto& [name, fv] : v.as_record()) {
          (void)fv;
          bool declared = false;
          for (const auto& f : d.fields) declared = declared || f.name == name;
          if (!declared)
            throw EffectRuntimeError("schema_violation",
                                     "record for '" + d.name + "' has undeclared field '" + name + "'");
        }
      return;
    }
    if (node.view == SchemaNode::View::Whole && d.kind == AttrKind::Record && d.open) {
      if (!v.is_record())
        throw EffectRuntimeError("schema_violation", "'" + d.name + "' needs a record value");
      for (auto& [key, ev] : v.as_record()) {
        if (!is_entity_key(key))
          throw EffectRuntimeError("schema_violation",
                                   "bad entity key '" + key + "' in '" + d.name + "'");
        conform_value(schema, {&d, SchemaNode::View::Entity}, ev, doc_root);
      }
      return;
    }
    if (node.view == SchemaNode::View::Whole && d.kind == AttrKind::List) {
      if (!v.is_list())
        throw EffectRuntimeError("schema_violation", "'" + d.name + "' needs a list value");
      for (auto& ev : v.as_list())
        conform_value(schema, {&d, SchemaNode::View::Element}, ev, doc_root);
      return;
    }
    switch (d.value_kind) {
      case ValueKind::Text:
        if (!v.is_text())
          throw EffectRuntimeError("schema_violation", "'" + d.name + "' needs text");
        return;
      case ValueKind::Boolean:
        if (!v.is_boolean())
          throw EffectRuntimeError("schema_violation", "'" + d.name + "' needs a boolean");
        return;
      case ValueKind::Integer:
        if (!v.is_integer())
          throw EffectRuntimeError("schema_violation", "'" + d.name + "' needs an integer");
        return;
      case ValueKind::Decimal: {
        if (v.is_integer()) v = Value::decimal(Decimal(v.as_integer(), 0));
        if (!v.is_decimal())
          throw EffectRuntimeError("schema_violation", "'" + d.name + "' needs a decimal");
        auto rescaled = v.as_decimal().rescaled(d.scale);
        if (!rescaled)
          throw EffectRuntimeError("decimal_scale_mismatch",
                                   "'" + v.as_decimal().str() + "' does not fit scale " +
                                       std::to_string(d.scale) + " of '" + d.name + "'");
        v = Value::decimal(*rescaled);
        return;
      }
      case ValueKind::Reference: {
        if (!v.is_text())
          throw EffectRuntimeError("schema_violation", "'" + d.name + "' needs an entity key");
        if (doc_root) {
          auto it = doc_root->as_record().find(d.ref_target);
          if (it == doc_root->as_record().end() || !it->second.is_record() ||
              !it->second.as_record().count(v.as_text()))
            throw EffectRuntimeError("dangling_reference", "'" + v.as_text() + "' not found in '" +
                                                               d.ref_target + "'");
        }
        return;
      }
    }
  }

 private:
  static Value decode_value(const AttributeSchema& schema, SchemaNode node, const json& j,
                            const std::string& where) {
    const AttributeDef& d = *node.def;
    bool struct_like =
        (node.view == SchemaNode::View::Whole && d.kind == AttrKind::Record && !d.open) ||
        (node.view == SchemaNode::View::Entity) ||
        (node.view == SchemaNode::View::Element && d.list_of_records());
    if (struct_like) {
      if (!j.is_object()) throw SchemaViolation("'" + where + "' must be an object");
      Value::Record r;
      for (const auto& f : d.fields) {
        auto it = j.find(f.name);
        if (it == j.end()) throw SchemaViolation("'" + where + "' missing field '" + f.name + "'");
        r.emplace(f.name,
                  decode_value(schema, {&f, SchemaNode::View::Whole}, *it, where + "." + f.name));
      }
      if (j.size() != d.fields.size())
        for (auto it = j.begin(); it != j.end(); ++it) {
          bool declared = false;
          for (const auto& f : d.fields) declared = declared || f.name == it.key();
          if (!declared)
            throw SchemaViolation("'" + where + "' has undeclared field '" + it.key() + "'");
        }
      return Value::record(std::move(r));
    }
    if (node.view == SchemaNode::View::Whole && d.kind == AttrKind::Record && d.open) {
      if (!j.is_object()) throw SchemaViolation("'" + where + "' must be an object");
      Value::Record r;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!is_entity_key(it.key()))
          throw SchemaViolation("bad entity key '" + it.key() + "' in '" + where + "'");
        r.emplace(it.key(), decode_value(schema, {&d, SchemaNode::View::Entity}, *it,
                                         where + "." + it.key()));
      }
      return Value::record(std::move(r));
    }
    if (node.view == SchemaNode::View::Whole && d.kind == AttrKind::List) {
      if (!j.is_array()) throw SchemaViolation("'" + where + "' must be an array");
      Value::List list;
      size_t i = 0;
      for (const auto& ej : j)
        list.push_back(decode_value(schema, {&d, SchemaNode::View::Element}, ej,
                                    where + "." + std::to_string(i++)));
      return Value::list(std::move(list));
    }
    if (j.is_number_float())
      throw SchemaViolation("floating-point number at '" + where + "'");
    switch (d.value_kind) {
      case ValueKind::Text:
        if (!j.is_string()) throw SchemaViolation("'" + where + "' must be text");
        return Value::text(j.get<std::string>());
      case ValueKind::Reference:
        if (!j.is_string()) throw SchemaViolation("'" + where + "' must be an entity key");
        return Value::text(j.get<std::string>());
      case ValueKind::Boolean:
        if (!j.is_boolean()) throw SchemaViolation("'" + where + "' must be a boolean");
        return Value::boolean(j.get<bool>());
      case ValueKind::Integer: {
        if (j.is_number_integer()) return Value::integer(BigInt(j.get<int64_t>()));
        if (j.is_string()) {
          BigInt n;
          if (parse_bigint(j.get<std::string>(), n)) return Value::integer(std::move(n));
        }
        throw SchemaViolation("'" + where + "' must be an integer");
      }
      case ValueKind::Decimal: {
        std::optional<Decimal> dec;
        if (j.is_number_integer())
          dec = Decimal(BigInt(j.get<int64_t>()), 0);
        else if (j.is_string())
          dec = Decimal::parse(j.get<std::string>());
        if (!dec) throw SchemaViolation("'" + where + "' must be a decimal");
        auto rescaled = dec->rescaled(d.scale);
        if (!rescaled)
          throw SchemaViolation("'" + where + "' does not fit scale " + std::to_string(d.scale));
        return Value::decimal(*rescaled);
      }
    }
    throw SchemaViolation("'" + where + "' has unsupported kind");
  }

  void check_references() const {
    for (const auto& a : schema_->attributes) {
      try {
        auto it = root_.as_record().find(a.name);
        Value copy = it->second;
        conform_value(*schema_, {&a, SchemaNode::View::Whole}, copy, &root_);
      } catch (const EffectRuntimeError& e) {
        throw SchemaViolation(std::string(e.what()));
      }
    }
  }

  Value* walk_parent(const Path& path, bool create = false) {
    Value* cur = &root_;
    for (size_t i = 0; i + 1 < path.size(); ++i) {
      const PathSeg& seg = path[i];
      if (seg.tag == PathSeg::Tag::Index) {
        if (!cur->is_list() || seg.index >= cur->as_list().size())
          throw EffectRuntimeError("unknown_path", "nothing at '" + path_str(path) + "'");
        cur = &cur->as_list()[seg.index];
      } else {
        if (!cur->is_record())
          throw EffectRuntimeError("unknown_path", "nothing at '" + path_str(path) + "'");
        auto it = cur->as_record().find(seg.text);
        if (it == cur->as_record().end()) {
          if (!create)
            throw EffectRuntimeError("unknown_path", "nothing at '" + path_str(path) + "'");
          it = cur->as_record().emplace(seg.text, Value::record({})).first;
        }
        cur = &it->second;
      }
    }
    return cur;
  }

  static size_t count_entries(const Value& v) {
    if (v.is_list()) {
      size_t n = 0;
      for (const auto& e : v.as_list()) n += count_entries(e);
      return n;
    }
    if (v.is_record()) {
      size_t n = 0;
      for (const auto& [k, e] : v.as_record()) {
        (void)k;
        n += count_entries(e);
      }
      return n;
    }
    return 1;
  }

  void reset_cache() const {
    cache_.clear();
    for (const auto& a : schema_->attributes) cache_[a.name] = std::nullopt;
  }

  void invalidate(const std::string& attr) { cache_[attr] = std::nullopt; }

  void cache_entry(const std::string& attr) const {
    auto& slot = cache_[attr];
    if (slot) return;
    const AttributeDef* d = schema_->find(attr);
    std::string text;
    if (d->volatile_excluded) {
      slot = std::move(text);
      return;
    }
    text.push_back('"');
    json_escape_to(text, attr);
    text += "\":";
    detail::strip_serialize(*schema_, {d, SchemaNode::View::Whole}, root_.as_record().at(attr), text);
    slot = std::move(text);
  }

  SchemaPtr schema_;
  Value root_ = Value::record({});
  mutable std::map<std::string, std::optional<std::string>> cache_;
  mutable size_t last_size_ = 256;
};

/// Byte-level equality of the comparable form. Documents from different
/// schemas cannot be compared.
inline bool state_equal(const StateDoc& a, const StateDoc& b) {
  if (a.schema().id != b.schema().id)
    throw SchemaMismatch("cannot compare states of '" + a.schema().id + "' and '" +
                         b.schema().id + "'");
  return a.comparable_text() == b.comparable_text();
}

struct Snapshot {
  std::string doc_hash;  // hash of the comparable form
  std::string payload;   // full canonical text, volatile included
};

inline Snapshot make_snapshot(const StateDoc& doc) {
  return Snapshot{doc.doc_hash(), doc.canonical_text()};
}

inline StateDoc restore_snapshot(SchemaPtr schema, const std::string& payload) {
  return StateDoc::decode_text(std::move(schema), payload);
}

// ---------------------------------------------------------------------------
// Structural diff

/// One edit between two documents of the same schema. Scalar changes are
/// reported leaf by leaf; open records gain and lose whole entities; lists
/// of different lengths are replaced wholesale.
struct DiffOp {
  enum class Kind { Set, AddEntity, RemoveEntity, ReplaceList };
  Kind kind = Kind::Set;
  std::string path;
  std::optional<Value> value;

  bool operator==(const DiffOp&) const = default;
};

namespace detail {

inline void diff_walk(const AttributeSchema& schema, SchemaNode node, const std::string& path,
                      const Value& va, const Value& vb, std::vector<DiffOp>& out) {
  const AttributeDef& d = *node.def;
  if (d.volatile_excluded) return;
  bool struct_like =
      (node.view == SchemaNode::View::Whole && d.kind == AttrKind::Record && !d.open) ||
      (node.view == SchemaNode::View::Entity) ||
      (node.view == SchemaNode::View::Element && d.list_of_records());
  if (struct_like) {
    for (const auto& f : d.fields) {
      auto ia = va.as_record().find(f.name);
      auto ib = vb.as_record().find(f.name);
      if (ia == va.as_record().end() || ib == vb.as_record().end()) continue;
      diff_walk(schema, {&f, SchemaNode::View::Whole}, path + "." + f.name, ia->second, ib->second,
                out);
    }
    return;
  }
  if (node.view == SchemaNode::View::Whole && d.kind == AttrKind::Record && d.open) {
    auto ia = va.as_record().begin();
    auto ib = vb.as_record().begin();
    while (ia != va.as_record().end() || ib != vb.as_record().end()) {
      if (ib == vb.as_record().end() || (ia != va.as_record().end() && ia->first < ib->first)) {
        out.push_back({DiffOp::Kind::RemoveEntity, path + "." + ia->first, std::nullopt});
        ++ia;
      } else if (ia == va.as_record().end() || ib->first < ia->first) {
        out.push_back({DiffOp::Kind::AddEntity, path + "." + ib->first, ib->second});
        ++ib;
      } else {
        diff_walk(schema, {&d, SchemaNode::View::Entity}, path + "." + ia->first, ia->second,
                  ib->second, out);
        ++ia;
        ++ib;
      }
    }
    return;
  }
  if (node.view == SchemaNode::View::Whole && d.kind == AttrKind::List) {
    if (va.as_list().size() != vb.as_list().size()) {
      out.push_back({DiffOp::Kind::ReplaceList, path, vb});
      return;
    }
    for (size_t i = 0; i < va.as_list().size(); ++i)
      diff_walk(schema, {&d, SchemaNode::View::Element}, path + "." + std::to_string(i),
                va.as_list()[i], vb.as_list()[i], out);
    return;
  }
  if (!(va == vb)) out.push_back({DiffOp::Kind::Set, path, vb});
}

}  // namespace detail

/// Edits that turn `a` into `b`, up to volatile attributes.
inline std::vector<DiffOp> diff_docs(const StateDoc& a, const StateDoc& b) {
  if (a.schema().id != b.schema().id)
    throw SchemaMismatch("cannot diff states of '" + a.schema().id + "' and '" + b.schema().id +
                         "'");
  std::vector<DiffOp> out;
  for (const auto& attr : a.schema().attributes) {
    const Value* va = a.root().as_record().count(attr.name) ? &a.root().as_record().at(attr.name) : nullptr;
    const Value* vb = b.root().as_record().count(attr.name) ? &b.root().as_record().at(attr.name) : nullptr;
    if (va && vb)
      detail::diff_walk(a.schema(), {&attr, SchemaNode::View::Whole}, attr.name, *va, *vb, out);
  }
  return out;
}

inline StateDoc apply_diff(StateDoc doc, const std::vector<DiffOp>& ops) {
  for (const auto& op : ops) {
    Path p = parse_path(op.path);
    switch (op.kind) {
      case DiffOp::Kind::Set:
      case DiffOp::Kind::AddEntity:
      case DiffOp::Kind::ReplaceList: doc.raw_set(p, *op.value); break;
      case DiffOp::Kind::RemoveEntity: doc.raw_remove(p); break;
    }
  }
  doc.revalidate();
  return doc;
}

}  // namespace envsmith
