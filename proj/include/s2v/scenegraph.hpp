/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "s2v/core.hpp"
#include "s2v/jsonio.hpp"
#include "s2v/pose.hpp"

namespace s2v {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

using AttrValue = std::variant<bool, double, std::string, Vec3>;

struct Entity {
  std::string id;          // "<class_name>_<ordinal>"
  std::string class_name;
  std::map<std::string, AttrValue> attributes;
};

struct RelationInstance {
  std::string subject;
  std::string predicate;
  std::string object;
  std::optional<int> frame;  // absent = holds for all frames

  friend bool operator==(const RelationInstance& a,
                         const RelationInstance& b) = default;
};

enum class PayloadKind { kBBox, kPose, kMaskRef };

inline const char* payload_kind_name(PayloadKind kind) {
  switch (kind) {
    case PayloadKind::kBBox: return "bbox";
    case PayloadKind::kPose: return "pose";
    case PayloadKind::kMaskRef: return "mask_ref";
  }
  return "?";
}

using PayloadData = std::variant<BBox, SkeletonPose, std::string>;

struct Payload {
  std::string entity;
  PayloadKind kind = PayloadKind::kBBox;
  PayloadData data;
};

struct FramePayloads {
  int frame = 0;
  std::vector<Payload> payloads;
};

struct GraphMeta {
  std::string version = "1.0";
  std::string source_id;
  int frame_count = 0;
  bool reverse = false;
};

/// The spatio-temporal scene description: entities with static attributes,
/// (optionally per-frame) relations between them, and per-frame analysis
/// payloads attached through the "has" table. The provenance log records
/// reasoner repairs and user edits.
struct SceneGraph {
  GraphMeta meta;
  std::vector<Entity> entities;
  std::vector<RelationInstance> relations;
  std::vector<FramePayloads> frames;
  std::vector<std::string> provenance;
};

// ---------------------------------------------------------------------------
// Lookup and validation
// ---------------------------------------------------------------------------

inline const Entity* find_entity(const SceneGraph& graph,
                                 const std::string& id) {
  for (const auto& e : graph.entities)
    if (e.id == id) return &e;
  return nullptr;
}

/// Splits "person_12" into ("person", 12). Throws when the id has no
/// numeric ordinal suffix.
inline std::pair<std::string, int> split_entity_id(const std::string& id) {
  auto pos = id.rfind('_');
  if (pos == std::string::npos || pos + 1 >= id.size())
    throw DataError("entity id '" + id + "' lacks an ordinal suffix");
  int ordinal = 0;
  for (std::size_t i = pos + 1; i < id.size(); ++i) {
    char c = id[i];
    if (c < '0' || c > '9')
      throw DataError("entity id '" + id + "' lacks a numeric ordinal");
    ordinal = ordinal * 10 + (c - '0');
  }
  return {id.substr(0, pos), ordinal};
}

inline std::string make_entity_id(const std::string& class_name, int ordinal) {
  return class_name + "_" + std::to_string(ordinal);
}

/// Checks the structural invariants: unique entity ids, class-prefixed ids,
/// referenced endpoints exist, frame indices in range, and at most one
/// payload per (entity, kind, frame).
inline void validate_structure(const SceneGraph& graph) {
  std::set<std::string> ids;
  for (const auto& e : graph.entities) {
    if (e.id.empty()) throw DataError("entity with empty id");
    if (!ids.insert(e.id).second) throw DataError("duplicate id " + e.id);
    auto [prefix, ordinal] = split_entity_id(e.id);
    (void)ordinal;
    if (prefix != e.class_name)
      throw DataError("entity id '" + e.id + "' does not match class '" +
                      e.class_name + "'");
  }
  for (const auto& r : graph.relations) {
    if (r.predicate.empty()) throw DataError("relation with empty predicate");
    if (ids.find(r.subject) == ids.end())
      throw DataError("relation references unknown entity " + r.subject);
    if (ids.find(r.object) == ids.end())
      throw DataError("relation references unknown entity " + r.object);
    if (r.frame && (*r.frame < 0 || *r.frame >= graph.meta.frame_count))
      throw DataError("relation frame out of range for " + r.subject + " " +
                      r.predicate + " " + r.object);
  }
  std::set<int> seen_frames;
  std::set<std::tuple<std::string, int, int>> payload_keys;
  for (const auto& fp : graph.frames) {
    if (fp.frame < 0 || fp.frame >= graph.meta.frame_count)
      throw DataError("payload frame " + std::to_string(fp.frame) +
                      " out of range");
    if (!seen_frames.insert(fp.frame).second)
      throw DataError("duplicate payload frame " + std::to_string(fp.frame));
    for (const auto& p : fp.payloads) {
      if (ids.find(p.entity) == ids.end())
        throw DataError("payload references unknown entity " + p.entity);
      if (!payload_keys
               .insert({p.entity, static_cast<int>(p.kind), fp.frame})
               .second)
        throw DataError("duplicate payload for " + p.entity + "/" +
                        payload_kind_name(p.kind) + " at frame " +
                        std::to_string(fp.frame));
    }
  }
}

// ---------------------------------------------------------------------------
// Canonical form
// ---------------------------------------------------------------------------

inline std::tuple<int, int, const std::string&, const std::string&,
                  const std::string&>
relation_sort_key(const RelationInstance& r) {
  // Frameless relations sort before framed ones.
  return {r.frame ? 1 : 0, r.frame.value_or(0), r.subject, r.predicate,
          r.object};
}

/// Sorted copy: entities by id, relations by (frame-presence, frame, subject,
/// predicate, object) with exact duplicates removed, payload frames ascending
/// and payload entries by (entity, kind). Provenance order is preserved.
inline SceneGraph canonical(const SceneGraph& graph) {
  SceneGraph out = graph;
  std::sort(out.entities.begin(), out.entities.end(),
            [](const Entity& a, const Entity& b) { return a.id < b.id; });
  std::sort(out.relations.begin(), out.relations.end(),
            [](const RelationInstance& a, const RelationInstance& b) {
              return relation_sort_key(a) < relation_sort_key(b);
            });
  out.relations.erase(std::unique(out.relations.begin(), out.relations.end()),
                      out.relations.end());
  std::sort(out.frames.begin(), out.frames.end(),
            [](const FramePayloads& a, const FramePayloads& b) {
              return a.frame < b.frame;
            });
  for (auto& fp : out.frames) {
    std::sort(fp.payloads.begin(), fp.payloads.end(),
              [](const Payload& a, const Payload& b) {
                return std::tie(a.entity, a.kind) < std::tie(b.entity, b.kind);
              });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

inline void require_finite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw DataError("non-finite number in " + where);
}

inline Json attr_value_to_json(const AttrValue& value,
                               const std::string& where) {
  if (std::holds_alternative<bool>(value)) return std::get<bool>(value);
  if (std::holds_alternative<double>(value)) {
    require_finite(std::get<double>(value), where);
    return std::get<double>(value);
  }
  if (std::holds_alternative<std::string>(value))
    return std::get<std::string>(value);
  const Vec3& v = std::get<Vec3>(value);
  if (!is_finite(v)) throw DataError("non-finite number in " + where);
  return vec3_to_json(v);
}

inline AttrValue attr_value_from_json(const Json& v, const std::string& where) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array() && v.size() == 3) return parse_vec3(v, where);
  throw ParseError(where + ": attribute values must be scalar or vector3");
}

inline Json payload_data_to_json(const Payload& p, const std::string& where) {
  switch (p.kind) {
    case PayloadKind::kBBox: {
      const BBox& b = std::get<BBox>(p.data);
      for (double v : {b.x_min, b.y_min, b.x_max, b.y_max})
        require_finite(v, where);
      return Json::array({b.x_min, b.y_min, b.x_max, b.y_max});
    }
    case PayloadKind::kPose:
      return pose_to_json(std::get<SkeletonPose>(p.data));
    case PayloadKind::kMaskRef:
      return std::get<std::string>(p.data);
  }
  throw DataError("unknown payload kind");
}

}  // namespace detail

/// Canonical text form of the graph: lexicographic object keys, sorted
/// entities/relations/payloads, shortest round-tripping decimals, single
/// trailing newline. Serializing twice yields byte-identical output.
inline std::string serialize(const SceneGraph& graph) {
  validate_structure(graph);
  const SceneGraph g = canonical(graph);
  Json root;
  root["version"] = g.meta.version;
  root["meta"] = Json{{"source_id", g.meta.source_id},
                      {"frame_count", g.meta.frame_count},
                      {"reverse", g.meta.reverse}};
  Json entities = Json::array();
  for (const auto& e : g.entities) {
    Json attrs = Json::object();
    for (const auto& [name, value] : e.attributes)
      attrs[name] =
          detail::attr_value_to_json(value, "entity " + e.id + "." + name);
    entities.push_back(
        Json{{"id", e.id}, {"class", e.class_name}, {"attributes", attrs}});
  }
  root["entities"] = entities;
  Json relations = Json::array();
  for (const auto& r : g.relations) {
    Json rel{{"subject", r.subject},
             {"predicate", r.predicate},
             {"object", r.object}};
    if (r.frame) rel["frame"] = *r.frame;
    relations.push_back(rel);
  }
  root["relations"] = relations;
  Json has = Json::array();
  for (const auto& fp : g.frames) {
    Json payloads = Json::array();
    for (const auto& p : fp.payloads) {
      const std::string where = "payload " + p.entity + "/" +
                                payload_kind_name(p.kind) + "@" +
                                std::to_string(fp.frame);
      payloads.push_back(Json{{"entity", p.entity},
                              {"kind", payload_kind_name(p.kind)},
                              {"data", detail::payload_data_to_json(p, where)}});
    }
    has.push_back(Json{{"frame", fp.frame}, {"payloads", payloads}});
  }
  root["has"] = has;
  root["provenance"] = g.provenance;
  return root.dump() + "\n";
}

inline SceneGraph deserialize(const std::string& text) {
  Json root = parse_json(text, "scene graph");
  SceneGraph g;
  g.meta.version = require_string(root, "version", "graph");
  const Json& meta = require_field(root, "meta", "graph");
  g.meta.source_id = require_string(meta, "source_id", "graph.meta");
  g.meta.frame_count = require_int(meta, "frame_count", "graph.meta");
  if (meta.contains("reverse")) {
    if (!meta["reverse"].is_boolean())
      throw ParseError("graph.meta: reverse must be boolean");
    g.meta.reverse = meta["reverse"].get<bool>();
  }
  for (const Json& e : require_array(root, "entities", "graph")) {
    Entity entity;
    entity.id = require_string(e, "id", "entity");
    entity.class_name = require_string(e, "class", "entity " + entity.id);
    if (e.contains("attributes")) {
      const Json& attrs = e["attributes"];
      if (!attrs.is_object())
        throw ParseError("entity " + entity.id + ": attributes must be a map");
      for (auto it = attrs.begin(); it != attrs.end(); ++it)
        entity.attributes[it.key()] = detail::attr_value_from_json(
            it.value(), "entity " + entity.id + "." + it.key());
    }
    g.entities.push_back(std::move(entity));
  }
  for (const Json& r : require_array(root, "relations", "graph")) {
    RelationInstance rel;
    rel.subject = require_string(r, "subject", "relation");
    rel.predicate = require_string(r, "predicate", "relation");
    rel.object = require_string(r, "object", "relation");
    if (r.contains("frame")) rel.frame = require_int(r, "frame", "relation");
    g.relations.push_back(std::move(rel));
  }
  if (root.contains("has")) {
    for (const Json& f : require_array(root, "has", "graph")) {
      FramePayloads fp;
      fp.frame = require_int(f, "frame", "has");
      for (const Json& p : require_array(f, "payloads", "has")) {
        Payload payload;
        payload.entity = require_string(p, "entity", "payload");
        const std::string kind = require_string(p, "kind", "payload");
        const std::string where =
            "payload " + payload.entity + "@" + std::to_string(fp.frame);
        const Json& data = require_field(p, "data", where);
        if (kind == "bbox") {
          payload.kind = PayloadKind::kBBox;
          if (!data.is_array() || data.size() != 4)
            throw ParseError(where + ": bbox data must be [x0,y0,x1,y1]");
          payload.data = BBox{data[0].get<double>(), data[1].get<double>(),
                              data[2].get<double>(), data[3].get<double>()};
        } else if (kind == "pose") {
          payload.kind = PayloadKind::kPose;
          payload.data = pose_from_json(data, where);
        } else if (kind == "mask_ref") {
          payload.kind = PayloadKind::kMaskRef;
          if (!data.is_string())
            throw ParseError(where + ": mask_ref data must be a path string");
          payload.data = data.get<std::string>();
        } else {
          throw ParseError(where + ": unknown payload kind '" + kind + "'");
        }
        fp.payloads.push_back(std::move(payload));
      }
      g.frames.push_back(std::move(fp));
    }
  }
  if (root.contains("provenance")) {
    for (const Json& s : require_array(root, "provenance", "graph")) {
      if (!s.is_string())
        throw ParseError("graph: provenance entries must be strings");
      g.provenance.push_back(s.get<std::string>());
    }
  }
  validate_structure(g);
  return g;
}

/// Value-level graph equality via the canonical text form.
inline bool graphs_equal(const SceneGraph& a, const SceneGraph& b) {
  return serialize(a) == serialize(b);
}

// ---------------------------------------------------------------------------
// Edits
// ---------------------------------------------------------------------------

struct SetAttribute {
  std::string entity;
  std::string name;
  AttrValue value;
};

struct RemoveEntity {
  std::string entity;
};

struct SetReverse {
  bool value = false;
};

struct Relabel {
  std::string entity;
  std::string new_class;
};

using Edit = std::variant<SetAttribute, RemoveEntity, SetReverse, Relabel>;

namespace detail {

inline std::string attr_value_to_text(const AttrValue& value) {
  return attr_value_to_json(value, "edit").dump();
}

}  // namespace detail

/// Applies one edit and returns the new graph; the input is not modified.
/// One provenance entry is appended per edit.
inline SceneGraph apply_edit(const SceneGraph& graph, const Edit& edit) {
  SceneGraph out = graph;
  if (const auto* set = std::get_if<SetAttribute>(&edit)) {
    Entity* entity = nullptr;
    for (auto& e : out.entities)
      if (e.id == set->entity) entity = &e;
    if (entity == nullptr)
      throw DataError("edit targets unknown entity " + set->entity);
    entity->attributes[set->name] = set->value;
    out.provenance.push_back("edit: set " + set->entity + "." + set->name +
                             " = " + detail::attr_value_to_text(set->value));
  } else if (const auto* rem = std::get_if<RemoveEntity>(&edit)) {
    if (find_entity(out, rem->entity) == nullptr)
      throw DataError("edit targets unknown entity " + rem->entity);
    std::erase_if(out.entities,
                  [&](const Entity& e) { return e.id == rem->entity; });
    std::erase_if(out.relations, [&](const RelationInstance& r) {
      return r.subject == rem->entity || r.object == rem->entity;
    });
    for (auto& fp : out.frames)
      std::erase_if(fp.payloads,
                    [&](const Payload& p) { return p.entity == rem->entity; });
    std::erase_if(out.frames,
                  [](const FramePayloads& fp) { return fp.payloads.empty(); });
    out.provenance.push_back("edit: removed " + rem->entity);
  } else if (const auto* rev = std::get_if<SetReverse>(&edit)) {
    out.meta.reverse = rev->value;
    out.provenance.push_back(std::string("edit: set reverse = ") +
                             (rev->value ? "true" : "false"));
  } else {
    const auto& relabel = std::get<Relabel>(edit);
    Entity* entity = nullptr;
    for (auto& e : out.entities)
      if (e.id == relabel.entity) entity = &e;
    if (entity == nullptr)
      throw DataError("edit targets unknown entity " + relabel.entity);
    auto [old_class, ordinal] = split_entity_id(relabel.entity);
    (void)old_class;
    const std::string new_id = make_entity_id(relabel.new_class, ordinal);
    if (new_id != relabel.entity && find_entity(out, new_id) != nullptr)
      throw DataError("relabel collides with existing id " + new_id);
    entity->id = new_id;
    entity->class_name = relabel.new_class;
    for (auto& r : out.relations) {
      if (r.subject == relabel.entity) r.subject = new_id;
      if (r.object == relabel.entity) r.object = new_id;
    }
    for (auto& fp : out.frames)
      for (auto& p : fp.payloads)
        if (p.entity == relabel.entity) p.entity = new_id;
    out.provenance.push_back("edit: relabeled " + relabel.entity + " -> " +
                             new_id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Query
// ---------------------------------------------------------------------------

struct RelationPattern {
  std::optional<std::string> subject;
  std::optional<std::string> predicate;
  std::optional<std::string> object;
  std::optional<int> frame;  // matches relations at that frame or frameless
};

/// All relations matching every bound field, in canonical order. A bound
/// frame also matches frameless relations (they hold on every frame).
inline std::vector<RelationInstance> query(const SceneGraph& graph,
                                           const RelationPattern& pattern) {
  std::vector<RelationInstance> out;
  for (const auto& r : graph.relations) {
    if (pattern.subject && r.subject != *pattern.subject) continue;
    if (pattern.predicate && r.predicate != *pattern.predicate) continue;
    if (pattern.object && r.object != *pattern.object) continue;
    if (pattern.frame && r.frame && *r.frame != *pattern.frame) continue;
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(),
            [](const RelationInstance& a, const RelationInstance& b) {
              return relation_sort_key(a) < relation_sort_key(b);
            });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace s2v
