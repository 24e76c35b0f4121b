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
#include <vector>

#include "s2v/jsonio.hpp"
#include "s2v/scenegraph.hpp"

namespace s2v {

// ---------------------------------------------------------------------------
// Schema types
// ---------------------------------------------------------------------------

struct ClassDef {
  std::string name;
  std::optional<std::string> parent;
};

enum class ValueType { kString, kNumber, kBoolean, kVector3, kEnum };

inline const char* value_type_name(ValueType t) {
  switch (t) {
    case ValueType::kString: return "string";
    case ValueType::kNumber: return "number";
    case ValueType::kBoolean: return "boolean";
    case ValueType::kVector3: return "vector3";
    case ValueType::kEnum: return "enum";
  }
  return "?";
}

struct AttributeDef {
  std::string name;
  ValueType value_type = ValueType::kString;
  std::vector<std::string> applies_to;
  std::vector<std::string> enum_values;  // nonempty iff value_type == kEnum
};

struct RelationDef {
  std::string name;
  std::vector<std::string> domain;
  std::vector<std::string> range;
  bool transitive = false;
  std::optional<std::string> inverse_of;  // name == own name marks symmetric
};

/// The shared vocabulary every module validates against. Immutable after
/// load; safe for concurrent reads.
struct OntologySchema {
  std::string version;
  std::vector<ClassDef> classes;
  std::vector<AttributeDef> attribute_defs;
  std::vector<RelationDef> relation_defs;

  const ClassDef* find_class(const std::string& name) const {
    for (const auto& c : classes)
      if (c.name == name) return &c;
    return nullptr;
  }
  const AttributeDef* find_attribute(const std::string& name) const {
    for (const auto& a : attribute_defs)
      if (a.name == name) return &a;
    return nullptr;
  }
  const RelationDef* find_relation(const std::string& name) const {
    for (const auto& r : relation_defs)
      if (r.name == name) return &r;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

namespace detail {

inline ValueType parse_value_type(const std::string& name) {
  if (name == "string") return ValueType::kString;
  if (name == "number") return ValueType::kNumber;
  if (name == "boolean") return ValueType::kBoolean;
  if (name == "vector3") return ValueType::kVector3;
  if (name == "enum") return ValueType::kEnum;
  throw ParseError("unknown value_type '" + name + "'");
}

inline std::vector<std::string> parse_name_list(const Json& v,
                                                const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array of names");
  std::vector<std::string> out;
  for (const Json& item : v) {
    if (!item.is_string()) throw ParseError(where + ": names must be strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

inline void check_schema(const OntologySchema& schema) {
  std::set<std::string> class_names;
  for (const auto& c : schema.classes) {
    if (c.name.empty()) throw SchemaError("class with empty name");
    if (!class_names.insert(c.name).second)
      throw SchemaError("duplicate class '" + c.name + "'");
    if (c.parent && *c.parent == c.name)
      throw SchemaError("cycle: class '" + c.name + "' is its own parent");
  }
  for (const auto& c : schema.classes) {
    if (c.parent && class_names.find(*c.parent) == class_names.end())
      throw SchemaError("unknown class '" + *c.parent + "' (parent of '" +
                        c.name + "')");
  }
  // Parent chains over unique, non-self parents can only fail via a loop.
  for (const auto& c : schema.classes) {
    std::set<std::string> seen{c.name};
    const ClassDef* cur = &c;
    while (cur->parent) {
      if (!seen.insert(*cur->parent).second)
        throw SchemaError("cycle in class hierarchy at '" + *cur->parent +
                          "'");
      cur = schema.find_class(*cur->parent);
    }
  }
  std::set<std::string> attr_names;
  for (const auto& a : schema.attribute_defs) {
    if (!attr_names.insert(a.name).second)
      throw SchemaError("duplicate attribute '" + a.name + "'");
    if (a.applies_to.empty())
      throw SchemaError("attribute '" + a.name + "' applies to no class");
    for (const auto& cls : a.applies_to)
      if (class_names.find(cls) == class_names.end())
        throw SchemaError("unknown class '" + cls + "' in attribute '" +
                          a.name + "'");
    if (a.value_type == ValueType::kEnum && a.enum_values.empty())
      throw SchemaError("enum attribute '" + a.name + "' has no values");
  }
  std::set<std::string> rel_names;
  for (const auto& r : schema.relation_defs) {
    if (!rel_names.insert(r.name).second)
      throw SchemaError("duplicate relation '" + r.name + "'");
    if (r.domain.empty() || r.range.empty())
      throw SchemaError("relation '" + r.name + "' needs domain and range");
    for (const auto& cls : r.domain)
      if (class_names.find(cls) == class_names.end())
        throw SchemaError("unknown class '" + cls + "' in domain of '" +
                          r.name + "'");
    for (const auto& cls : r.range)
      if (class_names.find(cls) == class_names.end())
        throw SchemaError("unknown class '" + cls + "' in range of '" +
                          r.name + "'");
  }
  for (const auto& r : schema.relation_defs) {
    if (!r.inverse_of) continue;
    const RelationDef* inv = schema.find_relation(*r.inverse_of);
    if (inv == nullptr)
      throw SchemaError("unknown relation '" + *r.inverse_of +
                        "' (inverse of '" + r.name + "')");
    if (!inv->inverse_of || *inv->inverse_of != r.name)
      throw SchemaError("asymmetric inverse declaration between '" + r.name +
                        "' and '" + *r.inverse_of + "'");
  }
}

}  // namespace detail

/// Parses and checks an ontology document: {version, classes, attributes,
/// relations}. Throws ParseError for malformed text and SchemaError for
/// cycles, dangling references or asymmetric inverses.
inline OntologySchema load_ontology(const std::string& text) {
  Json root = parse_json(text, "ontology");
  OntologySchema schema;
  schema.version = require_string(root, "version", "ontology");
  for (const Json& c : require_array(root, "classes", "ontology")) {
    ClassDef def;
    def.name = require_string(c, "name", "class");
    if (c.contains("parent"))
      def.parent = require_string(c, "parent", "class " + def.name);
    schema.classes.push_back(std::move(def));
  }
  if (root.contains("attributes")) {
    for (const Json& a : require_array(root, "attributes", "ontology")) {
      AttributeDef def;
      def.name = require_string(a, "name", "attribute");
      def.value_type = detail::parse_value_type(
          require_string(a, "value_type", "attribute " + def.name));
      def.applies_to = detail::parse_name_list(
          require_field(a, "applies_to", "attribute " + def.name),
          "attribute " + def.name + ".applies_to");
      if (a.contains("values"))
        def.enum_values = detail::parse_name_list(
            a["values"], "attribute " + def.name + ".values");
      schema.attribute_defs.push_back(std::move(def));
    }
  }
  if (root.contains("relations")) {
    for (const Json& r : require_array(root, "relations", "ontology")) {
      RelationDef def;
      def.name = require_string(r, "name", "relation");
      def.domain =
          detail::parse_name_list(require_field(r, "domain", "relation " + def.name),
                                  "relation " + def.name + ".domain");
      def.range =
          detail::parse_name_list(require_field(r, "range", "relation " + def.name),
                                  "relation " + def.name + ".range");
      if (r.contains("transitive")) {
        if (!r["transitive"].is_boolean())
          throw ParseError("relation " + def.name + ": transitive must be boolean");
        def.transitive = r["transitive"].get<bool>();
      }
      if (r.contains("inverse_of"))
        def.inverse_of = require_string(r, "inverse_of", "relation " + def.name);
      schema.relation_defs.push_back(std::move(def));
    }
  }
  detail::check_schema(schema);
  return schema;
}

// ---------------------------------------------------------------------------
// Subclass reachability
// ---------------------------------------------------------------------------

/// True iff `sup` is reachable from `sub` by zero or more parent links.
inline bool is_subclass(const OntologySchema& schema, const std::string& sub,
                        const std::string& sup) {
  if (schema.find_class(sup) == nullptr)
    throw SchemaError("unknown class '" + sup + "'");
  const ClassDef* cur = schema.find_class(sub);
  if (cur == nullptr) throw SchemaError("unknown class '" + sub + "'");
  while (true) {
    if (cur->name == sup) return true;
    if (!cur->parent) return false;
    cur = schema.find_class(*cur->parent);
  }
}

// ---------------------------------------------------------------------------
// Graph validation
// ---------------------------------------------------------------------------

enum class ViolationKind {
  kUnknownClass,
  kUnknownRelation,
  kUnknownAttribute,
  kDomainViolation,
  kRangeViolation,
  kAttributeTypeMismatch,
};

inline const char* violation_kind_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kUnknownClass: return "unknown-class";
    case ViolationKind::kUnknownRelation: return "unknown-relation";
    case ViolationKind::kUnknownAttribute: return "unknown-attribute";
    case ViolationKind::kDomainViolation: return "domain-violation";
    case ViolationKind::kRangeViolation: return "range-violation";
    case ViolationKind::kAttributeTypeMismatch:
      return "attribute-type-mismatch";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  std::string subject;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool valid = true;
};

/// The "has" predicate is built in: payload attachment edges are exempt from
/// vocabulary and domain/range checking.
inline constexpr const char* kHasPredicate = "has";

namespace detail {

inline bool value_matches_type(const AttrValue& value, const AttributeDef& def) {
  switch (def.value_type) {
    case ValueType::kString:
      return std::holds_alternative<std::string>(value);
    case ValueType::kNumber:
      return std::holds_alternative<double>(value);
    case ValueType::kBoolean:
      return std::holds_alternative<bool>(value);
    case ValueType::kVector3:
      return std::holds_alternative<Vec3>(value);
    case ValueType::kEnum:
      return std::holds_alternative<std::string>(value) &&
             std::find(def.enum_values.begin(), def.enum_values.end(),
                       std::get<std::string>(value)) != def.enum_values.end();
  }
  return false;
}

inline bool class_in_any(const OntologySchema& schema, const std::string& cls,
                         const std::vector<std::string>& candidates) {
  for (const auto& c : candidates)
    if (is_subclass(schema, cls, c)) return true;
  return false;
}

}  // namespace detail

/// Lists every vocabulary violation in the graph. Violations are data, not
/// errors; the report is valid iff the list is empty.
inline ValidationReport validate_graph(const OntologySchema& schema,
                                       const SceneGraph& graph) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, const std::string& subject,
                 std::string detail) {
    report.violations.push_back({kind, subject, std::move(detail)});
  };
  for (const auto& e : graph.entities) {
    const bool class_known = schema.find_class(e.class_name) != nullptr;
    if (!class_known)
      add(ViolationKind::kUnknownClass, e.id,
          "class '" + e.class_name + "' not declared");
    for (const auto& [name, value] : e.attributes) {
      const AttributeDef* def = schema.find_attribute(name);
      if (def == nullptr) {
        add(ViolationKind::kUnknownAttribute, e.id,
            "attribute '" + name + "' not declared");
        continue;
      }
      if (class_known &&
          !detail::class_in_any(schema, e.class_name, def->applies_to)) {
        add(ViolationKind::kUnknownAttribute, e.id,
            "attribute '" + name + "' not applicable to class '" +
                e.class_name + "'");
        continue;
      }
      if (!detail::value_matches_type(value, *def))
        add(ViolationKind::kAttributeTypeMismatch, e.id,
            "attribute '" + name + "' is not a " +
                value_type_name(def->value_type));
    }
  }
  for (const auto& r : graph.relations) {
    if (r.predicate == kHasPredicate) continue;
    const RelationDef* def = schema.find_relation(r.predicate);
    if (def == nullptr) {
      add(ViolationKind::kUnknownRelation, r.subject,
          "relation '" + r.predicate + "' not declared");
      continue;
    }
    const Entity* subject = find_entity(graph, r.subject);
    const Entity* object = find_entity(graph, r.object);
    if (subject != nullptr &&
        schema.find_class(subject->class_name) != nullptr &&
        !detail::class_in_any(schema, subject->class_name, def->domain))
      add(ViolationKind::kDomainViolation, r.subject,
          "'" + r.subject + "' outside domain of '" + r.predicate + "'");
    if (object != nullptr && schema.find_class(object->class_name) != nullptr &&
        !detail::class_in_any(schema, object->class_name, def->range))
      add(ViolationKind::kRangeViolation, r.subject,
          "'" + r.object + "' outside range of '" + r.predicate + "'");
  }
  report.valid = report.violations.empty();
  return report;
}

// ---------------------------------------------------------------------------
// Reasoner
// ---------------------------------------------------------------------------

namespace detail {

struct Fact {
  std::string subject;
  std::string predicate;
  std::string object;
  std::optional<int> frame;

  auto key() const {
    return std::tuple(frame ? 1 : 0, frame.value_or(0), subject, predicate,
                      object);
  }
  friend bool operator<(const Fact& a, const Fact& b) {
    return a.key() < b.key();
  }
  friend bool operator==(const Fact& a, const Fact& b) {
    return a.key() == b.key();
  }

  std::string describe() const {
    std::string s = predicate + "(" + subject + "," + object + ")";
    if (frame) s += "@" + std::to_string(*frame);
    return s;
  }
};

}  // namespace detail

inline constexpr int kInferIterationCap = 10000;

/// Fixpoint reasoner. Per iteration: relations violating domain/range are
/// removed and logged, then inverse completion and transitive closure add
/// missing consequences. Frameless facts act as premises on every frame;
/// conclusions derived entirely from frameless premises stay frameless.
/// Facts removed by repair are never re-derived.
inline SceneGraph infer(const OntologySchema& schema, const SceneGraph& graph) {
  validate_structure(graph);
  for (const auto& e : graph.entities)
    if (schema.find_class(e.class_name) == nullptr)
      throw SchemaError("unknown class '" + e.class_name + "' on entity " +
                        e.id);
  for (const auto& r : graph.relations)
    if (r.predicate != kHasPredicate &&
        schema.find_relation(r.predicate) == nullptr)
      throw SchemaError("unknown relation '" + r.predicate + "'");

  using detail::Fact;
  std::set<Fact> facts;
  for (const auto& r : graph.relations)
    facts.insert({r.subject, r.predicate, r.object, r.frame});
  std::set<Fact> removed;
  std::vector<std::string> log;

  std::map<std::string, std::string> entity_class;
  for (const auto& e : graph.entities) entity_class[e.id] = e.class_name;

  auto violates = [&](const Fact& f) -> const char* {
    if (f.predicate == kHasPredicate) return nullptr;
    const RelationDef* def = schema.find_relation(f.predicate);
    if (!detail::class_in_any(schema, entity_class.at(f.subject), def->domain))
      return "domain";
    if (!detail::class_in_any(schema, entity_class.at(f.object), def->range))
      return "range";
    return nullptr;
  };
  auto admit = [&](Fact f, const std::string& why) -> bool {
    if (facts.count(f) || removed.count(f)) return false;
    log.push_back("infer: added " + f.describe() + " (" + why + ")");
    facts.insert(std::move(f));
    return true;
  };

  int iterations = 0;
  bool changed = true;
  while (changed) {
    if (++iterations > kInferIterationCap)
      throw SchemaError("reasoner fixpoint not reached within " +
                        std::to_string(kInferIterationCap) + " iterations");
    changed = false;

    // Repair precedes closure so invalid facts never propagate.
    for (auto it = facts.begin(); it != facts.end();) {
      if (const char* why = violates(*it)) {
        log.push_back("infer: removed " + it->describe() + " (" + why + ")");
        removed.insert(*it);
        it = facts.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }

    // Inverse completion, in the scope of the premise.
    for (const Fact& f : std::vector<Fact>(facts.begin(), facts.end())) {
      if (f.predicate == kHasPredicate) continue;
      const RelationDef* def = schema.find_relation(f.predicate);
      if (!def->inverse_of) continue;
      Fact inverse{f.object, *def->inverse_of, f.subject, f.frame};
      if (inverse.frame &&
          facts.count({inverse.subject, inverse.predicate, inverse.object,
                       std::nullopt}))
        continue;  // frameless fact subsumes the framed one
      changed |= admit(std::move(inverse), "inverse of " + f.predicate);
    }

    // Transitive closure per predicate. A frameless edge participates in
    // every frame; a pair reachable through frameless edges alone is added
    // frameless, otherwise at the frame under consideration.
    for (const auto& def : schema.relation_defs) {
      if (!def.transitive) continue;
      std::vector<std::pair<std::string, std::string>> global_edges;
      std::map<int, std::vector<std::pair<std::string, std::string>>> framed;
      for (const Fact& f : facts) {
        if (f.predicate != def.name) continue;
        if (f.frame)
          framed[*f.frame].emplace_back(f.subject, f.object);
        else
          global_edges.emplace_back(f.subject, f.object);
      }
      auto closure = [](const std::vector<std::pair<std::string, std::string>>&
                            edges) {
        std::set<std::pair<std::string, std::string>> reach(edges.begin(),
                                                            edges.end());
        bool grew = true;
        while (grew) {
          grew = false;
          std::vector<std::pair<std::string, std::string>> add;
          for (const auto& [a, b] : reach)
            for (const auto& [c, d] : reach)
              if (b == c && !reach.count({a, d})) add.emplace_back(a, d);
          for (auto& p : add) grew |= reach.insert(std::move(p)).second;
        }
        return reach;
      };
      const auto global_closure = closure(global_edges);
      for (const auto& [a, b] : global_closure)
        changed |= admit({a, def.name, b, std::nullopt},
                         "transitive " + def.name);
      for (const auto& [frame, edges] : framed) {
        auto all = edges;
        all.insert(all.end(), global_edges.begin(), global_edges.end());
        for (const auto& [a, b] : closure(all)) {
          if (global_closure.count({a, b})) continue;  // already frameless
          Fact candidate{a, def.name, b, frame};
          // Present frameless facts subsume framed ones.
          if (facts.count({a, def.name, b, std::nullopt})) continue;
          changed |= admit(std::move(candidate), "transitive " + def.name);
        }
      }
    }
  }

  SceneGraph out = graph;
  out.relations.clear();
  for (const Fact& f : facts)
    out.relations.push_back({f.subject, f.predicate, f.object, f.frame});
  for (auto& entry : log) out.provenance.push_back(std::move(entry));
  return canonical(out);
}

}  // namespace s2v
