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

#include "s2v/hash.hpp"
#include "s2v/jsonio.hpp"
#include "s2v/registry.hpp"

namespace s2v {

// ---------------------------------------------------------------------------
// Request
// ---------------------------------------------------------------------------

enum class OutputKind { kGraphOnly, kObjSequence, kOverlayFrames, kReplaceFrames };

inline const char* output_kind_name(OutputKind kind) {
  switch (kind) {
    case OutputKind::kGraphOnly: return "graph_only";
    case OutputKind::kObjSequence: return "obj_sequence";
    case OutputKind::kOverlayFrames: return "overlay_frames";
    case OutputKind::kReplaceFrames: return "replace_frames";
  }
  return "?";
}

inline OutputKind output_kind_from_name(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(OutputKind::kReplaceFrames); ++k)
    if (name == output_kind_name(static_cast<OutputKind>(k)))
      return static_cast<OutputKind>(k);
  throw ParseError("unknown output_kind '" + name + "'");
}

/// What the user asked for: the scene category, the desired output form,
/// a coarse detail level, and free-form constraints in `extra`.
struct Request {
  std::string scene_type = "generic";
  OutputKind output_kind = OutputKind::kGraphOnly;
  std::string detail = "low";
  std::map<std::string, std::string> extra;
};

inline Request parse_request(const std::string& text) {
  Json root = parse_json(text, "request");
  Request request;
  if (root.contains("scene_type"))
    request.scene_type = require_string(root, "scene_type", "request");
  request.output_kind =
      output_kind_from_name(require_string(root, "output_kind", "request"));
  if (root.contains("detail")) {
    request.detail = require_string(root, "detail", "request");
    if (request.detail != "low" && request.detail != "high")
      throw ParseError("request: detail must be 'low' or 'high'");
  }
  if (root.contains("extra")) {
    const Json& extra = root["extra"];
    if (!extra.is_object())
      throw ParseError("request: extra must be a string map");
    for (auto it = extra.begin(); it != extra.end(); ++it) {
      if (!it.value().is_string())
        throw ParseError("request: extra values must be strings");
      request.extra[it.key()] = it.value().get<std::string>();
    }
  }
  return request;
}

inline Json request_to_json(const Request& request) {
  Json extra = Json::object();
  for (const auto& [k, v] : request.extra) extra[k] = v;
  return Json{{"scene_type", request.scene_type},
              {"output_kind", output_kind_name(request.output_kind)},
              {"detail", request.detail},
              {"extra", extra}};
}

/// Resolves a dot-style field path ("output_kind", "extra.camera") to its
/// string value; unset extra keys resolve to an empty optional.
inline std::optional<std::string> request_field(const Request& request,
                                                const std::string& path) {
  if (path == "scene_type") return request.scene_type;
  if (path == "output_kind") return output_kind_name(request.output_kind);
  if (path == "detail") return request.detail;
  if (path.rfind("extra.", 0) == 0) {
    auto it = request.extra.find(path.substr(6));
    if (it == request.extra.end()) return std::nullopt;
    return it->second;
  }
  throw SchemaError("unknown request field '" + path + "'");
}

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

enum class ConditionOp { kEq, kNe, kIn };

struct Condition {
  std::string field;
  ConditionOp op = ConditionOp::kEq;
  std::vector<std::string> values;  // single entry for eq/ne
};

struct StageSpec {
  std::string stage_id;
  std::map<std::string, Json> params;  // scalar values only
};

struct Rule {
  std::string id;
  int priority = 0;
  std::vector<Condition> when;  // empty matches everything
  std::vector<StageSpec> then_stages;
};

struct RuleSet {
  std::string version;
  std::vector<Rule> rules;  // file order
};

inline RuleSet load_rules(const std::string& text) {
  Json root = parse_json(text, "rules");
  RuleSet set;
  set.version = require_string(root, "version", "rules");
  std::set<std::string> ids;
  for (const Json& r : require_array(root, "rules", "rules")) {
    Rule rule;
    rule.id = require_string(r, "id", "rule");
    if (!ids.insert(rule.id).second)
      throw SchemaError("duplicate rule id '" + rule.id + "'");
    rule.priority = require_int(r, "priority", "rule " + rule.id);
    if (r.contains("when")) {
      for (const Json& c : require_array(r, "when", "rule " + rule.id)) {
        Condition cond;
        cond.field = require_string(c, "field", "rule " + rule.id);
        const std::string op = require_string(c, "op", "rule " + rule.id);
        if (op == "eq") {
          cond.op = ConditionOp::kEq;
        } else if (op == "ne") {
          cond.op = ConditionOp::kNe;
        } else if (op == "in") {
          cond.op = ConditionOp::kIn;
        } else {
          throw SchemaError("rule " + rule.id + ": unknown operator '" + op +
                            "'");
        }
        const Json& value = require_field(c, "value", "rule " + rule.id);
        if (cond.op == ConditionOp::kIn) {
          if (!value.is_array())
            throw ParseError("rule " + rule.id + ": 'in' needs an array");
          for (const Json& v : value) {
            if (!v.is_string())
              throw ParseError("rule " + rule.id + ": values must be strings");
            cond.values.push_back(v.get<std::string>());
          }
        } else {
          if (!value.is_string())
            throw ParseError("rule " + rule.id + ": value must be a string");
          cond.values.push_back(value.get<std::string>());
        }
        rule.when.push_back(std::move(cond));
      }
    }
    for (const Json& s : require_array(r, "then", "rule " + rule.id)) {
      StageSpec spec;
      spec.stage_id = require_string(s, "stage", "rule " + rule.id);
      if (s.contains("params")) {
        const Json& params = s["params"];
        if (!params.is_object())
          throw ParseError("rule " + rule.id + ": params must be a map");
        for (auto it = params.begin(); it != params.end(); ++it) {
          if (!it.value().is_primitive() || it.value().is_null())
            throw ParseError("rule " + rule.id +
                             ": param values must be scalars");
          spec.params[it.key()] = it.value();
        }
      }
      rule.then_stages.push_back(std::move(spec));
    }
    set.rules.push_back(std::move(rule));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Plan selection
// ---------------------------------------------------------------------------

struct PipelinePlan {
  std::vector<StageSpec> stages;
  std::string request_fingerprint;
};

inline std::string serialize_plan(const PipelinePlan& plan) {
  Json stages = Json::array();
  for (const auto& s : plan.stages) {
    Json params = Json::object();
    for (const auto& [k, v] : s.params) params[k] = v;
    stages.push_back(Json{{"stage", s.stage_id}, {"params", params}});
  }
  return Json{{"request_fingerprint", plan.request_fingerprint},
              {"stages", stages}}
             .dump() +
         "\n";
}

inline bool condition_holds(const Condition& cond, const Request& request) {
  const std::optional<std::string> value = request_field(request, cond.field);
  switch (cond.op) {
    case ConditionOp::kEq:
      return value && *value == cond.values.front();
    case ConditionOp::kNe:
      return !value || *value != cond.values.front();
    case ConditionOp::kIn:
      return value && std::find(cond.values.begin(), cond.values.end(),
                                *value) != cond.values.end();
  }
  return false;
}

/// Checks stage existence and dependency order: every input of every stage
/// must be produced by an earlier stage or be a source kind.
inline void validate_plan(const PipelinePlan& plan,
                          const StageRegistry& registry) {
  std::set<Kind> produced;
  for (const auto& spec : plan.stages) {
    const StageEntry* entry = registry.find(spec.stage_id);
    if (entry == nullptr)
      throw SchemaError("unknown stage '" + spec.stage_id + "'");
    for (Kind input : entry->inputs) {
      if (!produced.count(input) && !is_source_kind(input))
        throw SchemaError("stage '" + spec.stage_id + "' input '" +
                          kind_name(input) + "' is never produced");
    }
    for (Kind output : entry->outputs) produced.insert(output);
  }
}

struct SelectionTrace {
  std::vector<std::string> matched_rule_ids;  // in application order
};

/// Deterministic rule-based planning: matching rules are applied in
/// (priority desc, file index asc) order, their stages concatenated, and
/// the first occurrence of each stage id kept with its parameters. The
/// result is validated against the registry. An empty plan is an error.
inline PipelinePlan select_plan(const RuleSet& rules, const Request& request,
                                const StageRegistry& registry,
                                SelectionTrace* trace = nullptr) {
  std::vector<std::pair<int, const Rule*>> matching;  // (file index, rule)
  for (size_t i = 0; i < rules.rules.size(); ++i) {
    const Rule& rule = rules.rules[i];
    const bool matches =
        std::all_of(rule.when.begin(), rule.when.end(),
                    [&](const Condition& c) { return condition_holds(c, request); });
    if (matches) matching.emplace_back(static_cast<int>(i), &rule);
  }
  std::stable_sort(matching.begin(), matching.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second->priority != b.second->priority)
                       return a.second->priority > b.second->priority;
                     return a.first < b.first;
                   });
  if (matching.empty())
    throw SchemaError("no rule matches the request (empty plan)");

  PipelinePlan plan;
  std::set<std::string> seen;
  for (const auto& [index, rule] : matching) {
    if (trace != nullptr) trace->matched_rule_ids.push_back(rule->id);
    for (const auto& spec : rule->then_stages)
      if (seen.insert(spec.stage_id).second) plan.stages.push_back(spec);
  }
  if (plan.stages.empty())
    throw SchemaError("matching rules produce an empty plan");
  plan.request_fingerprint = sha256_hex(request_to_json(request).dump());
  validate_plan(plan, registry);
  return plan;
}

}  // namespace s2v
