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

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "s2v/registry.hpp"
#include "s2v/selector.hpp"
#include "s2v/store.hpp"

namespace s2v {

struct RunReport {
  std::vector<std::string> executed;
  std::vector<std::string> cache_hits;
  std::map<Kind, std::filesystem::path> outputs;
  std::map<std::string, double> wall_times_ms;
  std::vector<std::string> log;
};

namespace detail {

struct BoundArtifact {
  std::string hash;
  std::filesystem::path path;
};

inline std::string action_hash_of(const StageSpec& spec,
                                  const std::map<std::string, std::string>&
                                      input_hashes) {
  Json params = Json::object();
  for (const auto& [k, v] : spec.params) params[k] = v;
  Json inputs = Json::object();
  for (const auto& [k, v] : input_hashes) inputs[k] = v;
  return sha256_hex(Json{{"stage", spec.stage_id},
                         {"params", params},
                         {"inputs", inputs}}
                        .dump());
}

}  // namespace detail

/// Executes the plan in order with content-addressed caching: each stage's
/// action hash covers its id, canonical params and the hashes of the exact
/// artifacts it consumes, so a unique computation runs at most once ever.
/// Stage inputs bind to the most recent earlier producer of the kind, or to
/// the caller-supplied pipeline input.
inline RunReport run_pipeline(
    const PipelinePlan& plan,
    const std::map<Kind, std::filesystem::path>& inputs, ArtifactStore& store,
    const StageRegistry& registry) {
  validate_plan(plan, registry);
  RunReport report;

  // Pipeline inputs are hashed once, on first use.
  std::map<Kind, detail::BoundArtifact> sources;
  auto source_of = [&](Kind kind) -> const detail::BoundArtifact* {
    auto bound = sources.find(kind);
    if (bound != sources.end()) return &bound->second;
    auto given = inputs.find(kind);
    if (given == inputs.end()) return nullptr;
    sources[kind] = {"input:" + hash_path(given->second), given->second};
    return &sources.at(kind);
  };

  std::map<Kind, detail::BoundArtifact> produced;
  auto resolve = [&](Kind kind) -> const detail::BoundArtifact* {
    auto it = produced.find(kind);
    if (it != produced.end()) return &it->second;
    return source_of(kind);
  };

  for (const auto& spec : plan.stages) {
    const StageEntry& entry = *registry.find(spec.stage_id);
    std::map<std::string, std::string> input_hashes;
    std::map<Kind, std::filesystem::path> input_paths;
    for (Kind kind : entry.inputs) {
      const detail::BoundArtifact* artifact = resolve(kind);
      if (artifact == nullptr)
        throw DataError("stage '" + spec.stage_id + "': missing input kind '" +
                        kind_name(kind) + "'");
      input_hashes[kind_name(kind)] = artifact->hash;
      input_paths[kind] = artifact->path;
    }
    for (Kind kind : entry.optional_inputs) {
      const detail::BoundArtifact* artifact = resolve(kind);
      if (artifact == nullptr) continue;
      input_hashes[kind_name(kind)] = artifact->hash;
      input_paths[kind] = artifact->path;
    }

    const std::string action = detail::action_hash_of(spec, input_hashes);
    const auto start = std::chrono::steady_clock::now();
    if (auto record = store.lookup(action)) {
      store.verify(*record);
      report.cache_hits.push_back(spec.stage_id);
    } else {
      store.prepare(action);
      StageContext ctx;
      ctx.params = spec.params;
      ctx.inputs = input_paths;
      for (Kind kind : entry.outputs)
        ctx.outputs[kind] = store.payload_path(action, kind);
      ctx.log = &report.log;
      try {
        entry.executor(ctx);
      } catch (const Error& e) {
        throw Error("stage '" + spec.stage_id + "' failed: " + e.what());
      }
      std::map<std::string, std::string> digests;
      for (Kind kind : entry.outputs) {
        if (!std::filesystem::exists(ctx.outputs.at(kind)))
          throw Error("stage '" + spec.stage_id + "' did not produce output '" +
                      std::string(kind_name(kind)) + "'");
        digests[kind_name(kind)] = hash_path(ctx.outputs.at(kind));
      }
      Json params = Json::object();
      for (const auto& [k, v] : spec.params) params[k] = v;
      store.publish(action, spec.stage_id, params, input_hashes, digests);
      report.executed.push_back(spec.stage_id);
    }
    const auto elapsed = std::chrono::steady_clock::now() - start;
    report.wall_times_ms[spec.stage_id] =
        std::chrono::duration<double, std::milli>(elapsed).count();

    for (Kind kind : entry.outputs)
      produced[kind] = {action + ":" + kind_name(kind),
                        store.payload_path(action, kind)};
  }

  for (const auto& [kind, artifact] : produced)
    report.outputs[kind] = artifact.path;
  return report;
}

}  // namespace s2v
