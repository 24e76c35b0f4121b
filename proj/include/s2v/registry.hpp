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

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "s2v/jsonio.hpp"

namespace s2v {

/// Artifact kinds flowing between pipeline stages. The first five are
/// source kinds: raw documents supplied as pipeline inputs.
enum class Kind {
  kDetections,
  kPoses,
  kOntology,
  kBackground,
  kPlate,
  kTracks,
  kPosedTracks,
  kSceneGraph,
  kScenePlan,
  kObjSet,
  kFrameSet,
  kManifest,
};

inline const char* kind_name(Kind kind) {
  switch (kind) {
    case Kind::kDetections: return "detections";
    case Kind::kPoses: return "poses";
    case Kind::kOntology: return "ontology";
    case Kind::kBackground: return "background";
    case Kind::kPlate: return "plate";
    case Kind::kTracks: return "tracks";
    case Kind::kPosedTracks: return "posed_tracks";
    case Kind::kSceneGraph: return "scene_graph";
    case Kind::kScenePlan: return "scene_plan";
    case Kind::kObjSet: return "obj_set";
    case Kind::kFrameSet: return "frame_set";
    case Kind::kManifest: return "manifest";
  }
  return "?";
}

inline Kind kind_from_name(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(Kind::kManifest); ++k)
    if (name == kind_name(static_cast<Kind>(k))) return static_cast<Kind>(k);
  throw SchemaError("unknown artifact kind '" + name + "'");
}

/// Kinds a pipeline may receive from the caller rather than from a stage.
inline bool is_source_kind(Kind kind) {
  switch (kind) {
    case Kind::kDetections:
    case Kind::kPoses:
    case Kind::kOntology:
    case Kind::kBackground:
    case Kind::kPlate:
      return true;
    default:
      return false;
  }
}

/// Everything a stage executor sees: its parameters, resolved input payload
/// paths, and the preassigned path for each output it must produce. Paths
/// of outputs do not exist yet; the executor creates a file or directory
/// at each. The log collects human-readable warnings.
struct StageContext {
  std::map<std::string, Json> params;
  std::map<Kind, std::filesystem::path> inputs;
  std::map<Kind, std::filesystem::path> outputs;
  std::vector<std::string>* log = nullptr;

  const Json* param(const std::string& name) const {
    auto it = params.find(name);
    return it == params.end() ? nullptr : &it->second;
  }
  double number_param(const std::string& name, double fallback) const {
    const Json* v = param(name);
    if (v == nullptr) return fallback;
    if (!v->is_number())
      throw SchemaError("stage param '" + name + "' must be a number");
    return v->get<double>();
  }
  int int_param(const std::string& name, int fallback) const {
    const Json* v = param(name);
    if (v == nullptr) return fallback;
    if (!v->is_number_integer())
      throw SchemaError("stage param '" + name + "' must be an integer");
    return v->get<int>();
  }
  std::string string_param(const std::string& name,
                           const std::string& fallback) const {
    const Json* v = param(name);
    if (v == nullptr) return fallback;
    if (!v->is_string())
      throw SchemaError("stage param '" + name + "' must be a string");
    return v->get<std::string>();
  }
  void warn(std::string message) const {
    if (log != nullptr) log->push_back(std::move(message));
  }
};

using StageExecutor = std::function<void(const StageContext&)>;

struct StageEntry {
  std::vector<Kind> inputs;
  std::vector<Kind> optional_inputs;
  std::vector<Kind> outputs;
  StageExecutor executor;
};

/// Declares the available stages with their artifact interfaces. The
/// selector validates plans against it; the pipeline runner dispatches
/// through the executors.
struct StageRegistry {
  std::map<std::string, StageEntry> entries;

  const StageEntry* find(const std::string& stage_id) const {
    auto it = entries.find(stage_id);
    return it == entries.end() ? nullptr : &it->second;
  }
};

}  // namespace s2v
