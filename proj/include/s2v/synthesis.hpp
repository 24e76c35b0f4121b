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

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "s2v/avatar.hpp"
#include "s2v/composite.hpp"
#include "s2v/hash.hpp"
#include "s2v/ppm.hpp"
#include "s2v/raster.hpp"
#include "s2v/scenegraph.hpp"
#include "s2v/selector.hpp"

namespace s2v {

// ---------------------------------------------------------------------------
// Scene plan
// ---------------------------------------------------------------------------

enum class PlanMode { kOverlay, kReplace, kObjOnly };

inline const char* plan_mode_name(PlanMode mode) {
  switch (mode) {
    case PlanMode::kOverlay: return "overlay";
    case PlanMode::kReplace: return "replace";
    case PlanMode::kObjOnly: return "obj_only";
  }
  return "?";
}

inline PlanMode plan_mode_from_name(const std::string& name) {
  for (int m = 0; m <= static_cast<int>(PlanMode::kObjOnly); ++m)
    if (name == plan_mode_name(static_cast<PlanMode>(m)))
      return static_cast<PlanMode>(m);
  throw ParseError("unknown synthesis mode '" + name + "'");
}

struct Placement {
  std::string entity_id;
  SkeletonPose pose;       // root-local joints + world root
  double yaw_total = 0.0;  // pose yaw + entity rotation_yaw
  std::optional<Vec3> color;
};

struct FramePlacement {
  int source_frame = 0;
  std::vector<Placement> placements;
};

/// Synthesis-side view of the graph: per source frame, the posed entities to
/// instantiate, plus the camera and the output frame order (reversed when
/// the graph says so).
struct ScenePlan {
  std::vector<FramePlacement> frames;  // indexed by source frame
  PlanMode mode = PlanMode::kObjOnly;
  Camera camera;
  std::vector<int> output_order;  // permutation of source frames
  std::vector<std::string> warnings;
};

/// Camera from its compact text form:
/// "px,py,pz;lx,ly,lz;ux,uy,uz;fov_degrees;WxH".
inline Camera parse_camera_spec(const std::string& spec) {
  Camera camera;
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t sep = spec.find(';', start);
    parts.push_back(spec.substr(start, sep - start));
    if (sep == std::string::npos) break;
    start = sep + 1;
  }
  if (parts.size() != 5)
    throw ParseError("camera spec needs 5 ';'-separated parts");
  auto parse_triplet = [&](const std::string& s, const char* what) -> Vec3 {
    double x = 0, y = 0, z = 0;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &x, &y, &z) != 3)
      throw ParseError(std::string("camera spec: bad ") + what);
    return {x, y, z};
  };
  camera.position = parse_triplet(parts[0], "position");
  camera.look_at = parse_triplet(parts[1], "look_at");
  camera.up = parse_triplet(parts[2], "up");
  double fov_deg = 0;
  if (std::sscanf(parts[3].c_str(), "%lf", &fov_deg) != 1)
    throw ParseError("camera spec: bad fov");
  camera.vertical_fov = fov_deg * kPi / 180.0;
  if (std::sscanf(parts[4].c_str(), "%dx%d", &camera.width, &camera.height) !=
      2)
    throw ParseError("camera spec: bad image size");
  camera.validate();
  return camera;
}

inline Json camera_to_json(const Camera& camera) {
  return Json{{"position", vec3_to_json(camera.position)},
              {"look_at", vec3_to_json(camera.look_at)},
              {"up", vec3_to_json(camera.up)},
              {"vertical_fov", camera.vertical_fov},
              {"image_size", Json::array({camera.width, camera.height})}};
}

inline Camera camera_from_json(const Json& v, const std::string& where) {
  Camera camera;
  camera.position = parse_vec3(require_field(v, "position", where), where);
  camera.look_at = parse_vec3(require_field(v, "look_at", where), where);
  camera.up = parse_vec3(require_field(v, "up", where), where);
  camera.vertical_fov = require_number(v, "vertical_fov", where);
  const Json& size = require_array(v, "image_size", where);
  if (size.size() != 2) throw ParseError(where + ": image_size arity");
  camera.width = size[0].get<int>();
  camera.height = size[1].get<int>();
  camera.validate();
  return camera;
}

inline PlanMode plan_mode_for(OutputKind kind) {
  switch (kind) {
    case OutputKind::kObjSequence: return PlanMode::kObjOnly;
    case OutputKind::kOverlayFrames: return PlanMode::kOverlay;
    case OutputKind::kReplaceFrames: return PlanMode::kReplace;
    case OutputKind::kGraphOnly: break;
  }
  throw DataError("graph_only requests have no scene plan");
}

/// Core planning: one placement per (frame, entity with pose payload). The
/// avatar yaw is the pose yaw plus the entity's rotation_yaw attribute;
/// entities with a bbox but no pose are skipped with a warning.
inline ScenePlan plan_scene(const SceneGraph& graph, PlanMode mode,
                            const Camera& camera) {
  validate_structure(graph);
  ScenePlan plan;
  plan.mode = mode;
  plan.camera = camera;
  plan.frames.resize(static_cast<size_t>(graph.meta.frame_count));
  for (int f = 0; f < graph.meta.frame_count; ++f)
    plan.frames[static_cast<size_t>(f)].source_frame = f;

  std::map<std::string, const Entity*> entities;
  for (const auto& e : graph.entities) entities[e.id] = &e;

  for (const auto& fp : graph.frames) {
    auto& frame_plan = plan.frames[static_cast<size_t>(fp.frame)];
    std::map<std::string, const SkeletonPose*> poses;
    std::vector<std::string> with_bbox;
    for (const auto& p : fp.payloads) {
      if (p.kind == PayloadKind::kPose)
        poses[p.entity] = &std::get<SkeletonPose>(p.data);
      else if (p.kind == PayloadKind::kBBox)
        with_bbox.push_back(p.entity);
    }
    for (const auto& entity_id : with_bbox) {
      if (!poses.count(entity_id))
        plan.warnings.push_back("plan: " + entity_id + " has no pose at frame " +
                                std::to_string(fp.frame) + ", skipped");
    }
    for (const auto& [entity_id, pose] : poses) {
      Placement placement;
      placement.entity_id = entity_id;
      placement.pose = *pose;
      placement.yaw_total = pose->root_yaw;
      const Entity* entity = entities.at(entity_id);
      auto rotation = entity->attributes.find("rotation_yaw");
      if (rotation != entity->attributes.end()) {
        if (!std::holds_alternative<double>(rotation->second))
          throw DataError("rotation_yaw of " + entity_id + " must be a number");
        placement.yaw_total += std::get<double>(rotation->second);
      }
      auto color = entity->attributes.find("color");
      if (color != entity->attributes.end() &&
          std::holds_alternative<Vec3>(color->second))
        placement.color = std::get<Vec3>(color->second);
      frame_plan.placements.push_back(std::move(placement));
    }
  }

  plan.output_order.resize(static_cast<size_t>(graph.meta.frame_count));
  for (int k = 0; k < graph.meta.frame_count; ++k)
    plan.output_order[static_cast<size_t>(k)] =
        graph.meta.reverse ? graph.meta.frame_count - 1 - k : k;
  return plan;
}

/// Request-driven overload: the mode comes from the output kind and the
/// camera from the request's "camera" extra (compact spec) when present.
inline ScenePlan plan_scene(const SceneGraph& graph, const Request& request) {
  Camera camera;
  auto spec = request.extra.find("camera");
  if (spec != request.extra.end()) camera = parse_camera_spec(spec->second);
  return plan_scene(graph, plan_mode_for(request.output_kind), camera);
}

inline std::string serialize_scene_plan(const ScenePlan& plan) {
  Json frames = Json::array();
  for (const auto& fp : plan.frames) {
    Json placements = Json::array();
    for (const auto& p : fp.placements) {
      Json item{{"entity", p.entity_id},
                {"yaw_total", p.yaw_total},
                {"pose", pose_to_json(p.pose)}};
      if (p.color) item["color"] = vec3_to_json(*p.color);
      placements.push_back(std::move(item));
    }
    frames.push_back(
        Json{{"source_frame", fp.source_frame}, {"placements", placements}});
  }
  return Json{{"version", "1.0"},
              {"mode", plan_mode_name(plan.mode)},
              {"camera", camera_to_json(plan.camera)},
              {"output_order", plan.output_order},
              {"frames", frames},
              {"warnings", plan.warnings}}
             .dump() +
         "\n";
}

inline ScenePlan deserialize_scene_plan(const std::string& text) {
  Json root = parse_json(text, "scene plan");
  ScenePlan plan;
  plan.mode = plan_mode_from_name(require_string(root, "mode", "plan"));
  plan.camera =
      camera_from_json(require_field(root, "camera", "plan"), "plan.camera");
  for (const Json& v : require_array(root, "output_order", "plan"))
    plan.output_order.push_back(v.get<int>());
  for (const Json& f : require_array(root, "frames", "plan")) {
    FramePlacement fp;
    fp.source_frame = require_int(f, "source_frame", "plan.frame");
    for (const Json& p : require_array(f, "placements", "plan.frame")) {
      Placement placement;
      placement.entity_id = require_string(p, "entity", "placement");
      placement.yaw_total = require_number(p, "yaw_total", "placement");
      placement.pose =
          pose_from_json(require_field(p, "pose", "placement"), "placement");
      if (p.contains("color"))
        placement.color = parse_vec3(p["color"], "placement.color");
      fp.placements.push_back(std::move(placement));
    }
    plan.frames.push_back(std::move(fp));
  }
  if (root.contains("warnings"))
    for (const Json& w : require_array(root, "warnings", "plan"))
      plan.warnings.push_back(w.get<std::string>());
  // output_order must be a permutation of the source frames.
  std::vector<char> seen(plan.frames.size(), 0);
  if (plan.output_order.size() != plan.frames.size())
    throw DataError("output_order is not a permutation");
  for (int idx : plan.output_order) {
    if (idx < 0 || static_cast<size_t>(idx) >= plan.frames.size() ||
        seen[static_cast<size_t>(idx)])
      throw DataError("output_order is not a permutation");
    seen[static_cast<size_t>(idx)] = 1;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Geometry per frame
// ---------------------------------------------------------------------------

/// Avatar meshes for one source frame, ordered by entity id.
inline std::vector<ColoredMesh> frame_meshes(
    const ScenePlan& plan, int source_frame, const AvatarParams& params = {},
    std::vector<std::string>* log = nullptr) {
  const auto& fp = plan.frames.at(static_cast<size_t>(source_frame));
  std::vector<ColoredMesh> meshes;
  for (const auto& placement : fp.placements) {
    ColoredMesh colored;
    colored.mesh = build_avatar(placement.pose, placement.yaw_total, params, log);
    colored.mesh.entity_id = placement.entity_id;
    if (placement.color) colored.color = *placement.color;
    meshes.push_back(std::move(colored));
  }
  std::sort(meshes.begin(), meshes.end(),
            [](const ColoredMesh& a, const ColoredMesh& b) {
              return a.mesh.entity_id < b.mesh.entity_id;
            });
  return meshes;
}

// ---------------------------------------------------------------------------
// OBJ export
// ---------------------------------------------------------------------------

inline std::string frame_file_name(int index, const char* extension) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05d.%s", index, extension);
  return buf;
}

/// One OBJ per output frame with an `o` group per entity; 1-based face
/// indices, shortest round-tripping decimals.
inline std::string encode_obj(const std::vector<ColoredMesh>& meshes) {
  std::string out;
  int vertex_base = 1;
  for (const auto& [mesh, color] : meshes) {
    out += "o " + mesh.entity_id + "\n";
    for (const auto& v : mesh.vertices)
      out += "v " + format_double(v.x) + " " + format_double(v.y) + " " +
             format_double(v.z) + "\n";
    for (const auto& t : mesh.triangles)
      out += "f " + std::to_string(vertex_base + t[0]) + " " +
             std::to_string(vertex_base + t[1]) + " " +
             std::to_string(vertex_base + t[2]) + "\n";
    vertex_base += static_cast<int>(mesh.vertices.size());
  }
  return out;
}

struct ManifestEntry {
  int index = 0;
  int source_frame = 0;
  std::optional<std::string> obj;
  std::optional<std::string> ppm;
};

inline std::string encode_manifest(const ScenePlan& plan,
                                   const std::string& graph_hash,
                                   const std::vector<ManifestEntry>& entries) {
  Json frames = Json::array();
  for (const auto& e : entries) {
    Json item{{"index", e.index}, {"source_frame", e.source_frame}};
    if (e.obj) item["obj"] = *e.obj;
    if (e.ppm) item["ppm"] = *e.ppm;
    frames.push_back(std::move(item));
  }
  return Json{{"version", "1.0"},
              {"mode", plan_mode_name(plan.mode)},
              {"camera", camera_to_json(plan.camera)},
              {"frames", frames},
              {"graph_hash", graph_hash}}
             .dump() +
         "\n";
}

/// Writes frame_%05d.obj in output order and returns the manifest document.
inline std::string export_obj(const ScenePlan& plan, const SceneGraph& graph,
                              const std::filesystem::path& out_dir,
                              const AvatarParams& params = {},
                              std::vector<std::string>* log = nullptr) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir))
    throw IoError("cannot create output directory " + out_dir.string());
  const std::string graph_hash = sha256_hex(serialize(graph));
  std::vector<ManifestEntry> entries;
  for (size_t k = 0; k < plan.output_order.size(); ++k) {
    const int source = plan.output_order[k];
    const std::string name = frame_file_name(static_cast<int>(k), "obj");
    write_file(out_dir / name,
               encode_obj(frame_meshes(plan, source, params, log)));
    entries.push_back(
        {static_cast<int>(k), source, name, std::nullopt});
  }
  return encode_manifest(plan, graph_hash, entries);
}

// ---------------------------------------------------------------------------
// Mask resolution
// ---------------------------------------------------------------------------

/// Mask sidecar contents: "ordinal/frame" -> RLE mask.
using MaskIndex = std::map<std::string, RleMask>;

inline MaskIndex parse_mask_sidecar(const std::string& text) {
  Json root = parse_json(text, "mask sidecar");
  if (!root.is_object()) throw ParseError("mask sidecar must be an object");
  MaskIndex index;
  for (auto it = root.begin(); it != root.end(); ++it)
    index[it.key()] = detail::mask_from_json(it.value(), "mask " + it.key());
  return index;
}

/// Loads every sidecar referenced by the graph's mask_ref payloads,
/// resolving relative to `graph_dir`. Missing sidecars are an error.
inline MaskIndex load_mask_index(const SceneGraph& graph,
                                 const std::filesystem::path& graph_dir) {
  MaskIndex index;
  std::set<std::string> loaded;
  for (const auto& fp : graph.frames) {
    for (const auto& p : fp.payloads) {
      if (p.kind != PayloadKind::kMaskRef) continue;
      const std::string& ref = std::get<std::string>(p.data);
      const size_t hash_pos = ref.find('#');
      if (hash_pos == std::string::npos)
        throw DataError("mask_ref '" + ref + "' lacks a #key fragment");
      const std::string file = ref.substr(0, hash_pos);
      if (loaded.insert(file).second) {
        const MaskIndex part = parse_mask_sidecar(read_file(graph_dir / file));
        index.insert(part.begin(), part.end());
      }
    }
  }
  return index;
}

/// Masks of every entity present at the given source frame.
inline std::vector<RleMask> masks_for_frame(const SceneGraph& graph,
                                            const MaskIndex& index,
                                            int source_frame) {
  std::vector<RleMask> masks;
  for (const auto& fp : graph.frames) {
    if (fp.frame != source_frame) continue;
    for (const auto& p : fp.payloads) {
      if (p.kind != PayloadKind::kMaskRef) continue;
      const std::string& ref = std::get<std::string>(p.data);
      const std::string key = ref.substr(ref.find('#') + 1);
      auto it = index.find(key);
      if (it == index.end())
        throw DataError("mask_ref key '" + key + "' missing from sidecar");
      masks.push_back(it->second);
    }
  }
  return masks;
}

// ---------------------------------------------------------------------------
// Backgrounds and frame output
// ---------------------------------------------------------------------------

/// Per-source-frame background: a single PPM used for every frame, or a
/// directory of frame_%05d.ppm files addressed by source frame.
class BackgroundSource {
 public:
  BackgroundSource() = default;
  explicit BackgroundSource(const std::filesystem::path& path) : path_(path) {
    if (std::filesystem::is_directory(path)) {
      directory_ = true;
    } else {
      static_image_ = read_ppm(path);
    }
  }

  bool empty() const { return !directory_ && !static_image_; }

  /// The frame at its native dimensions; requires a configured source.
  Image frame_native(int source_frame) const {
    if (directory_) return read_ppm(path_ / frame_file_name(source_frame, "ppm"));
    if (static_image_) return *static_image_;
    throw DataError("no background source configured");
  }

  /// Blank (black) when no source was configured.
  Image frame(int source_frame, int width, int height) const {
    if (directory_) {
      Image img = read_ppm(path_ / frame_file_name(source_frame, "ppm"));
      if (img.width != width || img.height != height)
        throw DataError("background frame dimensions differ from the render");
      return img;
    }
    if (static_image_) {
      if (static_image_->width != width || static_image_->height != height)
        throw DataError("background dimensions differ from the render");
      return *static_image_;
    }
    return Image::blank(width, height);
  }

 private:
  std::filesystem::path path_;
  bool directory_ = false;
  std::optional<Image> static_image_;
};

/// Writes frame_%05d.ppm per image in output order and returns the manifest.
inline std::string write_frames(const std::vector<Image>& images,
                                const std::filesystem::path& out_dir,
                                const ScenePlan& plan,
                                const std::string& graph_hash) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir))
    throw IoError("cannot create output directory " + out_dir.string());
  std::vector<ManifestEntry> entries;
  for (size_t k = 0; k < images.size(); ++k) {
    const std::string name = frame_file_name(static_cast<int>(k), "ppm");
    write_ppm(images[k], out_dir / name);
    entries.push_back({static_cast<int>(k),
                       k < plan.output_order.size() ? plan.output_order[k] : 0,
                       std::nullopt, name});
  }
  return encode_manifest(plan, graph_hash, entries);
}

// ---------------------------------------------------------------------------
// Full synthesis
// ---------------------------------------------------------------------------

struct SynthesisInputs {
  std::optional<std::filesystem::path> background;
  std::optional<std::filesystem::path> plate;
  std::filesystem::path graph_dir;  // for mask sidecar resolution
  AvatarParams avatar;
};

struct SynthesisResult {
  std::string manifest;
  std::vector<std::string> warnings;
};

/// Renders (or exports) a planned scene end to end and writes all frame
/// files plus nothing else; the manifest is returned, not written.
inline SynthesisResult run_synthesis(const SceneGraph& graph,
                                     const ScenePlan& plan,
                                     const SynthesisInputs& inputs,
                                     const std::filesystem::path& out_dir) {
  SynthesisResult result;
  result.warnings = plan.warnings;
  if (plan.mode == PlanMode::kObjOnly) {
    result.manifest =
        export_obj(plan, graph, out_dir, inputs.avatar, &result.warnings);
    return result;
  }

  BackgroundSource background;
  if (inputs.background) {
    background = BackgroundSource(*inputs.background);
  } else {
    result.warnings.push_back("synthesis: no background supplied, using blank");
  }
  std::optional<Image> plate;
  if (inputs.plate) plate = read_ppm(*inputs.plate);

  MaskIndex mask_index;
  if (plan.mode == PlanMode::kReplace)
    mask_index = load_mask_index(graph, inputs.graph_dir);
  const std::string graph_hash = sha256_hex(serialize(graph));

  std::vector<Image> images;
  for (size_t k = 0; k < plan.output_order.size(); ++k) {
    const int source = plan.output_order[k];
    const Image render = rasterize(
        frame_meshes(plan, source, inputs.avatar, &result.warnings),
        plan.camera);
    const Image bg =
        background.frame(source, plan.camera.width, plan.camera.height);
    if (plan.mode == PlanMode::kReplace) {
      CompositeResult composed =
          composite(render, bg, masks_for_frame(graph, mask_index, source),
                    CompositeMode::kReplace, plate ? &*plate : nullptr);
      if (composed.used_default_plate && k == 0)
        result.warnings.push_back(
            "synthesis: no clean plate supplied, filling masks with gray");
      images.push_back(std::move(composed.image));
    } else {
      images.push_back(
          composite(render, bg, {}, CompositeMode::kOverlay).image);
    }
  }
  result.manifest = write_frames(images, out_dir, plan, graph_hash);
  return result;
}

}  // namespace s2v
