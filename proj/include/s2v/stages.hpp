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
#include <string>
#include <vector>

#include "s2v/analysis.hpp"
#include "s2v/description.hpp"
#include "s2v/ontology.hpp"
#include "s2v/pipeline.hpp"
#include "s2v/registry.hpp"
#include "s2v/synthesis.hpp"

namespace s2v {

// ---------------------------------------------------------------------------
// Scene graph artifacts
// ---------------------------------------------------------------------------

/// A scene-graph artifact is a directory holding graph.json plus any mask
/// sidecars the graph references. A bare file is accepted for convenience.
struct GraphArtifact {
  SceneGraph graph;
  std::filesystem::path dir;  // where sidecars resolve from
};

inline GraphArtifact load_graph_artifact(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path))
    return {deserialize(read_file(path / "graph.json")), path};
  return {deserialize(read_file(path)), path.parent_path()};
}

/// Writes graph.json and copies every referenced sidecar from `from_dir`.
inline void write_graph_artifact(const std::filesystem::path& dir,
                                 const SceneGraph& graph,
                                 const std::filesystem::path& from_dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "graph.json", serialize(graph));
  std::set<std::string> sidecars;
  for (const auto& fp : graph.frames)
    for (const auto& p : fp.payloads)
      if (p.kind == PayloadKind::kMaskRef) {
        const std::string& ref = std::get<std::string>(p.data);
        sidecars.insert(ref.substr(0, ref.find('#')));
      }
  for (const auto& name : sidecars) {
    if (!std::filesystem::exists(from_dir / name))
      throw IoError("mask sidecar '" + name + "' missing from " +
                    from_dir.string());
    std::filesystem::copy_file(
        from_dir / name, dir / name,
        std::filesystem::copy_options::overwrite_existing);
  }
}

// ---------------------------------------------------------------------------
// Stage executors
// ---------------------------------------------------------------------------

namespace stages {

inline void ingest_detections_stage(const StageContext& ctx) {
  const auto frames =
      ingest_detections(read_file(ctx.inputs.at(Kind::kDetections)));
  write_file(ctx.outputs.at(Kind::kDetections), serialize_detections(frames));
}

inline void track_stage(const StageContext& ctx) {
  TrackParams params;
  params.iou_threshold = ctx.number_param("iou_threshold", params.iou_threshold);
  params.max_missed = ctx.int_param("max_missed", params.max_missed);
  params.frame_cap = ctx.int_param("frame_cap", params.frame_cap);
  const auto frames =
      ingest_detections(read_file(ctx.inputs.at(Kind::kDetections)));
  const auto tracks = associate_tracks(frames, params);
  std::vector<PosedTrack> bare;
  for (const auto& t : tracks) bare.push_back({t, {}});
  write_file(ctx.outputs.at(Kind::kTracks), serialize_posed_tracks(bare));
}

inline void smooth_tracks_stage(const StageContext& ctx) {
  const int window = ctx.int_param("window", 5);
  auto posed = deserialize_posed_tracks(read_file(ctx.inputs.at(Kind::kTracks)));
  std::vector<Track> tracks;
  for (const auto& pt : posed) tracks.push_back(pt.track);
  tracks = smooth_tracks(tracks, window);
  std::vector<PosedTrack> out;
  for (size_t i = 0; i < tracks.size(); ++i)
    out.push_back({tracks[i], posed[i].poses});
  write_file(ctx.outputs.at(Kind::kTracks), serialize_posed_tracks(out));
}

inline void attach_poses_stage(const StageContext& ctx) {
  auto posed = deserialize_posed_tracks(read_file(ctx.inputs.at(Kind::kTracks)));
  std::vector<Track> tracks;
  for (const auto& pt : posed) tracks.push_back(pt.track);
  AttachResult result =
      attach_poses(tracks, read_file(ctx.inputs.at(Kind::kPoses)));
  for (auto& warning : result.warnings) ctx.warn(std::move(warning));
  write_file(ctx.outputs.at(Kind::kPosedTracks),
             serialize_posed_tracks(result.tracks));
}

inline void build_graph_stage(const StageContext& ctx) {
  const auto schema = load_ontology(read_file(ctx.inputs.at(Kind::kOntology)));
  const auto tracks =
      deserialize_posed_tracks(read_file(ctx.inputs.at(Kind::kPosedTracks)));
  const std::string source_id = ctx.string_param("source_id", "scene");
  SpatialParams params;
  params.near_factor = ctx.number_param("near_factor", params.near_factor);
  params.overlap_min_iou =
      ctx.number_param("overlap_min_iou", params.overlap_min_iou);
  const SceneGraph graph = infer_spatial_relations(
      build_graph(tracks, schema, source_id), params);
  const auto dir = ctx.outputs.at(Kind::kSceneGraph);
  std::filesystem::create_directories(dir);
  write_file(dir / "graph.json", serialize(graph));
  const std::string sidecar = build_mask_sidecar(tracks);
  if (sidecar != "{}\n")
    write_file(dir / mask_sidecar_name(source_id), sidecar);
}

inline void refine_graph_stage(const StageContext& ctx) {
  const auto schema = load_ontology(read_file(ctx.inputs.at(Kind::kOntology)));
  const GraphArtifact artifact =
      load_graph_artifact(ctx.inputs.at(Kind::kSceneGraph));
  write_graph_artifact(ctx.outputs.at(Kind::kSceneGraph),
                       refine(artifact.graph, schema), artifact.dir);
}

inline void serialize_graph_stage(const StageContext& ctx) {
  const GraphArtifact artifact =
      load_graph_artifact(ctx.inputs.at(Kind::kSceneGraph));
  write_graph_artifact(ctx.outputs.at(Kind::kSceneGraph),
                       canonical(artifact.graph), artifact.dir);
}

inline void plan_scene_stage(const StageContext& ctx) {
  const GraphArtifact artifact =
      load_graph_artifact(ctx.inputs.at(Kind::kSceneGraph));
  const PlanMode mode =
      plan_mode_from_name(ctx.string_param("mode", "obj_only"));
  Camera camera;
  if (const Json* spec = ctx.param("camera")) {
    if (!spec->is_string())
      throw SchemaError("stage param 'camera' must be a string spec");
    camera = parse_camera_spec(spec->get<std::string>());
  }
  const ScenePlan plan = plan_scene(artifact.graph, mode, camera);
  for (const auto& warning : plan.warnings) ctx.warn(warning);
  write_file(ctx.outputs.at(Kind::kScenePlan), serialize_scene_plan(plan));
}

inline AvatarParams avatar_params_of(const StageContext& ctx) {
  AvatarParams params;
  params.radius = ctx.number_param("radius", params.radius);
  params.sides = ctx.int_param("sides", params.sides);
  return params;
}

inline void export_obj_stage(const StageContext& ctx) {
  const ScenePlan plan =
      deserialize_scene_plan(read_file(ctx.inputs.at(Kind::kScenePlan)));
  const GraphArtifact artifact =
      load_graph_artifact(ctx.inputs.at(Kind::kSceneGraph));
  std::vector<std::string> log;
  const std::string manifest =
      export_obj(plan, artifact.graph, ctx.outputs.at(Kind::kObjSet),
                 avatar_params_of(ctx), &log);
  for (auto& warning : log) ctx.warn(std::move(warning));
  write_file(ctx.outputs.at(Kind::kManifest), manifest);
}

inline void background_fill_stage(const StageContext& ctx) {
  const GraphArtifact artifact =
      load_graph_artifact(ctx.inputs.at(Kind::kSceneGraph));
  const BackgroundSource background(ctx.inputs.at(Kind::kBackground));
  std::optional<Image> plate;
  if (ctx.inputs.count(Kind::kPlate))
    plate = read_ppm(ctx.inputs.at(Kind::kPlate));
  else
    ctx.warn("background_fill: no clean plate supplied, filling with gray");
  const MaskIndex masks = load_mask_index(artifact.graph, artifact.dir);
  const auto out_dir = ctx.outputs.at(Kind::kBackground);
  std::filesystem::create_directories(out_dir);
  for (int f = 0; f < artifact.graph.meta.frame_count; ++f) {
    const Image bg = background.frame_native(f);
    const Image blank_render = Image::blank(bg.width, bg.height);
    CompositeResult filled =
        composite(blank_render, bg, masks_for_frame(artifact.graph, masks, f),
                  CompositeMode::kReplace, plate ? &*plate : nullptr);
    write_ppm(filled.image, out_dir / frame_file_name(f, "ppm"));
  }
}

inline void rasterize_composite_stage(const StageContext& ctx) {
  const ScenePlan plan =
      deserialize_scene_plan(read_file(ctx.inputs.at(Kind::kScenePlan)));
  const BackgroundSource background(ctx.inputs.at(Kind::kBackground));
  const AvatarParams params = avatar_params_of(ctx);
  std::vector<std::string> log;
  const auto out_dir = ctx.outputs.at(Kind::kFrameSet);
  std::filesystem::create_directories(out_dir);
  for (size_t k = 0; k < plan.output_order.size(); ++k) {
    const int source = plan.output_order[k];
    const Image render =
        rasterize(frame_meshes(plan, source, params, &log), plan.camera);
    const Image bg =
        background.frame(source, plan.camera.width, plan.camera.height);
    const Image composed =
        composite(render, bg, {}, CompositeMode::kOverlay).image;
    write_ppm(composed, out_dir / frame_file_name(static_cast<int>(k), "ppm"));
  }
  for (auto& warning : log) ctx.warn(std::move(warning));
}

inline void write_frames_stage(const StageContext& ctx) {
  const ScenePlan plan =
      deserialize_scene_plan(read_file(ctx.inputs.at(Kind::kScenePlan)));
  const GraphArtifact artifact =
      load_graph_artifact(ctx.inputs.at(Kind::kSceneGraph));
  const std::string graph_hash = sha256_hex(serialize(artifact.graph));
  std::vector<ManifestEntry> entries;
  for (size_t k = 0; k < plan.output_order.size(); ++k) {
    const std::string name = frame_file_name(static_cast<int>(k), "ppm");
    if (!std::filesystem::exists(ctx.inputs.at(Kind::kFrameSet) / name))
      throw DataError("frame set is missing " + name);
    entries.push_back({static_cast<int>(k), plan.output_order[k], std::nullopt,
                       name});
  }
  write_file(ctx.outputs.at(Kind::kManifest),
             encode_manifest(plan, graph_hash, entries));
}

}  // namespace stages

/// The built-in stage vocabulary. Analysis stages normalize and associate
/// detections; description stages build and refine the graph; synthesis
/// stages plan, render and package the output.
inline StageRegistry default_registry() {
  StageRegistry registry;
  registry.entries["ingest_detections"] = {
      {Kind::kDetections}, {}, {Kind::kDetections},
      stages::ingest_detections_stage};
  registry.entries["track"] = {
      {Kind::kDetections}, {}, {Kind::kTracks}, stages::track_stage};
  registry.entries["smooth_tracks"] = {
      {Kind::kTracks}, {}, {Kind::kTracks}, stages::smooth_tracks_stage};
  registry.entries["attach_poses"] = {{Kind::kTracks, Kind::kPoses},
                                      {},
                                      {Kind::kPosedTracks},
                                      stages::attach_poses_stage};
  registry.entries["build_graph"] = {{Kind::kPosedTracks, Kind::kOntology},
                                     {},
                                     {Kind::kSceneGraph},
                                     stages::build_graph_stage};
  registry.entries["refine_graph"] = {{Kind::kSceneGraph, Kind::kOntology},
                                      {},
                                      {Kind::kSceneGraph},
                                      stages::refine_graph_stage};
  registry.entries["serialize_graph"] = {
      {Kind::kSceneGraph}, {}, {Kind::kSceneGraph},
      stages::serialize_graph_stage};
  registry.entries["plan_scene"] = {
      {Kind::kSceneGraph}, {}, {Kind::kScenePlan}, stages::plan_scene_stage};
  registry.entries["export_obj"] = {{Kind::kScenePlan, Kind::kSceneGraph},
                                    {},
                                    {Kind::kObjSet, Kind::kManifest},
                                    stages::export_obj_stage};
  registry.entries["background_fill"] = {{Kind::kSceneGraph, Kind::kBackground},
                                         {Kind::kPlate},
                                         {Kind::kBackground},
                                         stages::background_fill_stage};
  registry.entries["rasterize_composite"] = {
      {Kind::kScenePlan, Kind::kBackground},
      {},
      {Kind::kFrameSet},
      stages::rasterize_composite_stage};
  registry.entries["write_frames"] = {
      {Kind::kFrameSet, Kind::kScenePlan, Kind::kSceneGraph},
      {},
      {Kind::kManifest},
      stages::write_frames_stage};
  return registry;
}

}  // namespace s2v
