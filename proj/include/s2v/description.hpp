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

#include <map>
#include <string>
#include <vector>

#include "s2v/analysis.hpp"
#include "s2v/ontology.hpp"
#include "s2v/scenegraph.hpp"

namespace s2v {

/// Thresholds for geometric relation inference.
struct SpatialParams {
  double near_factor = 0.5;      // fraction of the mean box diagonal
  double overlap_min_iou = 0.05;

  void validate() const {
    if (near_factor <= 0.0 || overlap_min_iou <= 0.0)
      throw DataError("spatial parameters must be positive");
  }
};

/// Name of the mask sidecar document written next to a serialized graph.
inline std::string mask_sidecar_name(const std::string& source_id) {
  return source_id + ".masks.json";
}

/// Key of one mask inside the sidecar. Keys use the entity ordinal rather
/// than the entity id so relabeling entities keeps references intact.
inline std::string mask_key(int ordinal, int frame) {
  return std::to_string(ordinal) + "/" + std::to_string(frame);
}

/// One entity per track (id = class + "_" + track_id) with bbox, pose and
/// mask payloads per observed frame. No relations yet.
inline SceneGraph build_graph(const std::vector<PosedTrack>& tracks,
                              const OntologySchema& schema,
                              const std::string& source_id) {
  SceneGraph graph;
  graph.meta.source_id = source_id;
  std::map<int, FramePayloads> frames;
  for (const auto& pt : tracks) {
    if (schema.find_class(pt.track.class_name) == nullptr)
      throw SchemaError("track class '" + pt.track.class_name +
                        "' not declared in the ontology");
    Entity entity;
    entity.class_name = pt.track.class_name;
    entity.id = make_entity_id(pt.track.class_name, pt.track.track_id);
    graph.entities.push_back(entity);
    for (const auto& [frame, det] : pt.track.observations) {
      graph.meta.frame_count = std::max(graph.meta.frame_count, frame + 1);
      auto& fp = frames[frame];
      fp.frame = frame;
      fp.payloads.push_back({entity.id, PayloadKind::kBBox, det.bbox});
      if (det.mask)
        fp.payloads.push_back(
            {entity.id, PayloadKind::kMaskRef,
             mask_sidecar_name(source_id) + "#" +
                 mask_key(pt.track.track_id, frame)});
      auto pose = pt.poses.find(frame);
      if (pose != pt.poses.end())
        fp.payloads.push_back({entity.id, PayloadKind::kPose, pose->second});
    }
  }
  for (auto& [frame, fp] : frames) graph.frames.push_back(std::move(fp));
  validate_structure(graph);
  return graph;
}

/// The mask sidecar contents for a set of posed tracks: ordinal/frame -> RLE.
inline std::string build_mask_sidecar(const std::vector<PosedTrack>& tracks) {
  Json root = Json::object();
  for (const auto& pt : tracks)
    for (const auto& [frame, det] : pt.track.observations)
      if (det.mask)
        root[mask_key(pt.track.track_id, frame)] =
            detail::mask_to_json(*det.mask);
  return root.dump() + "\n";
}

/// Per frame, for each ordered entity pair (A, B) with boxes a, b:
///   left_of(A,B)     iff a.x_max < b.x_min
///   above(A,B)       iff a.y_max < b.y_min   (image y grows downward)
///   overlapping(A,B) iff iou(a,b) >= overlap_min_iou
///   near(A,B)        iff center distance < near_factor * mean diagonal,
///                    and the pair is not overlapping
/// Inverse predicates are left to the reasoner.
inline SceneGraph infer_spatial_relations(const SceneGraph& graph,
                                          const SpatialParams& params = {}) {
  params.validate();
  SceneGraph out = graph;
  for (const auto& fp : out.frames) {
    std::vector<std::pair<std::string, BBox>> boxes;
    for (const auto& p : fp.payloads)
      if (p.kind == PayloadKind::kBBox)
        boxes.emplace_back(p.entity, std::get<BBox>(p.data));
    for (const auto& [id_a, a] : boxes) {
      for (const auto& [id_b, b] : boxes) {
        if (id_a == id_b) continue;
        if (a.x_max < b.x_min)
          out.relations.push_back({id_a, "left_of", id_b, fp.frame});
        if (a.y_max < b.y_min)
          out.relations.push_back({id_a, "above", id_b, fp.frame});
        const bool overlapping = iou(a, b) >= params.overlap_min_iou;
        if (overlapping)
          out.relations.push_back({id_a, "overlapping", id_b, fp.frame});
        const double distance = norm(a.center() - b.center());
        const double scale =
            params.near_factor * (a.diagonal() + b.diagonal()) / 2.0;
        if (!overlapping && distance < scale)
          out.relations.push_back({id_a, "near", id_b, fp.frame});
      }
    }
  }
  return canonical(out);
}

/// Ontology-backed refinement: the reasoner completes inverses and
/// transitive closures and repairs domain/range violations, logging every
/// change to the provenance.
inline SceneGraph refine(const SceneGraph& graph,
                         const OntologySchema& schema) {
  return infer(schema, graph);
}

/// Full description pipeline: build, infer spatial relations, refine,
/// serialize. Deterministic end to end.
inline std::string describe(const std::vector<PosedTrack>& tracks,
                            const OntologySchema& schema,
                            const SpatialParams& params,
                            const std::string& source_id) {
  return serialize(
      refine(infer_spatial_relations(build_graph(tracks, schema, source_id),
                                     params),
             schema));
}

}  // namespace s2v
