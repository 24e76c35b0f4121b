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
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "s2v/jsonio.hpp"
#include "s2v/pose.hpp"
#include "s2v/rle.hpp"

namespace s2v {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct Detection {
  int frame = 0;
  BBox bbox;
  std::string class_name;
  double score = 0.0;
  std::optional<RleMask> mask;
};

struct Track {
  int track_id = 0;
  std::string class_name;
  std::map<int, Detection> observations;  // frame -> detection
};

struct PosedTrack {
  Track track;
  std::map<int, SkeletonPose> poses;  // keys are a subset of observed frames
};

struct TrackParams {
  double iou_threshold = 0.3;
  int max_missed = 5;
  int frame_cap = 64;  // max detections considered per frame
};

// ---------------------------------------------------------------------------
// Detection ingestion
// ---------------------------------------------------------------------------

/// Parses a detection document (array of {frame, bbox, class, score, mask?})
/// into frame-grouped lists sorted by (frame, x_min, y_min). Degenerate boxes
/// are rejected with the offending record index.
inline std::map<int, std::vector<Detection>> ingest_detections(
    const std::string& text) {
  Json root = parse_json(text, "detections");
  if (!root.is_array())
    throw ParseError("detections document must be an array");
  std::map<int, std::vector<Detection>> frames;
  int index = 0;
  for (const Json& record : root) {
    const std::string where = "record " + std::to_string(index);
    Detection det;
    det.frame = require_int(record, "frame", where);
    if (det.frame < 0) throw ParseError(where + ": frame must be >= 0");
    const Json& bbox = require_array(record, "bbox", where);
    if (bbox.size() != 4)
      throw ParseError(where + ": bbox must be [x_min,y_min,x_max,y_max]");
    det.bbox = {bbox[0].get<double>(), bbox[1].get<double>(),
                bbox[2].get<double>(), bbox[3].get<double>()};
    if (!det.bbox.valid())
      throw ParseError(where + ": degenerate box (x_min >= x_max or " +
                       "y_min >= y_max)");
    det.class_name = require_string(record, "class", where);
    det.score = require_number(record, "score", where);
    if (det.score < 0.0 || det.score > 1.0)
      throw ParseError(where + ": score outside [0,1]");
    if (record.contains("mask")) {
      const Json& m = record["mask"];
      RleMask mask;
      const Json& size = require_array(m, "size", where + ".mask");
      if (size.size() != 2)
        throw ParseError(where + ": mask size must be [height,width]");
      mask.height = size[0].get<int>();
      mask.width = size[1].get<int>();
      for (const Json& c : require_array(m, "counts", where + ".mask"))
        mask.counts.push_back(c.get<std::int64_t>());
      try {
        validate_mask(mask);
      } catch (const DataError& e) {
        throw ParseError(where + ": " + e.what());
      }
      det.mask = std::move(mask);
    }
    frames[det.frame].push_back(std::move(det));
    ++index;
  }
  for (auto& [frame, list] : frames) {
    std::sort(list.begin(), list.end(),
              [](const Detection& a, const Detection& b) {
                return std::tie(a.bbox.x_min, a.bbox.y_min) <
                       std::tie(b.bbox.x_min, b.bbox.y_min);
              });
  }
  return frames;
}

/// Canonical re-emission of a detection document: frame-major order, sorted
/// keys, shortest round-tripping decimals.
inline std::string serialize_detections(
    const std::map<int, std::vector<Detection>>& frames) {
  Json arr = Json::array();
  for (const auto& [frame, list] : frames) {
    for (const auto& det : list) {
      Json record{{"frame", frame},
                  {"bbox", Json::array({det.bbox.x_min, det.bbox.y_min,
                                        det.bbox.x_max, det.bbox.y_max})},
                  {"class", det.class_name},
                  {"score", det.score}};
      if (det.mask)
        record["mask"] = Json{{"size", Json::array({det.mask->height,
                                                    det.mask->width})},
                              {"counts", det.mask->counts}};
      arr.push_back(std::move(record));
    }
  }
  return arr.dump() + "\n";
}

// ---------------------------------------------------------------------------
// IoU
// ---------------------------------------------------------------------------

inline double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(
      0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(
      0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// ---------------------------------------------------------------------------
// Optimal assignment
// ---------------------------------------------------------------------------

/// Exact maximum-total-weight one-to-one assignment (Kuhn-Munkres with
/// potentials, O(n^3)). Weights must be >= 0; returns for each row the
/// assigned column or -1. Rows may stay unassigned only when the matrix is
/// wider than tall; zero-weight pairs are reported as unassigned.
inline std::vector<int> max_weight_assignment(
    const std::vector<std::vector<double>>& weights) {
  const int rows = static_cast<int>(weights.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(weights[0].size());
  const int n = std::max(rows, cols);
  if (n == 0) return {};
  // Pad to square and convert to costs for the minimization form.
  double max_w = 0.0;
  for (const auto& row : weights)
    for (double w : row) max_w = std::max(max_w, w);
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, max_w));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) cost[r][c] = max_w - weights[r][c];

  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(rows, -1);
  for (int j = 1; j <= n; ++j) {
    const int r = p[j] - 1;
    const int c = j - 1;
    if (r < rows && c < cols && weights[r][c] > 0.0) assignment[r] = c;
  }
  return assignment;
}

// ---------------------------------------------------------------------------
// Track association
// ---------------------------------------------------------------------------

/// Greedy-free tracker: per frame, live tracks (predicted as their last
/// observed box) are matched to detections by an exact maximum-total-IoU
/// assignment. Pairs below the IoU threshold or with differing classes never
/// match. Unmatched detections open new tracks with dense ids in order of
/// first appearance; tracks unmatched for more than max_missed consecutive
/// frames are closed.
inline std::vector<Track> associate_tracks(
    const std::map<int, std::vector<Detection>>& frames,
    const TrackParams& params = {}) {
  struct LiveTrack {
    int index;       // into the result vector
    int last_frame;  // last matched frame
  };
  std::vector<Track> tracks;
  std::vector<LiveTrack> live;
  if (frames.empty()) return tracks;

  const int first = frames.begin()->first;
  const int last = frames.rbegin()->first;
  static const std::vector<Detection> kNoDetections;
  for (int frame = first; frame <= last; ++frame) {
    // Close tracks that have been missing too long.
    std::erase_if(live, [&](const LiveTrack& t) {
      return frame - t.last_frame > params.max_missed;
    });

    auto it = frames.find(frame);
    const std::vector<Detection>& all =
        it == frames.end() ? kNoDetections : it->second;
    std::vector<const Detection*> dets;
    for (const auto& d : all) {
      if (static_cast<int>(dets.size()) >= params.frame_cap) break;
      dets.push_back(&d);
    }
    if (dets.empty()) continue;

    std::vector<std::vector<double>> weights(
        live.size(), std::vector<double>(dets.size(), 0.0));
    for (size_t t = 0; t < live.size(); ++t) {
      const Track& track = tracks[live[t].index];
      const BBox& predicted =
          track.observations.at(live[t].last_frame).bbox;
      for (size_t d = 0; d < dets.size(); ++d) {
        if (track.class_name != dets[d]->class_name) continue;
        const double overlap = iou(predicted, dets[d]->bbox);
        if (overlap >= params.iou_threshold) weights[t][d] = overlap;
      }
    }
    const std::vector<int> match = max_weight_assignment(weights);

    std::vector<char> taken(dets.size(), 0);
    for (size_t t = 0; t < live.size(); ++t) {
      if (match[t] < 0) continue;
      Track& track = tracks[live[t].index];
      track.observations[frame] = *dets[match[t]];
      live[t].last_frame = frame;
      taken[match[t]] = 1;
    }
    for (size_t d = 0; d < dets.size(); ++d) {
      if (taken[d]) continue;
      Track track;
      track.track_id = static_cast<int>(tracks.size()) + 1;
      track.class_name = dets[d]->class_name;
      track.observations[frame] = *dets[d];
      tracks.push_back(std::move(track));
      live.push_back({static_cast<int>(tracks.size()) - 1, frame});
    }
  }
  return tracks;
}

// ---------------------------------------------------------------------------
// Pose attachment
// ---------------------------------------------------------------------------

struct AttachResult {
  std::vector<PosedTrack> tracks;
  std::vector<std::string> warnings;
};

/// Joins a pose document (array of {track_id, frame, root, joints}) onto the
/// given tracks. Records referencing unknown (track_id, frame) pairs are
/// dropped with a warning; malformed records are errors.
inline AttachResult attach_poses(const std::vector<Track>& tracks,
                                 const std::string& text) {
  Json root = parse_json(text, "poses");
  if (!root.is_array()) throw ParseError("pose document must be an array");
  AttachResult result;
  for (const auto& t : tracks) result.tracks.push_back({t, {}});
  std::map<int, PosedTrack*> by_id;
  for (auto& pt : result.tracks) by_id[pt.track.track_id] = &pt;

  int index = 0;
  for (const Json& record : root) {
    const std::string where = "pose record " + std::to_string(index);
    const int track_id = require_int(record, "track_id", where);
    const int frame = require_int(record, "frame", where);
    const Json& joints = require_array(record, "joints", where);
    if (joints.size() != kJointCount)
      throw ParseError(where + ": joint count must be 17, got " +
                       std::to_string(joints.size()));
    SkeletonPose pose = pose_from_json(record, where);
    auto it = by_id.find(track_id);
    if (it == by_id.end() ||
        it->second->track.observations.find(frame) ==
            it->second->track.observations.end()) {
      result.warnings.push_back(where + ": no track " +
                                std::to_string(track_id) + " at frame " +
                                std::to_string(frame) + ", pose dropped");
    } else {
      it->second->poses[frame] = pose;
    }
    ++index;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Smoothing
// ---------------------------------------------------------------------------

namespace detail {

inline double median_window(const std::vector<double>& values, int center,
                            int radius) {
  const int n = static_cast<int>(values.size());
  // Symmetric truncation keeps the window odd, so no midpoint averaging.
  const int r = std::min({radius, center, n - 1 - center});
  std::vector<double> window(values.begin() + (center - r),
                             values.begin() + (center + r + 1));
  std::nth_element(window.begin(), window.begin() + r, window.end());
  return window[r];
}

}  // namespace detail

/// Centered moving median over `window` observations of each track, applied
/// per box coordinate. Edge windows truncate symmetrically. Frame keys,
/// classes, scores and masks are unchanged.
inline std::vector<Track> smooth_tracks(const std::vector<Track>& tracks,
                                        int window) {
  if (window < 1 || window % 2 == 0)
    throw DataError("smoothing window must be an odd integer >= 1");
  const int radius = (window - 1) / 2;
  std::vector<Track> out = tracks;
  for (auto& track : out) {
    std::vector<int> frames;
    for (const auto& [frame, det] : track.observations) frames.push_back(frame);
    std::array<std::vector<double>, 4> coords;
    for (int frame : frames) {
      const BBox& b = track.observations.at(frame).bbox;
      coords[0].push_back(b.x_min);
      coords[1].push_back(b.y_min);
      coords[2].push_back(b.x_max);
      coords[3].push_back(b.y_max);
    }
    for (size_t i = 0; i < frames.size(); ++i) {
      BBox& b = track.observations.at(frames[i]).bbox;
      b.x_min = detail::median_window(coords[0], static_cast<int>(i), radius);
      b.y_min = detail::median_window(coords[1], static_cast<int>(i), radius);
      b.x_max = detail::median_window(coords[2], static_cast<int>(i), radius);
      b.y_max = detail::median_window(coords[3], static_cast<int>(i), radius);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Posed-track document
// ---------------------------------------------------------------------------

namespace detail {

inline Json mask_to_json(const RleMask& mask) {
  return Json{{"size", Json::array({mask.height, mask.width})},
              {"counts", mask.counts}};
}

inline RleMask mask_from_json(const Json& m, const std::string& where) {
  RleMask mask;
  const Json& size = require_array(m, "size", where);
  if (size.size() != 2)
    throw ParseError(where + ": mask size must be [height,width]");
  mask.height = size[0].get<int>();
  mask.width = size[1].get<int>();
  for (const Json& c : require_array(m, "counts", where))
    mask.counts.push_back(c.get<std::int64_t>());
  validate_mask(mask);
  return mask;
}

}  // namespace detail

/// Canonical artifact form of analysis output, consumed by the description
/// stage and by compositing.
inline std::string serialize_posed_tracks(const std::vector<PosedTrack>& tracks) {
  Json arr = Json::array();
  for (const auto& pt : tracks) {
    Json observations = Json::array();
    for (const auto& [frame, det] : pt.track.observations) {
      Json o{{"frame", frame},
             {"bbox", Json::array({det.bbox.x_min, det.bbox.y_min,
                                   det.bbox.x_max, det.bbox.y_max})},
             {"score", det.score}};
      if (det.mask) o["mask"] = detail::mask_to_json(*det.mask);
      observations.push_back(std::move(o));
    }
    Json poses = Json::array();
    for (const auto& [frame, pose] : pt.poses) {
      Json p = pose_to_json(pose);
      p["frame"] = frame;
      poses.push_back(std::move(p));
    }
    arr.push_back(Json{{"track_id", pt.track.track_id},
                       {"class", pt.track.class_name},
                       {"observations", observations},
                       {"poses", poses}});
  }
  return Json{{"version", "1.0"}, {"tracks", arr}}.dump() + "\n";
}

inline std::vector<PosedTrack> deserialize_posed_tracks(
    const std::string& text) {
  Json root = parse_json(text, "posed tracks");
  std::vector<PosedTrack> out;
  for (const Json& t : require_array(root, "tracks", "posed tracks")) {
    PosedTrack pt;
    pt.track.track_id = require_int(t, "track_id", "track");
    pt.track.class_name = require_string(t, "class", "track");
    const std::string where = "track " + std::to_string(pt.track.track_id);
    for (const Json& o : require_array(t, "observations", where)) {
      Detection det;
      det.frame = require_int(o, "frame", where);
      const Json& bbox = require_array(o, "bbox", where);
      if (bbox.size() != 4) throw ParseError(where + ": bbox arity");
      det.bbox = {bbox[0].get<double>(), bbox[1].get<double>(),
                  bbox[2].get<double>(), bbox[3].get<double>()};
      det.class_name = pt.track.class_name;
      det.score = require_number(o, "score", where);
      if (o.contains("mask"))
        det.mask = detail::mask_from_json(o["mask"], where + ".mask");
      pt.track.observations[det.frame] = std::move(det);
    }
    for (const Json& p : require_array(t, "poses", where)) {
      const int frame = require_int(p, "frame", where + ".pose");
      pt.poses[frame] = pose_from_json(p, where + ".pose");
    }
    out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace s2v
