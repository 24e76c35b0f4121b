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

#include <array>
#include <cstddef>

#include "s2v/core.hpp"
#include "s2v/jsonio.hpp"

namespace s2v {

inline constexpr std::size_t kJointCount = 17;

/// COCO keypoint indices.
enum CocoJoint : int {
  kNose = 0,
  kLeftEye = 1,
  kRightEye = 2,
  kLeftEar = 3,
  kRightEar = 4,
  kLeftShoulder = 5,
  kRightShoulder = 6,
  kLeftElbow = 7,
  kRightElbow = 8,
  kLeftWrist = 9,
  kRightWrist = 10,
  kLeftHip = 11,
  kRightHip = 12,
  kLeftKnee = 13,
  kRightKnee = 14,
  kLeftAnkle = 15,
  kRightAnkle = 16,
};

/// A human skeleton sample: 17 joints in meters, root-local (+Y up), plus a
/// world-space root translation and a yaw about +Y.
struct SkeletonPose {
  std::array<Vec3, kJointCount> joints{};
  Vec3 root_t{};
  double root_yaw = 0.0;

  friend bool operator==(const SkeletonPose& a, const SkeletonPose& b) {
    return a.joints == b.joints && a.root_t == b.root_t &&
           a.root_yaw == b.root_yaw;
  }
};

inline void validate_pose(const SkeletonPose& pose) {
  for (const auto& j : pose.joints)
    if (!is_finite(j)) throw DataError("pose joint not finite");
  if (!is_finite(pose.root_t) || !std::isfinite(pose.root_yaw))
    throw DataError("pose root not finite");
}

inline Json pose_to_json(const SkeletonPose& pose) {
  validate_pose(pose);
  Json joints = Json::array();
  for (const auto& j : pose.joints) joints.push_back(vec3_to_json(j));
  return Json{{"joints", joints},
              {"root", Json{{"t", vec3_to_json(pose.root_t)},
                            {"yaw", pose.root_yaw}}}};
}

/// Parses {joints:[[x,y,z] x17], root:{t:[3], yaw}}; the yaw is normalized
/// to [-pi, pi).
inline SkeletonPose pose_from_json(const Json& v, const std::string& where) {
  SkeletonPose pose;
  const Json& joints = require_array(v, "joints", where);
  if (joints.size() != kJointCount)
    throw ParseError(where + ": joint count must be 17, got " +
                     std::to_string(joints.size()));
  for (std::size_t i = 0; i < kJointCount; ++i)
    pose.joints[i] = parse_vec3(joints[i], where);
  const Json& root = require_field(v, "root", where);
  pose.root_t = parse_vec3(require_field(root, "t", where), where);
  pose.root_yaw = normalize_yaw(require_number(root, "yaw", where));
  validate_pose(pose);
  return pose;
}

}  // namespace s2v
