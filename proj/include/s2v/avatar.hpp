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
#include <string>
#include <utility>
#include <vector>

#include "s2v/core.hpp"
#include "s2v/pose.hpp"

namespace s2v {

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::string entity_id;
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * norm(cross(b - a, c - a));
}

inline void validate_mesh(const Mesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (int idx : t)
      if (idx < 0 || idx >= n) throw DataError("triangle index out of range");
    if (triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]],
                      mesh.vertices[t[2]]) <= 1e-12)
      throw DataError("degenerate triangle in mesh " + mesh.entity_id);
  }
}

/// The fixed 16-bone skeleton over COCO joints: head (nose-eye and
/// nose-shoulder links plus the shoulder bar), arms, torso and legs.
inline constexpr std::array<std::pair<int, int>, 16> kAvatarBones = {{
    {kNose, kLeftEye},
    {kNose, kRightEye},
    {kNose, kLeftShoulder},
    {kNose, kRightShoulder},
    {kLeftShoulder, kRightShoulder},
    {kLeftShoulder, kLeftElbow},
    {kLeftElbow, kLeftWrist},
    {kRightShoulder, kRightElbow},
    {kRightElbow, kRightWrist},
    {kLeftShoulder, kLeftHip},
    {kRightShoulder, kRightHip},
    {kLeftHip, kRightHip},
    {kLeftHip, kLeftKnee},
    {kLeftKnee, kLeftAnkle},
    {kRightHip, kRightKnee},
    {kRightKnee, kRightAnkle},
}};

struct AvatarParams {
  double radius = 0.05;  // meters
  int sides = 8;
};

/// One closed prism per bone: `sides` ring vertices at each end plus the two
/// joint positions as cap centers (2*sides + 2 vertices, 4*sides triangles).
/// Joints are root-local; every vertex is rotated by yaw_total about +Y and
/// translated by the pose root. Zero-length bones are skipped with a log
/// entry.
inline Mesh build_avatar(const SkeletonPose& pose, double yaw_total,
                         const AvatarParams& params = {},
                         std::vector<std::string>* log = nullptr) {
  validate_pose(pose);
  if (params.sides < 3) throw DataError("prism needs at least 3 sides");
  if (params.radius <= 0.0) throw DataError("prism radius must be positive");
  Mesh mesh;
  for (const auto& [j0, j1] : kAvatarBones) {
    const Vec3 p0 = pose.joints[j0];
    const Vec3 p1 = pose.joints[j1];
    const Vec3 axis = p1 - p0;
    const double length = norm(axis);
    if (length < 1e-9) {
      if (log != nullptr)
        log->push_back("avatar: skipped zero-length bone " +
                       std::to_string(j0) + "-" + std::to_string(j1));
      continue;
    }
    const Vec3 dir = {axis.x / length, axis.y / length, axis.z / length};
    const Vec3 ref =
        std::abs(dir.y) < 0.9 ? Vec3{0.0, 1.0, 0.0} : Vec3{1.0, 0.0, 0.0};
    const Vec3 u = normalized(cross(dir, ref));
    const Vec3 v = cross(dir, u);

    const int base = static_cast<int>(mesh.vertices.size());
    const int sides = params.sides;
    for (int s = 0; s < sides; ++s) {
      const double angle = 2.0 * kPi * s / sides;
      const Vec3 offset = params.radius * (std::cos(angle) * u) +
                          params.radius * (std::sin(angle) * v);
      mesh.vertices.push_back(p0 + offset);
      mesh.vertices.push_back(p1 + offset);
    }
    const int cap0 = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(p0);
    const int cap1 = cap0 + 1;
    mesh.vertices.push_back(p1);
    for (int s = 0; s < sides; ++s) {
      const int next = (s + 1) % sides;
      const int r0 = base + 2 * s;
      const int r1 = base + 2 * s + 1;
      const int n0 = base + 2 * next;
      const int n1 = base + 2 * next + 1;
      mesh.triangles.push_back({r0, r1, n1});
      mesh.triangles.push_back({r0, n1, n0});
      mesh.triangles.push_back({cap0, n0, r0});
      mesh.triangles.push_back({cap1, r1, n1});
    }
  }
  for (auto& vertex : mesh.vertices)
    vertex = rotate_yaw(vertex, yaw_total) + pose.root_t;
  return mesh;
}

}  // namespace s2v
