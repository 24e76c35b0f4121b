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

// Deterministic synthetic fixtures: a 40-frame single-person swing sequence
// and a 30-frame two-person crossing sequence, with detections derived by
// projecting the scripted skeletons through the default camera.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "s2v/analysis.hpp"
#include "s2v/ppm.hpp"
#include "s2v/raster.hpp"

namespace fs = std::filesystem;
using namespace s2v;

namespace {

SkeletonPose scripted_pose(int frame, int frame_count, double x0, double dx,
                           double z, double phase) {
  SkeletonPose pose;
  const double t = 2.0 * kPi * frame / frame_count + phase;
  const double swing = 0.9 * std::sin(t);
  const double gait = 0.25 * std::sin(2.0 * t);

  auto& j = pose.joints;
  j[kNose] = {0.0, 1.62, 0.0};
  j[kLeftEye] = {0.04, 1.66, 0.03};
  j[kRightEye] = {-0.04, 1.66, 0.03};
  j[kLeftEar] = {0.07, 1.63, 0.0};
  j[kRightEar] = {-0.07, 1.63, 0.0};
  j[kLeftShoulder] = {0.18, 1.45, 0.0};
  j[kRightShoulder] = {-0.18, 1.45, 0.0};
  const double arm_l = 0.42 + swing;
  const double arm_r = -0.42 + swing;
  j[kLeftElbow] = j[kLeftShoulder] +
                  Vec3{0.28 * std::sin(arm_l), -0.28 * std::cos(arm_l), 0.02};
  j[kLeftWrist] = j[kLeftElbow] +
                  Vec3{0.26 * std::sin(arm_l), -0.26 * std::cos(arm_l), 0.05};
  j[kRightElbow] = j[kRightShoulder] +
                   Vec3{0.28 * std::sin(arm_r), -0.28 * std::cos(arm_r), 0.02};
  j[kRightWrist] = j[kRightElbow] +
                   Vec3{0.26 * std::sin(arm_r), -0.26 * std::cos(arm_r), 0.05};
  j[kLeftHip] = {0.09, 0.95, 0.0};
  j[kRightHip] = {-0.09, 0.95, 0.0};
  j[kLeftKnee] = {0.10, 0.50, 0.10 * std::sin(gait)};
  j[kRightKnee] = {-0.10, 0.50, -0.10 * std::sin(gait)};
  j[kLeftAnkle] = {0.11, 0.06, 0.05 * std::sin(gait)};
  j[kRightAnkle] = {-0.11, 0.06, -0.05 * std::sin(gait)};

  pose.root_t = {x0 + dx * frame, 0.0, z};
  pose.root_yaw = 0.0;
  return pose;
}

BBox project_bbox(const SkeletonPose& pose, const Camera& camera) {
  const auto view = detail::make_view(camera);
  double x_lo = 1e9, x_hi = -1e9, y_lo = 1e9, y_hi = -1e9;
  for (const auto& joint : pose.joints) {
    const Vec3 world = rotate_yaw(joint, pose.root_yaw) + pose.root_t;
    const auto p =
        detail::project(view, camera.width, camera.height,
                        detail::to_view(view, world));
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
  }
  const double margin = 6.0;
  return {std::floor(x_lo - margin), std::floor(y_lo - margin),
          std::ceil(x_hi + margin), std::ceil(y_hi + margin)};
}

RleMask ellipse_mask(const BBox& box, int height, int width) {
  std::vector<std::uint8_t> pixels(static_cast<size_t>(height) * width, 0);
  const double cx = (box.x_min + box.x_max) / 2.0;
  const double cy = (box.y_min + box.y_max) / 2.0;
  const double rx = box.width() / 2.0;
  const double ry = box.height() / 2.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double nx = (x + 0.5 - cx) / rx;
      const double ny = (y + 0.5 - cy) / ry;
      if (nx * nx + ny * ny <= 1.0)
        pixels[static_cast<size_t>(y) * width + x] = 1;
    }
  }
  return encode_mask(pixels, height, width);
}

struct Actor {
  int track_id;
  double x0, dx, z, phase;
};

void write_fixture(const fs::path& dir, const std::string& stem,
                   const std::vector<Actor>& actors, int frame_count,
                   const Camera& camera) {
  Json detections = Json::array();
  Json poses = Json::array();
  for (int frame = 0; frame < frame_count; ++frame) {
    for (const auto& actor : actors) {
      const SkeletonPose pose =
          scripted_pose(frame, frame_count, actor.x0, actor.dx, actor.z,
                        actor.phase);
      const BBox box = project_bbox(pose, camera);
      const RleMask mask = ellipse_mask(box, camera.height, camera.width);
      detections.push_back(
          Json{{"frame", frame},
               {"bbox", Json::array({box.x_min, box.y_min, box.x_max,
                                     box.y_max})},
               {"class", "person"},
               {"score", 0.9},
               {"mask", Json{{"size", Json::array({mask.height, mask.width})},
                             {"counts", mask.counts}}}});
      Json record = pose_to_json(pose);
      record["track_id"] = actor.track_id;
      record["frame"] = frame;
      poses.push_back(std::move(record));
    }
  }
  write_file(dir / (stem + "_detections.json"), detections.dump(1) + "\n");
  write_file(dir / (stem + "_poses.json"), poses.dump(1) + "\n");
}

Image gradient_background(int width, int height) {
  Image img = Image::blank(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const size_t i = (static_cast<size_t>(y) * width + x) * 3;
      img.pixels[i] = static_cast<std::uint8_t>(40 + 120 * x / width);
      img.pixels[i + 1] = static_cast<std::uint8_t>(60 + 100 * y / height);
      img.pixels[i + 2] = static_cast<std::uint8_t>(180 - 80 * y / height);
    }
  }
  return img;
}

Image plate_background(int width, int height) {
  Image img = Image::blank(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const size_t i = (static_cast<size_t>(y) * width + x) * 3;
      img.pixels[i] = static_cast<std::uint8_t>(30 + 60 * y / height);
      img.pixels[i + 1] = static_cast<std::uint8_t>(110 + 80 * x / width);
      img.pixels[i + 2] = static_cast<std::uint8_t>(90);
    }
  }
  return img;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? argv[1] : "fixtures";
  fs::create_directories(out);
  const Camera camera;  // defaults: 320x240, 60 degree fov

  // Single person, 40 frames, swing-like arm motion.
  write_fixture(out, "swing", {{1, -1.0, 0.05, 0.0, 0.0}}, 40, camera);
  // Two persons crossing over 30 frames at slightly different depths.
  write_fixture(out, "crossing",
                {{1, -1.2, 0.05, 0.0, 0.0}, {2, 1.2, -0.05, -0.4, 2.1}}, 30,
                camera);

  write_ppm(gradient_background(camera.width, camera.height),
            out / "background.ppm");
  write_ppm(plate_background(camera.width, camera.height), out / "plate.ppm");
  std::cout << "fixtures written to " << out << "\n";
  return 0;
}
