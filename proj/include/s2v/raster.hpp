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
#include <cstdint>
#include <limits>
#include <vector>

#include "s2v/avatar.hpp"
#include "s2v/core.hpp"

namespace s2v {

/// Pinhole camera. Right-handed world, +Y up, meters; the image origin is
/// top-left.
struct Camera {
  Vec3 position{0.0, 1.0, 4.0};
  Vec3 look_at{0.0, 1.0, 0.0};
  Vec3 up{0.0, 1.0, 0.0};
  double vertical_fov = 60.0 * kPi / 180.0;
  int width = 320;
  int height = 240;

  void validate() const {
    if (norm(look_at - position) == 0.0)
      throw DataError("camera position equals look_at");
    if (vertical_fov <= 0.0 || vertical_fov >= kPi)
      throw DataError("camera fov outside (0, pi)");
    if (width <= 0 || height <= 0)
      throw DataError("camera image size must be positive");
    const Vec3 forward = normalized(look_at - position);
    if (norm(cross(forward, up)) < 1e-9)
      throw DataError("camera up is parallel to the view direction");
  }
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;    // row-major RGB
  std::vector<std::uint8_t> coverage;  // 1 where geometry was written

  static Image blank(int width, int height, std::uint8_t value = 0) {
    Image img;
    img.width = width;
    img.height = height;
    img.pixels.assign(static_cast<size_t>(3) * width * height, value);
    img.coverage.assign(static_cast<size_t>(width) * height, 0);
    return img;
  }
};

struct ColoredMesh {
  Mesh mesh;
  Vec3 color{0.5, 0.5, 0.5};  // base RGB in [0,1]
};

namespace detail {

struct ViewBasis {
  Vec3 right, up, forward;
  Vec3 origin;
  double focal = 0.0;  // pixels
};

inline ViewBasis make_view(const Camera& camera) {
  ViewBasis view;
  view.forward = normalized(camera.look_at - camera.position);
  view.right = normalized(cross(view.forward, camera.up));
  view.up = cross(view.right, view.forward);
  view.origin = camera.position;
  view.focal = (camera.height / 2.0) / std::tan(camera.vertical_fov / 2.0);
  return view;
}

inline Vec3 to_view(const ViewBasis& view, const Vec3& p) {
  const Vec3 d = p - view.origin;
  return {dot(view.right, d), dot(view.up, d), dot(view.forward, d)};
}

struct ScreenVertex {
  double x = 0.0, y = 0.0;  // pixel coordinates
  double z = 0.0;           // view-space depth (positive in front)
};

inline ScreenVertex project(const ViewBasis& view, int width, int height,
                            const Vec3& view_point) {
  ScreenVertex out;
  out.z = view_point.z;
  out.x = width / 2.0 + view.focal * view_point.x / view_point.z;
  out.y = height / 2.0 - view.focal * view_point.y / view_point.z;
  return out;
}

inline constexpr double kNearPlane = 1e-3;

/// Clips a view-space triangle against z >= near; returns 0..4 vertices.
inline std::vector<Vec3> clip_near(const Vec3& a, const Vec3& b,
                                   const Vec3& c) {
  const std::array<Vec3, 3> in = {a, b, c};
  std::vector<Vec3> out;
  for (int i = 0; i < 3; ++i) {
    const Vec3& cur = in[i];
    const Vec3& nxt = in[(i + 1) % 3];
    const bool cur_in = cur.z >= kNearPlane;
    const bool nxt_in = nxt.z >= kNearPlane;
    if (cur_in) out.push_back(cur);
    if (cur_in != nxt_in) {
      const double t = (kNearPlane - cur.z) / (nxt.z - cur.z);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

}  // namespace detail

inline constexpr Vec3 kLightDirection = {0.57735026918962584,
                                         -0.57735026918962584,
                                         0.57735026918962584};  // (1,-1,1)/√3

/// Flat-shaded z-buffer rasterization of world-space meshes. No back-face
/// culling; hidden surfaces resolved by nearest view depth with
/// perspective-correct interpolation. Intensity per triangle is
/// max(0.2, |n.l|) against the fixed light direction.
inline Image rasterize(const std::vector<ColoredMesh>& meshes,
                       const Camera& camera) {
  camera.validate();
  Image img = Image::blank(camera.width, camera.height);
  std::vector<double> zbuf(static_cast<size_t>(camera.width) * camera.height,
                           std::numeric_limits<double>::infinity());
  const detail::ViewBasis view = detail::make_view(camera);

  for (const auto& [mesh, color] : meshes) {
    for (const auto& tri : mesh.triangles) {
      const Vec3& w0 = mesh.vertices[tri[0]];
      const Vec3& w1 = mesh.vertices[tri[1]];
      const Vec3& w2 = mesh.vertices[tri[2]];
      const Vec3 n = cross(w1 - w0, w2 - w0);
      const double n_len = norm(n);
      if (n_len == 0.0) continue;
      const double intensity =
          std::max(0.2, std::abs(dot(n, kLightDirection)) / n_len);
      const std::uint8_t rgb[3] = {
          static_cast<std::uint8_t>(
              std::clamp(255.0 * intensity * color.x, 0.0, 255.0)),
          static_cast<std::uint8_t>(
              std::clamp(255.0 * intensity * color.y, 0.0, 255.0)),
          static_cast<std::uint8_t>(
              std::clamp(255.0 * intensity * color.z, 0.0, 255.0))};

      const auto clipped = detail::clip_near(detail::to_view(view, w0),
                                             detail::to_view(view, w1),
                                             detail::to_view(view, w2));
      for (size_t k = 2; k < clipped.size(); ++k) {
        const detail::ScreenVertex v0 =
            detail::project(view, camera.width, camera.height, clipped[0]);
        const detail::ScreenVertex v1 = detail::project(
            view, camera.width, camera.height, clipped[k - 1]);
        const detail::ScreenVertex v2 =
            detail::project(view, camera.width, camera.height, clipped[k]);

        const double area = (v1.x - v0.x) * (v2.y - v0.y) -
                            (v1.y - v0.y) * (v2.x - v0.x);
        if (area == 0.0) continue;
        const int x_lo = std::max(
            0, static_cast<int>(std::floor(std::min({v0.x, v1.x, v2.x}))));
        const int x_hi = std::min(
            camera.width - 1,
            static_cast<int>(std::ceil(std::max({v0.x, v1.x, v2.x}))));
        const int y_lo = std::max(
            0, static_cast<int>(std::floor(std::min({v0.y, v1.y, v2.y}))));
        const int y_hi = std::min(
            camera.height - 1,
            static_cast<int>(std::ceil(std::max({v0.y, v1.y, v2.y}))));
        for (int y = y_lo; y <= y_hi; ++y) {
          for (int x = x_lo; x <= x_hi; ++x) {
            const double px = x + 0.5;
            const double py = y + 0.5;
            const double b0 = ((v1.x - px) * (v2.y - py) -
                               (v1.y - py) * (v2.x - px)) /
                              area;
            const double b1 = ((v2.x - px) * (v0.y - py) -
                               (v2.y - py) * (v0.x - px)) /
                              area;
            const double b2 = 1.0 - b0 - b1;
            if (b0 < 0.0 || b1 < 0.0 || b2 < 0.0) continue;
            // Perspective-correct depth from screen-space barycentrics.
            const double inv_z = b0 / v0.z + b1 / v1.z + b2 / v2.z;
            const double z = 1.0 / inv_z;
            const size_t idx = static_cast<size_t>(y) * camera.width + x;
            if (z >= zbuf[idx]) continue;
            zbuf[idx] = z;
            img.pixels[3 * idx] = rgb[0];
            img.pixels[3 * idx + 1] = rgb[1];
            img.pixels[3 * idx + 2] = rgb[2];
            img.coverage[idx] = 1;
          }
        }
      }
    }
  }
  return img;
}

}  // namespace s2v
