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

#include <cstdint>
#include <optional>
#include <vector>

#include "s2v/raster.hpp"
#include "s2v/rle.hpp"

namespace s2v {

enum class CompositeMode { kOverlay, kReplace };

/// Fill used for masked regions when no clean plate is supplied.
inline constexpr std::uint8_t kDefaultPlateGray = 64;

struct CompositeResult {
  Image image;
  std::int64_t residual_mask_area = 0;  // masked pixels no avatar covered
  bool used_default_plate = false;
};

/// Overlay: render pixels win wherever the render covered them. Replace:
/// pixels under any original-entity mask are first filled from the clean
/// plate (or the default gray fill), then the render is composited on top.
inline CompositeResult composite(const Image& render, const Image& background,
                                 const std::vector<RleMask>& masks,
                                 CompositeMode mode,
                                 const Image* plate = nullptr) {
  if (render.width != background.width || render.height != background.height)
    throw DataError("render and background dimensions differ");
  if (plate != nullptr &&
      (plate->width != background.width || plate->height != background.height))
    throw DataError("plate and background dimensions differ");

  CompositeResult result;
  result.image = background;
  result.image.coverage.assign(
      static_cast<size_t>(background.width) * background.height, 0);
  const size_t pixel_count =
      static_cast<size_t>(background.width) * background.height;

  if (mode == CompositeMode::kReplace) {
    std::vector<std::uint8_t> merged(pixel_count, 0);
    for (const auto& mask : masks) {
      if (mask.width != background.width || mask.height != background.height)
        throw DataError("mask dimensions differ from the background");
      const auto decoded = decode_mask(mask);
      for (size_t i = 0; i < pixel_count; ++i) merged[i] |= decoded[i];
    }
    result.used_default_plate = plate == nullptr;
    for (size_t i = 0; i < pixel_count; ++i) {
      if (!merged[i]) continue;
      if (plate != nullptr) {
        result.image.pixels[3 * i] = plate->pixels[3 * i];
        result.image.pixels[3 * i + 1] = plate->pixels[3 * i + 1];
        result.image.pixels[3 * i + 2] = plate->pixels[3 * i + 2];
      } else {
        result.image.pixels[3 * i] = kDefaultPlateGray;
        result.image.pixels[3 * i + 1] = kDefaultPlateGray;
        result.image.pixels[3 * i + 2] = kDefaultPlateGray;
      }
      if (!render.coverage[i]) ++result.residual_mask_area;
    }
  }

  for (size_t i = 0; i < pixel_count; ++i) {
    if (!render.coverage[i]) continue;
    result.image.pixels[3 * i] = render.pixels[3 * i];
    result.image.pixels[3 * i + 1] = render.pixels[3 * i + 1];
    result.image.pixels[3 * i + 2] = render.pixels[3 * i + 2];
    result.image.coverage[i] = 1;
  }
  return result;
}

}  // namespace s2v
