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
#include <vector>

#include "s2v/core.hpp"

namespace s2v {

/// Run-length-encoded binary mask over a full image. Runs are row-major and
/// alternate background/foreground, starting with a (possibly zero) count of
/// background pixels. The run counts must sum to height*width.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<std::int64_t> counts;

  friend bool operator==(const RleMask& a, const RleMask& b) {
    return a.height == b.height && a.width == b.width && a.counts == b.counts;
  }
};

inline void validate_mask(const RleMask& mask) {
  if (mask.height <= 0 || mask.width <= 0)
    throw DataError("mask size must be positive");
  std::int64_t total = 0;
  for (auto c : mask.counts) {
    if (c < 0) throw DataError("mask run count negative");
    total += c;
  }
  if (total != static_cast<std::int64_t>(mask.height) * mask.width)
    throw DataError("mask run counts do not cover the image");
}

/// Expands to one byte per pixel (0 background, 1 foreground), row-major.
inline std::vector<std::uint8_t> decode_mask(const RleMask& mask) {
  validate_mask(mask);
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<size_t>(mask.height) * mask.width);
  std::uint8_t value = 0;
  for (auto c : mask.counts) {
    out.insert(out.end(), static_cast<size_t>(c), value);
    value = static_cast<std::uint8_t>(1 - value);
  }
  return out;
}

inline RleMask encode_mask(const std::vector<std::uint8_t>& pixels, int height,
                           int width) {
  if (static_cast<std::int64_t>(pixels.size()) !=
      static_cast<std::int64_t>(height) * width)
    throw DataError("pixel buffer does not match mask size");
  RleMask mask;
  mask.height = height;
  mask.width = width;
  std::uint8_t value = 0;
  std::int64_t run = 0;
  for (auto p : pixels) {
    const std::uint8_t v = p ? 1 : 0;
    if (v == value) {
      ++run;
    } else {
      mask.counts.push_back(run);
      value = v;
      run = 1;
    }
  }
  mask.counts.push_back(run);
  return mask;
}

}  // namespace s2v
