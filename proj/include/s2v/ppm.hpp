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

#include "s2v/hash.hpp"
#include "s2v/raster.hpp"

namespace s2v {

/// Binary PPM (P6, maxval 255). Byte-exact across runs.
inline std::string encode_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()),
             img.pixels.size());
  return out;
}

inline void write_ppm(const Image& img, const std::filesystem::path& path) {
  write_file(path, encode_ppm(img));
}

inline Image read_ppm(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  size_t pos = 0;
  auto skip_space = [&] {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_token = [&]() -> std::string {
    skip_space();
    size_t start = pos;
    while (pos < data.size() &&
           !std::isspace(static_cast<unsigned char>(data[pos])))
      ++pos;
    return data.substr(start, pos - start);
  };
  if (read_token() != "P6")
    throw ParseError("not a P6 PPM file: " + path.string());
  Image img;
  try {
    img.width = std::stoi(read_token());
    img.height = std::stoi(read_token());
    const int maxval = std::stoi(read_token());
    if (maxval != 255) throw ParseError("PPM maxval must be 255");
  } catch (const std::logic_error&) {
    throw ParseError("malformed PPM header: " + path.string());
  }
  if (img.width <= 0 || img.height <= 0)
    throw ParseError("malformed PPM size: " + path.string());
  ++pos;  // single whitespace after maxval
  const size_t need = static_cast<size_t>(3) * img.width * img.height;
  if (data.size() - pos < need)
    throw ParseError("truncated PPM data: " + path.string());
  img.pixels.assign(data.begin() + static_cast<std::ptrdiff_t>(pos),
                    data.begin() + static_cast<std::ptrdiff_t>(pos + need));
  img.coverage.assign(static_cast<size_t>(img.width) * img.height, 0);
  return img;
}

}  // namespace s2v
