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

#include <string>

#include "json.hpp"
#include "s2v/core.hpp"

namespace s2v {

using Json = nlohmann::json;

inline Json parse_json(const std::string& text, const std::string& what) {
  Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ParseError("malformed " + what + " document");
  return doc;
}

inline const Json& require_field(const Json& obj, const char* key,
                                 const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw ParseError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

inline std::string require_string(const Json& obj, const char* key,
                                  const std::string& where) {
  const Json& v = require_field(obj, key, where);
  if (!v.is_string())
    throw ParseError(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline double require_number(const Json& obj, const char* key,
                             const std::string& where) {
  const Json& v = require_field(obj, key, where);
  if (!v.is_number())
    throw ParseError(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

inline int require_int(const Json& obj, const char* key,
                       const std::string& where) {
  const Json& v = require_field(obj, key, where);
  if (!v.is_number_integer())
    throw ParseError(where + ": field '" + key + "' must be an integer");
  return v.get<int>();
}

inline const Json& require_array(const Json& obj, const char* key,
                                 const std::string& where) {
  const Json& v = require_field(obj, key, where);
  if (!v.is_array())
    throw ParseError(where + ": field '" + key + "' must be an array");
  return v;
}

inline Vec3 parse_vec3(const Json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() ||
      !v[1].is_number() || !v[2].is_number())
    throw ParseError(where + ": expected [x, y, z]");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

inline Json vec3_to_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

}  // namespace s2v
