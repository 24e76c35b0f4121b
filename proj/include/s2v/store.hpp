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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "s2v/hash.hpp"
#include "s2v/jsonio.hpp"
#include "s2v/registry.hpp"

namespace s2v {

/// Content-addressed artifact store. Artifacts are keyed by the digest of
/// (stage id, canonical params, sorted input hashes); a published artifact
/// is immutable and carries the content digest of every payload so reads
/// can detect corruption.
class ArtifactStore {
 public:
  struct Record {
    std::string action_hash;
    std::string stage_id;
    std::map<std::string, std::string> input_hashes;    // kind name -> hash
    std::map<std::string, std::string> payload_digests; // kind name -> digest
  };

  explicit ArtifactStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_ / "objects");
  }

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path object_dir(const std::string& action_hash) const {
    return root_ / "objects" / action_hash;
  }

  std::filesystem::path payload_path(const std::string& action_hash,
                                     Kind kind) const {
    return object_dir(action_hash) / "out" / kind_name(kind);
  }

  bool published(const std::string& action_hash) const {
    return std::filesystem::exists(object_dir(action_hash) / "meta.json");
  }

  std::optional<Record> lookup(const std::string& action_hash) const {
    const auto meta_path = object_dir(action_hash) / "meta.json";
    if (!std::filesystem::exists(meta_path)) return std::nullopt;
    Json meta = parse_json(read_file(meta_path), "store meta");
    Record record;
    record.action_hash = action_hash;
    record.stage_id = require_string(meta, "stage", "store meta");
    for (auto it = meta.at("inputs").begin(); it != meta.at("inputs").end();
         ++it)
      record.input_hashes[it.key()] = it.value().get<std::string>();
    for (auto it = meta.at("payloads").begin(); it != meta.at("payloads").end();
         ++it)
      record.payload_digests[it.key()] = it.value().get<std::string>();
    return record;
  }

  /// Re-hashes every payload against the recorded digest.
  void verify(const Record& record) const {
    for (const auto& [kind, digest] : record.payload_digests) {
      const auto path = object_dir(record.action_hash) / "out" / kind;
      if (!std::filesystem::exists(path) || hash_path(path) != digest)
        throw DataError("store corruption: payload '" + kind +
                        "' of " + record.action_hash +
                        " does not match its recorded digest");
    }
  }

  /// Clears any partial output of a failed earlier run.
  std::filesystem::path prepare(const std::string& action_hash) {
    const auto dir = object_dir(action_hash);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir / "out");
    return dir / "out";
  }

  /// Writing meta.json marks the artifact as published; it must be the last
  /// step so partially written objects are never reused.
  void publish(const std::string& action_hash, const std::string& stage_id,
               const Json& params,
               const std::map<std::string, std::string>& input_hashes,
               const std::map<std::string, std::string>& payload_digests) {
    Json inputs = Json::object();
    for (const auto& [k, v] : input_hashes) inputs[k] = v;
    Json payloads = Json::object();
    for (const auto& [k, v] : payload_digests) payloads[k] = v;
    const Json meta{{"stage", stage_id},
                    {"params", params},
                    {"inputs", inputs},
                    {"payloads", payloads}};
    write_file(object_dir(action_hash) / "meta.json", meta.dump() + "\n");
  }

 private:
  std::filesystem::path root_;
};

}  // namespace s2v
