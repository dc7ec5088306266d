#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fairsite/types.hpp"

namespace fairsite {

class DatasetError : public std::runtime_error {
 public:
  explicit DatasetError(const std::string& what) : std::runtime_error(what) {}
};

// Dataset files are UTF-8 JSON lines: one manifest object, then one
// RankingInstance per line. Absent modalities are serialized as null.
// Output is byte-deterministic for identical input.
void save_dataset(const DatasetManifest& manifest,
                  const std::vector<RankingInstance>& instances,
                  const std::string& path);

// Streaming load; every yielded instance has passed validation. Errors are
// reported with the 1-based record index.
DatasetManifest load_dataset(
    const std::string& path,
    const std::function<void(RankingInstance&&)>& sink);

// Convenience eager load.
std::pair<DatasetManifest, std::vector<RankingInstance>> load_dataset(
    const std::string& path);

// Stable content hash of a manifest, used to pair checkpoints with the
// dataset they were trained on.
std::string manifest_hash(const DatasetManifest& manifest);

}  // namespace fairsite
