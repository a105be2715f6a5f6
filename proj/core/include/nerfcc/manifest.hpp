// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/camera.hpp"
#include "nerfcc/sh.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nerfcc {

struct ManifestImage {
  std::string path;  // relative to the manifest directory
  PinholeCamera camera;
  std::optional<SHLighting> lighting;  // ground-truth lighting, synthetic sets only
};

struct OverlapPair {
  int i = 0;
  int j = 0;
  std::string mask_path;
};

/// Posed image set plus overlap masks. JSON on disk; the parser rejects
/// unknown keys at every nesting level (schema in README).
struct DatasetManifest {
  uint64_t seed = 0;
  std::vector<ManifestImage> images;
  std::vector<OverlapPair> overlaps;
  std::string base_dir;  // set by load_manifest; not serialized

  void validate() const;
  std::string resolve(const std::string& relative_path) const;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

/// 27 numbers, row-major over (coefficient, channel).
std::vector<double> lighting_to_flat(const SHLighting& l);
SHLighting lighting_from_flat(const std::vector<double>& v);

}  // namespace nerfcc
