#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "protofaith/netpbm.hpp"

namespace protofaith {

struct ManifestEntry {
  std::string id;  // defaults to the image path
  std::string image_path;
  std::optional<std::string> segmentation_path;
  std::optional<int> label;
  std::string split = "test";
};

/// Dataset description: entries, normalization and the per-channel mean fill
/// values (in model-input space) used by the `mean` deletion policy.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  Normalization normalization;
  std::array<float, 3> fill_mean = {0.0f, 0.0f, 0.0f};
  std::filesystem::path base_dir;  // directory the paths resolve against

  std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
};

/// Parses a manifest, checking id uniqueness and that referenced files exist.
DatasetManifest load_manifest(const std::filesystem::path& path);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace protofaith
