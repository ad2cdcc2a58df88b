#include "protofaith/manifest.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "protofaith/error.hpp"

namespace protofaith {

using json = nlohmann::ordered_json;

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  }

  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    if (doc.contains("normalization")) {
      const auto& n = doc["normalization"];
      for (int c = 0; c < 3; ++c) {
        m.normalization.mean[static_cast<std::size_t>(c)] = n.at("mean").at(c).get<float>();
        m.normalization.stddev[static_cast<std::size_t>(c)] = n.at("std").at(c).get<float>();
      }
    }
    if (doc.contains("fill_mean")) {
      for (int c = 0; c < 3; ++c) {
        m.fill_mean[static_cast<std::size_t>(c)] = doc["fill_mean"].at(c).get<float>();
      }
    }
    for (const auto& e : doc.at("entries")) {
      ManifestEntry entry;
      entry.image_path = e.at("image").get<std::string>();
      entry.id = e.contains("id") ? e["id"].get<std::string>() : entry.image_path;
      if (e.contains("segmentation")) entry.segmentation_path = e["segmentation"].get<std::string>();
      if (e.contains("label")) entry.label = e["label"].get<int>();
      if (e.contains("split")) entry.split = e["split"].get<std::string>();
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw IoError("manifest " + path.string() + " schema error: " + e.what());
  }

  if (m.entries.empty()) throw IoError("manifest " + path.string() + " lists no entries");
  std::set<std::string> ids;
  for (const auto& entry : m.entries) {
    if (!ids.insert(entry.id).second) {
      throw IoError("duplicate image id '" + entry.id + "' in manifest " + path.string());
    }
    if (!std::filesystem::exists(m.resolve(entry.image_path))) {
      throw IoError("manifest image not found: " + m.resolve(entry.image_path).string());
    }
    if (entry.segmentation_path &&
        !std::filesystem::exists(m.resolve(*entry.segmentation_path))) {
      throw IoError("manifest segmentation not found: " +
                    m.resolve(*entry.segmentation_path).string());
    }
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  json doc;
  doc["normalization"] = {
      {"mean", {manifest.normalization.mean[0], manifest.normalization.mean[1],
                manifest.normalization.mean[2]}},
      {"std", {manifest.normalization.stddev[0], manifest.normalization.stddev[1],
               manifest.normalization.stddev[2]}}};
  doc["fill_mean"] = {manifest.fill_mean[0], manifest.fill_mean[1], manifest.fill_mean[2]};
  doc["entries"] = json::array();
  for (const auto& entry : manifest.entries) {
    json e;
    e["id"] = entry.id;
    e["image"] = entry.image_path;
    if (entry.segmentation_path) e["segmentation"] = *entry.segmentation_path;
    if (entry.label) e["label"] = *entry.label;
    e["split"] = entry.split;
    doc["entries"].push_back(std::move(e));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("failed writing manifest " + path.string());
}

}  // namespace protofaith
