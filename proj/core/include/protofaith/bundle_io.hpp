#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "protofaith/model.hpp"

namespace protofaith {

/// CRC-32 (polynomial 0xEDB88320) over a byte span.
std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

/// Serializes a bundle into the "PXEB" container: little-endian fixed layout,
/// CRC-32 checksum over everything after the magic. Rejects bundles that fail
/// validation (e.g. zero prototypes). See docs/bundle_format.md.
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);

/// Lossless counterpart of save_bundle; rejects bad magic, unsupported
/// versions and checksum mismatches with precise diagnostics.
ModelBundle load_bundle(const std::filesystem::path& path);

inline constexpr std::uint32_t kBundleVersion = 1;

}  // namespace protofaith
