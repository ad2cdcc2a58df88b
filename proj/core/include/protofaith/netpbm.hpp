#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "protofaith/saliency.hpp"
#include "protofaith/tensor.hpp"

namespace protofaith {

/// 8-bit binary PPM (P6), maxval 255. Loaders reject anything else.
struct PpmImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

/// 8-bit binary PGM (P5), maxval 255.
struct PgmImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> gray;
};

PpmImage load_ppm(const std::filesystem::path& path);
void save_ppm(const PpmImage& image, const std::filesystem::path& path);

PgmImage load_pgm(const std::filesystem::path& path);
void save_pgm(const PgmImage& image, const std::filesystem::path& path);

struct Normalization {
  std::array<float, 3> mean = {0.0f, 0.0f, 0.0f};
  std::array<float, 3> stddev = {1.0f, 1.0f, 1.0f};
};

/// [0,1]-scaled, normalized [3,H,W] tensor; bilinear-resized to the target
/// size when it differs from the file. `resized` reports whether that
/// happened.
Tensor image_to_tensor(const PpmImage& image, const Normalization& norm, int target_h,
                       int target_w, bool* resized = nullptr);

/// Binary object mask: pixel > 127 is object. Nearest-neighbor resize when
/// the target size differs.
PixelMask segmentation_to_mask(const PgmImage& image, int target_h, int target_w);

/// Min-max scaled 8-bit dump of a saliency map (constant maps write zeros).
PgmImage saliency_to_pgm(const SaliencyMap& map);

}  // namespace protofaith
