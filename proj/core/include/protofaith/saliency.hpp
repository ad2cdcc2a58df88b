#pragma once

#include <cstdint>
#include <string>

#include "protofaith/model.hpp"
#include "protofaith/tensor.hpp"

namespace protofaith {

/// `oracle` labels brute-force occlusion maps used by the test harness; the
/// CLI only exposes the first three.
enum class SaliencyMethod { upsample, smoothgrads, prp, oracle };

std::string saliency_method_name(SaliencyMethod m);
SaliencyMethod parse_saliency_method(const std::string& name);

/// Per-pixel nonnegative importance at input resolution.
struct SaliencyMap {
  Tensor values;  // [Hin, Win]
  SaliencyMethod method = SaliencyMethod::upsample;
  Target target;
  std::string image_id;
};

/// Boolean pixel-selection grid with its requested area fraction.
struct PixelMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;
  std::int64_t count = 0;
  double fraction = 0.0;

  bool test(int row, int col) const {
    return bits[static_cast<std::size_t>(row) * width + col] != 0;
  }
  void set(int row, int col) {
    auto& b = bits[static_cast<std::size_t>(row) * width + col];
    count += b == 0;
    b = 1;
  }
  static PixelMask empty(int height, int width);
};

/// Tight bounding box of a mask, carried with the mask that produced it.
struct PartPatch {
  int top = 0, left = 0, bottom = 0, right = 0;  // inclusive-exclusive
  std::string image_id;
  PixelMask mask;

  bool full_image() const {
    return top == 0 && left == 0 && bottom == mask.height && right == mask.width;
  }
};

/// ProtoPNet visualisation: bicubic upsample, then shift to nonnegative.
/// The companion crop mask is percentile_mask(map, 0.95).
SaliencyMap upsample_protopnet(const SimilarityMap& map, int out_h, int out_w);

/// ProtoTree visualisation: keep only the argmax cell, then bicubic upsample.
SaliencyMap upsample_prototree(const SimilarityMap& map, int out_h, int out_w);

/// Pixels at or above the given percentile of the map values.
PixelMask percentile_mask(const SaliencyMap& map, double percentile);

struct SmoothgradsOptions {
  int samples = 10;
  double noise_ratio = 0.2;
  std::uint64_t seed = 0;
};

/// Gradient of the similarity score at the frozen target cell with respect to
/// the input image: the chain through the similarity function and the
/// backbone that Smoothgrads averages over noisy samples.
Tensor similarity_input_gradient(const ModelBundle& model, const Tensor& image,
                                 const Target& target);

/// Smoothgrads x input on the similarity score at the frozen target cell.
/// sigma = noise_ratio * (max(x) - min(x)); with noise_ratio == 0 the noise
/// path is skipped entirely and the result equals plain gradient x input.
SaliencyMap smoothgrads_x_input(const ModelBundle& model, const Tensor& image,
                                const Target& target, const SmoothgradsOptions& opts);

/// PRP-style relevance at input pixels, before post-processing: similarity
/// score distributed over latent channels by squared-distance share, then
/// propagated with the composite rule config (z+ hidden, zB input layer).
Tensor prp_input_relevance(const ModelBundle& model, const Tensor& image, const Target& target);

/// PRP-style saliency: prp_input_relevance post-processed without the
/// absolute-value step (negatives clamp to zero after channel averaging).
SaliencyMap prp(const ModelBundle& model, const Tensor& image, const Target& target);

enum class Rectify { absolute, clamp_negative };

/// Channel mean -> rectify -> 5x5 Gaussian blur.
Tensor postprocess_saliency(const Tensor& raw_chw, Rectify rectify = Rectify::absolute);

/// The round(a * H * W) highest-saliency pixels (at least one for a > 0),
/// ties broken in row-major order.
PixelMask top_fraction_mask(const SaliencyMap& saliency, double fraction);

/// Tight bounding box of a nonempty mask; the crop is rectangular.
PartPatch crop_patch(const Tensor& image, const PixelMask& mask);

/// Dispatches on the method; `upsample` picks the ProtoPNet or ProtoTree
/// variant according to the bundle's target policy.
SaliencyMap compute_saliency(const ModelBundle& model, const Tensor& image, const Target& target,
                             SaliencyMethod method, const SmoothgradsOptions& opts = {});

inline constexpr double kPrpStabilizer = 1e-9;

}  // namespace protofaith
