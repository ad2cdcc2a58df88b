#pragma once

#include <cstdint>

#include "protofaith/metrics.hpp"
#include "protofaith/model.hpp"
#include "protofaith/receptive_field.hpp"
#include "protofaith/saliency.hpp"
#include "protofaith/tensor.hpp"

namespace protofaith {

using Region = ReceptiveFieldBox;

/// Synthetic bundle whose similarity at a designated latent cell depends on a
/// known input region R and nothing else: every conv weight whose tap falls
/// outside R's offset inside the cell window is zero, the bias is zero, and
/// the fill value for deletions is zero. Masking pixels outside R therefore
/// leaves the target score unchanged to the last bit, and masking R moves the
/// score by a precomputed closed-form amount.
struct PlantedFixture {
  ModelBundle bundle;
  Tensor image;  // [3,S,S], values on the 8-bit lattice
  Region region;
  int cell_h = 0;
  int cell_w = 0;
  Target target;                            // engine argmax at the designated cell
  double expected_similarity = 0.0;         // closed-form s_m on `image`
  double expected_masked_similarity = 0.0;  // closed-form score with all of R zero-filled
  PixelMask object_segmentation;            // synthetic object box containing R
  Tensor ground_truth_saliency;             // [S,S] indicator of R
};

/// Builds a planted fixture with a single-conv backbone (kernel S-8, stride 2,
/// 5x5 latent grid). The weight scale is calibrated so that zero-filling the
/// top-ranked pixels of R drives the similarity ratio below 0.1 within one
/// ERF grid step of |R|/N. Throws ArgumentError when R does not fit any cell
/// window of the stride lattice.
PlantedFixture gen_planted(std::uint64_t seed, const Region& region, int image_size);

/// A region placed at the far corner of its cell window, away from the cell's
/// bicubic footprint, so upsampling-based saliency misses it.
Region off_grid_region(std::uint64_t seed, int image_size);

/// gen_planted on an off-grid region, with the extra guarantee (checked at
/// generation) that the top-2% mask of the upsampling saliency is disjoint
/// from both R and the object segmentation.
PlantedFixture gen_planted_off_grid(std::uint64_t seed, int image_size = 20);

struct RandomFixtureOptions {
  int min_layers = 2;
  int max_layers = 4;
  int image_size = 16;
  bool positive_weights = false;
  bool bias_free = false;
  bool allow_pool = true;
  bool input_padding = true;  // allow padding on the first conv layer
  int prototypes = 2;
  SimilarityKind similarity = SimilarityKind::neg_exp;
};

/// Seeded random sequential backbone with random prototypes and a procedural
/// image; the seed fully determines every byte.
struct RandomFixture {
  ModelBundle bundle;
  Tensor image;
};

RandomFixture gen_random(std::uint64_t seed, const RandomFixtureOptions& opts = {});

/// Exhaustive occlusion importance: for each pixel p, s_m minus the score at
/// the frozen target cell after masking the patch anchored at p. The returned
/// map may contain negative entries.
Tensor occlusion_oracle(const ModelBundle& model, const Tensor& image, const Target& target,
                        int patch = 1, const FillPolicy& fill = FillPolicy::zero());

/// Occlusion importance shifted to nonnegative and wrapped for mask ranking.
SaliencyMap oracle_saliency(const ModelBundle& model, const Tensor& image, const Target& target,
                            const FillPolicy& fill = FillPolicy::zero());

}  // namespace protofaith
