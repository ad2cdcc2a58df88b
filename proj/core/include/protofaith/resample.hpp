#pragma once

#include "protofaith/tensor.hpp"

namespace protofaith {

/// Separable bicubic interpolation of a [H,W] map.
///
/// Catmull-Rom family kernel (a = -0.5), half-pixel-center coordinates,
/// edge replication for out-of-range taps. Exact on constants and linear
/// ramps wherever all four taps fall inside the map.
Tensor bicubic_upsample(const Tensor& map, int out_h, int out_w);

/// 5x5 Gaussian smoothing (sigma = 1.0, kernel normalized to sum 1) with
/// reflect padding.
Tensor gaussian_blur5(const Tensor& map);

}  // namespace protofaith
