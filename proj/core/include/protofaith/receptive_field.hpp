#pragma once

#include <vector>

#include "protofaith/layers.hpp"

namespace protofaith {

/// Input-pixel box influencing one latent cell, inclusive-exclusive, clipped
/// to the image bounds.
struct ReceptiveFieldBox {
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;

  int height() const { return bottom - top; }
  int width() const { return right - left; }
  bool contains(int row, int col) const {
    return row >= top && row < bottom && col >= left && col < right;
  }
};

/// Closed-form receptive-field recurrence over strides, kernels and paddings.
/// (h, w) addresses a cell of the final feature map; throws ArgumentError when
/// out of bounds.
ReceptiveFieldBox receptive_field(const std::vector<LayerSpec>& layers, int in_h, int in_w,
                                  int h, int w);

}  // namespace protofaith
