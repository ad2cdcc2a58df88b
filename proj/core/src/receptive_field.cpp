#include "protofaith/receptive_field.hpp"

#include <algorithm>
#include <string>

#include "protofaith/error.hpp"

namespace protofaith {

ReceptiveFieldBox receptive_field(const std::vector<LayerSpec>& layers, int in_h, int in_w,
                                  int h, int w) {
  // Channel count does not affect spatial geometry; seed the shape chain with
  // whatever the first conv expects.
  int channels = 1;
  for (const LayerSpec& layer : layers) {
    if (layer.kind == LayerKind::conv2d) {
      channels = layer.in_channels;
      break;
    }
  }
  std::vector<int> shape = {channels, in_h, in_w};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    shape = layer_output_shape(layers[i], shape, static_cast<int>(i));
  }
  if (h < 0 || h >= shape[1] || w < 0 || w >= shape[2]) {
    throw ArgumentError("latent cell (" + std::to_string(h) + "," + std::to_string(w) +
                        ") outside final feature map " + std::to_string(shape[1]) + "x" +
                        std::to_string(shape[2]));
  }

  // Inclusive-exclusive box in the coordinates of each layer's input,
  // computed from the deepest layer back to the image.
  int top = h, bottom = h + 1;
  int left = w, right = w + 1;
  for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
    const LayerSpec& layer = layers[static_cast<std::size_t>(i)];
    switch (layer.kind) {
      case LayerKind::conv2d:
        top = top * layer.stride - layer.padding;
        bottom = (bottom - 1) * layer.stride - layer.padding + layer.kernel_h;
        left = left * layer.stride - layer.padding;
        right = (right - 1) * layer.stride - layer.padding + layer.kernel_w;
        break;
      case LayerKind::relu:
        break;
      case LayerKind::maxpool2d:
        top = top * layer.stride;
        bottom = (bottom - 1) * layer.stride + layer.window;
        left = left * layer.stride;
        right = (right - 1) * layer.stride + layer.window;
        break;
    }
  }

  ReceptiveFieldBox box;
  box.top = std::clamp(top, 0, in_h);
  box.bottom = std::clamp(bottom, 0, in_h);
  box.left = std::clamp(left, 0, in_w);
  box.right = std::clamp(right, 0, in_w);
  return box;
}

}  // namespace protofaith
