#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "protofaith/tensor.hpp"

namespace protofaith {

enum class LayerKind { conv2d, relu, maxpool2d };

std::string layer_kind_name(LayerKind kind);

/// One layer of a sequential fully-convolutional backbone.
///
/// conv2d performs cross-correlation with zero padding plus bias; weights are
/// stored [out, in, kh, kw]. maxpool2d uses floor output semantics and breaks
/// ties toward the first element in row-major window order.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;

  // conv2d
  int out_channels = 0;
  int in_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  int padding = 0;
  Tensor weights;  // [out, in, kh, kw]
  Tensor bias;     // [out]

  // maxpool2d
  int window = 0;

  static LayerSpec conv(int out_c, int in_c, int kh, int kw, int stride, int padding,
                        Tensor weights, Tensor bias);
  static LayerSpec relu();
  static LayerSpec maxpool(int window, int stride);

  /// Throws ConfigError naming `layer_index` on inconsistent hyperparameters.
  void validate(int layer_index) const;
};

/// Spatial output shape of one layer given its input shape [C,H,W].
std::vector<int> layer_output_shape(const LayerSpec& layer, const std::vector<int>& in_shape,
                                    int layer_index);

/// Output shape of a whole stack given the input image shape.
std::vector<int> backbone_output_shape(const std::vector<LayerSpec>& layers,
                                       const std::vector<int>& in_shape);

Tensor conv2d_forward(const Tensor& input, const LayerSpec& spec, int layer_index = -1);
Tensor relu_forward(const Tensor& input);
/// `argmax` receives, per output element, the flat index of the winning input.
Tensor maxpool_forward(const Tensor& input, int window, int stride,
                       std::vector<std::int64_t>* argmax = nullptr, int layer_index = -1);

/// Layer-boundary tensors and pooling argmaxes recorded during a forward pass.
///
/// values[0] is the input image, values[i+1] the output of layer i.
/// pool_argmax[i] is empty unless layer i is a maxpool.
struct ForwardTrace {
  std::vector<Tensor> values;
  std::vector<std::vector<std::int64_t>> pool_argmax;

  const Tensor& input() const { return values.front(); }
  const Tensor& output() const { return values.back(); }
  const Tensor& layer_input(int i) const { return values[static_cast<std::size_t>(i)]; }
  const Tensor& layer_output(int i) const { return values[static_cast<std::size_t>(i) + 1]; }
  int layer_count() const { return static_cast<int>(pool_argmax.size()); }
};

ForwardTrace run_backbone(const std::vector<LayerSpec>& layers, const Tensor& image);

/// Exact reverse-mode vector-Jacobian product down to the input image.
///
/// conv transposes the correlation, relu gates on the sign of the stored
/// pre-activation, maxpool routes through the stored argmax.
Tensor backward_input(const std::vector<LayerSpec>& layers, const ForwardTrace& trace,
                      const Tensor& output_grad);

}  // namespace protofaith
