#include "protofaith/layers.hpp"

#include <limits>
#include <utility>

#include "protofaith/error.hpp"

namespace protofaith {

namespace {

std::string at_layer(int layer_index) {
  return layer_index >= 0 ? " at layer " + std::to_string(layer_index) : "";
}

void require_chw(const Tensor& t, const char* what, int layer_index) {
  if (t.rank() != 3) {
    throw ConfigError(std::string(what) + " must have shape [C,H,W]" + at_layer(layer_index));
  }
}

}  // namespace

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2d: return "maxpool2d";
  }
  return "?";
}

LayerSpec LayerSpec::conv(int out_c, int in_c, int kh, int kw, int stride, int padding,
                          Tensor weights, Tensor bias) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.out_channels = out_c;
  s.in_channels = in_c;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.stride = stride;
  s.padding = padding;
  s.weights = std::move(weights);
  s.bias = std::move(bias);
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::relu;
  return s;
}

LayerSpec LayerSpec::maxpool(int window, int stride) {
  LayerSpec s;
  s.kind = LayerKind::maxpool2d;
  s.window = window;
  s.stride = stride;
  return s;
}

void LayerSpec::validate(int layer_index) const {
  switch (kind) {
    case LayerKind::conv2d: {
      if (out_channels < 1 || in_channels < 1 || kernel_h < 1 || kernel_w < 1) {
        throw ConfigError("conv2d needs positive channel and kernel sizes" + at_layer(layer_index));
      }
      if (stride < 1) throw ConfigError("conv2d stride must be >= 1" + at_layer(layer_index));
      if (padding < 0) throw ConfigError("conv2d padding must be >= 0" + at_layer(layer_index));
      const std::vector<int> want = {out_channels, in_channels, kernel_h, kernel_w};
      if (weights.shape() != want) {
        throw ConfigError("conv2d weight shape must be [out,in,kh,kw]" + at_layer(layer_index));
      }
      if (bias.shape() != std::vector<int>{out_channels}) {
        throw ConfigError("conv2d bias length must equal out channels" + at_layer(layer_index));
      }
      break;
    }
    case LayerKind::relu:
      break;
    case LayerKind::maxpool2d:
      if (window < 1) throw ConfigError("maxpool window must be >= 1" + at_layer(layer_index));
      if (stride < 1) throw ConfigError("maxpool stride must be >= 1" + at_layer(layer_index));
      break;
  }
}

std::vector<int> layer_output_shape(const LayerSpec& layer, const std::vector<int>& in_shape,
                                    int layer_index) {
  if (in_shape.size() != 3) {
    throw ConfigError("layer input must have shape [C,H,W]" + at_layer(layer_index));
  }
  const int c = in_shape[0], h = in_shape[1], w = in_shape[2];
  switch (layer.kind) {
    case LayerKind::conv2d: {
      if (c != layer.in_channels) {
        throw ConfigError("conv2d expects " + std::to_string(layer.in_channels) +
                          " input channels, got " + std::to_string(c) + at_layer(layer_index));
      }
      const int oh = (h + 2 * layer.padding - layer.kernel_h) / layer.stride + 1;
      const int ow = (w + 2 * layer.padding - layer.kernel_w) / layer.stride + 1;
      if (oh < 1 || ow < 1) {
        throw ConfigError("conv2d kernel larger than padded input" + at_layer(layer_index));
      }
      return {layer.out_channels, oh, ow};
    }
    case LayerKind::relu:
      return in_shape;
    case LayerKind::maxpool2d: {
      if (layer.window > h || layer.window > w) {
        throw ConfigError("maxpool window larger than input" + at_layer(layer_index));
      }
      const int oh = (h - layer.window) / layer.stride + 1;
      const int ow = (w - layer.window) / layer.stride + 1;
      return {c, oh, ow};
    }
  }
  throw ConfigError("unknown layer kind" + at_layer(layer_index));
}

std::vector<int> backbone_output_shape(const std::vector<LayerSpec>& layers,
                                       const std::vector<int>& in_shape) {
  std::vector<int> shape = in_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].validate(static_cast<int>(i));
    shape = layer_output_shape(layers[i], shape, static_cast<int>(i));
  }
  return shape;
}

Tensor conv2d_forward(const Tensor& input, const LayerSpec& spec, int layer_index) {
  spec.validate(layer_index);
  require_chw(input, "conv2d input", layer_index);
  const auto out_shape = layer_output_shape(spec, input.shape(), layer_index);
  const int h = input.dim(1), w = input.dim(2);
  const int oh = out_shape[1], ow = out_shape[2];
  Tensor out(out_shape);

  const float* wdata = spec.weights.data();
  for (int co = 0; co < spec.out_channels; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = spec.bias[co];
        for (int ci = 0; ci < spec.in_channels; ++ci) {
          const std::size_t wbase =
              (static_cast<std::size_t>(co) * spec.in_channels + ci) * spec.kernel_h;
          for (int ky = 0; ky < spec.kernel_h; ++ky) {
            const int iy = oy * spec.stride + ky - spec.padding;
            if (iy < 0 || iy >= h) continue;
            const std::size_t wrow = (wbase + ky) * spec.kernel_w;
            for (int kx = 0; kx < spec.kernel_w; ++kx) {
              const int ix = ox * spec.stride + kx - spec.padding;
              if (ix < 0 || ix >= w) continue;
              acc += static_cast<double>(input.at(ci, iy, ix)) *
                     static_cast<double>(wdata[wrow + kx]);
            }
          }
        }
        out.at(co, oy, ox) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.values()) v = v > 0.0f ? v : 0.0f;
  return out;
}

Tensor maxpool_forward(const Tensor& input, int window, int stride,
                       std::vector<std::int64_t>* argmax, int layer_index) {
  require_chw(input, "maxpool input", layer_index);
  LayerSpec spec = LayerSpec::maxpool(window, stride);
  const auto out_shape = layer_output_shape(spec, input.shape(), layer_index);
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int oh = out_shape[1], ow = out_shape[2];
  Tensor out(out_shape);
  if (argmax) argmax->assign(static_cast<std::size_t>(out.numel()), -1);

  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        std::int64_t best_idx = -1;
        for (int ky = 0; ky < window; ++ky) {
          for (int kx = 0; kx < window; ++kx) {
            const int iy = oy * stride + ky;
            const int ix = ox * stride + kx;
            const float v = input.at(ch, iy, ix);
            // Strict > keeps the first (row-major) element on ties.
            if (v > best) {
              best = v;
              best_idx = (static_cast<std::int64_t>(ch) * h + iy) * w + ix;
            }
          }
        }
        out.at(ch, oy, ox) = best;
        if (argmax) {
          (*argmax)[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox] = best_idx;
        }
      }
    }
  }
  return out;
}

ForwardTrace run_backbone(const std::vector<LayerSpec>& layers, const Tensor& image) {
  require_chw(image, "backbone input", -1);
  ForwardTrace trace;
  trace.values.reserve(layers.size() + 1);
  trace.pool_argmax.resize(layers.size());
  trace.values.push_back(image);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& layer = layers[i];
    const Tensor& in = trace.values.back();
    switch (layer.kind) {
      case LayerKind::conv2d:
        trace.values.push_back(conv2d_forward(in, layer, static_cast<int>(i)));
        break;
      case LayerKind::relu:
        trace.values.push_back(relu_forward(in));
        break;
      case LayerKind::maxpool2d:
        trace.values.push_back(maxpool_forward(in, layer.window, layer.stride,
                                               &trace.pool_argmax[i], static_cast<int>(i)));
        break;
    }
  }
  return trace;
}

Tensor backward_input(const std::vector<LayerSpec>& layers, const ForwardTrace& trace,
                      const Tensor& output_grad) {
  if (trace.values.size() != layers.size() + 1) {
    throw InternalError("forward trace does not match backbone depth");
  }
  if (!output_grad.same_shape(trace.output())) {
    throw InternalError("output gradient shape does not match final layer output");
  }

  Tensor grad = output_grad;
  for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
    const LayerSpec& layer = layers[static_cast<std::size_t>(i)];
    const Tensor& in = trace.layer_input(i);
    switch (layer.kind) {
      case LayerKind::conv2d: {
        const int h = in.dim(1), w = in.dim(2);
        const int oh = grad.dim(1), ow = grad.dim(2);
        const float* wdata = layer.weights.data();
        std::vector<double> acc(static_cast<std::size_t>(in.numel()), 0.0);
        for (int co = 0; co < layer.out_channels; ++co) {
          for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
              const double g = grad.at(co, oy, ox);
              if (g == 0.0) continue;
              for (int ci = 0; ci < layer.in_channels; ++ci) {
                const std::size_t wbase =
                    (static_cast<std::size_t>(co) * layer.in_channels + ci) * layer.kernel_h;
                for (int ky = 0; ky < layer.kernel_h; ++ky) {
                  const int iy = oy * layer.stride + ky - layer.padding;
                  if (iy < 0 || iy >= h) continue;
                  const std::size_t wrow = (wbase + ky) * layer.kernel_w;
                  for (int kx = 0; kx < layer.kernel_w; ++kx) {
                    const int ix = ox * layer.stride + kx - layer.padding;
                    if (ix < 0 || ix >= w) continue;
                    acc[(static_cast<std::size_t>(ci) * h + iy) * w + ix] +=
                        g * static_cast<double>(wdata[wrow + kx]);
                  }
                }
              }
            }
          }
        }
        Tensor next(in.shape());
        for (std::int64_t k = 0; k < next.numel(); ++k) {
          next[k] = static_cast<float>(acc[static_cast<std::size_t>(k)]);
        }
        grad = std::move(next);
        break;
      }
      case LayerKind::relu: {
        Tensor next = grad;
        for (std::int64_t k = 0; k < next.numel(); ++k) {
          if (in[k] <= 0.0f) next[k] = 0.0f;
        }
        grad = std::move(next);
        break;
      }
      case LayerKind::maxpool2d: {
        const auto& argmax = trace.pool_argmax[static_cast<std::size_t>(i)];
        if (argmax.size() != static_cast<std::size_t>(grad.numel())) {
          throw InternalError("maxpool argmax trace does not match gradient size");
        }
        std::vector<double> acc(static_cast<std::size_t>(in.numel()), 0.0);
        for (std::int64_t k = 0; k < grad.numel(); ++k) {
          acc[static_cast<std::size_t>(argmax[static_cast<std::size_t>(k)])] +=
              static_cast<double>(grad[k]);
        }
        Tensor next(in.shape());
        for (std::int64_t k = 0; k < next.numel(); ++k) {
          next[k] = static_cast<float>(acc[static_cast<std::size_t>(k)]);
        }
        grad = std::move(next);
        break;
      }
    }
  }
  return grad;
}

}  // namespace protofaith
