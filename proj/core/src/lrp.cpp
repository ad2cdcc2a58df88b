#include "protofaith/lrp.hpp"

#include <algorithm>
#include <cmath>

#include "protofaith/error.hpp"

namespace protofaith {

LrpRule parse_lrp_rule(const std::string& name) {
  if (name == "epsilon") return LrpRule::epsilon;
  if (name == "zplus" || name == "z+") return LrpRule::zplus;
  if (name == "zb" || name == "zB") return LrpRule::zb;
  throw ConfigError("unknown LRP rule: " + name);
}

std::string lrp_rule_name(LrpRule rule) {
  switch (rule) {
    case LrpRule::epsilon: return "epsilon";
    case LrpRule::zplus: return "zplus";
    case LrpRule::zb: return "zB";
  }
  return "?";
}

RuleConfig RuleConfig::composite(const std::vector<LayerSpec>& layers) {
  RuleConfig cfg;
  for (const LayerSpec& l : layers) {
    if (l.kind == LayerKind::conv2d) {
      cfg.conv_rules.push_back(cfg.conv_rules.empty() ? LrpRule::zb : LrpRule::zplus);
    }
  }
  return cfg;
}

namespace {

double stabilized(double z, double eps) { return z + (z >= 0.0 ? eps : -eps); }

// Per-tap contribution under one rule. `x` is the input activation (0 for
// padding taps), `l`/`h` the box bounds of the tap's channel.
inline double tap_contribution(LrpRule rule, double x, double w, double l, double h) {
  switch (rule) {
    case LrpRule::epsilon:
      return x * w;
    case LrpRule::zplus:
      return w > 0.0 ? x * w : 0.0;
    case LrpRule::zb: {
      const double wp = w > 0.0 ? w : 0.0;
      const double wn = w < 0.0 ? w : 0.0;
      return x * w - l * wp - h * wn;
    }
  }
  return 0.0;
}

inline double rule_bias(LrpRule rule, double b) {
  switch (rule) {
    case LrpRule::epsilon: return b;
    case LrpRule::zplus: return b > 0.0 ? b : 0.0;
    case LrpRule::zb: return b;
  }
  return 0.0;
}

Tensor propagate_conv(const LayerSpec& layer, const Tensor& input, const Tensor& rel_out,
                      LrpRule rule, double eps, const std::vector<double>& lo,
                      const std::vector<double>& hi) {
  const int h = input.dim(1), w = input.dim(2);
  const int oh = rel_out.dim(1), ow = rel_out.dim(2);
  const float* wdata = layer.weights.data();
  std::vector<double> acc(static_cast<std::size_t>(input.numel()), 0.0);

  for (int co = 0; co < layer.out_channels; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double r = rel_out.at(co, oy, ox);
        // Denominator over every tap, including padding taps.
        double z = rule_bias(rule, layer.bias[co]);
        for (int ci = 0; ci < layer.in_channels; ++ci) {
          const std::size_t wbase =
              (static_cast<std::size_t>(co) * layer.in_channels + ci) * layer.kernel_h;
          for (int ky = 0; ky < layer.kernel_h; ++ky) {
            const int iy = oy * layer.stride + ky - layer.padding;
            const std::size_t wrow = (wbase + ky) * layer.kernel_w;
            for (int kx = 0; kx < layer.kernel_w; ++kx) {
              const int ix = ox * layer.stride + kx - layer.padding;
              const bool inside = iy >= 0 && iy < h && ix >= 0 && ix < w;
              const double x = inside ? input.at(ci, iy, ix) : 0.0;
              z += tap_contribution(rule, x, wdata[wrow + kx], lo[ci], hi[ci]);
            }
          }
        }
        if (r == 0.0) continue;
        const double denom = stabilized(z, eps);
        const double scale = r / denom;
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
              const double x = input.at(ci, iy, ix);
              const double c = tap_contribution(rule, x, wdata[wrow + kx], lo[ci], hi[ci]);
              acc[(static_cast<std::size_t>(ci) * h + iy) * w + ix] += scale * c;
            }
          }
        }
      }
    }
  }

  Tensor rel_in(input.shape());
  for (std::int64_t k = 0; k < rel_in.numel(); ++k) {
    rel_in[k] = static_cast<float>(acc[static_cast<std::size_t>(k)]);
  }
  return rel_in;
}

// zB box bounds per channel, widened to include the zero-padding value.
void box_bounds(const Tensor& input, std::vector<double>& lo, std::vector<double>& hi) {
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  lo.assign(static_cast<std::size_t>(c), 0.0);
  hi.assign(static_cast<std::size_t>(c), 0.0);
  for (int ci = 0; ci < c; ++ci) {
    double mn = 0.0, mx = 0.0;
    for (int i = 0; i < h * w; ++i) {
      const double v = input[static_cast<std::int64_t>(ci) * h * w + i];
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    lo[static_cast<std::size_t>(ci)] = mn;
    hi[static_cast<std::size_t>(ci)] = mx;
  }
}

}  // namespace

Tensor lrp_backward(const std::vector<LayerSpec>& layers, const ForwardTrace& trace,
                    const Tensor& relevance_at_latent, const RuleConfig& rules) {
  if (trace.values.size() != layers.size() + 1) {
    throw InternalError("forward trace does not match backbone depth");
  }
  if (!relevance_at_latent.same_shape(trace.output())) {
    throw InternalError("latent relevance shape does not match backbone output");
  }
  std::size_t conv_count = 0;
  for (const LayerSpec& l : layers) {
    if (l.kind == LayerKind::conv2d) ++conv_count;
  }
  if (rules.conv_rules.size() != conv_count) {
    throw ConfigError("rule config lists " + std::to_string(rules.conv_rules.size()) +
                      " conv rules for " + std::to_string(conv_count) + " conv layers");
  }

  Tensor rel = relevance_at_latent;
  int conv_index = static_cast<int>(conv_count);
  for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
    const LayerSpec& layer = layers[static_cast<std::size_t>(i)];
    const Tensor& in = trace.layer_input(i);
    switch (layer.kind) {
      case LayerKind::conv2d: {
        --conv_index;
        const LrpRule rule = rules.conv_rules[static_cast<std::size_t>(conv_index)];
        std::vector<double> lo(static_cast<std::size_t>(layer.in_channels), 0.0);
        std::vector<double> hi(static_cast<std::size_t>(layer.in_channels), 0.0);
        if (rule == LrpRule::zb) box_bounds(in, lo, hi);
        rel = propagate_conv(layer, in, rel, rule, rules.stabilizer, lo, hi);
        break;
      }
      case LayerKind::relu:
        // Transparent: relevance maps one-to-one onto the pre-activation.
        break;
      case LayerKind::maxpool2d: {
        const auto& argmax = trace.pool_argmax[static_cast<std::size_t>(i)];
        std::vector<double> acc(static_cast<std::size_t>(in.numel()), 0.0);
        for (std::int64_t k = 0; k < rel.numel(); ++k) {
          acc[static_cast<std::size_t>(argmax[static_cast<std::size_t>(k)])] +=
              static_cast<double>(rel[k]);
        }
        Tensor next(in.shape());
        for (std::int64_t k = 0; k < next.numel(); ++k) {
          next[k] = static_cast<float>(acc[static_cast<std::size_t>(k)]);
        }
        rel = std::move(next);
        break;
      }
    }
  }
  return rel;
}

}  // namespace protofaith
