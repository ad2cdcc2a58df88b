#pragma once

#include <string>
#include <vector>

#include "protofaith/layers.hpp"
#include "protofaith/tensor.hpp"

namespace protofaith {

enum class LrpRule { epsilon, zplus, zb };

LrpRule parse_lrp_rule(const std::string& name);
std::string lrp_rule_name(LrpRule rule);

/// Per-conv-layer rule assignment for relevance propagation.
///
/// conv_rules[k] applies to the k-th conv layer counted from the input.
/// relu layers are transparent; maxpool routes all relevance to the argmax.
struct RuleConfig {
  std::vector<LrpRule> conv_rules;
  double stabilizer = 1e-9;

  /// z+ on hidden conv layers, zB on the conv layer closest to the input.
  static RuleConfig composite(const std::vector<LayerSpec>& layers);
};

/// Propagates relevance from the latent output back to input pixels.
///
/// Conservation: with bias-free layers the total relevance is preserved up to
/// the stabilizer; biases absorb part of the relevance otherwise.
Tensor lrp_backward(const std::vector<LayerSpec>& layers, const ForwardTrace& trace,
                    const Tensor& relevance_at_latent, const RuleConfig& rules);

}  // namespace protofaith
