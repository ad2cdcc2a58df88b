#include "protofaith/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "protofaith/error.hpp"
#include "protofaith/lrp.hpp"
#include "protofaith/resample.hpp"
#include "protofaith/rng.hpp"

namespace protofaith {

std::string saliency_method_name(SaliencyMethod m) {
  switch (m) {
    case SaliencyMethod::upsample: return "upsample";
    case SaliencyMethod::smoothgrads: return "smoothgrads";
    case SaliencyMethod::prp: return "prp";
    case SaliencyMethod::oracle: return "oracle";
  }
  return "?";
}

SaliencyMethod parse_saliency_method(const std::string& name) {
  if (name == "upsample") return SaliencyMethod::upsample;
  if (name == "smoothgrads") return SaliencyMethod::smoothgrads;
  if (name == "prp") return SaliencyMethod::prp;
  throw ArgumentError("unknown saliency method: " + name);
}

PixelMask PixelMask::empty(int height, int width) {
  PixelMask m;
  m.height = height;
  m.width = width;
  m.bits.assign(static_cast<std::size_t>(height) * width, 0);
  return m;
}

namespace {

void check_target(const ModelBundle& model, const Target& target) {
  const auto latent = model.latent_shape();
  if (target.h < 0 || target.h >= latent[1] || target.w < 0 || target.w >= latent[2]) {
    throw ArgumentError("target cell outside latent bounds");
  }
  if (target.prototype_index < 0 || target.prototype_index >= model.prototypes.count()) {
    throw ArgumentError("target prototype index out of range");
  }
}

}  // namespace

Tensor similarity_input_gradient(const ModelBundle& model, const Tensor& image,
                                 const Target& target) {
  check_target(model, target);
  const Features f = extract_features(model, image);
  const auto& r = model.prototypes.vectors[static_cast<std::size_t>(target.prototype_index)];
  const double d2 = squared_distance(f.chw, target.h, target.w, r);
  const double dsim = model.simfn.derivative(d2);

  // d s / d f_k = dsim * 2 (f_k - r_k), nonzero only at the frozen cell.
  Tensor cotangent(f.chw.shape());
  const int fh = f.height(), fw = f.width();
  const std::int64_t plane = static_cast<std::int64_t>(fh) * fw;
  const std::int64_t off = static_cast<std::int64_t>(target.h) * fw + target.w;
  for (int k = 0; k < f.depth(); ++k) {
    const double diff = static_cast<double>(f.chw[k * plane + off]) -
                        static_cast<double>(r[static_cast<std::size_t>(k)]);
    cotangent[k * plane + off] = static_cast<float>(dsim * 2.0 * diff);
  }
  return backward_input(model.backbone, f.trace, cotangent);
}

SaliencyMap upsample_protopnet(const SimilarityMap& map, int out_h, int out_w) {
  SaliencyMap out;
  out.method = SaliencyMethod::upsample;
  out.target = max_similarity(map);
  out.image_id = map.image_id;
  out.values = bicubic_upsample(map.values, out_h, out_w);
  const float lo = out.values.min_value();
  for (auto& v : out.values.values()) v -= lo;
  return out;
}

SaliencyMap upsample_prototree(const SimilarityMap& map, int out_h, int out_w) {
  const Target t = max_similarity(map);
  Tensor kept(map.values.shape());
  kept.at(t.h, t.w) = map.values.at(t.h, t.w);

  SaliencyMap out;
  out.method = SaliencyMethod::upsample;
  out.target = t;
  out.image_id = map.image_id;
  out.values = bicubic_upsample(kept, out_h, out_w);
  // Bicubic lobes can undershoot; saliency is nonnegative by contract.
  for (auto& v : out.values.values()) v = v > 0.0f ? v : 0.0f;
  return out;
}

PixelMask percentile_mask(const SaliencyMap& map, double percentile) {
  if (percentile < 0.0 || percentile > 1.0) {
    throw ArgumentError("percentile must lie in [0,1]");
  }
  const int h = map.values.dim(0), w = map.values.dim(1);
  const std::int64_t n = map.values.numel();
  std::vector<float> sorted(map.values.values());
  std::sort(sorted.begin(), sorted.end());
  // Threshold so that a strictly-ordered map selects ceil((1-p) * n) pixels.
  const std::int64_t keep = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil((1.0 - percentile) * static_cast<double>(n))));
  const float threshold = sorted[static_cast<std::size_t>(n - keep)];

  PixelMask mask = PixelMask::empty(h, w);
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      if (map.values.at(row, col) >= threshold) mask.set(row, col);
    }
  }
  mask.fraction = static_cast<double>(mask.count) / static_cast<double>(n);
  return mask;
}

SaliencyMap smoothgrads_x_input(const ModelBundle& model, const Tensor& image,
                                const Target& target, const SmoothgradsOptions& opts) {
  if (opts.samples < 1) throw ArgumentError("smoothgrads needs at least one sample");
  check_target(model, target);

  const double sigma =
      opts.noise_ratio * (static_cast<double>(image.max_value()) - image.min_value());

  std::vector<double> mean_grad(static_cast<std::size_t>(image.numel()), 0.0);
  if (opts.noise_ratio == 0.0 || sigma == 0.0) {
    // Zero-noise degeneracy: plain gradient, no generator involved.
    const Tensor g = similarity_input_gradient(model, image, target);
    for (std::int64_t k = 0; k < g.numel(); ++k) {
      mean_grad[static_cast<std::size_t>(k)] = g[k];
    }
  } else {
    Rng rng(opts.seed);
    for (int s = 0; s < opts.samples; ++s) {
      Tensor noisy = image;
      for (auto& v : noisy.values()) {
        v = static_cast<float>(static_cast<double>(v) + sigma * rng.normal());
      }
      const Tensor g = similarity_input_gradient(model, noisy, target);
      for (std::int64_t k = 0; k < g.numel(); ++k) {
        mean_grad[static_cast<std::size_t>(k)] += g[k];
      }
    }
    for (auto& v : mean_grad) v /= opts.samples;
  }

  // Gradient x input per channel, then the shared post-processing.
  Tensor raw(image.shape());
  for (std::int64_t k = 0; k < raw.numel(); ++k) {
    raw[k] = static_cast<float>(mean_grad[static_cast<std::size_t>(k)] *
                                static_cast<double>(image[k]));
  }

  SaliencyMap out;
  out.method = SaliencyMethod::smoothgrads;
  out.target = target;
  out.values = postprocess_saliency(raw, Rectify::absolute);
  return out;
}

Tensor prp_input_relevance(const ModelBundle& model, const Tensor& image, const Target& target) {
  check_target(model, target);
  const Features f = extract_features(model, image);
  const auto& r = model.prototypes.vectors[static_cast<std::size_t>(target.prototype_index)];
  const double d2 = squared_distance(f.chw, target.h, target.w, r);
  const double s = model.simfn.value(d2);

  Tensor rel(f.chw.shape());
  const int fh = f.height(), fw = f.width(), d = f.depth();
  const std::int64_t plane = static_cast<std::int64_t>(fh) * fw;
  const std::int64_t off = static_cast<std::int64_t>(target.h) * fw + target.w;
  if (d2 <= kPrpStabilizer) {
    // Zero-distance degeneracy: spread the score uniformly over channels.
    for (int k = 0; k < d; ++k) {
      rel[k * plane + off] = static_cast<float>(s / d);
    }
  } else {
    for (int k = 0; k < d; ++k) {
      const double diff = static_cast<double>(f.chw[k * plane + off]) -
                          static_cast<double>(r[static_cast<std::size_t>(k)]);
      rel[k * plane + off] = static_cast<float>(s * diff * diff / (d2 + kPrpStabilizer));
    }
  }

  const RuleConfig rules = RuleConfig::composite(model.backbone);
  return lrp_backward(model.backbone, f.trace, rel, rules);
}

SaliencyMap prp(const ModelBundle& model, const Tensor& image, const Target& target) {
  SaliencyMap out;
  out.method = SaliencyMethod::prp;
  out.target = target;
  out.values = postprocess_saliency(prp_input_relevance(model, image, target),
                                    Rectify::clamp_negative);
  return out;
}

Tensor postprocess_saliency(const Tensor& raw_chw, Rectify rectify) {
  if (raw_chw.rank() != 3 || raw_chw.dim(0) != 3) {
    throw ArgumentError("postprocess_saliency expects a [3,H,W] tensor");
  }
  const int h = raw_chw.dim(1), w = raw_chw.dim(2);
  Tensor flat({h, w});
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const double mean = (static_cast<double>(raw_chw.at(0, row, col)) +
                           static_cast<double>(raw_chw.at(1, row, col)) +
                           static_cast<double>(raw_chw.at(2, row, col))) /
                          3.0;
      const double v = rectify == Rectify::absolute ? std::abs(mean) : std::max(0.0, mean);
      flat.at(row, col) = static_cast<float>(v);
    }
  }
  return gaussian_blur5(flat);
}

PixelMask top_fraction_mask(const SaliencyMap& saliency, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ArgumentError("mask fraction must lie in (0,1]");
  }
  const int h = saliency.values.dim(0), w = saliency.values.dim(1);
  const std::int64_t n = saliency.values.numel();
  const std::int64_t take =
      std::max<std::int64_t>(1, std::llround(fraction * static_cast<double>(n)));

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const float* v = saliency.values.data();
  std::stable_sort(order.begin(), order.end(), [v](std::int64_t a, std::int64_t b) {
    return v[a] > v[b];  // stable sort keeps row-major order on ties
  });

  PixelMask mask = PixelMask::empty(h, w);
  for (std::int64_t i = 0; i < std::min(take, n); ++i) {
    const std::int64_t idx = order[static_cast<std::size_t>(i)];
    mask.set(static_cast<int>(idx / w), static_cast<int>(idx % w));
  }
  mask.fraction = fraction;
  return mask;
}

PartPatch crop_patch(const Tensor& image, const PixelMask& mask) {
  if (mask.count == 0) throw ArgumentError("cannot crop from an empty mask");
  if (image.rank() == 3 && (image.dim(1) != mask.height || image.dim(2) != mask.width)) {
    throw ArgumentError("mask dims do not match image");
  }
  PartPatch patch;
  patch.top = mask.height;
  patch.left = mask.width;
  patch.bottom = 0;
  patch.right = 0;
  for (int row = 0; row < mask.height; ++row) {
    for (int col = 0; col < mask.width; ++col) {
      if (!mask.test(row, col)) continue;
      patch.top = std::min(patch.top, row);
      patch.left = std::min(patch.left, col);
      patch.bottom = std::max(patch.bottom, row + 1);
      patch.right = std::max(patch.right, col + 1);
    }
  }
  patch.mask = mask;
  return patch;
}

SaliencyMap compute_saliency(const ModelBundle& model, const Tensor& image, const Target& target,
                             SaliencyMethod method, const SmoothgradsOptions& opts) {
  switch (method) {
    case SaliencyMethod::upsample: {
      const Features f = extract_features(model, image);
      const SimilarityMap map =
          similarity_map(f.chw, model.prototypes.vectors[static_cast<std::size_t>(target.prototype_index)],
                         model.simfn, target.prototype_index);
      return model.policy.kind == TargetPolicyKind::prototree_threshold
                 ? upsample_prototree(map, model.input_h, model.input_w)
                 : upsample_protopnet(map, model.input_h, model.input_w);
    }
    case SaliencyMethod::smoothgrads:
      return smoothgrads_x_input(model, image, target, opts);
    case SaliencyMethod::prp:
      return prp(model, image, target);
    case SaliencyMethod::oracle:
      throw ArgumentError("oracle saliency is built by the test harness, not computed here");
  }
  throw InternalError("unhandled saliency method");
}

}  // namespace protofaith
