#include "protofaith/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "protofaith/error.hpp"
#include "protofaith/report.hpp"

namespace protofaith {

FillPolicy FillPolicy::mean(const std::array<float, 3>& channel_means) {
  FillPolicy f;
  f.kind = FillKind::mean;
  f.values = channel_means;
  return f;
}

FillPolicy FillPolicy::zero() {
  FillPolicy f;
  f.kind = FillKind::zero;
  f.values = {0.0f, 0.0f, 0.0f};
  return f;
}

FillPolicy FillPolicy::gray() {
  FillPolicy f;
  f.kind = FillKind::gray;
  f.values = {0.5f, 0.5f, 0.5f};
  return f;
}

FillPolicy FillPolicy::parse(const std::string& name, const std::array<float, 3>& channel_means) {
  if (name == "mean") return mean(channel_means);
  if (name == "zero") return zero();
  if (name == "gray") return gray();
  throw ArgumentError("unknown fill policy: " + name);
}

std::string FillPolicy::name() const {
  switch (kind) {
    case FillKind::mean: return "mean";
    case FillKind::zero: return "zero";
    case FillKind::gray: return "gray";
  }
  return "?";
}

Tensor perturb(const Tensor& image, const PixelMask& mask, const FillPolicy& fill) {
  if (image.rank() != 3 || image.dim(1) != mask.height || image.dim(2) != mask.width) {
    throw ArgumentError("mask shape does not match image");
  }
  Tensor out = image;
  const int c = image.dim(0);
  for (int row = 0; row < mask.height; ++row) {
    for (int col = 0; col < mask.width; ++col) {
      if (!mask.test(row, col)) continue;
      for (int ch = 0; ch < c; ++ch) {
        out.at(ch, row, col) = fill.values[static_cast<std::size_t>(ch)];
      }
    }
  }
  return out;
}

double similarity_ratio(const ModelBundle& model, const Tensor& image, const Target& frozen,
                        const PixelMask& mask, const FillPolicy& fill) {
  if (frozen.score == 0.0f) {
    throw DegenerateTargetError("similarity ratio undefined for zero maximum similarity");
  }
  const Tensor perturbed = perturb(image, mask, fill);
  const Features f = extract_features(model, perturbed);
  const auto& r = model.prototypes.vectors[static_cast<std::size_t>(frozen.prototype_index)];
  const double d2 = squared_distance(f.chw, frozen.h, frozen.w, r);
  // Scores are float32 throughout (frozen.score came from a similarity map);
  // rounding s~ the same way keeps tau exactly 1 when nothing reached the cell.
  const float perturbed_score = static_cast<float>(model.simfn.value(d2));
  return static_cast<double>(perturbed_score) / static_cast<double>(frozen.score);
}

std::vector<double> DeletionGrid::points() const {
  if (!(a_max > 0.0) || !(step > 0.0)) {
    throw ArgumentError("deletion grid needs positive a_max and step");
  }
  std::vector<double> pts;
  const int n = static_cast<int>(std::llround(a_max / step));
  pts.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) pts.push_back(i * step);
  return pts;
}

std::string DeletionGrid::id() const {
  return "0:" + format_fixed(step, 4) + ":" + format_fixed(a_max, 4);
}

double audc_trapezoid(const std::vector<double>& areas, const std::vector<double>& ratios) {
  if (areas.size() != ratios.size() || areas.size() < 2) {
    throw ArgumentError("AUDC needs at least two grid points");
  }
  double acc = 0.0;
  for (std::size_t i = 1; i < areas.size(); ++i) {
    acc += (areas[i] - areas[i - 1]) * 0.5 * (ratios[i] + ratios[i - 1]);
  }
  return acc * 10000.0;
}

DeletionCurve deletion_curve(const ModelBundle& model, const Tensor& image, const Target& target,
                             const SaliencyMap& saliency, const DeletionGrid& grid,
                             const FillPolicy& fill) {
  DeletionCurve curve;
  curve.meta.method = saliency_method_name(saliency.method);
  curve.meta.prototype_index = target.prototype_index;
  curve.meta.image_id = saliency.image_id;
  curve.meta.fill = fill.name();
  curve.areas = grid.points();
  curve.ratios.reserve(curve.areas.size());
  for (double a : curve.areas) {
    if (a == 0.0) {
      // tau(0) = 1 by construction: nothing is masked.
      curve.ratios.push_back(1.0);
      continue;
    }
    const PixelMask mask = top_fraction_mask(saliency, a);
    curve.ratios.push_back(similarity_ratio(model, image, target, mask, fill));
  }
  curve.audc = audc_trapezoid(curve.areas, curve.ratios);
  return curve;
}

DeletionCurve deletion_curve(const ModelBundle& model, const Tensor& image, const Target& target,
                             SaliencyMethod method, const DeletionGrid& grid,
                             const FillPolicy& fill, const SmoothgradsOptions& opts) {
  const SaliencyMap saliency = compute_saliency(model, image, target, method, opts);
  DeletionCurve curve = deletion_curve(model, image, target, saliency, grid, fill);
  curve.meta.seed = opts.seed;
  return curve;
}

RelevanceResult relevance(const SaliencyMap& saliency, const PixelMask& segmentation, double a,
                          double threshold) {
  if (saliency.values.dim(0) != segmentation.height ||
      saliency.values.dim(1) != segmentation.width) {
    throw ArgumentError("segmentation shape does not match saliency map");
  }
  const PixelMask mask = top_fraction_mask(saliency, a);
  RelevanceResult res;
  res.threshold = threshold;
  res.mask_pixels = mask.count;
  for (int row = 0; row < mask.height; ++row) {
    for (int col = 0; col < mask.width; ++col) {
      if (mask.test(row, col) && segmentation.test(row, col)) ++res.intersection_pixels;
    }
  }
  res.fraction = static_cast<double>(res.intersection_pixels) / static_cast<double>(res.mask_pixels);
  res.irrelevant = res.fraction < threshold;
  return res;
}

std::optional<double> erf_from_curve(const DeletionCurve& curve, double tau_threshold) {
  for (std::size_t i = 0; i < curve.areas.size(); ++i) {
    if (curve.ratios[i] < tau_threshold) return curve.areas[i];
  }
  return std::nullopt;
}

ErfEstimate erf_estimate(const ModelBundle& model, const Tensor& image, const Target& target,
                         const SaliencyMap& saliency, const DeletionGrid& grid,
                         const FillPolicy& fill, double tau_threshold) {
  ErfEstimate est;
  est.tau_threshold = tau_threshold;
  est.curve = deletion_curve(model, image, target, saliency, grid, fill);
  est.area = erf_from_curve(est.curve, tau_threshold);
  return est;
}

std::vector<SummaryRow> aggregate_report(const std::vector<ReportRow>& rows) {
  if (rows.empty()) throw ArgumentError("cannot aggregate an empty report");
  std::map<std::pair<std::string, std::string>, SummaryRow> groups;
  for (const ReportRow& row : rows) {
    SummaryRow& g = groups[{row.method, row.role}];
    g.method = row.method;
    g.role = row.role;
    if (row.audc) {
      g.mean_audc += *row.audc;
      ++g.audc_count;
    }
    if (row.irrelevant) {
      ++g.relevance_count;
      g.irrelevant_count += *row.irrelevant ? 1 : 0;
    }
  }
  std::vector<SummaryRow> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) {
    if (g.audc_count > 0) g.mean_audc /= g.audc_count;
    if (g.relevance_count > 0) {
      g.irrelevant_pct = 100.0 * g.irrelevant_count / g.relevance_count;
    }
    out.push_back(g);
  }
  return out;
}

}  // namespace protofaith
