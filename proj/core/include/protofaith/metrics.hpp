#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "protofaith/model.hpp"
#include "protofaith/saliency.hpp"
#include "protofaith/tensor.hpp"

namespace protofaith {

enum class FillKind { mean, zero, gray };

/// Replacement values painted over deleted pixels, in model-input space.
struct FillPolicy {
  FillKind kind = FillKind::mean;
  std::array<float, 3> values = {0.0f, 0.0f, 0.0f};

  static FillPolicy mean(const std::array<float, 3>& channel_means);
  static FillPolicy zero();
  static FillPolicy gray();
  static FillPolicy parse(const std::string& name, const std::array<float, 3>& channel_means);
  std::string name() const;
};

/// Masked pixels replaced per policy; every other pixel bit-identical.
Tensor perturb(const Tensor& image, const PixelMask& mask, const FillPolicy& fill);

/// tau = s(x~) at the frozen (h, w) over the precomputed s_m. The argmax is
/// never recomputed on the perturbed image; tau may exceed 1.
double similarity_ratio(const ModelBundle& model, const Tensor& image, const Target& frozen,
                        const PixelMask& mask, const FillPolicy& fill);

struct DeletionGrid {
  double a_max = 0.02;
  double step = 0.001;

  /// Inclusive grid {0, step, ..., a_max}; 21 points for the 2% protocol.
  std::vector<double> points() const;
  std::string id() const;
};

struct CurveMeta {
  std::string method;
  int prototype_index = -1;
  std::string image_id;
  std::string fill;
  std::uint64_t seed = 0;
  std::string integration = "trapezoid";
};

/// Grid of deletion areas with similarity ratios and the AUDC scalar
/// (trapezoidal integral of tau over a, times 10,000).
struct DeletionCurve {
  std::vector<double> areas;
  std::vector<double> ratios;
  double audc = 0.0;
  CurveMeta meta;
};

double audc_trapezoid(const std::vector<double>& areas, const std::vector<double>& ratios);

/// Core evaluation against a precomputed saliency map. The saliency is ranked
/// once; masks are nested across the grid.
DeletionCurve deletion_curve(const ModelBundle& model, const Tensor& image, const Target& target,
                             const SaliencyMap& saliency, const DeletionGrid& grid,
                             const FillPolicy& fill);

/// Convenience wrapper: computes the saliency for `method` first.
DeletionCurve deletion_curve(const ModelBundle& model, const Tensor& image, const Target& target,
                             SaliencyMethod method, const DeletionGrid& grid,
                             const FillPolicy& fill, const SmoothgradsOptions& opts = {});

struct RelevanceResult {
  double fraction = 0.0;
  bool irrelevant = false;
  std::int64_t mask_pixels = 0;
  std::int64_t intersection_pixels = 0;
  double threshold = 0.05;
};

/// Fraction of the top-a% saliency mask intersecting the object segmentation;
/// irrelevant iff fraction < threshold (strict).
RelevanceResult relevance(const SaliencyMap& saliency, const PixelMask& segmentation,
                          double a = 0.02, double threshold = 0.05);

struct ErfEstimate {
  std::optional<double> area;
  double tau_threshold = 0.1;
  DeletionCurve curve;
};

/// Smallest grid area whose ratio falls below tau_threshold; none if the
/// curve never crosses within the grid.
std::optional<double> erf_from_curve(const DeletionCurve& curve, double tau_threshold);

ErfEstimate erf_estimate(const ModelBundle& model, const Tensor& image, const Target& target,
                         const SaliencyMap& saliency, const DeletionGrid& grid,
                         const FillPolicy& fill, double tau_threshold = 0.1);

struct ReportRow;  // defined in report.hpp

struct SummaryRow {
  std::string method;
  std::string role;
  int audc_count = 0;
  double mean_audc = 0.0;
  int relevance_count = 0;
  int irrelevant_count = 0;
  double irrelevant_pct = 0.0;
};

/// Mean AUDC and irrelevant percentage per (method, role), sorted by key.
std::vector<SummaryRow> aggregate_report(const std::vector<ReportRow>& rows);

}  // namespace protofaith
