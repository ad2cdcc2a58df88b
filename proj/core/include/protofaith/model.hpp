#pragma once

#include <optional>
#include <string>
#include <vector>

#include "protofaith/layers.hpp"
#include "protofaith/tensor.hpp"

namespace protofaith {

enum class SimilarityKind { log_ratio, neg_exp };

std::string similarity_kind_name(SimilarityKind kind);
SimilarityKind parse_similarity_kind(const std::string& name);

/// Distance-to-similarity transform.
///
/// log_ratio:  s = log((d2 + 1) / (d2 + epsilon))
/// neg_exp:    s = exp(-d2)
/// Both are strictly decreasing in the squared L2 distance d2.
struct SimilarityFunction {
  SimilarityKind kind = SimilarityKind::neg_exp;
  double epsilon = 1e-4;  // log_ratio only

  double value(double d2) const;
  /// d s / d d2 (always negative).
  double derivative(double d2) const;
  void validate() const;
};

/// Where a projected prototype came from: image index in the projection set
/// plus the winning latent cell.
struct Provenance {
  int image_id = -1;
  int h = 0;
  int w = 0;
};

struct PrototypeSet {
  int dimension = 0;
  std::vector<std::vector<float>> vectors;
  std::vector<std::optional<Provenance>> provenance;

  int count() const { return static_cast<int>(vectors.size()); }
  void validate() const;
};

enum class TargetPolicyKind { protopnet_top10, prototree_threshold };

std::string target_policy_name(TargetPolicyKind kind);

struct TargetPolicy {
  TargetPolicyKind kind = TargetPolicyKind::prototree_threshold;
  double theta = 0.5;  // prototree_threshold only
};

/// The loaded model under evaluation: backbone stack, prototypes, similarity
/// function, optional classification head and explanation-target policy.
struct ModelBundle {
  int input_h = 0;
  int input_w = 0;
  std::vector<LayerSpec> backbone;
  PrototypeSet prototypes;
  SimilarityFunction simfn;
  std::optional<Tensor> head;  // [classes, prototypes]
  TargetPolicy policy;

  std::vector<int> latent_shape() const;  // [D, H, W]
  void validate() const;
};

/// Latent representation of one image plus the trace for backward passes.
/// Storage is channel-major [D,H,W]; coordinates are (row, column) and the
/// latent vector of a cell is read across channels.
struct Features {
  Tensor chw;
  ForwardTrace trace;

  int depth() const { return chw.dim(0); }
  int height() const { return chw.dim(1); }
  int width() const { return chw.dim(2); }
};

Features extract_features(const ModelBundle& model, const Tensor& image);

/// Squared L2 distance between the latent vector at (h, w) and `r`,
/// accumulated in double.
double squared_distance(const Tensor& features_chw, int h, int w, const std::vector<float>& r);

struct SimilarityMap {
  Tensor values;  // [H, W]
  int prototype_index = -1;
  std::string image_id;
};

SimilarityMap similarity_map(const Tensor& features_chw, const std::vector<float>& r,
                             const SimilarityFunction& simfn, int prototype_index = -1,
                             const std::string& image_id = {});

/// Location and value of the highest similarity score.
struct Target {
  int prototype_index = -1;
  int h = 0;
  int w = 0;
  float score = 0.0f;
};

/// Row-major-first argmax of a similarity map.
Target max_similarity(const SimilarityMap& map);

/// Moves every prototype onto its nearest latent vector over the projection
/// set and records provenance. Ties break by (image order, row-major cell).
/// The one mutating operation on a bundle; run it exclusively, then treat the
/// bundle as immutable for concurrent evaluation.
void project_prototypes(ModelBundle& model, const std::vector<Tensor>& projection_set);

/// Explanation targets for one image under the bundle's policy.
std::vector<Target> select_targets(const ModelBundle& model, const Tensor& image);

/// As above but reusing already-extracted features.
std::vector<Target> select_targets(const ModelBundle& model, const Features& features);

}  // namespace protofaith
