#include "protofaith/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "protofaith/error.hpp"

namespace protofaith {

std::string similarity_kind_name(SimilarityKind kind) {
  return kind == SimilarityKind::log_ratio ? "log_ratio" : "neg_exp";
}

SimilarityKind parse_similarity_kind(const std::string& name) {
  if (name == "log_ratio") return SimilarityKind::log_ratio;
  if (name == "neg_exp") return SimilarityKind::neg_exp;
  throw ConfigError("unknown similarity function: " + name);
}

double SimilarityFunction::value(double d2) const {
  if (kind == SimilarityKind::log_ratio) {
    return std::log((d2 + 1.0) / (d2 + epsilon));
  }
  return std::exp(-d2);
}

double SimilarityFunction::derivative(double d2) const {
  if (kind == SimilarityKind::log_ratio) {
    return 1.0 / (d2 + 1.0) - 1.0 / (d2 + epsilon);
  }
  return -std::exp(-d2);
}

void SimilarityFunction::validate() const {
  if (kind == SimilarityKind::log_ratio && epsilon <= 0.0) {
    throw ConfigError("log_ratio similarity requires epsilon > 0");
  }
}

void PrototypeSet::validate() const {
  if (vectors.empty()) throw ConfigError("prototype set must contain at least one prototype");
  if (dimension < 1) throw ConfigError("prototype dimension must be >= 1");
  for (const auto& v : vectors) {
    if (static_cast<int>(v.size()) != dimension) {
      throw ConfigError("prototype vector length does not match dimension");
    }
  }
  if (!provenance.empty() && provenance.size() != vectors.size()) {
    throw ConfigError("provenance list length does not match prototype count");
  }
}

std::string target_policy_name(TargetPolicyKind kind) {
  return kind == TargetPolicyKind::protopnet_top10 ? "protopnet_top10" : "prototree_threshold";
}

std::vector<int> ModelBundle::latent_shape() const {
  return backbone_output_shape(backbone, {3, input_h, input_w});
}

void ModelBundle::validate() const {
  if (input_h < 1 || input_w < 1) throw ConfigError("model input size must be positive");
  prototypes.validate();
  simfn.validate();
  const auto latent = latent_shape();
  if (latent[0] != prototypes.dimension) {
    throw ConfigError("backbone output channels (" + std::to_string(latent[0]) +
                      ") do not match prototype dimension (" +
                      std::to_string(prototypes.dimension) + ")");
  }
  if (head) {
    if (head->rank() != 2 || head->dim(1) != prototypes.count()) {
      throw ConfigError("head must have one row per class and one column per prototype");
    }
  }
  if (policy.kind == TargetPolicyKind::protopnet_top10 && !head) {
    throw ConfigError("protopnet_top10 policy requires a classification head");
  }
}

Features extract_features(const ModelBundle& model, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != model.input_h ||
      image.dim(2) != model.input_w) {
    throw ArgumentError("image dims do not match model input 3x" + std::to_string(model.input_h) +
                        "x" + std::to_string(model.input_w));
  }
  Features f;
  f.trace = run_backbone(model.backbone, image);
  f.chw = f.trace.output();
  return f;
}

double squared_distance(const Tensor& features_chw, int h, int w, const std::vector<float>& r) {
  const int d = features_chw.dim(0);
  const int fh = features_chw.dim(1);
  const int fw = features_chw.dim(2);
  const std::int64_t plane = static_cast<std::int64_t>(fh) * fw;
  const std::int64_t off = static_cast<std::int64_t>(h) * fw + w;
  double acc = 0.0;
  for (int k = 0; k < d; ++k) {
    const double diff = static_cast<double>(features_chw[k * plane + off]) -
                        static_cast<double>(r[static_cast<std::size_t>(k)]);
    acc += diff * diff;
  }
  return acc;
}

SimilarityMap similarity_map(const Tensor& features_chw, const std::vector<float>& r,
                             const SimilarityFunction& simfn, int prototype_index,
                             const std::string& image_id) {
  simfn.validate();
  if (features_chw.rank() != 3) throw ArgumentError("features must have shape [D,H,W]");
  if (features_chw.dim(0) != static_cast<int>(r.size())) {
    throw ArgumentError("prototype dimension does not match feature depth");
  }
  const int h = features_chw.dim(1), w = features_chw.dim(2);
  SimilarityMap map;
  map.values = Tensor({h, w});
  map.prototype_index = prototype_index;
  map.image_id = image_id;
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      map.values.at(row, col) =
          static_cast<float>(simfn.value(squared_distance(features_chw, row, col, r)));
    }
  }
  return map;
}

Target max_similarity(const SimilarityMap& map) {
  if (map.values.numel() == 0) throw ArgumentError("similarity map is empty");
  const int h = map.values.dim(0), w = map.values.dim(1);
  Target t;
  t.prototype_index = map.prototype_index;
  float best = -std::numeric_limits<float>::infinity();
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const float v = map.values.at(row, col);
      if (v > best) {
        best = v;
        t.h = row;
        t.w = col;
      }
    }
  }
  t.score = best;
  return t;
}

void project_prototypes(ModelBundle& model, const std::vector<Tensor>& projection_set) {
  if (projection_set.empty()) throw ArgumentError("projection set is empty");
  model.validate();

  const int p = model.prototypes.count();
  std::vector<double> best_d2(static_cast<std::size_t>(p),
                              std::numeric_limits<double>::infinity());
  std::vector<Provenance> best_prov(static_cast<std::size_t>(p));
  std::vector<std::vector<float>> best_vec(static_cast<std::size_t>(p));

  for (std::size_t img = 0; img < projection_set.size(); ++img) {
    const Features f = extract_features(model, projection_set[img]);
    const int fh = f.height(), fw = f.width(), d = f.depth();
    const std::int64_t plane = static_cast<std::int64_t>(fh) * fw;
    for (int i = 0; i < p; ++i) {
      const auto& r = model.prototypes.vectors[static_cast<std::size_t>(i)];
      for (int row = 0; row < fh; ++row) {
        for (int col = 0; col < fw; ++col) {
          const double d2 = squared_distance(f.chw, row, col, r);
          // Strict < keeps the earliest (image, row-major cell) winner on ties.
          if (d2 < best_d2[static_cast<std::size_t>(i)]) {
            best_d2[static_cast<std::size_t>(i)] = d2;
            best_prov[static_cast<std::size_t>(i)] = {static_cast<int>(img), row, col};
            auto& vec = best_vec[static_cast<std::size_t>(i)];
            vec.resize(static_cast<std::size_t>(d));
            const std::int64_t off = static_cast<std::int64_t>(row) * fw + col;
            for (int k = 0; k < d; ++k) {
              vec[static_cast<std::size_t>(k)] = f.chw[k * plane + off];
            }
          }
        }
      }
    }
  }

  model.prototypes.provenance.assign(static_cast<std::size_t>(p), std::nullopt);
  for (int i = 0; i < p; ++i) {
    model.prototypes.vectors[static_cast<std::size_t>(i)] = best_vec[static_cast<std::size_t>(i)];
    model.prototypes.provenance[static_cast<std::size_t>(i)] =
        best_prov[static_cast<std::size_t>(i)];
  }
}

std::vector<Target> select_targets(const ModelBundle& model, const Features& features) {
  model.validate();
  const int p = model.prototypes.count();
  std::vector<Target> maxima(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) {
    const SimilarityMap map =
        similarity_map(features.chw, model.prototypes.vectors[static_cast<std::size_t>(i)],
                       model.simfn, i);
    maxima[static_cast<std::size_t>(i)] = max_similarity(map);
  }

  std::vector<Target> out;
  if (model.policy.kind == TargetPolicyKind::prototree_threshold) {
    for (const Target& t : maxima) {
      if (static_cast<double>(t.score) > model.policy.theta) out.push_back(t);
    }
    return out;
  }

  // protopnet_top10: infer the class from the linear head, then rank that
  // class's prototypes (positive head weight) by maximum similarity.
  const Tensor& head = *model.head;
  const int classes = head.dim(0);
  int best_class = 0;
  double best_logit = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < classes; ++c) {
    double logit = 0.0;
    for (int i = 0; i < p; ++i) {
      logit += static_cast<double>(head.at(c, i)) * static_cast<double>(maxima[static_cast<std::size_t>(i)].score);
    }
    // Ties resolve to the lowest class index.
    if (logit > best_logit) {
      best_logit = logit;
      best_class = c;
    }
  }

  std::vector<int> members;
  for (int i = 0; i < p; ++i) {
    if (head.at(best_class, i) > 0.0f) members.push_back(i);
  }
  std::sort(members.begin(), members.end(), [&](int a, int b) {
    const float sa = maxima[static_cast<std::size_t>(a)].score;
    const float sb = maxima[static_cast<std::size_t>(b)].score;
    if (sa != sb) return sa > sb;
    return a < b;
  });
  const std::size_t take = std::min<std::size_t>(members.size(), 10);
  for (std::size_t j = 0; j < take; ++j) {
    out.push_back(maxima[static_cast<std::size_t>(members[j])]);
  }
  return out;
}

std::vector<Target> select_targets(const ModelBundle& model, const Tensor& image) {
  return select_targets(model, extract_features(model, image));
}

}  // namespace protofaith
