#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "support.hpp"
#include "protofaith/error.hpp"
#include "protofaith/fixtures.hpp"
#include "protofaith/model.hpp"
#include "protofaith/rng.hpp"

using namespace protofaith;

namespace {

ModelBundle identity_bundle(int size) {
  ModelBundle m;
  m.input_h = size;
  m.input_w = size;
  m.backbone = {support::identity_conv(3)};
  m.prototypes.dimension = 3;
  m.prototypes.vectors = {{0.5f, 0.5f, 0.5f}};
  m.prototypes.provenance = {std::nullopt};
  m.simfn = {SimilarityKind::neg_exp, 1e-4};
  m.policy = {TargetPolicyKind::prototree_threshold, 0.5};
  return m;
}

Tensor random_image(int size, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({3, size, size});
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  return t;
}

}  // namespace

TEST_CASE("extract_features: identity backbone returns the image") {
  const ModelBundle m = identity_bundle(4);
  const Tensor img = random_image(4, 3);
  const Features f = extract_features(m, img);
  REQUIRE(f.chw.shape() == img.shape());
  for (std::int64_t i = 0; i < img.numel(); ++i) CHECK(f.chw[i] == img[i]);
}

TEST_CASE("extract_features: zero image through a bias-free net gives zero features") {
  RandomFixtureOptions opts;
  opts.bias_free = true;
  opts.image_size = 8;
  const RandomFixture fx = gen_random(5, opts);
  const Features f = extract_features(fx.bundle, Tensor({3, 8, 8}));
  for (std::int64_t i = 0; i < f.chw.numel(); ++i) CHECK(f.chw[i] == 0.0f);
}

TEST_CASE("extract_features: composes the per-layer ops exactly") {
  RandomFixtureOptions opts;
  opts.image_size = 10;
  const RandomFixture fx = gen_random(17, opts);
  const Features f = extract_features(fx.bundle, fx.image);
  // Compose manually through the public per-op API.
  Tensor cur = fx.image;
  for (std::size_t i = 0; i < fx.bundle.backbone.size(); ++i) {
    const LayerSpec& layer = fx.bundle.backbone[i];
    switch (layer.kind) {
      case LayerKind::conv2d: cur = conv2d_forward(cur, layer); break;
      case LayerKind::relu: cur = relu_forward(cur); break;
      case LayerKind::maxpool2d: cur = maxpool_forward(cur, layer.window, layer.stride); break;
    }
  }
  REQUIRE(f.chw.shape() == cur.shape());
  for (std::int64_t i = 0; i < cur.numel(); ++i) CHECK(f.chw[i] == cur[i]);
}

TEST_CASE("extract_features: rejects mismatched image dims") {
  const ModelBundle m = identity_bundle(4);
  CHECK_THROWS_AS(extract_features(m, Tensor({3, 5, 5})), ArgumentError);
}

TEST_CASE("similarity values at anchor distances") {
  SimilarityFunction neg_exp{SimilarityKind::neg_exp, 1e-4};
  CHECK(neg_exp.value(0.0) == 1.0);
  CHECK(neg_exp.value(1.0) == doctest::Approx(0.36787944).epsilon(1e-7));

  SimilarityFunction log_ratio{SimilarityKind::log_ratio, 1e-4};
  CHECK(log_ratio.value(0.0) == doctest::Approx(9.2103403719).epsilon(1e-9));

  // Monotone decreasing in d2 for both kinds.
  for (double d2 = 0.0; d2 < 5.0; d2 += 0.5) {
    CHECK(neg_exp.value(d2) > neg_exp.value(d2 + 0.5));
    CHECK(log_ratio.value(d2) > log_ratio.value(d2 + 0.5));
    CHECK(neg_exp.derivative(d2) < 0.0);
    CHECK(log_ratio.derivative(d2) < 0.0);
  }
}

TEST_CASE("similarity_map: epsilon must be positive for log_ratio") {
  const Tensor features({1, 2, 2}, {0.f, 1.f, 2.f, 3.f});
  SimilarityFunction bad{SimilarityKind::log_ratio, 0.0};
  CHECK_THROWS_AS(similarity_map(features, {0.0f}, bad), ConfigError);
}

TEST_CASE("similarity_map: map values stay in the contract ranges") {
  RandomFixtureOptions opts;
  opts.image_size = 8;
  const RandomFixture fx = gen_random(31, opts);
  const Features f = extract_features(fx.bundle, fx.image);
  for (SimilarityKind kind : {SimilarityKind::neg_exp, SimilarityKind::log_ratio}) {
    const SimilarityFunction simfn{kind, 1e-4};
    const SimilarityMap map = similarity_map(f.chw, fx.bundle.prototypes.vectors[0], simfn);
    for (std::int64_t i = 0; i < map.values.numel(); ++i) {
      CHECK(map.values[i] > 0.0f);
      if (kind == SimilarityKind::neg_exp) CHECK(map.values[i] <= 1.0f);
      CHECK(std::isfinite(map.values[i]));
    }
  }
}

TEST_CASE("max_similarity: single cell, tie rule, and a linear-scan oracle") {
  SimilarityMap one;
  one.values = Tensor({1, 1}, {0.7f});
  const Target t1 = max_similarity(one);
  CHECK(t1.h == 0);
  CHECK(t1.w == 0);
  CHECK(t1.score == 0.7f);

  SimilarityMap flat;
  flat.values = Tensor::full({3, 3}, 0.5f);
  const Target t2 = max_similarity(flat);
  CHECK(t2.h == 0);
  CHECK(t2.w == 0);

  Rng rng(77);
  SimilarityMap random_map;
  random_map.values = Tensor({7, 7});
  for (auto& v : random_map.values.values()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  const Target got = max_similarity(random_map);
  float best = -1.0f;
  int bh = 0, bw = 0;
  for (int h = 0; h < 7; ++h) {
    for (int w = 0; w < 7; ++w) {
      if (random_map.values.at(h, w) > best) {
        best = random_map.values.at(h, w);
        bh = h;
        bw = w;
      }
    }
  }
  CHECK(got.h == bh);
  CHECK(got.w == bw);
  CHECK(got.score == best);
}

TEST_CASE("argmax invariance: both similarity functions rank cells identically") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    RandomFixtureOptions opts;
    opts.image_size = 10;
    const RandomFixture fx = gen_random(seed * 11 + 3, opts);
    const Features f = extract_features(fx.bundle, fx.image);
    const SimilarityMap a =
        similarity_map(f.chw, fx.bundle.prototypes.vectors[0], {SimilarityKind::neg_exp, 1e-4});
    const SimilarityMap b =
        similarity_map(f.chw, fx.bundle.prototypes.vectors[0], {SimilarityKind::log_ratio, 1e-4});
    const Target ta = max_similarity(a);
    const Target tb = max_similarity(b);
    CHECK(ta.h == tb.h);
    CHECK(ta.w == tb.w);
  }
}

TEST_CASE("project_prototypes: exact latent match is a fixed point with distance 0") {
  ModelBundle m = identity_bundle(2);
  Tensor img({3, 2, 2});
  for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = static_cast<float>(i) * 0.1f;
  // Prototype equal to the latent vector at cell (1, 0) of the identity net.
  m.prototypes.vectors[0] = {img.at(0, 1, 0), img.at(1, 1, 0), img.at(2, 1, 0)};

  project_prototypes(m, {img});
  CHECK(m.prototypes.vectors[0][0] == img.at(0, 1, 0));
  CHECK(m.prototypes.provenance[0]->image_id == 0);
  CHECK(m.prototypes.provenance[0]->h == 1);
  CHECK(m.prototypes.provenance[0]->w == 0);
}

TEST_CASE("project_prototypes: winner matches an exhaustive scan") {
  RandomFixtureOptions opts;
  opts.image_size = 6;
  opts.prototypes = 3;
  const RandomFixture fx = gen_random(91, opts);
  const std::vector<Tensor> proj_set = {fx.image, random_image(6, 1234)};

  ModelBundle projected = fx.bundle;
  project_prototypes(projected, proj_set);

  for (int i = 0; i < fx.bundle.prototypes.count(); ++i) {
    double best = 1e300;
    int bi = -1, bh = -1, bw = -1;
    for (std::size_t img = 0; img < proj_set.size(); ++img) {
      const Features f = extract_features(fx.bundle, proj_set[img]);
      for (int h = 0; h < f.height(); ++h) {
        for (int w = 0; w < f.width(); ++w) {
          const double d2 =
              squared_distance(f.chw, h, w, fx.bundle.prototypes.vectors[static_cast<std::size_t>(i)]);
          if (d2 < best) {
            best = d2;
            bi = static_cast<int>(img);
            bh = h;
            bw = w;
          }
        }
      }
    }
    const auto& prov = projected.prototypes.provenance[static_cast<std::size_t>(i)];
    CHECK(prov->image_id == bi);
    CHECK(prov->h == bh);
    CHECK(prov->w == bw);

    // After projection the min distance over the set is exactly zero.
    const Features f = extract_features(projected, proj_set[static_cast<std::size_t>(bi)]);
    CHECK(squared_distance(f.chw, bh, bw,
                           projected.prototypes.vectors[static_cast<std::size_t>(i)]) == 0.0);
  }
}

TEST_CASE("project_prototypes: projecting twice is a no-op") {
  RandomFixtureOptions opts;
  opts.image_size = 6;
  const RandomFixture fx = gen_random(47, opts);
  ModelBundle once = fx.bundle;
  project_prototypes(once, {fx.image});
  ModelBundle twice = once;
  project_prototypes(twice, {fx.image});
  for (int i = 0; i < once.prototypes.count(); ++i) {
    CHECK(once.prototypes.vectors[static_cast<std::size_t>(i)] ==
          twice.prototypes.vectors[static_cast<std::size_t>(i)]);
    CHECK(once.prototypes.provenance[static_cast<std::size_t>(i)]->h ==
          twice.prototypes.provenance[static_cast<std::size_t>(i)]->h);
    CHECK(once.prototypes.provenance[static_cast<std::size_t>(i)]->w ==
          twice.prototypes.provenance[static_cast<std::size_t>(i)]->w);
  }
}

TEST_CASE("project_prototypes: empty projection set is an argument error") {
  ModelBundle m = identity_bundle(2);
  CHECK_THROWS_AS(project_prototypes(m, {}), ArgumentError);
}

TEST_CASE("select_targets: threshold policy boundary cases") {
  RandomFixtureOptions opts;
  opts.image_size = 8;
  opts.prototypes = 3;
  RandomFixture fx = gen_random(7, opts);

  // theta = 0 under neg_exp selects every prototype (scores always > 0).
  fx.bundle.policy = {TargetPolicyKind::prototree_threshold, 0.0};
  CHECK(select_targets(fx.bundle, fx.image).size() == 3);

  // theta = 1 under neg_exp with no exact match selects none.
  fx.bundle.policy = {TargetPolicyKind::prototree_threshold, 1.0};
  CHECK(select_targets(fx.bundle, fx.image).empty());
}

TEST_CASE("select_targets: threshold policy is monotone in theta") {
  RandomFixtureOptions opts;
  opts.image_size = 8;
  opts.prototypes = 4;
  RandomFixture fx = gen_random(21, opts);
  std::size_t previous = 100;
  for (double theta : {0.0, 0.2, 0.4, 0.6, 0.8, 0.99}) {
    fx.bundle.policy = {TargetPolicyKind::prototree_threshold, theta};
    const std::size_t n = select_targets(fx.bundle, fx.image).size();
    CHECK(n <= previous);
    previous = n;
  }
}

TEST_CASE("select_targets: protopnet_top10 ranks the inferred class's prototypes") {
  // Identity backbone, 4 prototypes at known distances from the single cell.
  ModelBundle m;
  m.input_h = 1;
  m.input_w = 1;
  m.backbone = {support::identity_conv(3)};
  m.prototypes.dimension = 3;
  m.prototypes.vectors = {{0.5f, 0.5f, 0.5f},   // d2 = 0       -> s = 1
                          {0.6f, 0.5f, 0.5f},   // d2 = 0.01    -> s ~ 0.990
                          {0.9f, 0.5f, 0.5f},   // d2 = 0.16    -> s ~ 0.852
                          {1.5f, 0.5f, 0.5f}};  // d2 = 1.0     -> s ~ 0.368
  m.prototypes.provenance.assign(4, std::nullopt);
  m.simfn = {SimilarityKind::neg_exp, 1e-4};
  // Class 0 owns prototypes 0 and 3; class 1 owns 1 and 2. Class 1 wins:
  // 0.990 + 0.852 > 1 + 0.368.
  Tensor head({2, 4}, {1.0f, -0.5f, -0.5f, 1.0f, -0.5f, 1.0f, 1.0f, -0.5f});
  m.head = head;
  m.policy = {TargetPolicyKind::protopnet_top10, 0.5};

  const Tensor img({3, 1, 1}, {0.5f, 0.5f, 0.5f});
  const auto targets = select_targets(m, img);
  REQUIRE(targets.size() == 2);
  CHECK(targets[0].prototype_index == 1);  // highest similarity of class 1
  CHECK(targets[1].prototype_index == 2);

  // Without a head the policy is a configuration error.
  m.head.reset();
  CHECK_THROWS_AS(select_targets(m, img), ConfigError);
}

TEST_CASE("select_targets: top10 caps the list at ten prototypes") {
  ModelBundle m;
  m.input_h = 1;
  m.input_w = 1;
  m.backbone = {support::identity_conv(3)};
  m.prototypes.dimension = 3;
  Rng rng(5);
  Tensor head({1, 12});
  for (int i = 0; i < 12; ++i) {
    m.prototypes.vectors.push_back({static_cast<float>(rng.uniform(0.0, 1.0)), 0.5f, 0.5f});
    m.prototypes.provenance.push_back(std::nullopt);
    head.at(0, i) = 1.0f;
  }
  m.head = head;
  m.simfn = {SimilarityKind::neg_exp, 1e-4};
  m.policy = {TargetPolicyKind::protopnet_top10, 0.5};

  const Tensor img({3, 1, 1}, {0.5f, 0.5f, 0.5f});
  const auto targets = select_targets(m, img);
  CHECK(targets.size() == 10);
  for (std::size_t i = 1; i < targets.size(); ++i) {
    CHECK(targets[i - 1].score >= targets[i].score);
  }
}
