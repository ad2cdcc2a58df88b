#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "support.hpp"
#include "protofaith/error.hpp"
#include "protofaith/fixtures.hpp"
#include "protofaith/receptive_field.hpp"
#include "protofaith/saliency.hpp"
#include "protofaith/rng.hpp"

using namespace protofaith;

namespace {

SimilarityMap make_map(Tensor values) {
  SimilarityMap m;
  m.values = std::move(values);
  m.prototype_index = 0;
  return m;
}

}  // namespace

TEST_CASE("upsample_protopnet: constant map degenerates, percentile mask selects all") {
  const SaliencyMap s = upsample_protopnet(make_map(Tensor::full({3, 3}, 0.4f)), 12, 12);
  for (std::int64_t i = 0; i < s.values.numel(); ++i) CHECK(s.values[i] == 0.0f);
  const PixelMask mask = percentile_mask(s, 0.95);
  CHECK(mask.count == 144);
}

TEST_CASE("upsample_protopnet: one-hot map peaks at the upsampled location") {
  Tensor map({7, 7});
  map.at(3, 5) = 1.0f;
  const SaliencyMap s = upsample_protopnet(make_map(map), 56, 56);
  const std::vector<double> want = oracle::bicubic_direct(map, 56, 56);

  // Shift to nonnegative preserves the argmax; compare against the oracle's.
  std::size_t oracle_arg = 0;
  for (std::size_t i = 1; i < want.size(); ++i) {
    if (want[i] > want[oracle_arg]) oracle_arg = i;
  }
  std::int64_t got_arg = 0;
  for (std::int64_t i = 1; i < s.values.numel(); ++i) {
    if (s.values[i] > s.values[got_arg]) got_arg = i;
  }
  CHECK(static_cast<std::size_t>(got_arg) == oracle_arg);
  // Latent (3,5) maps near image (27.5, 43.5) under half-pixel centers.
  CHECK(std::abs(static_cast<int>(got_arg / 56) - 27) <= 1);
  CHECK(std::abs(static_cast<int>(got_arg % 56) - 43) <= 1);
  for (std::int64_t i = 0; i < s.values.numel(); ++i) CHECK(s.values[i] >= 0.0f);
}

TEST_CASE("percentile_mask: 95th percentile keeps ceil(5%) of a strictly ordered map") {
  Tensor map({7, 7});
  for (std::int64_t i = 0; i < map.numel(); ++i) map[i] = static_cast<float>(i);
  SaliencyMap s;
  s.values = map;
  const PixelMask mask = percentile_mask(s, 0.95);
  CHECK(mask.count == 3);  // ceil(0.05 * 49)
  CHECK(mask.test(6, 6));
  CHECK(mask.test(6, 5));
  CHECK(mask.test(6, 4));
}

TEST_CASE("upsample_prototree: 1x1 map gives a constant map") {
  const SaliencyMap s = upsample_prototree(make_map(Tensor({1, 1}, {0.8f})), 8, 8);
  for (std::int64_t i = 0; i < s.values.numel(); ++i) {
    CHECK(s.values[i] == doctest::Approx(0.8f).epsilon(1e-6));
  }
}

TEST_CASE("upsample_prototree: corner argmax concentrates mass at that corner") {
  Tensor map({5, 5});
  for (std::int64_t i = 0; i < map.numel(); ++i) map[i] = 0.1f;
  map.at(4, 4) = 1.0f;
  const SaliencyMap s = upsample_prototree(make_map(map), 20, 20);
  CHECK(s.target.h == 4);
  CHECK(s.target.w == 4);

  std::int64_t arg = 0;
  for (std::int64_t i = 1; i < s.values.numel(); ++i) {
    if (s.values[i] > s.values[arg]) arg = i;
  }
  CHECK(arg / 20 >= 16);
  CHECK(arg % 20 >= 16);

  // Saliency is zero outside the bicubic footprint of the kept cell: a tap
  // reaches cell 4 only when the source coordinate is within 2 of it.
  for (int r = 0; r < 20; ++r) {
    const double sy = (r + 0.5) * 5.0 / 20.0 - 0.5;
    for (int c = 0; c < 20; ++c) {
      const double sx = (c + 0.5) * 5.0 / 20.0 - 0.5;
      if (std::abs(sy - 4.0) >= 2.0 || std::abs(sx - 4.0) >= 2.0) {
        CHECK(s.values.at(r, c) == 0.0f);
      }
    }
  }
}

TEST_CASE("upsample_prototree: equal maxima resolve to the first in row-major order") {
  Tensor map({2, 2}, {0.5f, 0.9f, 0.9f, 0.2f});
  const SaliencyMap s = upsample_prototree(make_map(map), 8, 8);
  CHECK(s.target.h == 0);
  CHECK(s.target.w == 1);
}

TEST_CASE("similarity_input_gradient matches finite differences of the full chain") {
  RandomFixtureOptions fixture_opts;
  fixture_opts.min_layers = 2;
  fixture_opts.max_layers = 3;
  fixture_opts.image_size = 8;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const RandomFixture fx = support::safe_gradcheck_fixture(seed * 500 + 9, fixture_opts);
    const Features f = extract_features(fx.bundle, fx.image);
    const SimilarityMap map =
        similarity_map(f.chw, fx.bundle.prototypes.vectors[0], fx.bundle.simfn, 0);
    const Target t = max_similarity(map);
    const Tensor grad = similarity_input_gradient(fx.bundle, fx.image, t);

    const oracle::DTensor base = oracle::from_tensor(fx.image);
    const double h = 1e-3;
    double scale = 0.0;
    std::vector<double> fd(static_cast<std::size_t>(fx.image.numel()), 0.0);
    for (std::int64_t i = 0; i < fx.image.numel(); ++i) {
      oracle::DTensor plus = base;
      plus.data[static_cast<std::size_t>(i)] += h;
      oracle::DTensor minus = base;
      minus.data[static_cast<std::size_t>(i)] -= h;
      fd[static_cast<std::size_t>(i)] =
          (oracle::similarity_at(fx.bundle.backbone, plus, fx.bundle.prototypes.vectors[0], t.h,
                                 t.w, fx.bundle.simfn) -
           oracle::similarity_at(fx.bundle.backbone, minus, fx.bundle.prototypes.vectors[0], t.h,
                                 t.w, fx.bundle.simfn)) /
          (2.0 * h);
      scale = std::max(scale, std::abs(fd[static_cast<std::size_t>(i)]));
    }
    const double floor = std::max(1e-6, 1e-3 * scale);
    for (std::int64_t i = 0; i < fx.image.numel(); ++i) {
      const double rel = std::abs(fd[static_cast<std::size_t>(i)] - grad[i]) /
                         std::max({std::abs(fd[static_cast<std::size_t>(i)]),
                                   std::abs(static_cast<double>(grad[i])), floor});
      CHECK(rel < 2e-3);
    }
  }
}

TEST_CASE("smoothgrads with zero noise equals gradient x input bitwise") {
  const PlantedFixture fx = gen_planted_off_grid(21);
  const Target t = fx.target;

  SmoothgradsOptions opts;
  opts.samples = 1;
  opts.noise_ratio = 0.0;
  opts.seed = 77;
  const SaliencyMap got = smoothgrads_x_input(fx.bundle, fx.image, t, opts);

  // Reference route assembled from the public building blocks.
  const Tensor grad = similarity_input_gradient(fx.bundle, fx.image, t);
  Tensor raw(fx.image.shape());
  for (std::int64_t i = 0; i < raw.numel(); ++i) {
    raw[i] = static_cast<float>(static_cast<double>(grad[i]) *
                                static_cast<double>(fx.image[i]));
  }
  const Tensor want = postprocess_saliency(raw, Rectify::absolute);
  REQUIRE(got.values.numel() == want.numel());
  for (std::int64_t i = 0; i < want.numel(); ++i) CHECK(got.values[i] == want[i]);
}

TEST_CASE("smoothgrads: zero noise skips the generator entirely") {
  const PlantedFixture fx = gen_planted_off_grid(3);
  const Target t = fx.target;

  SmoothgradsOptions a;
  a.samples = 1;
  a.noise_ratio = 0.0;
  a.seed = 1;
  SmoothgradsOptions b = a;
  b.seed = 999;  // different seed must not matter without noise
  const SaliencyMap sa = smoothgrads_x_input(fx.bundle, fx.image, t, a);
  const SaliencyMap sb = smoothgrads_x_input(fx.bundle, fx.image, t, b);
  for (std::int64_t i = 0; i < sa.values.numel(); ++i) CHECK(sa.values[i] == sb.values[i]);
}

TEST_CASE("smoothgrads: zero image with a bias-free net gives zero saliency") {
  RandomFixtureOptions opts;
  opts.bias_free = true;
  opts.image_size = 8;
  const RandomFixture fx = gen_random(2, opts);
  const Features f = extract_features(fx.bundle, Tensor({3, 8, 8}));
  const SimilarityMap map = similarity_map(f.chw, fx.bundle.prototypes.vectors[0], fx.bundle.simfn, 0);
  const Target t = max_similarity(map);

  SmoothgradsOptions opts_sg;
  opts_sg.samples = 3;
  const SaliencyMap s = smoothgrads_x_input(fx.bundle, Tensor({3, 8, 8}), t, opts_sg);
  for (std::int64_t i = 0; i < s.values.numel(); ++i) CHECK(s.values[i] == 0.0f);
}

TEST_CASE("smoothgrads: fixed seed reproduces bit-identical maps") {
  const PlantedFixture fx = gen_planted_off_grid(5);
  const Target t = fx.target;
  SmoothgradsOptions opts;
  opts.samples = 10;
  opts.noise_ratio = 0.2;
  opts.seed = 42;
  const SaliencyMap a = smoothgrads_x_input(fx.bundle, fx.image, t, opts);
  const SaliencyMap b = smoothgrads_x_input(fx.bundle, fx.image, t, opts);
  for (std::int64_t i = 0; i < a.values.numel(); ++i) CHECK(a.values[i] == b.values[i]);

  opts.seed = 43;
  const SaliencyMap c = smoothgrads_x_input(fx.bundle, fx.image, t, opts);
  bool any_diff = false;
  for (std::int64_t i = 0; i < a.values.numel(); ++i) any_diff = any_diff || a.values[i] != c.values[i];
  CHECK(any_diff);
}

TEST_CASE("smoothgrads: sample count must be positive") {
  const PlantedFixture fx = gen_planted_off_grid(1);
  const Target t{0, fx.cell_h, fx.cell_w, 1.0f};
  SmoothgradsOptions opts;
  opts.samples = 0;
  CHECK_THROWS_AS(smoothgrads_x_input(fx.bundle, fx.image, t, opts), ArgumentError);
}

TEST_CASE("prp: zero-distance target degenerates to a uniform channel split") {
  // Identity backbone; prototype equals the latent vector at (0, 0).
  ModelBundle m;
  m.input_h = 2;
  m.input_w = 2;
  m.backbone = {support::identity_conv(3)};
  m.prototypes.dimension = 3;
  Tensor img({3, 2, 2});
  Rng rng(8);
  for (auto& v : img.values()) v = static_cast<float>(rng.uniform(0.1, 1.0));
  m.prototypes.vectors = {{img.at(0, 0, 0), img.at(1, 0, 0), img.at(2, 0, 0)}};
  m.prototypes.provenance = {std::nullopt};
  m.simfn = {SimilarityKind::neg_exp, 1e-4};
  m.policy = {TargetPolicyKind::prototree_threshold, 0.5};

  const Target t{0, 0, 0, 1.0f};  // d2 = 0 -> s = 1
  const Tensor rel = prp_input_relevance(m, img, t);
  // Uniform init spreads s_m/3 onto each channel at the target pixel.
  for (int c = 0; c < 3; ++c) {
    CHECK(rel.at(c, 0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
  }
  CHECK(rel.sum() == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("prp: total input relevance matches the injected score within 5%") {
  RandomFixtureOptions opts;
  opts.positive_weights = true;
  opts.bias_free = true;
  opts.input_padding = false;
  opts.image_size = 10;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const RandomFixture fx = gen_random(seed * 19 + 5, opts);
    const Features f = extract_features(fx.bundle, fx.image);
    const SimilarityMap map =
        similarity_map(f.chw, fx.bundle.prototypes.vectors[0], fx.bundle.simfn, 0);
    const Target t = max_similarity(map);
    const Tensor rel = prp_input_relevance(fx.bundle, fx.image, t);
    CHECK(rel.sum() == doctest::Approx(static_cast<double>(t.score)).epsilon(0.05));
  }
}

TEST_CASE("prp: relevance support lies inside the theoretical receptive field") {
  RandomFixtureOptions opts;
  opts.image_size = 12;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RandomFixture fx = gen_random(seed * 7 + 11, opts);
    const Features f = extract_features(fx.bundle, fx.image);
    const SimilarityMap map =
        similarity_map(f.chw, fx.bundle.prototypes.vectors[0], fx.bundle.simfn, 0);
    const Target t = max_similarity(map);
    const Tensor rel = prp_input_relevance(fx.bundle, fx.image, t);
    const ReceptiveFieldBox box = receptive_field(fx.bundle.backbone, 12, 12, t.h, t.w);
    for (int c = 0; c < rel.dim(0); ++c) {
      for (int y = 0; y < rel.dim(1); ++y) {
        for (int x = 0; x < rel.dim(2); ++x) {
          if (rel.at(c, y, x) != 0.0f) CHECK(box.contains(y, x));
        }
      }
    }
  }
}

TEST_CASE("prp: nonnegative relevance under z+/zB with nonnegative biases") {
  RandomFixtureOptions opts;
  opts.positive_weights = true;
  opts.bias_free = true;
  opts.image_size = 10;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RandomFixture fx = gen_random(seed + 400, opts);
    const Features f = extract_features(fx.bundle, fx.image);
    const SimilarityMap map =
        similarity_map(f.chw, fx.bundle.prototypes.vectors[0], fx.bundle.simfn, 0);
    const Target t = max_similarity(map);
    const Tensor rel = prp_input_relevance(fx.bundle, fx.image, t);
    for (std::int64_t i = 0; i < rel.numel(); ++i) CHECK(rel[i] >= 0.0f);
  }
}

TEST_CASE("postprocess: channel-constant negative input flips sign under abs") {
  const Tensor raw = Tensor::full({3, 5, 5}, -0.6f);
  const Tensor out = postprocess_saliency(raw, Rectify::absolute);
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    CHECK(out[i] == doctest::Approx(0.6f).epsilon(1e-5));
  }
}

TEST_CASE("postprocess: opposite-sign channels cancel before rectification") {
  Tensor raw({3, 4, 4});
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      raw.at(0, y, x) = 0.7f;
      raw.at(1, y, x) = -0.7f;
      raw.at(2, y, x) = 0.0f;
    }
  }
  const Tensor out = postprocess_saliency(raw, Rectify::absolute);
  for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out[i] == 0.0f);
}

TEST_CASE("postprocess: blur preserves the channel-mean sum of an impulse") {
  Tensor raw({3, 9, 9});
  raw.at(0, 4, 4) = 1.0f;
  raw.at(1, 4, 4) = 1.0f;
  raw.at(2, 4, 4) = 1.0f;
  const Tensor out = postprocess_saliency(raw, Rectify::absolute);
  CHECK(out.sum() == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("postprocess: clamp_negative drops negative means instead of folding them") {
  Tensor raw({3, 1, 3});
  for (int c = 0; c < 3; ++c) {
    raw.at(c, 0, 0) = -1.0f;
    raw.at(c, 0, 1) = 0.0f;
    raw.at(c, 0, 2) = 1.0f;
  }
  const Tensor abs_out = postprocess_saliency(raw, Rectify::absolute);
  const Tensor clamp_out = postprocess_saliency(raw, Rectify::clamp_negative);
  CHECK(abs_out.sum() == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(clamp_out.sum() == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("top_fraction_mask: counts, ties and bounds") {
  Tensor values({224, 224});
  for (std::int64_t i = 0; i < values.numel(); ++i) {
    values[i] = static_cast<float>(values.numel() - i);  // strictly decreasing row-major
  }
  SaliencyMap s;
  s.values = values;

  const PixelMask two_pct = top_fraction_mask(s, 0.02);
  CHECK(two_pct.count == 1004);  // round(0.02 * 50176)

  const PixelMask full = top_fraction_mask(s, 1.0);
  CHECK(full.count == values.numel());

  SaliencyMap flat;
  flat.values = Tensor::full({4, 4}, 1.0f);
  const PixelMask quarter = top_fraction_mask(flat, 0.25);
  CHECK(quarter.count == 4);
  CHECK(quarter.test(0, 0));
  CHECK(quarter.test(0, 1));
  CHECK(quarter.test(0, 2));
  CHECK(quarter.test(0, 3));  // row-major tie order

  CHECK_THROWS_AS(top_fraction_mask(s, 0.0), ArgumentError);
  CHECK_THROWS_AS(top_fraction_mask(s, 1.5), ArgumentError);

  // A tiny positive fraction still selects one pixel.
  const PixelMask tiny = top_fraction_mask(flat, 1e-6);
  CHECK(tiny.count == 1);
}

TEST_CASE("top_fraction_mask: masks nest as the fraction grows") {
  Rng rng(123);
  SaliencyMap s;
  s.values = Tensor({12, 12});
  for (auto& v : s.values.values()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  PixelMask prev = top_fraction_mask(s, 0.01);
  for (double a : {0.05, 0.1, 0.25, 0.5, 1.0}) {
    const PixelMask next = top_fraction_mask(s, a);
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 12; ++x) {
        if (prev.test(y, x)) CHECK(next.test(y, x));
      }
    }
    prev = next;
  }
}

TEST_CASE("crop_patch: single pixel, full mask and an L shape") {
  const Tensor img = Tensor::full({3, 6, 6}, 0.5f);

  PixelMask single = PixelMask::empty(6, 6);
  single.set(2, 3);
  const PartPatch p1 = crop_patch(img, single);
  CHECK(p1.top == 2);
  CHECK(p1.bottom == 3);
  CHECK(p1.left == 3);
  CHECK(p1.right == 4);
  CHECK_FALSE(p1.full_image());

  PixelMask full = PixelMask::empty(6, 6);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) full.set(y, x);
  }
  const PartPatch p2 = crop_patch(img, full);
  CHECK(p2.full_image());

  PixelMask ell = PixelMask::empty(6, 6);
  ell.set(1, 1);
  ell.set(2, 1);
  ell.set(3, 1);
  ell.set(3, 2);
  ell.set(3, 3);
  const PartPatch p3 = crop_patch(img, ell);
  CHECK(p3.top == 1);
  CHECK(p3.bottom == 4);
  CHECK(p3.left == 1);
  CHECK(p3.right == 4);

  CHECK_THROWS_AS(crop_patch(img, PixelMask::empty(6, 6)), ArgumentError);
}

TEST_CASE("every method yields image-shaped nonnegative saliency") {
  const PlantedFixture fx = gen_planted_off_grid(9);
  const Target t = fx.target;
  SmoothgradsOptions sg;
  sg.seed = 7;
  for (SaliencyMethod m :
       {SaliencyMethod::upsample, SaliencyMethod::smoothgrads, SaliencyMethod::prp}) {
    const SaliencyMap s = compute_saliency(fx.bundle, fx.image, t, m, sg);
    CHECK(s.values.dim(0) == fx.image.dim(1));
    CHECK(s.values.dim(1) == fx.image.dim(2));
    for (std::int64_t i = 0; i < s.values.numel(); ++i) {
      CHECK(s.values[i] >= 0.0f);
      CHECK(std::isfinite(s.values[i]));
    }
  }
}
