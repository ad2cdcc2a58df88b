#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "support.hpp"
#include "protofaith/error.hpp"
#include "protofaith/fixtures.hpp"
#include "protofaith/receptive_field.hpp"
#include "protofaith/resample.hpp"
#include "protofaith/rng.hpp"

using namespace protofaith;

TEST_CASE("bicubic: constant maps stay constant") {
  const Tensor map = Tensor::full({3, 4}, 2.5f);
  const Tensor out = bicubic_upsample(map, 9, 13);
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    CHECK(out[i] == doctest::Approx(2.5f).epsilon(1e-6));
  }
}

TEST_CASE("bicubic: a 1x1 map upsamples to its value everywhere") {
  const Tensor map({1, 1}, {0.75f});
  const Tensor out = bicubic_upsample(map, 6, 6);
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    CHECK(out[i] == doctest::Approx(0.75f).epsilon(1e-6));
  }
}

TEST_CASE("bicubic: 2x2 checker to 8x8 matches the direct kernel-sum oracle") {
  const Tensor map({2, 2}, {0.0f, 1.0f, 1.0f, 0.0f});
  const Tensor got = bicubic_upsample(map, 8, 8);
  const std::vector<double> want = oracle::bicubic_direct(map, 8, 8);
  for (std::int64_t i = 0; i < got.numel(); ++i) {
    CHECK(got[i] == doctest::Approx(want[static_cast<std::size_t>(i)]).epsilon(1e-5));
  }
}

TEST_CASE("bicubic: random maps match the direct oracle") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    Rng rng(seed);
    Tensor map({5, 7});
    for (auto& v : map.values()) v = static_cast<float>(rng.uniform(-1.0, 2.0));
    const Tensor got = bicubic_upsample(map, 20, 11);
    const std::vector<double> want = oracle::bicubic_direct(map, 20, 11);
    for (std::int64_t i = 0; i < got.numel(); ++i) {
      CHECK(got[i] == doctest::Approx(want[static_cast<std::size_t>(i)]).epsilon(1e-5));
    }
  }
}

TEST_CASE("bicubic: linear precision on interior pixels of a ramp") {
  const int h = 8, w = 8, oh = 24, ow = 24;
  Tensor map({h, w});
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) map.at(r, c) = static_cast<float>(0.25 * r + 0.5 * c);
  }
  const Tensor out = bicubic_upsample(map, oh, ow);
  for (int r = 0; r < oh; ++r) {
    const double sy = (r + 0.5) * static_cast<double>(h) / oh - 0.5;
    for (int c = 0; c < ow; ++c) {
      const double sx = (c + 0.5) * static_cast<double>(w) / ow - 0.5;
      // All four taps are in range only away from the borders.
      if (sy < 1.0 || sy > h - 2.0 || sx < 1.0 || sx > w - 2.0) continue;
      CHECK(out.at(r, c) == doctest::Approx(0.25 * sy + 0.5 * sx).epsilon(1e-4));
    }
  }
}

TEST_CASE("gaussian_blur5: constant maps are unchanged") {
  const Tensor map = Tensor::full({6, 6}, 3.25f);
  const Tensor out = gaussian_blur5(map);
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    CHECK(out[i] == doctest::Approx(3.25f).epsilon(1e-6));
  }
}

TEST_CASE("gaussian_blur5: centered impulse spreads the kernel, sum 1") {
  Tensor map({9, 9});
  map.at(4, 4) = 1.0f;
  const Tensor out = gaussian_blur5(map);
  CHECK(out.sum() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out.at(4, 4) > out.at(4, 5));
  CHECK(out.at(4, 5) > out.at(4, 6));
  // Separable kernel: corner of the 5x5 support equals product of 1-D tails.
  CHECK(out.at(2, 2) == doctest::Approx(out.at(2, 4) * out.at(4, 2) / out.at(4, 4)).epsilon(1e-4));
  CHECK(out.at(2, 6) == doctest::Approx(out.at(2, 2)).epsilon(1e-6));
}

TEST_CASE("gaussian_blur5: zero maps stay zero, tiny maps survive") {
  const Tensor out = gaussian_blur5(Tensor({4, 5}));
  for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out[i] == 0.0f);

  const Tensor one = gaussian_blur5(Tensor({1, 1}, {2.0f}));
  CHECK(one[0] == doctest::Approx(2.0f).epsilon(1e-6));
}

TEST_CASE("receptive_field: single 3x3 conv, stride 1, pad 1, corner cell") {
  std::vector<LayerSpec> layers = {
      LayerSpec::conv(1, 1, 3, 3, 1, 1, Tensor({1, 1, 3, 3}), Tensor({1}))};
  const ReceptiveFieldBox box = receptive_field(layers, 6, 6, 0, 0);
  CHECK(box.top == 0);
  CHECK(box.bottom == 2);
  CHECK(box.left == 0);
  CHECK(box.right == 2);
}

TEST_CASE("receptive_field: identity 1x1 conv maps a cell to one pixel") {
  std::vector<LayerSpec> layers = {support::identity_conv(1)};
  const ReceptiveFieldBox box = receptive_field(layers, 5, 5, 2, 3);
  CHECK(box.top == 2);
  CHECK(box.bottom == 3);
  CHECK(box.left == 3);
  CHECK(box.right == 4);
}

TEST_CASE("receptive_field: two stacked stride-2 3x3 convs give a side of 7") {
  std::vector<LayerSpec> layers = {
      LayerSpec::conv(1, 1, 3, 3, 2, 0, Tensor({1, 1, 3, 3}), Tensor({1})),
      LayerSpec::conv(1, 1, 3, 3, 2, 0, Tensor({1, 1, 3, 3}), Tensor({1}))};
  // 32 -> 15 -> 7; pick a center cell so nothing clips.
  const ReceptiveFieldBox box = receptive_field(layers, 32, 32, 3, 3);
  CHECK(box.height() == 7);
  CHECK(box.width() == 7);
}

TEST_CASE("receptive_field: out-of-bounds cells are rejected") {
  std::vector<LayerSpec> layers = {support::identity_conv(1)};
  CHECK_THROWS_AS(receptive_field(layers, 4, 4, 4, 0), ArgumentError);
  CHECK_THROWS_AS(receptive_field(layers, 4, 4, 0, -1), ArgumentError);
}

TEST_CASE("receptive_field contains the support of the input gradient") {
  RandomFixtureOptions opts;
  opts.image_size = 12;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const RandomFixture fx = gen_random(seed * 13 + 2, opts);
    const ForwardTrace trace = run_backbone(fx.bundle.backbone, fx.image);
    const auto& out = trace.output();
    Rng rng(seed);
    const int h = rng.uniform_int(0, out.dim(1) - 1);
    const int w = rng.uniform_int(0, out.dim(2) - 1);

    Tensor cot(out.shape());
    for (int c = 0; c < out.dim(0); ++c) cot.at(c, h, w) = 1.0f;
    const Tensor grad = backward_input(fx.bundle.backbone, trace, cot);
    const ReceptiveFieldBox box =
        receptive_field(fx.bundle.backbone, fx.image.dim(1), fx.image.dim(2), h, w);

    for (int c = 0; c < grad.dim(0); ++c) {
      for (int y = 0; y < grad.dim(1); ++y) {
        for (int x = 0; x < grad.dim(2); ++x) {
          if (grad.at(c, y, x) != 0.0f) {
            CHECK(box.contains(y, x));
          }
        }
      }
    }
  }
}
