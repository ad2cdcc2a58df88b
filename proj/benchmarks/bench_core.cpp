#include <benchmark/benchmark.h>

#include "protofaith/fixtures.hpp"
#include "protofaith/metrics.hpp"
#include "protofaith/resample.hpp"
#include "protofaith/rng.hpp"
#include "protofaith/saliency.hpp"

namespace pf = protofaith;

namespace {

pf::Tensor random_map(int h, int w, std::uint64_t seed) {
  pf::Rng rng(seed);
  pf::Tensor t({h, w});
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  pf::Rng rng(1);
  pf::Tensor w({8, 3, 3, 3});
  for (auto& v : w.values()) v = static_cast<float>(rng.normal() * 0.1);
  const pf::LayerSpec spec = pf::LayerSpec::conv(8, 3, 3, 3, 1, 1, std::move(w), pf::Tensor({8}));
  pf::Tensor img({3, size, size});
  for (auto& v : img.values()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pf::conv2d_forward(img, spec));
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64)->Arg(128);

void BM_BackwardInput(benchmark::State& state) {
  const pf::RandomFixtureOptions opts{2, 4, static_cast<int>(state.range(0))};
  const pf::RandomFixture fx = pf::gen_random(3, opts);
  const pf::ForwardTrace trace = pf::run_backbone(fx.bundle.backbone, fx.image);
  pf::Tensor cot(trace.output().shape());
  pf::Rng rng(4);
  for (auto& v : cot.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pf::backward_input(fx.bundle.backbone, trace, cot));
  }
}
BENCHMARK(BM_BackwardInput)->Arg(16)->Arg(32);

void BM_BicubicUpsample(benchmark::State& state) {
  const pf::Tensor map = random_map(7, 7, 5);
  const int out = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pf::bicubic_upsample(map, out, out));
  }
}
BENCHMARK(BM_BicubicUpsample)->Arg(112)->Arg(224);

void BM_GaussianBlur5(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const pf::Tensor map = random_map(size, size, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pf::gaussian_blur5(map));
  }
}
BENCHMARK(BM_GaussianBlur5)->Arg(112)->Arg(224);

void BM_DeletionCurvePrp(benchmark::State& state) {
  const pf::PlantedFixture fx = pf::gen_planted_off_grid(8);
  const pf::Target t{0, fx.cell_h, fx.cell_w, static_cast<float>(fx.expected_similarity)};
  const pf::DeletionGrid grid{0.02, 0.001};
  for (auto _ : state) {
    benchmark::DoNotOptimize(pf::deletion_curve(fx.bundle, fx.image, t, pf::SaliencyMethod::prp,
                                                grid, pf::FillPolicy::zero()));
  }
}
BENCHMARK(BM_DeletionCurvePrp);

void BM_SmoothgradsSaliency(benchmark::State& state) {
  const pf::PlantedFixture fx = pf::gen_planted_off_grid(9);
  const pf::Target t{0, fx.cell_h, fx.cell_w, static_cast<float>(fx.expected_similarity)};
  pf::SmoothgradsOptions opts;
  opts.seed = 11;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pf::smoothgrads_x_input(fx.bundle, fx.image, t, opts));
  }
}
BENCHMARK(BM_SmoothgradsSaliency);

}  // namespace

BENCHMARK_MAIN();
