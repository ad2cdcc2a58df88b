#pragma once

// Helpers shared by the unit suites and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracle.hpp"
#include "protofaith/fixtures.hpp"
#include "protofaith/layers.hpp"
#include "protofaith/rng.hpp"
#include "protofaith/tensor.hpp"

namespace support {

/// Random fixture whose forward pass stays clear of relu kinks and pool ties,
/// so central differences are meaningful. Scans seeds deterministically.
inline protofaith::RandomFixture safe_gradcheck_fixture(std::uint64_t base_seed,
                                                        const protofaith::RandomFixtureOptions& opts,
                                                        double margin = 0.02) {
  for (std::uint64_t seed = base_seed;; ++seed) {
    protofaith::RandomFixture fx = protofaith::gen_random(seed, opts);
    const oracle::Margins m =
        oracle::forward_margins(fx.bundle.backbone, oracle::from_tensor(fx.image));
    if (m.relu > margin && m.pool > margin) return fx;
  }
}

/// Max mixed relative error between backward_input and central differences of
/// <cotangent, F(x)> evaluated with the double-precision oracle forward.
inline double fd_gradcheck(const std::vector<protofaith::LayerSpec>& layers,
                           const protofaith::Tensor& image, const protofaith::Tensor& cotangent,
                           double h = 1e-3) {
  const protofaith::ForwardTrace trace = protofaith::run_backbone(layers, image);
  const protofaith::Tensor grad = protofaith::backward_input(layers, trace, cotangent);

  const oracle::DTensor base = oracle::from_tensor(image);
  std::vector<double> cot(cotangent.data(), cotangent.data() + cotangent.numel());

  std::vector<double> fd(static_cast<std::size_t>(image.numel()), 0.0);
  double scale = 0.0;
  for (std::int64_t i = 0; i < image.numel(); ++i) {
    oracle::DTensor plus = base;
    plus.data[static_cast<std::size_t>(i)] += h;
    oracle::DTensor minus = base;
    minus.data[static_cast<std::size_t>(i)] -= h;
    fd[static_cast<std::size_t>(i)] = (oracle::cotangent_dot(layers, plus, cot) -
                                       oracle::cotangent_dot(layers, minus, cot)) /
                                      (2.0 * h);
    scale = std::max(scale, std::abs(fd[static_cast<std::size_t>(i)]));
  }

  const double floor = std::max(1e-6, 1e-3 * scale);
  double worst = 0.0;
  for (std::int64_t i = 0; i < image.numel(); ++i) {
    const double f = fd[static_cast<std::size_t>(i)];
    const double b = grad[i];
    const double rel = std::abs(f - b) / std::max({std::abs(f), std::abs(b), floor});
    worst = std::max(worst, rel);
  }
  return worst;
}

inline protofaith::Tensor random_cotangent(const std::vector<int>& shape, std::uint64_t seed) {
  protofaith::Rng rng(seed);
  protofaith::Tensor t(shape);
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

/// A 1x1 identity conv layer (weight 1, bias 0) for n channels.
inline protofaith::LayerSpec identity_conv(int channels) {
  protofaith::Tensor w({channels, channels, 1, 1});
  for (int c = 0; c < channels; ++c) w.at(c, c, 0) = 1.0f;  // [c][c][0][0]
  return protofaith::LayerSpec::conv(channels, channels, 1, 1, 1, 0, std::move(w),
                                     protofaith::Tensor({channels}));
}

}  // namespace support
