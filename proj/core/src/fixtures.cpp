#include "protofaith/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "protofaith/error.hpp"
#include "protofaith/rng.hpp"

namespace protofaith {

namespace {

constexpr int kPlantedLatent = 5;
constexpr int kPlantedStride = 2;
constexpr int kPlantedDepth = 3;
constexpr double kPrototypeOffset = 1.05;  // r = offset * f(designated cell)

float quantize8(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<float>(std::lround(clamped * 255.0) / 255.0);
}

// Image-space center of a latent cell's bicubic footprint.
double bump_center(int cell, int latent, int image_size) {
  return (cell + 0.5) * static_cast<double>(image_size) / latent - 0.5;
}

struct PlantedGeometry {
  int kernel = 0;
  int latent = 0;
  int cell_h = 0;
  int cell_w = 0;
  int offset_y = 0;  // R position inside the designated cell window
  int offset_x = 0;
};

PlantedGeometry plan_geometry(const Region& r, int image_size) {
  if (image_size < 13) throw ArgumentError("planted fixture needs image size >= 13");
  if (r.top < 0 || r.left < 0 || r.bottom > image_size || r.right > image_size ||
      r.height() < 1 || r.width() < 1) {
    throw ArgumentError("planted region outside image bounds");
  }
  // Default geometry is a 5x5 latent grid; regions wider than its window grow
  // the kernel (a whole-image region degenerates to a 1x1 latent grid).
  const int k = std::clamp(std::max({image_size - kPlantedStride * (kPlantedLatent - 1),
                                     r.height(), r.width()}),
                           1, image_size);
  const int latent = (image_size - k) / kPlantedStride + 1;

  // Valid designated cells: windows [s*c, s*c + k) containing R.
  auto valid_cells = [&](int lo, int hi) {
    std::vector<int> cells;
    for (int c = 0; c < latent; ++c) {
      if (kPlantedStride * c <= lo && hi <= kPlantedStride * c + k) cells.push_back(c);
    }
    return cells;
  };
  const auto rows = valid_cells(r.top, r.bottom);
  const auto cols = valid_cells(r.left, r.right);
  if (rows.empty() || cols.empty()) {
    throw ArgumentError("planted region does not align with the stride lattice of any cell");
  }

  // Pick the cell whose bicubic footprint center is farthest from R.
  const double rcy = 0.5 * (r.top + r.bottom - 1);
  const double rcx = 0.5 * (r.left + r.right - 1);
  PlantedGeometry g;
  g.kernel = k;
  g.latent = latent;
  double best = -1.0;
  for (int ch : rows) {
    for (int cw : cols) {
      const double dy = bump_center(ch, latent, image_size) - rcy;
      const double dx = bump_center(cw, latent, image_size) - rcx;
      const double d = dy * dy + dx * dx;
      if (d > best) {
        best = d;
        g.cell_h = ch;
        g.cell_w = cw;
      }
    }
  }
  g.offset_y = r.top - kPlantedStride * g.cell_h;
  g.offset_x = r.left - kPlantedStride * g.cell_w;
  return g;
}

Tensor planted_image(Rng& rng, const Region& r, int image_size) {
  Tensor img({3, image_size, image_size});
  const double denom = image_size - 1;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < image_size; ++y) {
      for (int x = 0; x < image_size; ++x) {
        const double gradient = 0.08 + 0.12 * y / denom + 0.02 * c;
        const double checker = 0.05 * ((y + x) % 2);
        img.at(c, y, x) = quantize8(gradient + checker);
      }
    }
  }
  // Bright Gaussian blob confined to R.
  const double cy = 0.5 * (r.top + r.bottom - 1);
  const double cx = 0.5 * (r.left + r.right - 1);
  const double radius = std::max(1.0, 0.5 * std::max(r.height(), r.width()));
  for (int c = 0; c < 3; ++c) {
    for (int y = r.top; y < r.bottom; ++y) {
      for (int x = r.left; x < r.right; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        const double v = 0.70 + 0.22 * std::exp(-d2 / (2.0 * radius * radius)) +
                         0.04 * rng.uniform();
        img.at(c, y, x) = quantize8(v);
      }
    }
  }
  return img;
}

}  // namespace

Region off_grid_region(std::uint64_t seed, int image_size) {
  const int k = image_size - kPlantedStride * (kPlantedLatent - 1);
  Rng rng(Rng::derive(seed, 17));
  // Cells 0 and 1 keep the far corner of the window away from the footprint.
  const int cell_h = rng.uniform_int(0, 1);
  const int cell_w = rng.uniform_int(0, 1);
  const int size = 4;
  Region r;
  r.top = kPlantedStride * cell_h + k - size;
  r.left = kPlantedStride * cell_w + k - size;
  r.bottom = r.top + size;
  r.right = r.left + size;
  return r;
}

PlantedFixture gen_planted(std::uint64_t seed, const Region& region, int image_size) {
  const PlantedGeometry geo = plan_geometry(region, image_size);
  Rng rng(seed);

  PlantedFixture fx;
  fx.region = region;
  fx.cell_h = geo.cell_h;
  fx.cell_w = geo.cell_w;
  fx.image = planted_image(rng, region, image_size);

  const int rh = region.height(), rw = region.width();
  const int k = geo.kernel;

  // Raw positive weights on the R-offset taps, zero everywhere else.
  // w[d][c][ky][kx], flattened as the conv layout [out,in,kh,kw].
  std::vector<double> w(static_cast<std::size_t>(kPlantedDepth) * 3 * k * k, 0.0);
  auto widx = [&](int d, int c, int ky, int kx) {
    return ((static_cast<std::size_t>(d) * 3 + c) * k + ky) * k + kx;
  };
  for (int d = 0; d < kPlantedDepth; ++d) {
    for (int c = 0; c < 3; ++c) {
      for (int ky = 0; ky < rh; ++ky) {
        for (int kx = 0; kx < rw; ++kx) {
          w[widx(d, c, geo.offset_y + ky, geo.offset_x + kx)] = 0.9 + 0.2 * rng.uniform();
        }
      }
    }
  }

  // Closed-form latent vector of the designated cell and per-pixel
  // contribution vectors, by direct summation (independent of the engine).
  const auto contributions = [&](double scale) {
    std::vector<std::array<double, kPlantedDepth>> u(
        static_cast<std::size_t>(rh) * rw, std::array<double, kPlantedDepth>{});
    for (int ky = 0; ky < rh; ++ky) {
      for (int kx = 0; kx < rw; ++kx) {
        auto& vec = u[static_cast<std::size_t>(ky) * rw + kx];
        for (int d = 0; d < kPlantedDepth; ++d) {
          double acc = 0.0;
          for (int c = 0; c < 3; ++c) {
            acc += scale * w[widx(d, c, geo.offset_y + ky, geo.offset_x + kx)] *
                   static_cast<double>(fx.image.at(c, region.top + ky, region.left + kx));
          }
          vec[static_cast<std::size_t>(d)] = acc;
        }
      }
    }
    return u;
  };

  const int n_pixels = image_size * image_size;
  const double a_region = static_cast<double>(rh * rw) / n_pixels;
  const DeletionGrid erf_grid{0.10, 0.005};
  const auto grid_points = erf_grid.points();

  // Calibrate the weight scale: zero-filling R's pixels in impact order must
  // cross tau < 0.1 within one ERF grid step of |R|/N, and not earlier. The
  // crossing condition only applies when |R|/N lies inside the ERF grid.
  const bool want_crossing = a_region <= erf_grid.a_max + 1e-12;
  double feature_norm_target = 3.5;
  double scale = 1.0;
  bool calibrated = false;
  std::array<double, kPlantedDepth> feat{};
  for (int attempt = 0; attempt < 80 && !calibrated; ++attempt) {
    auto u = contributions(1.0);
    std::array<double, kPlantedDepth> raw{};
    for (const auto& vec : u) {
      for (int d = 0; d < kPlantedDepth; ++d) raw[static_cast<std::size_t>(d)] += vec[static_cast<std::size_t>(d)];
    }
    double raw_norm = 0.0;
    for (double v : raw) raw_norm += v * v;
    scale = std::sqrt(feature_norm_target / raw_norm);
    u = contributions(scale);
    for (int d = 0; d < kPlantedDepth; ++d) feat[static_cast<std::size_t>(d)] = scale * raw[static_cast<std::size_t>(d)];

    std::array<double, kPlantedDepth> proto{};
    for (int d = 0; d < kPlantedDepth; ++d) proto[static_cast<std::size_t>(d)] = kPrototypeOffset * feat[static_cast<std::size_t>(d)];
    double d2_base = 0.0, proto_sq = 0.0;
    for (int d = 0; d < kPlantedDepth; ++d) {
      const double diff = feat[static_cast<std::size_t>(d)] - proto[static_cast<std::size_t>(d)];
      d2_base += diff * diff;
      proto_sq += proto[static_cast<std::size_t>(d)] * proto[static_cast<std::size_t>(d)];
    }
    const double s_base = std::exp(-d2_base);
    const double tau_full = std::exp(-proto_sq) / s_base;

    // Rank pixels by single-pixel closed-form impact, ties row-major.
    std::vector<int> order(u.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> impact(u.size());
    for (std::size_t p = 0; p < u.size(); ++p) {
      double d2 = 0.0;
      for (int d = 0; d < kPlantedDepth; ++d) {
        const double diff = feat[static_cast<std::size_t>(d)] - u[p][static_cast<std::size_t>(d)] - proto[static_cast<std::size_t>(d)];
        d2 += diff * diff;
      }
      impact[p] = s_base - std::exp(-d2);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return impact[static_cast<std::size_t>(a)] > impact[static_cast<std::size_t>(b)]; });

    // Closed-form tau along the ERF grid under that ranking.
    double a_star = -1.0;
    for (double a : grid_points) {
      if (a == 0.0) continue;
      const int m = std::max<int>(1, static_cast<int>(std::llround(a * n_pixels)));
      std::array<double, kPlantedDepth> masked = feat;
      for (int j = 0; j < std::min<int>(m, static_cast<int>(u.size())); ++j) {
        for (int d = 0; d < kPlantedDepth; ++d) {
          masked[static_cast<std::size_t>(d)] -= u[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])][static_cast<std::size_t>(d)];
        }
      }
      double d2 = 0.0;
      for (int d = 0; d < kPlantedDepth; ++d) {
        const double diff = masked[static_cast<std::size_t>(d)] - proto[static_cast<std::size_t>(d)];
        d2 += diff * diff;
      }
      const double tau = std::exp(-d2) / s_base;
      if (tau < 0.1 && a_star < 0.0) a_star = a;
    }

    const bool region_ok = tau_full < 0.095;
    const bool crossing_ok =
        !want_crossing || (a_star > 0.0 && std::abs(a_star - a_region) <= erf_grid.step + 1e-12);
    if (region_ok && crossing_ok) {
      calibrated = true;
    } else if (!region_ok || a_star < 0.0 ||
               (want_crossing && a_star > a_region + erf_grid.step)) {
      feature_norm_target *= 1.08;  // too weak: collapse later than allowed
    } else {
      feature_norm_target /= 1.08;  // too strong: collapse earlier than allowed
    }
  }
  if (!calibrated) {
    throw InternalError("planted fixture calibration did not converge");
  }

  // Materialize the bundle.
  Tensor weights({kPlantedDepth, 3, k, k});
  for (std::int64_t i = 0; i < weights.numel(); ++i) {
    weights[i] = static_cast<float>(scale * w[static_cast<std::size_t>(i)]);
  }
  ModelBundle bundle;
  bundle.input_h = image_size;
  bundle.input_w = image_size;
  bundle.backbone.push_back(LayerSpec::conv(kPlantedDepth, 3, k, k, kPlantedStride, 0,
                                            std::move(weights), Tensor({kPlantedDepth})));
  bundle.prototypes.dimension = kPlantedDepth;
  std::vector<float> proto_f(kPlantedDepth);
  double d2_base = 0.0, proto_norm = 0.0;
  for (int d = 0; d < kPlantedDepth; ++d) {
    const double p = kPrototypeOffset * feat[static_cast<std::size_t>(d)];
    proto_f[static_cast<std::size_t>(d)] = static_cast<float>(p);
    const double diff = feat[static_cast<std::size_t>(d)] - p;
    d2_base += diff * diff;
    proto_norm += p * p;
  }
  bundle.prototypes.vectors.push_back(proto_f);
  bundle.prototypes.provenance.push_back(Provenance{0, geo.cell_h, geo.cell_w});
  bundle.simfn = SimilarityFunction{SimilarityKind::neg_exp, 1e-4};
  bundle.policy = TargetPolicy{TargetPolicyKind::prototree_threshold, 0.5};
  fx.bundle = std::move(bundle);
  fx.expected_similarity = std::exp(-d2_base);
  fx.expected_masked_similarity = std::exp(-proto_norm);

  // Sanity: the engine must agree that the designated cell is the argmax.
  const Features f = extract_features(fx.bundle, fx.image);
  const SimilarityMap map =
      similarity_map(f.chw, fx.bundle.prototypes.vectors[0], fx.bundle.simfn, 0);
  const Target t = max_similarity(map);
  if (t.h != geo.cell_h || t.w != geo.cell_w) {
    throw InternalError("planted fixture argmax is not at the designated cell");
  }
  if (std::abs(static_cast<double>(t.score) - fx.expected_similarity) > 1e-4) {
    throw InternalError("planted fixture closed-form similarity mismatch");
  }
  fx.target = t;

  // Ground truth saliency and object segmentation.
  fx.ground_truth_saliency = Tensor({image_size, image_size});
  for (int y = region.top; y < region.bottom; ++y) {
    for (int x = region.left; x < region.right; ++x) {
      fx.ground_truth_saliency.at(y, x) = 1.0f;
    }
  }
  fx.object_segmentation = PixelMask::empty(image_size, image_size);
  for (int y = std::max(0, region.top - 2); y < std::min(image_size, region.bottom + 2); ++y) {
    for (int x = std::max(0, region.left - 2); x < std::min(image_size, region.right + 2); ++x) {
      fx.object_segmentation.set(y, x);
    }
  }
  return fx;
}

PlantedFixture gen_planted_off_grid(std::uint64_t seed, int image_size) {
  PlantedFixture fx = gen_planted(seed, off_grid_region(seed, image_size), image_size);

  // The defining property of this family: the upsampling method's top-2% mask
  // must miss both R and the surrounding object segmentation.
  const SaliencyMap up =
      compute_saliency(fx.bundle, fx.image, fx.target, SaliencyMethod::upsample);
  const PixelMask mask = top_fraction_mask(up, 0.02);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.test(y, x)) continue;
      if (fx.region.contains(y, x) || fx.object_segmentation.test(y, x)) {
        throw InternalError("off-grid fixture: upsampling mask touches the planted region");
      }
    }
  }
  return fx;
}

RandomFixture gen_random(std::uint64_t seed, const RandomFixtureOptions& opts) {
  if (opts.image_size < 4 || opts.image_size > 32) {
    throw ArgumentError("random fixture image size must lie in [4,32]");
  }
  Rng rng(seed);
  RandomFixture fx;

  // Procedural image: gradient + checkerboard + one soft blob.
  const int s = opts.image_size;
  fx.image = Tensor({3, s, s});
  const double by = rng.uniform(0.2, 0.8) * (s - 1);
  const double bx = rng.uniform(0.2, 0.8) * (s - 1);
  const double amp = rng.uniform(0.2, 0.5);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        const double grad = 0.15 + 0.3 * (c == 0 ? y : (c == 1 ? x : y + x) ) / (2.0 * (s - 1));
        const double checker = 0.08 * ((y / 2 + x / 2) % 2);
        const double d2 = (y - by) * (y - by) + (x - bx) * (x - bx);
        const double blob = amp * std::exp(-d2 / (2.0 * 0.15 * s * s));
        fx.image.at(c, y, x) = quantize8(grad + checker + blob);
      }
    }
  }

  // Random sequential stack. The first layer is always a conv.
  const int layer_budget = rng.uniform_int(opts.min_layers, opts.max_layers);
  std::vector<LayerSpec> layers;
  std::vector<int> shape = {3, s, s};
  int emitted = 0;
  bool last_was_conv = false;
  while (emitted < layer_budget) {
    const bool first = layers.empty();
    int pick = first ? 0 : rng.uniform_int(0, 2);  // 0 conv, 1 relu, 2 pool
    if (pick == 2 && (!opts.allow_pool || shape[1] < 4 || shape[2] < 4)) pick = 1;
    if (pick == 1 && !last_was_conv) pick = 0;  // relu only directly after conv
    if (pick == 0) {
      const int out_c = rng.uniform_int(2, 5);
      const int kernel = rng.uniform_int(0, 1) == 0 ? 1 : 3;
      const int stride = kernel == 3 && shape[1] >= 8 ? rng.uniform_int(1, 2) : 1;
      int padding = kernel == 3 ? rng.uniform_int(0, 1) : 0;
      if (first && !opts.input_padding) padding = 0;
      if ((shape[1] + 2 * padding - kernel) / stride + 1 < 2) {
        pick = 1;  // would shrink below 2x2; fall through to relu if possible
        if (!last_was_conv) break;
      } else {
        Tensor weights({out_c, shape[0], kernel, kernel});
        const double fan = std::sqrt(static_cast<double>(shape[0] * kernel * kernel));
        for (auto& v : weights.values()) {
          v = static_cast<float>(opts.positive_weights ? rng.uniform(0.05, 1.0) / fan
                                                       : rng.normal() / fan);
        }
        Tensor bias({out_c});
        if (!opts.bias_free) {
          for (auto& v : bias.values()) v = static_cast<float>(0.1 * rng.normal());
        }
        layers.push_back(LayerSpec::conv(out_c, shape[0], kernel, kernel, stride, padding,
                                         std::move(weights), std::move(bias)));
        last_was_conv = true;
        shape = layer_output_shape(layers.back(), shape, static_cast<int>(layers.size()) - 1);
        ++emitted;
        continue;
      }
    }
    if (pick == 1) {
      layers.push_back(LayerSpec::relu());
      last_was_conv = false;
      ++emitted;
      continue;
    }
    layers.push_back(LayerSpec::maxpool(2, 2));
    last_was_conv = false;
    shape = layer_output_shape(layers.back(), shape, static_cast<int>(layers.size()) - 1);
    ++emitted;
  }

  ModelBundle bundle;
  bundle.input_h = s;
  bundle.input_w = s;
  bundle.backbone = std::move(layers);
  bundle.simfn = SimilarityFunction{opts.similarity, 1e-4};
  bundle.policy = TargetPolicy{TargetPolicyKind::prototree_threshold, 0.5};

  // Prototypes near actual latent vectors so similarities stay informative.
  const ForwardTrace trace = run_backbone(bundle.backbone, fx.image);
  const Tensor& latent = trace.output();
  const int d = latent.dim(0), lh = latent.dim(1), lw = latent.dim(2);
  const std::int64_t plane = static_cast<std::int64_t>(lh) * lw;
  bundle.prototypes.dimension = d;
  for (int i = 0; i < opts.prototypes; ++i) {
    const int ph = rng.uniform_int(0, lh - 1);
    const int pw = rng.uniform_int(0, lw - 1);
    std::vector<float> vec(static_cast<std::size_t>(d));
    for (int kk = 0; kk < d; ++kk) {
      vec[static_cast<std::size_t>(kk)] = static_cast<float>(
          latent[kk * plane + static_cast<std::int64_t>(ph) * lw + pw] + 0.2 * rng.normal());
    }
    bundle.prototypes.vectors.push_back(std::move(vec));
    bundle.prototypes.provenance.push_back(std::nullopt);
  }
  fx.bundle = std::move(bundle);
  fx.bundle.validate();
  return fx;
}

Tensor occlusion_oracle(const ModelBundle& model, const Tensor& image, const Target& target,
                        int patch, const FillPolicy& fill) {
  if (patch < 1) throw ArgumentError("occlusion patch size must be >= 1");
  const int h = image.dim(1), w = image.dim(2);
  const auto& r = model.prototypes.vectors[static_cast<std::size_t>(target.prototype_index)];
  Tensor importance({h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Tensor masked = image;
      for (int c = 0; c < image.dim(0); ++c) {
        for (int dy = 0; dy < patch && y + dy < h; ++dy) {
          for (int dx = 0; dx < patch && x + dx < w; ++dx) {
            masked.at(c, y + dy, x + dx) = fill.values[static_cast<std::size_t>(c)];
          }
        }
      }
      const ForwardTrace trace = run_backbone(model.backbone, masked);
      const double d2 = squared_distance(trace.output(), target.h, target.w, r);
      // Round the masked score to float32 like every similarity map value, so
      // pixels that never reach the target cell score an importance of 0.
      const float masked_score = static_cast<float>(model.simfn.value(d2));
      importance.at(y, x) = target.score - masked_score;
    }
  }
  return importance;
}

SaliencyMap oracle_saliency(const ModelBundle& model, const Tensor& image, const Target& target,
                            const FillPolicy& fill) {
  SaliencyMap out;
  out.method = SaliencyMethod::oracle;
  out.target = target;
  out.values = occlusion_oracle(model, image, target, 1, fill);
  const float lo = out.values.min_value();
  if (lo < 0.0f) {
    for (auto& v : out.values.values()) v -= lo;
  }
  return out;
}

}  // namespace protofaith
