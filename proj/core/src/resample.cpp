#include "protofaith/resample.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "protofaith/error.hpp"

namespace protofaith {

namespace {

// Keys cubic kernel, a = -0.5 (Catmull-Rom).
double cubic_weight(double t) {
  const double a = -0.5;
  const double at = std::abs(t);
  if (at <= 1.0) return ((a + 2.0) * at - (a + 3.0)) * at * at + 1.0;
  if (at < 2.0) return a * (((at - 5.0) * at + 8.0) * at - 4.0);
  return 0.0;
}

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

// One separable pass along the last axis: [rows, in_len] -> [rows, out_len].
void bicubic_pass(const double* src, int rows, int in_len, int out_len, double* dst) {
  const double scale = static_cast<double>(in_len) / static_cast<double>(out_len);
  for (int o = 0; o < out_len; ++o) {
    const double s = (o + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(s));
    const double frac = s - base;
    const std::array<double, 4> w = {cubic_weight(frac + 1.0), cubic_weight(frac),
                                     cubic_weight(frac - 1.0), cubic_weight(frac - 2.0)};
    const std::array<int, 4> idx = {clamp_index(base - 1, in_len), clamp_index(base, in_len),
                                    clamp_index(base + 1, in_len), clamp_index(base + 2, in_len)};
    for (int r = 0; r < rows; ++r) {
      const double* row = src + static_cast<std::size_t>(r) * in_len;
      dst[static_cast<std::size_t>(r) * out_len + o] =
          w[0] * row[idx[0]] + w[1] * row[idx[1]] + w[2] * row[idx[2]] + w[3] * row[idx[3]];
    }
  }
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace

Tensor bicubic_upsample(const Tensor& map, int out_h, int out_w) {
  if (map.rank() != 2) throw ArgumentError("bicubic_upsample expects a [H,W] map");
  if (out_h < 1 || out_w < 1) throw ArgumentError("bicubic_upsample output dims must be >= 1");
  const int h = map.dim(0), w = map.dim(1);

  std::vector<double> src(static_cast<std::size_t>(map.numel()));
  for (std::int64_t i = 0; i < map.numel(); ++i) src[static_cast<std::size_t>(i)] = map[i];

  // Columns first: [h, w] -> [h, out_w], then rows via transpose trick.
  std::vector<double> mid(static_cast<std::size_t>(h) * out_w);
  bicubic_pass(src.data(), h, w, out_w, mid.data());

  std::vector<double> mid_t(static_cast<std::size_t>(out_w) * h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      mid_t[static_cast<std::size_t>(c) * h + r] = mid[static_cast<std::size_t>(r) * out_w + c];
    }
  }
  std::vector<double> out_t(static_cast<std::size_t>(out_w) * out_h);
  bicubic_pass(mid_t.data(), out_w, h, out_h, out_t.data());

  Tensor out({out_h, out_w});
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      out.at(r, c) = static_cast<float>(out_t[static_cast<std::size_t>(c) * out_h + r]);
    }
  }
  return out;
}

Tensor gaussian_blur5(const Tensor& map) {
  if (map.rank() != 2) throw ArgumentError("gaussian_blur5 expects a [H,W] map");
  const int h = map.dim(0), w = map.dim(1);

  // sigma = 1.0, normalized so the 5-tap kernel sums to 1.
  std::array<double, 5> k{};
  double total = 0.0;
  for (int i = -2; i <= 2; ++i) {
    k[static_cast<std::size_t>(i + 2)] = std::exp(-0.5 * i * i);
    total += k[static_cast<std::size_t>(i + 2)];
  }
  for (double& v : k) v /= total;

  std::vector<double> tmp(static_cast<std::size_t>(map.numel()));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) {
        acc += k[static_cast<std::size_t>(i + 2)] * map.at(r, reflect_index(c + i, w));
      }
      tmp[static_cast<std::size_t>(r) * w + c] = acc;
    }
  }
  Tensor out({h, w});
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) {
        acc += k[static_cast<std::size_t>(i + 2)] * tmp[static_cast<std::size_t>(reflect_index(r + i, h)) * w + c];
      }
      out.at(r, c) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace protofaith
