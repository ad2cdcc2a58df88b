#pragma once

// Test-only brute-force reference implementations. Everything here computes
// in double precision with plain nested loops and stays independent of the
// library's forward/backward code paths.

#include <vector>

#include "protofaith/layers.hpp"
#include "protofaith/model.hpp"
#include "protofaith/tensor.hpp"

namespace oracle {

struct DTensor {
  std::vector<int> shape;
  std::vector<double> data;

  double& at(int a, int b, int c) {
    return data[(static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c];
  }
  double at(int a, int b, int c) const {
    return data[(static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c];
  }
};

DTensor from_tensor(const protofaith::Tensor& t);

DTensor conv2d(const DTensor& in, const protofaith::LayerSpec& spec);
DTensor relu(const DTensor& in);
DTensor maxpool(const DTensor& in, int window, int stride);
DTensor forward(const std::vector<protofaith::LayerSpec>& layers, const DTensor& image);

/// <cotangent, F(x)> evaluated wholly in double.
double cotangent_dot(const std::vector<protofaith::LayerSpec>& layers, const DTensor& image,
                     const std::vector<double>& cotangent);

/// Similarity score at a fixed latent cell, evaluated wholly in double.
double similarity_at(const std::vector<protofaith::LayerSpec>& layers, const DTensor& image,
                     const std::vector<float>& prototype, int h, int w,
                     const protofaith::SimilarityFunction& simfn);

/// Numerical-safety margins of a forward pass: smallest |pre-activation|
/// entering any relu and smallest winner-runnerup gap in any pool window.
/// Used to filter gradient-check fixtures away from kinks.
struct Margins {
  double relu = 1e30;
  double pool = 1e30;
};
Margins forward_margins(const std::vector<protofaith::LayerSpec>& layers, const DTensor& image);

/// Direct (non-separable) bicubic resample with the same kernel/convention
/// contract as the library: Catmull-Rom a=-0.5, half-pixel centers, edge
/// replication.
std::vector<double> bicubic_direct(const protofaith::Tensor& map, int out_h, int out_w);

}  // namespace oracle
