#include "protofaith/tensor.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "protofaith/error.hpp"

namespace protofaith {

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ArgumentError("tensor dimension must be nonnegative");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), 0.0f) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw ArgumentError("tensor data length does not match shape product");
  }
}

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = value;
  return t;
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

float Tensor::min_value() const {
  float m = std::numeric_limits<float>::infinity();
  for (float v : data_) m = v < m ? v : m;
  return m;
}

float Tensor::max_value() const {
  float m = -std::numeric_limits<float>::infinity();
  for (float v : data_) m = v > m ? v : m;
  return m;
}

double Tensor::sum() const {
  double acc = 0.0;
  for (float v : data_) acc += v;
  return acc;
}

}  // namespace protofaith
