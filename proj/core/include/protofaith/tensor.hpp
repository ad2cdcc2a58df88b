#pragma once

#include <cstdint>
#include <vector>

namespace protofaith {

/// Dense n-dimensional row-major array of 32-bit floats.
///
/// All images, feature maps, gradients and relevance maps in the library are
/// Tensors. Values are stored as float; operations accumulate in double and
/// round once per output element.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor full(std::vector<int> shape, float value);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Rank-specific accessors; the caller is responsible for matching rank.
  float& at(int a, int b) { return data_[static_cast<std::size_t>(a) * shape_[1] + b]; }
  float at(int a, int b) const { return data_[static_cast<std::size_t>(a) * shape_[1] + b]; }
  float& at(int a, int b, int c) {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  float at(int a, int b, int c) const {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }

  bool all_finite() const;
  float min_value() const;
  float max_value() const;
  /// Sum of all elements, accumulated in double.
  double sum() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

std::int64_t shape_numel(const std::vector<int>& shape);

}  // namespace protofaith
