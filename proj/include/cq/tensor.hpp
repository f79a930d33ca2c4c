#pragma once

#include <cassert>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

namespace cq {

// Dense float32 tensor, row-major. Storage is shared between views created
// by reshaped(); every mutating op in the library allocates a fresh output,
// so aliasing only ever happens between a tensor and its reshapes.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<float>>(count(shape_), 0.0f)) {}

  Tensor(std::vector<int64_t> shape, std::vector<float> values)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<float>>(std::move(values))) {
    assert(static_cast<int64_t>(data_->size()) == count(shape_));
  }

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int64_t> shape, float v) {
    Tensor t(std::move(shape));
    std::fill(t.data_->begin(), t.data_->end(), v);
    return t;
  }

  static Tensor scalar(float v) { return Tensor({1}, {v}); }

  bool defined() const { return data_ != nullptr; }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

  float* data() { return data_->data(); }
  const float* data() const { return data_->data(); }

  float item() const {
    assert(numel() == 1);
    return (*data_)[0];
  }

  // New tensor sharing storage with a different shape.
  Tensor reshaped(std::vector<int64_t> shape) const {
    assert(count(shape) == numel());
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<float>>(*data_);
    return t;
  }

  void fill(float v) { std::fill(data_->begin(), data_->end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  static int64_t count(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  std::vector<int64_t> shape_;
  std::shared_ptr<std::vector<float>> data_;
};

}  // namespace cq
