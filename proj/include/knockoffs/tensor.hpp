#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "knockoffs/rng.hpp"

namespace knockoffs {

// Dense row-major tensor of doubles. Values are treated as immutable once
// an op has published them; mutation is only done on freshly allocated
// storage before handing the tensor out.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::int64_t> shape);
  static Tensor full(std::vector<std::int64_t> shape, double value);
  static Tensor from_data(std::vector<std::int64_t> shape,
                          std::vector<double> data);
  static Tensor scalar(double value) { return from_data({}, {value}); }
  static Tensor randn(std::vector<std::int64_t> shape, RngStream& rng,
                      double sd = 1.0);

  bool defined() const { return data_ != nullptr; }
  const std::vector<std::int64_t>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return size_; }

  // {rows, cols} view of a 1- or 2-d tensor ({n} reads as {1, n}).
  std::int64_t rows() const;
  std::int64_t cols() const;

  double operator[](std::int64_t i) const { return (*data_)[static_cast<std::size_t>(i)]; }
  double at(std::int64_t r, std::int64_t c) const {
    return (*data_)[static_cast<std::size_t>(r * cols() + c)];
  }

  std::span<const double> data() const { return {data_->data(), data_->size()}; }
  // Only valid on storage this code owns exclusively (fresh tensors).
  std::span<double> mutable_data() { return {data_->data(), data_->size()}; }

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  Tensor reshaped(std::vector<std::int64_t> shape) const;  // shares storage
  Tensor clone() const;

  double sum() const;
  double squared_norm() const;

 private:
  std::vector<std::int64_t> shape_;
  std::int64_t size_ = 0;
  std::shared_ptr<std::vector<double>> data_;
};

std::int64_t shape_numel(const std::vector<std::int64_t>& shape);

}  // namespace knockoffs
