#include "knockoffs/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace knockoffs {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
    n *= d;
  }
  return n;
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape) {
  Tensor t;
  t.size_ = shape_numel(shape);
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(t.size_), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double value) {
  Tensor t = zeros(std::move(shape));
  for (double& v : *t.data_) v = value;
  return t;
}

Tensor Tensor::from_data(std::vector<std::int64_t> shape,
                         std::vector<double> data) {
  Tensor t;
  t.size_ = shape_numel(shape);
  if (t.size_ != static_cast<std::int64_t>(data.size()))
    throw std::invalid_argument("tensor data length does not match shape");
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<std::vector<double>>(std::move(data));
  return t;
}

Tensor Tensor::randn(std::vector<std::int64_t> shape, RngStream& rng,
                     double sd) {
  Tensor t = zeros(std::move(shape));
  for (double& v : *t.data_) v = rng.normal() * sd;
  return t;
}

std::int64_t Tensor::rows() const {
  if (ndim() == 0) return 1;
  if (ndim() == 1) return 1;
  if (ndim() == 2) return shape_[0];
  throw std::logic_error("rows(): tensor has more than 2 dims");
}

std::int64_t Tensor::cols() const {
  if (ndim() == 0) return 1;
  if (ndim() == 1) return shape_[0];
  if (ndim() == 2) return shape_[1];
  throw std::logic_error("cols(): tensor has more than 2 dims");
}

bool Tensor::all_finite() const {
  if (!defined()) return true;
  for (double v : *data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::reshaped(std::vector<std::int64_t> shape) const {
  if (shape_numel(shape) != size_)
    throw std::invalid_argument("reshape changes element count");
  Tensor t;
  t.shape_ = std::move(shape);
  t.size_ = size_;
  t.data_ = data_;
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.size_ = size_;
  t.data_ = std::make_shared<std::vector<double>>(*data_);
  return t;
}

double Tensor::sum() const {
  double s = 0.0;
  for (double v : *data_) s += v;
  return s;
}

double Tensor::squared_norm() const {
  double s = 0.0;
  for (double v : *data_) s += v * v;
  return s;
}

}  // namespace knockoffs
