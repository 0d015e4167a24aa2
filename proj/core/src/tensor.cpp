#include "credfed/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "credfed/errors.hpp"

namespace credfed {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (shape_.empty()) throw DimensionError("tensor shape must have at least one axis");
  if (shape_size(shape_) != values_.size()) {
    throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(values_.size()) + " values");
  }
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty()) throw DimensionError("tensor shape must have at least one axis");
  values_.assign(shape_size(shape_), fill);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(v));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw DimensionError("axis out of range for " + shape_string(shape_));
  return shape_[axis];
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 1) return 1;
  if (shape_.size() != 2) throw DimensionError("expected rank <= 2, got " + shape_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 1) return shape_[0];
  if (shape_.size() != 2) throw DimensionError("expected rank <= 2, got " + shape_string(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (values_.size() != 1) throw DimensionError("item() on non-scalar " + shape_string(shape_));
  return values_[0];
}

bool Tensor::all_finite() const noexcept {
  // Any inf or NaN makes the sum non-finite; only then is a per-element scan needed.
  const double s = Eigen::Map<const Eigen::ArrayXd>(values_.data(), static_cast<Eigen::Index>(values_.size())).sum();
  if (std::isfinite(s)) return true;
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.empty() || shape_size(shape) != values_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

ParameterVector sgd_step(const ParameterVector& params, const ParameterVector& grads, double lr) {
  if (params.size() != grads.size()) {
    throw DimensionError("sgd_step: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(grads.size()) + " grads");
  }
  require(lr > 0.0, "sgd_step: learning rate must be positive");
  ParameterVector out = params;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lr * grads[i];
  return out;
}

double squared_distance(const ParameterVector& a, const ParameterVector& b) {
  if (a.size() != b.size()) throw DimensionError("squared_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace credfed
