#include "agn/ndarray.hpp"

#include <cmath>
#include <numeric>

#include "agn/error.hpp"

namespace agn {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

static void check_dims(const Shape& shape) {
  for (auto d : shape)
    if (d == 0) throw ShapeError("zero-sized dimension in shape " + shape_str(shape));
}

NDArray::NDArray(Shape shape, double fill) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(shape_numel(shape_), fill);
}

NDArray::NDArray(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (data_.size() != shape_numel(shape_))
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(shape_));
}

NDArray NDArray::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return NDArray(Shape{n}, std::move(v));
}

NDArray NDArray::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return NDArray(Shape{rows, cols}, std::move(v));
}

std::size_t NDArray::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape_));
  return shape_[axis];
}

double NDArray::item() const {
  if (data_.size() != 1) throw ShapeError("item() on non-scalar " + shape_str(shape_));
  return data_[0];
}

NDArray NDArray::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  return NDArray(std::move(shape), data_);
}

void NDArray::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool NDArray::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace agn
