#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace agn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles. Rank 0 is a scalar. Every dimension is
// at least 1, so size() == product(shape) >= 1.
class NDArray {
 public:
  NDArray() : shape_{}, data_(1, 0.0) {}
  explicit NDArray(Shape shape, double fill = 0.0);
  NDArray(Shape shape, std::vector<double> data);

  static NDArray scalar(double v) { return NDArray(Shape{}, std::vector<double>{v}); }
  static NDArray vector(std::vector<double> v);
  static NDArray matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& raw() noexcept { return data_; }
  const std::vector<double>& raw() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_.back() + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_.back() + j]; }

  double item() const;  // requires size() == 1
  NDArray reshaped(Shape shape) const;
  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const NDArray& a, const NDArray& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace agn
