#include "skipformer/numerics/array.hpp"

#include <cmath>
#include <numeric>

#include "skipformer/errors.hpp"

namespace skf::num {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Array::Array(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("array data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

Array Array::scalar(double v) { return Array(Shape{}, std::vector<double>{v}); }

Array Array::vector(std::initializer_list<double> values) {
  return vector(std::vector<double>(values));
}

Array Array::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Array(Shape{n}, std::move(values));
}

Array Array::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Array(Shape{r, c}, std::move(data));
}

Array Array::identity(std::size_t n) {
  Array a(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  return a;
}

void Array::not_a_matrix() const {
  throw DimensionError("expected a matrix, got shape " + shape_string(shape_));
}

std::span<const double> Array::row(std::size_t r) const {
  const std::size_t c = cols();
  return {data_.data() + r * c, c};
}

std::span<double> Array::row(std::size_t r) {
  const std::size_t c = cols();
  return {data_.data() + r * c, c};
}

double Array::item() const {
  if (data_.size() != 1) {
    throw ContractError("item() on array of shape " + shape_string(shape_));
  }
  return data_[0];
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Array::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Array Array::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                         shape_string(shape));
  }
  return Array(std::move(shape), data_);
}

}  // namespace skf::num
