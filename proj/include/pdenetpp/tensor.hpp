#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdenetpp {

/// Raised when array extents do not line up for an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces NaN or Inf.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Storage is shared and never mutated after construction, so copies are
/// cheap and a Tensor can be handed to several workers at once. Build new
/// values in a std::vector and move them in.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_->size(); }

  std::span<const double> data() const { return *data_; }
  const double* begin() const { return data_->data(); }
  const double* end() const { return data_->data() + data_->size(); }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double item() const;

  double at(std::initializer_list<std::size_t> index) const;

  std::vector<double> to_vector() const { return *data_; }
  Tensor reshaped(Shape shape) const;

  /// Leading-axis slice [begin, end) as a new tensor.
  Tensor slice(std::size_t begin, std::size_t end) const;
  /// Leading-axis element i with that axis dropped.
  Tensor operator()(std::size_t i) const;

  bool all_finite() const;

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> parts);

double max_abs_diff(const Tensor& a, const Tensor& b);

/// Complex array stored as paired real and imaginary parts.
struct ComplexField {
  Tensor re;
  Tensor im;

  ComplexField() = default;
  ComplexField(Tensor real, Tensor imag);

  const Shape& shape() const { return re.shape(); }
};

}  // namespace pdenetpp
