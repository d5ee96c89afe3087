#include "pdenetpp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pdenetpp {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : Tensor(Shape{}) {}

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)),
      data_(std::make_shared<const std::vector<double>>(element_count(shape_), 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (values.size() != element_count(shape_)) {
    throw ShapeError("tensor of shape " + to_string(shape_) + " given " +
                     std::to_string(values.size()) + " values");
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::full(Shape shape, double value) {
  const auto n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range for " + to_string(shape_));
  return shape_[axis];
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
  return (*data_)[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) throw ShapeError("index rank mismatch for " + to_string(shape_));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) throw ShapeError("index out of range for " + to_string(shape_));
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return (*data_)[flat];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

Tensor Tensor::slice(std::size_t begin, std::size_t end) const {
  if (shape_.empty() || begin > end || end > shape_[0]) {
    throw ShapeError("bad leading-axis slice of " + to_string(shape_));
  }
  const std::size_t inner = shape_[0] ? size() / shape_[0] : 0;
  Shape s = shape_;
  s[0] = end - begin;
  return Tensor(std::move(s), std::vector<double>(data_->begin() + static_cast<std::ptrdiff_t>(begin * inner),
                                                  data_->begin() + static_cast<std::ptrdiff_t>(end * inner)));
}

Tensor Tensor::operator()(std::size_t i) const {
  Tensor part = slice(i, i + 1);
  return part.reshaped(Shape(shape_.begin() + 1, shape_.end()));
}

bool Tensor::all_finite() const {
  return std::all_of(data_->begin(), data_->end(), [](double v) { return std::isfinite(v); });
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("stack of zero tensors");
  const Shape& inner = parts.front().shape();
  std::vector<double> values;
  values.reserve(parts.size() * parts.front().size());
  for (const auto& p : parts) {
    if (p.shape() != inner) throw ShapeError("stack: mismatched shapes " + to_string(inner) + " vs " + to_string(p.shape()));
    values.insert(values.end(), p.begin(), p.end());
  }
  Shape s{parts.size()};
  s.insert(s.end(), inner.begin(), inner.end());
  return Tensor(std::move(s), std::move(values));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_abs_diff: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

ComplexField::ComplexField(Tensor real, Tensor imag) : re(std::move(real)), im(std::move(imag)) {
  if (re.shape() != im.shape()) throw ShapeError("complex parts differ in shape");
}

}  // namespace pdenetpp
