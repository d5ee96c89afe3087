#include "pdenetpp/parameters.hpp"

#include <stdexcept>

namespace pdenetpp {

std::size_t ParamStore::add(std::string name, Tensor init) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  if (!init.all_finite()) throw NumericalError("parameter " + name + " initialized with non-finite values");
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return values_.size() - 1;
}

void ParamStore::set(std::size_t i, Tensor value) {
  if (value.shape() != values_.at(i).shape()) {
    throw ShapeError("parameter " + names_[i] + ": expected " + to_string(values_[i].shape()) + ", got " +
                     to_string(value.shape()));
  }
  values_[i] = std::move(value);
}

std::optional<std::size_t> ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t ParamStore::element_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

Binding::Binding(Tape& tape, const ParamStore& store, bool track_gradients)
    : tape_(tape), store_(store), track_(track_gradients), vars_(store.size()) {}

Var Binding::operator()(std::size_t index) {
  auto& slot = vars_.at(index);
  if (!slot) slot = tape_.leaf(store_.value(index), track_);
  return *slot;
}

std::vector<Tensor> Binding::gradients(const Gradients& grads) const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    out.push_back(vars_[i] ? grads.of(*vars_[i]) : Tensor::zeros(store_.value(i).shape()));
  }
  return out;
}

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(element_count(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v));
}

Tensor coordinate_channels(std::size_t nx, std::size_t ny) {
  std::vector<double> v(2 * nx * ny);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      v[i * ny + j] = static_cast<double>(i) / static_cast<double>(nx);
      v[nx * ny + i * ny + j] = static_cast<double>(j) / static_cast<double>(ny);
    }
  }
  return Tensor({2, nx, ny}, std::move(v));
}

Var with_coordinates(const Var& state) {
  const Shape& s = state.shape();
  if (s.size() != 3) throw ShapeError("with_coordinates expects [C,H,W], got " + to_string(s));
  Var parts[] = {state, state.tape().constant(coordinate_channels(s[1], s[2]))};
  return concat(parts);
}

}  // namespace pdenetpp
