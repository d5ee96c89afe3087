#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pdenetpp/autodiff.hpp"

namespace pdenetpp {

using Rng = std::mt19937_64;

/// Named trainable tensors in registration order.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor init);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const Tensor& value(std::size_t i) const { return values_.at(i); }
  /// Replaces a value; the shape must not change.
  void set(std::size_t i, Tensor value);
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t element_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Lazily creates one leaf per parameter on a tape.
class Binding {
 public:
  Binding(Tape& tape, const ParamStore& store, bool track_gradients = true);

  Tape& tape() const { return tape_; }
  const ParamStore& store() const { return store_; }
  Var operator()(std::size_t index);
  Var constant(Tensor value) { return tape_.constant(std::move(value)); }

  /// Gradient per parameter, zeros for parameters that were never used.
  std::vector<Tensor> gradients(const Gradients& grads) const;

 private:
  Tape& tape_;
  const ParamStore& store_;
  bool track_;
  std::vector<std::optional<Var>> vars_;
};

/// Uniform(-bound, bound) entries.
Tensor uniform_tensor(Shape shape, double bound, Rng& rng);

/// Normalized grid coordinates x_i = i/nx and y_j = j/ny, shape [2,nx,ny].
Tensor coordinate_channels(std::size_t nx, std::size_t ny);

/// Concatenates `state` [C,H,W] with the coordinate channels.
Var with_coordinates(const Var& state);

}  // namespace pdenetpp
