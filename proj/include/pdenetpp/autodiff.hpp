#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "pdenetpp/tensor.hpp"

namespace pdenetpp {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Accumulators for the parents of one node during the backward sweep.
class GradSink {
 public:
  bool wants(std::size_t parent) const;
  /// Zero-initialized on first access; always sized like the parent value.
  std::span<double> operator[](std::size_t parent);

 private:
  friend class Tape;
  GradSink(Tape& tape, std::span<const std::size_t> parents, std::vector<std::vector<double>>& grads)
      : tape_(tape), parents_(parents), grads_(grads) {}

  Tape& tape_;
  std::span<const std::size_t> parents_;
  std::vector<std::vector<double>>& grads_;
};

using BackwardRule = std::function<void(std::span<const double> grad_out, GradSink& parents)>;

/// Gradients of a scalar with respect to every node that required them.
class Gradients {
 public:
  /// Gradient for `v`; zeros if nothing downstream depended on it.
  Tensor of(const Var& v) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<std::vector<double>> grads_;
};

/// Single-owner record of primitive operations, in creation order.
///
/// Every recorded value is checked for NaN/Inf. Nodes whose parents need no
/// gradient are stored without a backward rule.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return nodes_.size(); }

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var record(std::string_view op, Tensor value, std::span<const Var> parents, BackwardRule rule);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Reverse sweep from a 0-dim output.
  Gradients backward(const Var& output) const;

  /// Running hash of the active branch of every piecewise op (relu masks,
  /// sign patterns). Two evaluations with equal signatures took the same
  /// smooth piece, which is what a finite-difference check needs.
  std::uint64_t kink_signature() const { return kinks_; }
  void mix_kinks(std::uint64_t h);

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardRule rule;
    bool requires_grad = false;
  };

  std::uint64_t id_;
  std::uint64_t kinks_ = 0x9e3779b97f4a7c15ULL;
  // A deque keeps references returned by value() valid while recording.
  std::deque<Node> nodes_;
};

// Elementwise and reductions.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_const(const Var& a, const Tensor& c);
Var mul_const(const Var& a, const Tensor& c);
Var relu(const Var& a);
Var tanh(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var pow3(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var l1_norm(const Var& a);
Var l2_norm(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

// Layout.
Var reshape(const Var& a, Shape shape);
/// Concatenation along the leading axis.
Var concat(std::span<const Var> parts);
/// Leading-axis slice [begin, end).
Var slice(const Var& a, std::size_t begin, std::size_t end);

// Convolution and stencils on periodic grids. Spatial layout is [.., Nx, Ny].

/// out(o,i,j) = sum_{c,s,t} K(o,c,s+L,t+L) in(c, (i+s) mod Nx, (j+t) mod Ny).
Var conv2d_periodic(const Var& input, const Var& kernels);
/// Tape-free evaluation of the same convolution.
Tensor conv2d_periodic(const Tensor& input, const Tensor& kernels);
Var add_channel_bias(const Var& x, const Var& bias);
/// A * x for a constant matrix A[n,m] and x[m].
Var matvec(const Tensor& a, const Var& x);

enum class FlipAxis { X, Y };
/// K'(s,t) = -K(-s,t) (X) or -K(s,-t) (Y) on the last two axes.
Var flip_kernel(const Var& k, FlipAxis axis);

/// Per-pixel stencil application: the kernel at pixel (i,j) is
/// base + sum_m coeffs(m,i,j) * basis(m), applied to a single-channel field.
Var local_stencil(const Var& field, const Var& coeffs, const Tensor& base, const Tensor& basis);

// Spectral ops. Complex arrays carry a trailing axis of length 2 (re, im).
Var dft2(const Var& x);
Var idft2(const Var& z);
Var real_part(const Var& z);
/// Re(idft2(multiplier * dft2(x))) over the last two axes.
Var spectral_filter(const Var& x, const ComplexField& multiplier);
/// out(o,p) = sum_c w(c,o,s) z(c,p) for each retained flat mode p = modes[s];
/// other modes are zero. z is [Cin,Nx,Ny,2], w is [Cin,Cout,S,2].
Var mode_mix(const Var& z, const Var& w, std::span<const std::size_t> modes);

}  // namespace pdenetpp
