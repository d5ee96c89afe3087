#include "pdenetpp/diff_layers.hpp"

#include <cmath>
#include <stdexcept>

namespace pdenetpp {
namespace {

void require_first_order(const MomentSpec& spec) {
  if (!((spec.p == 1 && spec.q == 0) || (spec.p == 0 && spec.q == 1))) {
    throw std::invalid_argument("TFDL is defined for first-order derivatives only");
  }
}

Var as_plane(const Var& field) {
  const Shape& s = field.shape();
  if (s.size() != 2) throw ShapeError("difference layers act on [H,W] fields, got " + to_string(s));
  return reshape(field, {1, s[0], s[1]});
}

Var as_field(const Var& out) {
  const Shape& s = out.shape();
  return reshape(out, {s[1], s[2]});
}

Var conv_single(const Var& field, const Var& kernel) {
  const std::size_t k = kernel.shape()[0];
  return as_field(conv2d_periodic(as_plane(field), reshape(kernel, {1, 1, k, k})));
}

Var zero_scalar(Binding& b) { return b.constant(Tensor::scalar(0.0)); }

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::FixedFDM: return "fdm";
    case LayerKind::Moment: return "moment";
    case LayerKind::TFDL: return "tfdl";
    case LayerKind::TDDL: return "tddl";
  }
  return "unknown";
}

Tensor central_stencil(int p, int q, double dx, double dy) {
  if (!(dx > 0.0) || !(dy > 0.0)) throw std::invalid_argument("grid spacings must be positive");
  std::vector<double> k(9, 0.0);
  auto at = [&](int s, int t) -> double& { return k[static_cast<std::size_t>((s + 1) * 3 + (t + 1))]; };
  if (p == 1 && q == 0) {
    at(-1, 0) = -0.5 / dx;
    at(1, 0) = 0.5 / dx;
  } else if (p == 0 && q == 1) {
    at(0, -1) = -0.5 / dy;
    at(0, 1) = 0.5 / dy;
  } else if (p == 2 && q == 0) {
    at(-1, 0) = at(1, 0) = 1.0 / (dx * dx);
    at(0, 0) = -2.0 / (dx * dx);
  } else if (p == 0 && q == 2) {
    at(0, -1) = at(0, 1) = 1.0 / (dy * dy);
    at(0, 0) = -2.0 / (dy * dy);
  } else {
    throw std::invalid_argument("no fixed stencil for derivative (" + std::to_string(p) + "," + std::to_string(q) + ")");
  }
  return Tensor({3, 3}, std::move(k));
}

// ---- hypernetwork -----------------------------------------------------------

Hypernetwork Hypernetwork::create(ParamStore& store, const std::string& prefix, std::size_t in_channels,
                                  std::size_t hidden, std::size_t out_channels, Rng& rng) {
  Hypernetwork h;
  h.in_channels = in_channels;
  h.hidden = hidden;
  h.out_channels = out_channels;
  const double b1 = 1.0 / std::sqrt(9.0 * static_cast<double>(in_channels));
  const double b2 = 1.0 / std::sqrt(9.0 * static_cast<double>(hidden));
  h.w1 = store.add(prefix + ".w1", uniform_tensor({hidden, in_channels, 3, 3}, b1, rng));
  h.b1 = store.add(prefix + ".b1", uniform_tensor({hidden}, b1, rng));
  h.w2 = store.add(prefix + ".w2", uniform_tensor({hidden, hidden, 3, 3}, b2, rng));
  h.b2 = store.add(prefix + ".b2", uniform_tensor({hidden}, b2, rng));
  h.w3 = store.add(prefix + ".w3", Tensor::zeros({out_channels, hidden, 3, 3}));
  h.b3 = store.add(prefix + ".b3", Tensor::zeros({out_channels}));
  return h;
}

Var Hypernetwork::forward(Binding& b, const Var& input) const {
  if (input.shape().size() != 3 || input.shape()[0] != in_channels) {
    throw ShapeError("hypernetwork expects " + std::to_string(in_channels) + " input channels, got " +
                     to_string(input.shape()));
  }
  Var h = relu(add_channel_bias(conv2d_periodic(input, b(w1)), b(b1)));
  h = relu(add_channel_bias(conv2d_periodic(h, b(w2)), b(b2)));
  return add_channel_bias(conv2d_periodic(h, b(w3)), b(b3));
}

// ---- construction -----------------------------------------------------------

void DifferenceLayer::init_moment_basis(const MomentSpec& spec, const BasisBank& bank) {
  spec.validate();
  if (bank.half_width() != spec.half_width || bank.dx() != spec.dx || bank.dy() != spec.dy) {
    throw std::invalid_argument("basis bank geometry does not match the layer spec");
  }
  spec_ = spec;
  base_ = bank.base(spec);
  const auto idx = free_indices(spec);
  const auto k = static_cast<std::size_t>(spec.size());
  const std::size_t m = idx.size();
  scales_.resize(m);
  std::vector<double> scaled(m * k * k), columns(k * k * m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto [u, v] = idx[i];
    scales_[i] = std::pow(spec.dx, u - spec.p) * std::pow(spec.dy, v - spec.q);
    const Tensor& kuv = bank.kernel(u, v);
    for (std::size_t j = 0; j < k * k; ++j) {
      scaled[i * k * k + j] = scales_[i] * kuv[j];
      columns[j * m + i] = scales_[i] * kuv[j];
    }
  }
  scaled_basis_ = Tensor({m, k, k}, std::move(scaled));
  basis_columns_ = Tensor({k * k, m}, std::move(columns));
}

DifferenceLayer DifferenceLayer::fixed(const MomentSpec& spec) {
  DifferenceLayer l;
  l.kind_ = LayerKind::FixedFDM;
  l.spec_ = spec;
  l.base_ = central_stencil(spec.p, spec.q, spec.dx, spec.dy);
  return l;
}

DifferenceLayer DifferenceLayer::moment(ParamStore& store, const std::string& name, const MomentSpec& spec,
                                        const BasisBank& bank) {
  DifferenceLayer l;
  l.kind_ = LayerKind::Moment;
  l.init_moment_basis(spec, bank);
  if (l.free_count() > 0) l.theta_ = store.add(name + ".theta", Tensor::zeros({l.free_count()}));
  return l;
}

DifferenceLayer DifferenceLayer::tfdl(ParamStore& store, const std::string& name, const MomentSpec& spec,
                                      const BasisBank& bank) {
  require_first_order(spec);
  DifferenceLayer l = moment(store, name, spec, bank);
  l.kind_ = LayerKind::TFDL;
  return l;
}

DifferenceLayer DifferenceLayer::tddl(ParamStore& store, const std::string& name, const MomentSpec& spec,
                                      const BasisBank& bank, std::size_t state_channels, std::size_t hidden,
                                      Rng& rng) {
  DifferenceLayer l;
  l.kind_ = LayerKind::TDDL;
  l.init_moment_basis(spec, bank);
  l.hyper_ = Hypernetwork::create(store, name + ".hyper", state_channels + 2, hidden, l.free_count(), rng);
  return l;
}

// ---- evaluation ---------------------------------------------------------------

DifferenceLayer::Context DifferenceLayer::prepare(Binding& b, const Var& state) const {
  Context ctx;
  if (kind_ == LayerKind::TDDL) ctx.coeffs = hyper_->forward(b, with_coordinates(state));
  return ctx;
}

Var DifferenceLayer::kernel(Binding& b) const {
  if (kind_ == LayerKind::TDDL) throw std::logic_error("TDDL kernels vary per pixel");
  if (!theta_) return b.constant(base_);
  const std::size_t k = base_.dim(0);
  return reshape(add_const(matvec(basis_columns_, b(*theta_)), base_.reshaped({k * k})), {k, k});
}

Tensor DifferenceLayer::kernel(const ParamStore& store) const {
  Tape tape;
  Binding b(tape, store, false);
  return kernel(b).value();
}

Var DifferenceLayer::apply(Binding& b, const Context& ctx, const Var& field, const std::optional<Var>& coeff) const {
  switch (kind_) {
    case LayerKind::FixedFDM:
    case LayerKind::Moment:
      return conv_single(field, kernel(b));
    case LayerKind::TFDL: {
      if (!coeff) throw std::invalid_argument("TFDL needs the coefficient field of its derivative");
      if (coeff->shape() != field.shape()) throw ShapeError("TFDL coefficient shape differs from the field");
      const Var k = kernel(b);
      const Var kf = flip_kernel(k, spec_.p == 1 ? FlipAxis::X : FlipAxis::Y);
      const Tensor c = coeff->value();
      std::vector<double> pos(c.size()), neg(c.size());
      std::uint64_t h = 0xcbf29ce484222325ULL;
      for (std::size_t i = 0; i < c.size(); ++i) {
        pos[i] = c[i] >= 0.0 ? 1.0 : 0.0;
        neg[i] = 1.0 - pos[i];
        h = (h ^ static_cast<std::uint64_t>(pos[i])) * 0x100000001b3ULL;
      }
      b.tape().mix_kinks(h);
      return mul_const(conv_single(field, k), Tensor(c.shape(), std::move(pos))) +
             mul_const(conv_single(field, kf), Tensor(c.shape(), std::move(neg)));
    }
    case LayerKind::TDDL: {
      if (!ctx.coeffs) throw std::invalid_argument("TDDL context was not prepared");
      if (field.shape().size() != 2) throw ShapeError("difference layers act on [H,W] fields");
      return local_stencil(field, *ctx.coeffs, base_, scaled_basis_);
    }
  }
  throw std::logic_error("unknown layer kind");
}

Var DifferenceLayer::regularization(Binding& b, const Context& ctx) const {
  switch (kind_) {
    case LayerKind::FixedFDM:
      return zero_scalar(b);
    case LayerKind::Moment:
    case LayerKind::TFDL:
      return theta_ ? l1_norm(b(*theta_)) : zero_scalar(b);
    case LayerKind::TDDL: {
      if (!ctx.coeffs) throw std::invalid_argument("TDDL context was not prepared");
      const Shape& s = ctx.coeffs->shape();
      if (s[0] == 0) return zero_scalar(b);
      return scale(l1_norm(*ctx.coeffs), 1.0 / static_cast<double>(s[1] * s[2]));
    }
  }
  throw std::logic_error("unknown layer kind");
}

// ---- tape-free helpers ------------------------------------------------------

Tensor apply_fixed_fdm(const Tensor& field, const MomentSpec& spec) {
  if (field.rank() != 2) throw ShapeError("apply_fixed_fdm expects [H,W]");
  const Tensor k = central_stencil(spec.p, spec.q, spec.dx, spec.dy);
  return conv2d_periodic(field.reshaped({1, field.dim(0), field.dim(1)}), k.reshaped({1, 1, 3, 3}))
      .reshaped(field.shape());
}

namespace {

Tensor scaled_constrained_kernel(const MomentSpec& spec, std::span<const double> theta) {
  const auto idx = free_indices(spec);
  if (theta.size() != idx.size()) throw std::invalid_argument("theta length differs from the free moment count");
  std::vector<double> c(theta.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = theta[i] * std::pow(spec.dx, idx[i].first - spec.p) * std::pow(spec.dy, idx[i].second - spec.q);
  }
  return assemble_constrained_kernel(spec, c);
}

}  // namespace

Tensor apply_moment(const Tensor& field, const MomentSpec& spec, std::span<const double> theta) {
  if (field.rank() != 2) throw ShapeError("apply_moment expects [H,W]");
  const Tensor k = scaled_constrained_kernel(spec, theta);
  const std::size_t n = k.dim(0);
  return conv2d_periodic(field.reshaped({1, field.dim(0), field.dim(1)}), k.reshaped({1, 1, n, n}))
      .reshaped(field.shape());
}

Tensor apply_tfdl(const Tensor& field, const Tensor& coeff, const MomentSpec& spec, std::span<const double> theta) {
  require_first_order(spec);
  if (field.rank() != 2 || coeff.shape() != field.shape()) throw ShapeError("apply_tfdl: field/coeff shapes");
  const Tensor k = scaled_constrained_kernel(spec, theta);
  const Tensor kf = spec.p == 1 ? flip_x(k) : flip_y(k);
  const std::size_t n = k.dim(0);
  const Tensor f3 = field.reshaped({1, field.dim(0), field.dim(1)});
  const Tensor a = conv2d_periodic(f3, k.reshaped({1, 1, n, n}));
  const Tensor c = conv2d_periodic(f3, kf.reshaped({1, 1, n, n}));
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = coeff[i] >= 0.0 ? a[i] : c[i];
  return Tensor(field.shape(), std::move(out));
}

}  // namespace pdenetpp
