#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdenetpp/autodiff.hpp"
#include "pdenetpp/moments.hpp"
#include "pdenetpp/parameters.hpp"

namespace pdenetpp {

enum class LayerKind { FixedFDM, Moment, TFDL, TDDL };

std::string_view to_string(LayerKind kind);

/// 3x3 second-order central stencil for (p,q) in {(1,0),(0,1),(2,0),(0,2)}.
Tensor central_stencil(int p, int q, double dx, double dy);

/// Three 3x3 periodic convolutions with ReLU after the first two. The last
/// layer starts at zero, so a fresh network predicts all-zero moments.
struct Hypernetwork {
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, w3 = 0, b3 = 0;
  std::size_t in_channels = 0, hidden = 0, out_channels = 0;

  static Hypernetwork create(ParamStore& store, const std::string& prefix, std::size_t in_channels,
                             std::size_t hidden, std::size_t out_channels, Rng& rng);
  /// input [in_channels,H,W] -> [out_channels,H,W]
  Var forward(Binding& b, const Var& input) const;
};

/// A map from a sampled field to an approximation of d^{p+q}/dx^p dy^q on the
/// periodic grid.
///
/// Trainable kinds store dimensionless free moments theta. The moment used in
/// the kernel is c_uv = theta_uv * dx^(u-p) * dy^(v-q), so theta keeps the same
/// magnitude on every grid.
class DifferenceLayer {
 public:
  /// Per-state quantities. Only TDDL fills `coeffs` ([m,H,W] dimensionless).
  struct Context {
    std::optional<Var> coeffs;
  };

  static DifferenceLayer fixed(const MomentSpec& spec);
  static DifferenceLayer moment(ParamStore& store, const std::string& name, const MomentSpec& spec,
                                const BasisBank& bank);
  static DifferenceLayer tfdl(ParamStore& store, const std::string& name, const MomentSpec& spec,
                              const BasisBank& bank);
  static DifferenceLayer tddl(ParamStore& store, const std::string& name, const MomentSpec& spec,
                              const BasisBank& bank, std::size_t state_channels, std::size_t hidden, Rng& rng);

  LayerKind kind() const { return kind_; }
  const MomentSpec& spec() const { return spec_; }
  std::size_t free_count() const { return scales_.size(); }
  /// dx^(u-p) dy^(v-q) for each free index.
  const std::vector<double>& moment_scales() const { return scales_; }
  std::optional<std::size_t> theta_index() const { return theta_; }
  const std::optional<Hypernetwork>& hypernetwork() const { return hyper_; }

  /// `state` is [C,H,W] without coordinate channels.
  Context prepare(Binding& b, const Var& state) const;

  /// field [H,W] -> derivative [H,W]. TFDL needs `coeff` [H,W], the literal
  /// factor multiplying this derivative; coeff >= 0 selects the unflipped kernel.
  Var apply(Binding& b, const Context& ctx, const Var& field, const std::optional<Var>& coeff = std::nullopt) const;

  /// L1 norm of the free moments (pixel mean for TDDL); 0 for FixedFDM.
  Var regularization(Binding& b, const Context& ctx) const;

  /// Current stencil [k,k] (not defined for TDDL).
  Var kernel(Binding& b) const;
  Tensor kernel(const ParamStore& store) const;

 private:
  DifferenceLayer() = default;
  void init_moment_basis(const MomentSpec& spec, const BasisBank& bank);

  LayerKind kind_ = LayerKind::FixedFDM;
  MomentSpec spec_;
  Tensor base_;           // [k,k]
  Tensor scaled_basis_;   // [m,k,k]
  Tensor basis_columns_;  // [k*k, m]
  std::vector<double> scales_;
  std::optional<std::size_t> theta_;
  std::optional<Hypernetwork> hyper_;
};

// Tape-free conveniences for single-channel fields [H,W].
Tensor apply_fixed_fdm(const Tensor& field, const MomentSpec& spec);
Tensor apply_moment(const Tensor& field, const MomentSpec& spec, std::span<const double> theta);
Tensor apply_tfdl(const Tensor& field, const Tensor& coeff, const MomentSpec& spec, std::span<const double> theta);

}  // namespace pdenetpp
