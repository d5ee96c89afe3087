#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>

#include "pdenetpp/backbones.hpp"
#include "pdenetpp/diff_layers.hpp"

namespace pdenetpp {

enum class Pde { Burgers, FitzHughNagumo, NavierStokes };
enum class Method { BlackBox, FixedFDM, Moment, TFDL, TDDL };

std::string_view to_string(Pde pde);
std::string_view to_string(Method method);
/// Accepts "burgers", "fn", "ns"; throws std::invalid_argument otherwise.
Pde parse_pde(std::string_view name);
/// Accepts "blackbox", "fdm", "moment", "tfdl", "tddl".
Method parse_method(std::string_view name);
std::size_t state_channels(Pde pde);

struct HybridConfig {
  Pde pde = Pde::Burgers;
  Method method = Method::Moment;
  /// nu for Burgers and Navier-Stokes, gamma for FitzHugh-Nagumo.
  double coefficient = 0.05;
  double dt = 0.01;
  double length = 2.0 * 3.14159265358979323846;
  std::size_t grid = 64;
  int half_width = 2;
  int r_first = 2;
  int r_second = 2;
  std::size_t hyper_hidden = 16;
  BackboneConfig backbone;
  bool use_backbone = true;
  std::uint64_t seed = 0;
};

/// Difference layers for d/dx, d/dy, d2/dx2, d2/dy2 and the PDE-specific
/// assembly of the known right-hand side.
class KnownPart {
 public:
  enum Slot { Dx = 0, Dy = 1, Dxx = 2, Dyy = 3 };

  KnownPart(Pde pde, double coefficient, double length, std::array<std::optional<DifferenceLayer>, 4> layers);

  Pde pde() const { return pde_; }
  const std::optional<DifferenceLayer>& layer(Slot s) const { return layers_[s]; }

  /// Phi_hat(U) for U [C,H,W]; adds the layers' regularization to *reg if given.
  Var evaluate(Binding& b, const Var& state, Var* reg = nullptr) const;

 private:
  Pde pde_;
  double coefficient_;
  double length_;
  std::array<std::optional<DifferenceLayer>, 4> layers_;
};

/// U_{j+1} = U_j + Phi_hat(U_j) dt + F_NN(x, U_j) dt; the black-box method
/// drops Phi_hat.
class HybridModel {
 public:
  explicit HybridModel(const HybridConfig& config);

  const HybridConfig& config() const { return config_; }
  ParamStore& params() { return *params_; }
  const ParamStore& params() const { return *params_; }
  const std::optional<KnownPart>& known() const { return known_; }
  const std::optional<Backbone>& backbone() const { return backbone_; }
  std::size_t channels() const { return state_channels(config_.pde); }

  struct Output {
    Var next;
    /// Sum of the regularization terms of every trainable layer.
    Var reg;
  };
  Output forward(Binding& b, const Var& state) const;
  Var known_part(Binding& b, const Var& state) const;
  Var backbone_term(Binding& b, const Var& state) const;

  /// One step without gradient tracking.
  Tensor step(const Tensor& state) const;

 private:
  HybridConfig config_;
  std::unique_ptr<ParamStore> params_;
  std::optional<KnownPart> known_;
  std::optional<Backbone> backbone_;
};

using StepFn = std::function<Tensor(const Tensor&)>;

}  // namespace pdenetpp
