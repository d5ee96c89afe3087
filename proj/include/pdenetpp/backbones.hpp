#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pdenetpp/autodiff.hpp"
#include "pdenetpp/parameters.hpp"

namespace pdenetpp {

enum class BackboneKind { ConvResNet, SpectralOperator };

std::string_view to_string(BackboneKind kind);
/// Accepts "convresnet" and "spectral".
BackboneKind parse_backbone_kind(std::string_view name);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::ConvResNet;
  std::size_t width = 32;
  /// Residual blocks (ConvResNet) or spectral layers (SpectralOperator).
  std::size_t depth = 4;
  /// Retained modes per axis, |k| < modes (SpectralOperator only).
  std::size_t modes = 8;
  /// tanh between layers; disabling it makes the network linear.
  bool nonlinearity = true;
};

/// Learnable residual network F_NN: [C+2,H,W] (state plus coordinates) -> [C,H,W].
///
/// ConvResNet: 1x1 lift, residual blocks h + conv3(tanh(conv3(h))), 1x1 projection.
/// SpectralOperator: 1x1 lift, layers tanh(Re idft(R * dft(h)) + W h + b) with
/// complex weights R on the retained modes, 1x1 projection. In both the final
/// projection starts at zero.
class Backbone {
 public:
  static Backbone create(ParamStore& store, const std::string& prefix, const BackboneConfig& config,
                         std::size_t state_channels, Rng& rng);

  const BackboneConfig& config() const { return config_; }
  std::size_t state_channels() const { return channels_; }

  Var forward(Binding& b, const Var& input) const;

  /// Flat indices of the retained modes on an nx x ny grid.
  static std::vector<std::size_t> retained_modes(std::size_t nx, std::size_t ny, std::size_t modes);

  struct Layer {
    std::size_t w = 0, b = 0;    // conv weights / bias
    std::size_t w2 = 0, b2 = 0;  // second conv (residual block) or unused
    std::size_t spectral = 0;    // complex weights (spectral layers)
  };
  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& lift() const { return lift_; }
  const Layer& projection() const { return project_; }

 private:
  BackboneConfig config_;
  std::size_t channels_ = 0;
  Layer lift_, project_;
  std::vector<Layer> layers_;
};

}  // namespace pdenetpp
