#include "pdenetpp/backbones.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pdenetpp {

std::string_view to_string(BackboneKind kind) {
  return kind == BackboneKind::ConvResNet ? "convresnet" : "spectral";
}

BackboneKind parse_backbone_kind(std::string_view name) {
  if (name == "convresnet") return BackboneKind::ConvResNet;
  if (name == "spectral") return BackboneKind::SpectralOperator;
  throw std::invalid_argument("unknown backbone '" + std::string(name) + "' (expected convresnet or spectral)");
}

std::vector<std::size_t> Backbone::retained_modes(std::size_t nx, std::size_t ny, std::size_t modes) {
  if (modes == 0 || modes > nx / 2 || modes > ny / 2) {
    throw std::invalid_argument("retained mode count " + std::to_string(modes) + " exceeds half the grid");
  }
  std::vector<std::size_t> rows, cols;
  for (std::size_t k = 0; k < modes; ++k) rows.push_back(k);
  for (std::size_t k = nx - modes + 1; k < nx; ++k) rows.push_back(k);
  for (std::size_t k = 0; k < modes; ++k) cols.push_back(k);
  for (std::size_t k = ny - modes + 1; k < ny; ++k) cols.push_back(k);
  std::vector<std::size_t> out;
  out.reserve(rows.size() * cols.size());
  for (auto i : rows) {
    for (auto j : cols) out.push_back(i * ny + j);
  }
  return out;
}

Backbone Backbone::create(ParamStore& store, const std::string& prefix, const BackboneConfig& config,
                          std::size_t state_channels, Rng& rng) {
  if (config.width == 0) throw std::invalid_argument("backbone width must be positive");
  Backbone net;
  net.config_ = config;
  net.channels_ = state_channels;
  const std::size_t in = state_channels + 2, w = config.width;
  const double lift_bound = 1.0 / std::sqrt(static_cast<double>(in));
  net.lift_.w = store.add(prefix + ".lift.w", uniform_tensor({w, in, 1, 1}, lift_bound, rng));
  net.lift_.b = store.add(prefix + ".lift.b", uniform_tensor({w}, lift_bound, rng));
  for (std::size_t l = 0; l < config.depth; ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    Layer layer;
    if (config.kind == BackboneKind::ConvResNet) {
      const double bound = 1.0 / std::sqrt(9.0 * static_cast<double>(w));
      layer.w = store.add(p + ".conv1.w", uniform_tensor({w, w, 3, 3}, bound, rng));
      layer.b = store.add(p + ".conv1.b", uniform_tensor({w}, bound, rng));
      layer.w2 = store.add(p + ".conv2.w", uniform_tensor({w, w, 3, 3}, bound, rng));
      layer.b2 = store.add(p + ".conv2.b", uniform_tensor({w}, bound, rng));
    } else {
      const std::size_t nm = (2 * config.modes - 1) * (2 * config.modes - 1);
      const double sbound = 1.0 / static_cast<double>(w * w);
      const double bound = 1.0 / std::sqrt(static_cast<double>(w));
      layer.spectral = store.add(p + ".spectral", uniform_tensor({w, w, nm, 2}, sbound, rng));
      layer.w = store.add(p + ".pointwise.w", uniform_tensor({w, w, 1, 1}, bound, rng));
      layer.b = store.add(p + ".pointwise.b", uniform_tensor({w}, bound, rng));
    }
    net.layers_.push_back(layer);
  }
  net.project_.w = store.add(prefix + ".project.w", Tensor::zeros({state_channels, w, 1, 1}));
  net.project_.b = store.add(prefix + ".project.b", Tensor::zeros({state_channels}));
  return net;
}

Var Backbone::forward(Binding& b, const Var& input) const {
  const Shape& s = input.shape();
  if (s.size() != 3 || s[0] != channels_ + 2) {
    throw ShapeError("backbone expects [" + std::to_string(channels_ + 2) + ",H,W], got " + to_string(s));
  }
  auto act = [&](const Var& x) { return config_.nonlinearity ? tanh(x) : x; };
  Var h = add_channel_bias(conv2d_periodic(input, b(lift_.w)), b(lift_.b));
  if (config_.kind == BackboneKind::ConvResNet) {
    for (const auto& l : layers_) {
      Var r = act(add_channel_bias(conv2d_periodic(h, b(l.w)), b(l.b)));
      r = add_channel_bias(conv2d_periodic(r, b(l.w2)), b(l.b2));
      h = h + r;
    }
  } else {
    const auto modes = retained_modes(s[1], s[2], config_.modes);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      Var spec = real_part(idft2(mode_mix(dft2(h), b(l.spectral), modes)));
      Var y = spec + add_channel_bias(conv2d_periodic(h, b(l.w)), b(l.b));
      h = i + 1 < layers_.size() ? act(y) : y;
    }
  }
  return add_channel_bias(conv2d_periodic(h, b(project_.w)), b(project_.b));
}

}  // namespace pdenetpp
