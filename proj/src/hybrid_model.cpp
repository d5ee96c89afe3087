#include "pdenetpp/hybrid_model.hpp"

#include <stdexcept>
#include <string>

#include "pdenetpp/spectral.hpp"

namespace pdenetpp {

std::string_view to_string(Pde pde) {
  switch (pde) {
    case Pde::Burgers: return "burgers";
    case Pde::FitzHughNagumo: return "fn";
    case Pde::NavierStokes: return "ns";
  }
  return "unknown";
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::BlackBox: return "blackbox";
    case Method::FixedFDM: return "fdm";
    case Method::Moment: return "moment";
    case Method::TFDL: return "tfdl";
    case Method::TDDL: return "tddl";
  }
  return "unknown";
}

Pde parse_pde(std::string_view name) {
  if (name == "burgers") return Pde::Burgers;
  if (name == "fn") return Pde::FitzHughNagumo;
  if (name == "ns") return Pde::NavierStokes;
  throw std::invalid_argument("unknown pde '" + std::string(name) + "' (expected burgers, fn or ns)");
}

Method parse_method(std::string_view name) {
  if (name == "blackbox") return Method::BlackBox;
  if (name == "fdm") return Method::FixedFDM;
  if (name == "moment") return Method::Moment;
  if (name == "tfdl") return Method::TFDL;
  if (name == "tddl") return Method::TDDL;
  throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected blackbox, fdm, moment, tfdl or tddl)");
}

std::size_t state_channels(Pde pde) { return pde == Pde::NavierStokes ? 1 : 2; }

// ---- known part -------------------------------------------------------------

KnownPart::KnownPart(Pde pde, double coefficient, double length, std::array<std::optional<DifferenceLayer>, 4> layers)
    : pde_(pde), coefficient_(coefficient), length_(length), layers_(std::move(layers)) {
  const bool needs_first = pde != Pde::FitzHughNagumo;
  for (int s = 0; s < 4; ++s) {
    const bool needed = s >= Dxx || needs_first;
    if (needed && !layers_[s]) throw std::invalid_argument("known part is missing a required difference layer");
  }
}

namespace {

Var channel(const Var& state, std::size_t c) {
  const Shape& s = state.shape();
  return reshape(slice(state, c, c + 1), {s[1], s[2]});
}

Var stack_channels(std::span<const Var> fields) {
  std::vector<Var> parts;
  for (const auto& f : fields) parts.push_back(reshape(f, {1, f.shape()[0], f.shape()[1]}));
  return concat(parts);
}

}  // namespace

Var KnownPart::evaluate(Binding& b, const Var& state, Var* reg) const {
  const Shape& s = state.shape();
  if (s.size() != 3 || s[0] != state_channels(pde_)) {
    throw ShapeError("known part for " + std::string(to_string(pde_)) + " got state " + to_string(s));
  }
  std::array<DifferenceLayer::Context, 4> ctx;
  for (int i = 0; i < 4; ++i) {
    if (!layers_[i]) continue;
    ctx[i] = layers_[i]->prepare(b, state);
    if (reg) *reg = *reg + layers_[i]->regularization(b, ctx[i]);
  }
  auto d = [&](Slot slot, const Var& f, const std::optional<Var>& coeff = std::nullopt) {
    return layers_[slot]->apply(b, ctx[slot], f, coeff);
  };
  auto diffusion = [&](const Var& f) { return coefficient_ * (d(Dxx, f) + d(Dyy, f)); };

  std::vector<Var> out;
  switch (pde_) {
    case Pde::Burgers: {
      const Var u = channel(state, 0), v = channel(state, 1);
      const Var cu = -u, cv = -v;
      for (std::size_t c = 0; c < 2; ++c) {
        const Var f = c == 0 ? u : v;
        out.push_back(cu * d(Dx, f, cu) + cv * d(Dy, f, cv) + diffusion(f));
      }
      break;
    }
    case Pde::FitzHughNagumo:
      for (std::size_t c = 0; c < 2; ++c) out.push_back(diffusion(channel(state, c)));
      break;
    case Pde::NavierStokes: {
      const Var vel = velocity_from_vorticity(state, length_);
      const Var cu = -channel(vel, 0), cv = -channel(vel, 1);
      const Var w = channel(state, 0);
      out.push_back(cu * d(Dx, w, cu) + cv * d(Dy, w, cv) + diffusion(w));
      break;
    }
  }
  return stack_channels(out);
}

// ---- model ------------------------------------------------------------------

HybridModel::HybridModel(const HybridConfig& config) : config_(config), params_(std::make_unique<ParamStore>()) {
  if (!(config.dt >= 0.0)) throw std::invalid_argument("dt must be non-negative");
  if (!(config.length > 0.0) || config.grid < 3) throw std::invalid_argument("invalid grid geometry");
  if (config.method == Method::TFDL && config.pde == Pde::FitzHughNagumo) {
    throw std::invalid_argument("tfdl applies to first-order derivatives, which the fn known part does not have");
  }
  Rng rng(config.seed);
  const double h = config.length / static_cast<double>(config.grid);
  const std::size_t channels = state_channels(config.pde);

  if (config.method != Method::BlackBox) {
    std::array<std::optional<DifferenceLayer>, 4> layers;
    const std::array<std::pair<int, int>, 4> pq = {{{1, 0}, {0, 1}, {2, 0}, {0, 2}}};
    const std::array<const char*, 4> names = {"d10", "d01", "d20", "d02"};
    const bool needs_first = config.pde != Pde::FitzHughNagumo;
    std::optional<BasisBank> bank;
    if (config.method != Method::FixedFDM) bank.emplace(config.half_width, h, h);
    for (int i = 0; i < 4; ++i) {
      if (i < 2 && !needs_first) continue;
      MomentSpec spec{pq[i].first, pq[i].second, i < 2 ? config.r_first : config.r_second, config.half_width, h, h};
      const std::string name = names[i];
      switch (config.method) {
        case Method::FixedFDM:
          spec.half_width = 1;
          layers[i] = DifferenceLayer::fixed(spec);
          break;
        case Method::Moment:
          layers[i] = DifferenceLayer::moment(*params_, name, spec, *bank);
          break;
        case Method::TFDL:
          layers[i] = i < 2 ? DifferenceLayer::tfdl(*params_, name, spec, *bank)
                            : DifferenceLayer::moment(*params_, name, spec, *bank);
          break;
        case Method::TDDL:
          layers[i] = DifferenceLayer::tddl(*params_, name, spec, *bank, channels, config.hyper_hidden, rng);
          break;
        case Method::BlackBox:
          break;
      }
    }
    known_.emplace(config.pde, config.coefficient, config.length, std::move(layers));
  }
  if (config.use_backbone) backbone_ = Backbone::create(*params_, "backbone", config.backbone, channels, rng);
}

Var HybridModel::known_part(Binding& b, const Var& state) const {
  if (!known_) return b.constant(Tensor::zeros(state.shape()));
  return known_->evaluate(b, state);
}

Var HybridModel::backbone_term(Binding& b, const Var& state) const {
  if (!backbone_) return b.constant(Tensor::zeros(state.shape()));
  return backbone_->forward(b, with_coordinates(state));
}

HybridModel::Output HybridModel::forward(Binding& b, const Var& state) const {
  const Shape& s = state.shape();
  if (s.size() != 3 || s[0] != channels() || s[1] != config_.grid || s[2] != config_.grid) {
    throw ShapeError("model expects state [" + std::to_string(channels()) + "," + std::to_string(config_.grid) + "," +
                     std::to_string(config_.grid) + "], got " + to_string(s));
  }
  Var reg = b.constant(Tensor::scalar(0.0));
  std::optional<Var> rhs;
  if (known_) rhs = known_->evaluate(b, state, &reg);
  if (backbone_) {
    const Var f = backbone_->forward(b, with_coordinates(state));
    rhs = rhs ? *rhs + f : f;
  }
  if (!rhs) return {state, reg};
  return {state + config_.dt * *rhs, reg};
}

Tensor HybridModel::step(const Tensor& state) const {
  Tape tape;
  Binding b(tape, *params_, false);
  return forward(b, tape.constant(state)).next.value();
}

}  // namespace pdenetpp
