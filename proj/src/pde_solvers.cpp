#include "pdenetpp/pde_solvers.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "pdenetpp/parallel.hpp"
#include "pdenetpp/spectral.hpp"

namespace pdenetpp {

void PdeConfig::validate() const {
  if (!(length > 0.0)) throw std::invalid_argument("domain length must be positive");
  if (!(coefficient >= 0.0)) throw std::invalid_argument("diffusion coefficient must be non-negative");
  if (!(fine_dt > 0.0)) throw std::invalid_argument("fine time step must be positive");
  if (substeps == 0) throw std::invalid_argument("substeps must be at least 1");
  if (fine_grid < 4 || coarse_grid < 4) throw std::invalid_argument("grids must have at least 4 nodes");
  if (fine_grid % coarse_grid != 0) {
    throw std::invalid_argument("coarse grid " + std::to_string(coarse_grid) + " does not divide fine grid " +
                                std::to_string(fine_grid));
  }
}

PdeConfig PdeConfig::defaults(Pde pde) {
  PdeConfig c;
  c.pde = pde;
  switch (pde) {
    case Pde::Burgers:
      c.length = 2.0 * std::numbers::pi;
      c.coefficient = 0.05;
      c.fine_dt = 0.01 / 16.0;
      c.substeps = 16;
      break;
    case Pde::FitzHughNagumo:
      c.length = 6.4;
      c.coefficient = 1.0;
      c.fine_dt = 0.002 / 200.0;
      c.substeps = 200;
      break;
    case Pde::NavierStokes:
      c.length = 1.0;
      c.coefficient = 1e-3;
      c.fine_dt = 0.025 / 500.0;
      c.substeps = 500;
      break;
  }
  return c;
}

PdeConfig PdeConfig::ns_hard() {
  PdeConfig c = defaults(Pde::NavierStokes);
  c.coefficient = 1e-4;
  c.fine_dt = 0.00625 / 125.0;
  c.substeps = 125;
  return c;
}

// ---- random fields ------------------------------------------------------------

Tensor sample_grf(std::uint64_t seed, std::size_t n, double length, double scale, double shift, double power) {
  if (n < 2) throw std::invalid_argument("grf grid too small");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(n * n);
  for (auto& x : noise) x = normal(rng);
  const std::size_t half = n / 2 + 1;
  std::vector<cplx> spec(n * half);
  fft::forward_real(noise.data(), spec.data(), n, n);
  const auto kx = wavenumbers(n, length);
  const double base = 2.0 * std::numbers::pi / length;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < half; ++j) {
      const double ky = base * static_cast<double>(j);
      const double k2 = kx[i] * kx[i] + ky * ky;
      spec[i * half + j] *= std::sqrt(scale) * std::pow(k2 + shift, -power / 2.0);
    }
  }
  std::vector<double> field(n * n);
  fft::inverse_real(spec.data(), field.data(), n, n);
  double mean = 0.0;
  for (double x : field) mean += x;
  mean /= static_cast<double>(field.size());
  double var = 0.0;
  for (double x : field) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(field.size()));
  if (!(sd > 0.0)) throw NumericalError("grf sample has zero variance");
  for (auto& x : field) x = (x - mean) / sd;
  return Tensor({n, n}, std::move(field));
}

// ---- spectral right-hand sides ----------------------------------------------

SpectralSolver::SpectralSolver(std::size_t n, double length) : n_(n), half_(n / 2 + 1), length_(length) {
  if (n < 4 || n % 2 != 0) throw std::invalid_argument("spectral solver needs an even grid of at least 4 nodes");
  kx_ = wavenumbers(n, length);
  ky_.resize(half_);
  const double base = 2.0 * std::numbers::pi / length;
  for (std::size_t j = 0; j < half_; ++j) ky_[j] = base * static_cast<double>(j);
  kx_odd_ = kx_;
  kx_odd_[n / 2] = 0.0;
  ky_odd_ = ky_;
  ky_odd_[n / 2] = 0.0;
  keep_.resize(n * half_);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ni = i < n / 2 ? i : n - i;
    for (std::size_t j = 0; j < half_; ++j) keep_[i * half_ + j] = (3 * ni < n && 3 * j < n) ? 1 : 0;
  }
  const double h = length / static_cast<double>(n);
  cos_plus_.resize(n * n);
  cos_minus_.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = h * static_cast<double>(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double y = h * static_cast<double>(j);
      cos_plus_[i * n + j] = std::cos(5.0 * x + 5.0 * y);
      cos_minus_[i * n + j] = std::cos(5.0 * x - 5.0 * y);
    }
  }
}

bool SpectralSolver::kept(std::size_t i, std::size_t j) const { return keep_.at(i * half_ + j) != 0; }

void SpectralSolver::to_spectral(const double* in, cplx* out) const { fft::forward_real(in, out, n_, n_); }

Tensor SpectralSolver::laplacian(const Tensor& field) const {
  const std::size_t plane = n_ * n_;
  if (field.size() % plane != 0 || field.rank() < 2 || field.shape().back() != n_) {
    throw ShapeError("laplacian: field " + to_string(field.shape()) + " on grid " + std::to_string(n_));
  }
  std::vector<double> out(field.size());
  std::vector<cplx> spec(n_ * half_);
  for (std::size_t off = 0; off < field.size(); off += plane) {
    to_spectral(field.begin() + off, spec.data());
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < half_; ++j) spec[i * half_ + j] *= -(kx_[i] * kx_[i] + ky_[j] * ky_[j]);
    }
    fft::inverse_real(spec.data(), out.data() + off, n_, n_);
  }
  return Tensor(field.shape(), std::move(out));
}

Tensor SpectralSolver::burgers_rhs(const Tensor& state, double nu, bool forced) const {
  const std::size_t plane = n_ * n_, hs = n_ * half_;
  if (state.shape() != Shape{2, n_, n_}) throw ShapeError("burgers_rhs expects [2,n,n], got " + to_string(state.shape()));
  const double* u = state.begin();
  const double* v = state.begin() + plane;
  std::vector<cplx> uh(hs), vh(hs), tmp(hs);
  to_spectral(u, uh.data());
  to_spectral(v, vh.data());
  std::vector<double> ux(plane), uy(plane), vx(plane), vy(plane);
  auto deriv = [&](const std::vector<cplx>& fh, bool along_x, std::vector<double>& out) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < half_; ++j) {
        const double k = along_x ? kx_odd_[i] : ky_odd_[j];
        tmp[i * half_ + j] = cplx{0.0, k} * fh[i * half_ + j];
      }
    }
    fft::inverse_real(tmp.data(), out.data(), n_, n_);
  };
  deriv(uh, true, ux);
  deriv(uh, false, uy);
  deriv(vh, true, vx);
  deriv(vh, false, vy);
  std::vector<double> adv(plane);
  std::vector<double> out(2 * plane);
  std::vector<cplx> ah(hs);
  for (std::size_t c = 0; c < 2; ++c) {
    const std::vector<double>& fx = c == 0 ? ux : vx;
    const std::vector<double>& fy = c == 0 ? uy : vy;
    for (std::size_t p = 0; p < plane; ++p) adv[p] = u[p] * fx[p] + v[p] * fy[p];
    to_spectral(adv.data(), ah.data());
    const std::vector<cplx>& fh = c == 0 ? uh : vh;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < half_; ++j) {
        const std::size_t q = i * half_ + j;
        const double k2 = kx_[i] * kx_[i] + ky_[j] * ky_[j];
        ah[q] = (keep_[q] ? -ah[q] : cplx{}) - nu * k2 * fh[q];
      }
    }
    fft::inverse_real(ah.data(), out.data() + c * plane, n_, n_);
  }
  if (forced) {
    for (std::size_t p = 0; p < plane; ++p) {
      out[p] += std::sin(v[p]) * cos_plus_[p];
      out[plane + p] += std::sin(u[p]) * cos_minus_[p];
    }
  }
  return Tensor(state.shape(), std::move(out));
}

Tensor SpectralSolver::fn_rhs(const Tensor& state, double gamma, double alpha, double beta) const {
  const std::size_t plane = n_ * n_;
  if (state.shape() != Shape{2, n_, n_}) throw ShapeError("fn_rhs expects [2,n,n], got " + to_string(state.shape()));
  Tensor lap = laplacian(state);
  std::vector<double> out(2 * plane);
  const double* u = state.begin();
  const double* v = state.begin() + plane;
  for (std::size_t p = 0; p < plane; ++p) {
    out[p] = gamma * lap[p] + u[p] - u[p] * u[p] * u[p] - v[p] + alpha;
    out[plane + p] = gamma * lap[plane + p] + beta * (u[p] - v[p]);
  }
  return Tensor(state.shape(), std::move(out));
}

Tensor SpectralSolver::ns_rhs(const Tensor& state, double nu, const std::optional<Tensor>& forcing) const {
  const std::size_t plane = n_ * n_, hs = n_ * half_;
  if (state.shape() != Shape{1, n_, n_}) throw ShapeError("ns_rhs expects [1,n,n], got " + to_string(state.shape()));
  if (forcing && forcing->size() != plane) throw ShapeError("ns_rhs forcing size mismatch");
  const double* w = state.begin();
  std::vector<cplx> wh(hs), tmp(hs);
  to_spectral(w, wh.data());
  std::vector<double> uu(plane), vv(plane), wx(plane), wy(plane);
  auto transform = [&](auto mult, std::vector<double>& out) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < half_; ++j) tmp[i * half_ + j] = mult(i, j) * wh[i * half_ + j];
    }
    fft::inverse_real(tmp.data(), out.data(), n_, n_);
  };
  auto k2 = [&](std::size_t i, std::size_t j) { return kx_[i] * kx_[i] + ky_[j] * ky_[j]; };
  transform([&](std::size_t i, std::size_t j) { return k2(i, j) == 0.0 ? cplx{} : cplx{0.0, ky_odd_[j] / k2(i, j)}; }, uu);
  transform([&](std::size_t i, std::size_t j) { return k2(i, j) == 0.0 ? cplx{} : cplx{0.0, -kx_odd_[i] / k2(i, j)}; }, vv);
  transform([&](std::size_t i, std::size_t) { return cplx{0.0, kx_odd_[i]}; }, wx);
  transform([&](std::size_t, std::size_t j) { return cplx{0.0, ky_odd_[j]}; }, wy);
  std::vector<double> adv(plane);
  for (std::size_t p = 0; p < plane; ++p) adv[p] = uu[p] * wx[p] + vv[p] * wy[p];
  std::vector<cplx> ah(hs);
  to_spectral(adv.data(), ah.data());
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < half_; ++j) {
      const std::size_t q = i * half_ + j;
      ah[q] = (keep_[q] ? -ah[q] : cplx{}) - nu * k2(i, j) * wh[q];
    }
  }
  std::vector<double> out(plane);
  fft::inverse_real(ah.data(), out.data(), n_, n_);
  if (forcing) {
    for (std::size_t p = 0; p < plane; ++p) out[p] += (*forcing)[p];
  }
  return Tensor(state.shape(), std::move(out));
}

// ---- time stepping ---------------------------------------------------------

Tensor rk4_step(const Tensor& state, const Rhs& rhs, double dt) {
  const std::size_t n = state.size();
  auto axpy = [&](const Tensor& k, double a) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = state[i] + a * k[i];
    return Tensor(state.shape(), std::move(y));
  };
  const Tensor k1 = rhs(state);
  const Tensor k2 = rhs(axpy(k1, 0.5 * dt));
  const Tensor k3 = rhs(axpy(k2, 0.5 * dt));
  const Tensor k4 = rhs(axpy(k3, dt));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return Tensor(state.shape(), std::move(y));
}

Tensor downsample(const Tensor& fine, std::size_t coarse) {
  const Shape& s = fine.shape();
  if (s.size() < 2) throw ShapeError("downsample needs at least two axes");
  const std::size_t nx = s[s.size() - 2], ny = s.back();
  if (coarse == 0 || nx % coarse != 0 || ny % coarse != 0) {
    throw ShapeError("downsample: " + std::to_string(coarse) + " does not divide " + to_string(s));
  }
  const std::size_t fx = nx / coarse, fy = ny / coarse;
  const std::size_t planes = fine.size() / (nx * ny);
  std::vector<double> out(planes * coarse * coarse);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < coarse; ++i) {
      for (std::size_t j = 0; j < coarse; ++j) {
        out[(p * coarse + i) * coarse + j] = fine[(p * nx + i * fx) * ny + j * fy];
      }
    }
  }
  Shape cs = s;
  cs[cs.size() - 2] = coarse;
  cs.back() = coarse;
  return Tensor(cs, std::move(out));
}

// ---- datasets -----------------------------------------------------------------

Tensor Dataset::snapshot(std::size_t i, std::size_t j) const {
  const Shape& s = data.shape();
  const std::size_t per = s[2] * s[3] * s[4];
  if (i >= s[0] || j >= s[1]) throw std::out_of_range("snapshot index out of range");
  const std::size_t off = (i * s[1] + j) * per;
  return Tensor({s[2], s[3], s[4]}, std::vector<double>(data.begin() + off, data.begin() + off + per));
}

Tensor ns_forcing(const PdeConfig& config) {
  return sample_grf(derive_seed(config.forcing_seed, 0xf0), config.fine_grid, config.length);
}

Tensor initial_state(const PdeConfig& config, std::uint64_t seed, std::size_t index) {
  const std::size_t channels = state_channels(config.pde);
  const std::size_t n = config.fine_grid;
  std::vector<double> v;
  v.reserve(channels * n * n);
  const std::uint64_t traj = derive_seed(seed, index);
  for (std::size_t c = 0; c < channels; ++c) {
    const Tensor f = sample_grf(derive_seed(traj, c), n, config.length);
    v.insert(v.end(), f.begin(), f.end());
  }
  return Tensor({channels, n, n}, std::move(v));
}

Tensor simulate(const PdeConfig& config, const Tensor& initial, std::size_t steps,
                const std::optional<Tensor>& forcing) {
  config.validate();
  const std::size_t n = config.fine_grid;
  const std::size_t channels = state_channels(config.pde);
  if (initial.shape() != Shape{channels, n, n}) {
    throw ShapeError("simulate: initial state " + to_string(initial.shape()) + " on fine grid " + std::to_string(n));
  }
  const SpectralSolver solver(n, config.length);
  Rhs rhs;
  switch (config.pde) {
    case Pde::Burgers:
      rhs = [&](const Tensor& u) { return solver.burgers_rhs(u, config.coefficient, config.forced); };
      break;
    case Pde::FitzHughNagumo:
      rhs = [&](const Tensor& u) { return solver.fn_rhs(u, config.coefficient, config.alpha, config.beta); };
      break;
    case Pde::NavierStokes:
      rhs = [&](const Tensor& w) { return solver.ns_rhs(w, config.coefficient, forcing); };
      break;
  }
  const std::size_t cn = config.coarse_grid;
  const std::size_t per = channels * cn * cn;
  std::vector<double> out((steps + 1) * per);
  Tensor state = initial;
  auto record = [&](std::size_t j) {
    if (!state.all_finite()) throw NumericalError("simulation blew up at recorded step " + std::to_string(j));
    const Tensor c = downsample(state, cn);
    std::copy(c.begin(), c.end(), out.begin() + static_cast<std::ptrdiff_t>(j * per));
  };
  record(0);
  for (std::size_t j = 1; j <= steps; ++j) {
    for (std::size_t s = 0; s < config.substeps; ++s) state = rk4_step(state, rhs, config.fine_dt);
    record(j);
  }
  return Tensor({steps + 1, channels, cn, cn}, std::move(out));
}

Dataset generate_dataset(const PdeConfig& config, std::size_t n, std::size_t steps, std::uint64_t seed,
                         std::size_t first_index) {
  config.validate();
  Dataset ds;
  ds.config = config;
  ds.seed = seed;
  if (config.pde == Pde::NavierStokes) ds.forcing = ns_forcing(config);
  const std::size_t channels = state_channels(config.pde);
  const std::size_t cn = config.coarse_grid;
  const std::size_t per_traj = (steps + 1) * channels * cn * cn;
  std::vector<double> data(n * per_traj);
  parallel_for(n, [&](std::size_t i) {
    try {
      const Tensor traj = simulate(config, initial_state(config, seed, first_index + i), steps, ds.forcing);
      std::copy(traj.begin(), traj.end(), data.begin() + static_cast<std::ptrdiff_t>(i * per_traj));
    } catch (const NumericalError& e) {
      throw NumericalError("trajectory " + std::to_string(first_index + i) + ": " + e.what());
    }
  });
  ds.data = Tensor({n, steps + 1, channels, cn, cn}, std::move(data));
  return ds;
}

Tensor add_noise(const Tensor& data, double amplitude, std::uint64_t seed) {
  if (data.rank() != 5) throw ShapeError("add_noise expects [N,M+1,C,n,n], got " + to_string(data.shape()));
  if (amplitude == 0.0) return data;
  const std::size_t plane = data.dim(3) * data.dim(4);
  const std::size_t planes = data.size() / plane;
  std::vector<double> out(data.begin(), data.end());
  for (std::size_t p = 0; p < planes; ++p) {
    const double* x = data.begin() + p * plane;
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += x[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) var += (x[i] - mean) * (x[i] - mean);
    const double sigma = std::sqrt(var / static_cast<double>(plane));
    Rng rng(derive_seed(seed, p));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < plane; ++i) out[p * plane + i] += amplitude * sigma * normal(rng);
  }
  return Tensor(data.shape(), std::move(out));
}

}  // namespace pdenetpp
