#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "pdenetpp/fft.hpp"
#include "pdenetpp/hybrid_model.hpp"

namespace pdenetpp {

/// Physical setup of one PDE and its data-generation grids.
struct PdeConfig {
  Pde pde = Pde::Burgers;
  double length = 2.0 * 3.14159265358979323846;
  /// nu (Burgers, Navier-Stokes) or gamma (FitzHugh-Nagumo).
  double coefficient = 0.05;
  double alpha = 0.01;
  double beta = 0.25;
  std::size_t fine_grid = 256;
  std::size_t coarse_grid = 64;
  double fine_dt = 0.01 / 16;
  /// Fine steps per recorded coarse step (Delta t / delta t).
  std::size_t substeps = 16;
  /// Whether the Burgers forcing is switched on.
  bool forced = true;
  /// Seed of the Navier-Stokes forcing field; datasets sharing it share f.
  std::uint64_t forcing_seed = 0;

  double coarse_dt() const { return fine_dt * static_cast<double>(substeps); }
  /// Throws std::invalid_argument on inconsistent values.
  void validate() const;

  /// Burgers: [0,2pi]^2, nu=0.05, dt=16 dt_f=0.01. FN: [0,6.4]^2, gamma=1,
  /// dt=200 dt_f=0.002. NS: [0,1]^2, nu=1e-3, dt=500 dt_f=0.025.
  static PdeConfig defaults(Pde pde);
  /// Navier-Stokes with nu=1e-4 and dt=125 dt_f=0.00625.
  static PdeConfig ns_hard();
};

/// Field with covariance scale * (-Laplacian + shift)^(-power) on the periodic
/// square [0,length)^2, z-score normalized. Deterministic in `seed`.
Tensor sample_grf(std::uint64_t seed, std::size_t n, double length, double scale = 25.0, double shift = 25.0,
                  double power = 3.0);

/// Pseudo-spectral right-hand sides on an n x n periodic grid. Derivatives
/// are taken in Fourier space; advective products are dealiased with the
/// two-thirds rule (modes with 3|k| >= n removed).
class SpectralSolver {
 public:
  SpectralSolver(std::size_t n, double length);

  std::size_t size() const { return n_; }
  double length() const { return length_; }

  /// U [2,n,n]: -U.grad U + nu Lap U + f(x,y,U).
  Tensor burgers_rhs(const Tensor& u, double nu, bool forced = true) const;
  /// U [2,n,n]: gamma Lap U + R(U).
  Tensor fn_rhs(const Tensor& u, double gamma, double alpha, double beta) const;
  /// w [1,n,n]: -U.grad w + nu Lap w + f with U recovered from w.
  Tensor ns_rhs(const Tensor& w, double nu, const std::optional<Tensor>& forcing) const;

  /// Spectral Laplacian of every [n,n] plane.
  Tensor laplacian(const Tensor& field) const;
  /// True for half-spectrum modes (i, j) kept by the two-thirds rule.
  bool kept(std::size_t i, std::size_t j) const;

 private:
  void to_spectral(const double* in, cplx* out) const;
  std::size_t n_, half_;
  double length_;
  std::vector<double> kx_, ky_;  // full axis, half axis
  std::vector<double> kx_odd_, ky_odd_;  // Nyquist removed
  std::vector<char> keep_;
  std::vector<double> cos_plus_, cos_minus_;  // cos(5x+5y), cos(5x-5y)
};

using Rhs = std::function<Tensor(const Tensor&)>;

/// Classical four-stage Runge-Kutta step.
Tensor rk4_step(const Tensor& state, const Rhs& rhs, double dt);

/// Point subsampling of the last two axes from n to `coarse` nodes.
Tensor downsample(const Tensor& fine, std::size_t coarse);

/// Trajectories [N, M+1, C, n, n] on the coarse grid.
struct Dataset {
  Tensor data;
  PdeConfig config;
  std::uint64_t seed = 0;
  /// Shared Navier-Stokes forcing on the fine grid [n_f, n_f].
  std::optional<Tensor> forcing;

  std::size_t trajectories() const { return data.dim(0); }
  std::size_t snapshots() const { return data.dim(1); }
  std::size_t channels() const { return data.dim(2); }
  /// Snapshot j of trajectory i, shape [C,n,n].
  Tensor snapshot(std::size_t i, std::size_t j) const;
};

/// Navier-Stokes forcing on the fine grid, drawn from config.forcing_seed.
Tensor ns_forcing(const PdeConfig& config);

/// Initial state of trajectory `index` on the fine grid.
Tensor initial_state(const PdeConfig& config, std::uint64_t seed, std::size_t index);

/// Simulates one trajectory from `initial` (fine grid) and records `steps`
/// coarse snapshots after the initial one. Throws NumericalError on blow-up.
Tensor simulate(const PdeConfig& config, const Tensor& initial, std::size_t steps,
                const std::optional<Tensor>& forcing);

/// N trajectories of M steps; trajectory i starts from initial_state(config, seed, first_index + i).
Dataset generate_dataset(const PdeConfig& config, std::size_t n, std::size_t steps, std::uint64_t seed,
                         std::size_t first_index = 0);

/// U + amplitude * sigma * eps per snapshot and channel, sigma the spatial
/// standard deviation of that snapshot channel. `data` is [N, M+1, C, n, n].
Tensor add_noise(const Tensor& data, double amplitude, std::uint64_t seed);

}  // namespace pdenetpp
