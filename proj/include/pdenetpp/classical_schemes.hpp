#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace pdenetpp::schemes {

// One-dimensional periodic advection u_t + c u_x = 0 with CFL number
// mu = c dt / dx. Arrays are cell values U_j, indices taken modulo n.

/// U'_j = (1-|mu|) U_j + (mu+|mu|)/2 U_{j-1} - (mu-|mu|)/2 U_{j+1}.
std::vector<double> upwind_step_1(std::span<const double> u, double mu);

/// U_j' = (2-3|mu|)/2 U_j + (mu+|mu|) U_{j-1} - (mu-|mu|) U_{j+1}
///        - (mu+|mu|)/4 U_{j-2} + (mu-|mu|)/4 U_{j+2}.
std::vector<double> upwind_step_2(std::span<const double> u, double mu);

enum class Limiter { Minmod, VanLeer };
std::string_view to_string(Limiter limiter);

/// phi(theta): minmod max(0, min(1, theta)); van Leer (theta+|theta|)/(1+|theta|).
double limiter_value(Limiter limiter, double theta);

/// Flux-limited update for 0 < mu <= 1: F = F_L + phi(theta) (F_H - F_L) at
/// each edge, with upwind F_L and Lax-Wendroff F_H, in conservative form.
/// Throws std::invalid_argument for mu outside (0, 1].
std::vector<double> flux_limited_step(std::span<const double> u, double mu, Limiter limiter);

struct Weno3Result {
  /// u_{j+1/2} for every j.
  std::vector<double> values;
  /// Nonlinear weights of the left (j-1..j+1) and right (j..j+2) candidates.
  std::vector<double> w_left, w_right;
};

/// Interface values u_{j+1/2} from cell averages as a convex blend of the
/// third-order candidates -1/6 a_{j-1} + 5/6 a_j + 1/3 a_{j+1} and
/// 1/3 a_j + 5/6 a_{j+1} - 1/6 a_{j+2}. The nonlinear weights use the
/// two-cell smoothness indicators (a_j - a_{j-1})^2 and (a_{j+1} - a_j)^2,
/// linear weights 1/3 and 2/3 and eps = 1e-6.
Weno3Result weno3_reconstruct(std::span<const double> averages);

/// Conservative update for mu > 0 with the upwind WENO3 interface state
/// (candidates -a_{j-1}/2 + 3a_j/2 and (a_j + a_{j+1})/2, same indicators and
/// linear weights as above), advanced with three-stage SSP Runge-Kutta.
std::vector<double> weno3_step(std::span<const double> u, double mu);

/// sum_j |U_{j+1} - U_j| with periodic wrap.
double total_variation(std::span<const double> u);

/// Exact translation of periodic data by `shift` cells (may be fractional),
/// evaluated with linear interpolation between cells.
std::vector<double> shifted(std::span<const double> u, double shift);

}  // namespace pdenetpp::schemes
