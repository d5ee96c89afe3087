#pragma once

#include <vector>

#include "pdenetpp/autodiff.hpp"
#include "pdenetpp/fft.hpp"

namespace pdenetpp {

/// Physical wavenumbers 2*pi*n/length in FFT order, n = 0..n/2-1, -n/2..-1.
std::vector<double> wavenumbers(std::size_t n, double length);

/// Multiplier (i kx)^p (i ky)^q on an nx x ny grid over [0,lx) x [0,ly).
/// The Nyquist wavenumber is dropped for odd orders so real fields stay real.
ComplexField derivative_multiplier(std::size_t nx, std::size_t ny, double lx, double ly, int p, int q);

/// Spectral derivative of a real field over its last two axes.
Tensor spectral_derivative(const Tensor& field, double lx, double ly, int p, int q);

/// Velocity (u, v) = (-psi_y, psi_x) with Laplacian(psi) = w on [0,length)^2.
/// The k = 0 mode of psi is set to zero. w is [H,W] or [1,H,W]; result [2,H,W].
Tensor velocity_from_vorticity(const Tensor& w, double length);
/// Differentiable version for w [1,H,W].
Var velocity_from_vorticity(const Var& w, double length);

/// Spectral divergence u_x + v_y of a velocity field [2,H,W].
Tensor spectral_divergence(const Tensor& velocity, double length);

}  // namespace pdenetpp
