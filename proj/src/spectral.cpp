#include "pdenetpp/spectral.hpp"

#include <cmath>
#include <numbers>

namespace pdenetpp {
namespace {

cplx ipow(double k, int order) {
  cplx r{1.0, 0.0};
  for (int i = 0; i < order; ++i) r *= cplx{0.0, k};
  return r;
}

std::pair<ComplexField, ComplexField> velocity_multipliers(std::size_t nx, std::size_t ny, double length) {
  const auto kx = wavenumbers(nx, length);
  const auto ky = wavenumbers(ny, length);
  std::vector<cplx> mu(nx * ny), mv(nx * ny);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      const double k2 = kx[i] * kx[i] + ky[j] * ky[j];
      if (k2 == 0.0) continue;
      const double ex = (nx % 2 == 0 && i == nx / 2) ? 0.0 : kx[i];
      const double ey = (ny % 2 == 0 && j == ny / 2) ? 0.0 : ky[j];
      // psi_hat = -w_hat / k2; u = -i ky psi_hat; v = i kx psi_hat.
      mu[i * ny + j] = cplx{0.0, ey / k2};
      mv[i * ny + j] = cplx{0.0, -ex / k2};
    }
  }
  return {from_complex({nx, ny}, mu), from_complex({nx, ny}, mv)};
}

}  // namespace

std::vector<double> wavenumbers(std::size_t n, double length) {
  std::vector<double> k(n);
  const double base = 2.0 * std::numbers::pi / length;
  for (std::size_t i = 0; i < n; ++i) {
    const auto signed_i = i < (n + 1) / 2 ? static_cast<double>(i) : static_cast<double>(i) - static_cast<double>(n);
    k[i] = base * signed_i;
  }
  return k;
}

ComplexField derivative_multiplier(std::size_t nx, std::size_t ny, double lx, double ly, int p, int q) {
  const auto kx = wavenumbers(nx, lx);
  const auto ky = wavenumbers(ny, ly);
  std::vector<cplx> m(nx * ny);
  for (std::size_t i = 0; i < nx; ++i) {
    const bool drop_x = p % 2 == 1 && nx % 2 == 0 && i == nx / 2;
    for (std::size_t j = 0; j < ny; ++j) {
      const bool drop_y = q % 2 == 1 && ny % 2 == 0 && j == ny / 2;
      m[i * ny + j] = (drop_x || drop_y) ? cplx{} : ipow(kx[i], p) * ipow(ky[j], q);
    }
  }
  return from_complex({nx, ny}, m);
}

Tensor spectral_derivative(const Tensor& field, double lx, double ly, int p, int q) {
  const Shape& s = field.shape();
  if (s.size() < 2) throw ShapeError("spectral_derivative needs at least two axes");
  const std::size_t nx = s[s.size() - 2], ny = s.back();
  const auto mult = to_complex(derivative_multiplier(nx, ny, lx, ly, p, q));
  std::vector<cplx> buf(field.begin(), field.end());
  fft::forward(buf, nx, ny);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= mult[i % (nx * ny)];
  fft::inverse(buf, nx, ny);
  std::vector<double> out(buf.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[i].real();
  return Tensor(s, std::move(out));
}

Tensor velocity_from_vorticity(const Tensor& w, double length) {
  const Shape& s = w.shape();
  if (!(s.size() == 2 || (s.size() == 3 && s[0] == 1))) {
    throw ShapeError("velocity_from_vorticity expects [H,W] or [1,H,W], got " + to_string(s));
  }
  const std::size_t nx = s[s.size() - 2], ny = s.back();
  const auto [mu, mv] = velocity_multipliers(nx, ny, length);
  const auto cu = to_complex(mu), cv = to_complex(mv);
  std::vector<cplx> wh(w.begin(), w.end());
  fft::forward(wh, nx, ny);
  std::vector<cplx> buf(2 * nx * ny);
  for (std::size_t i = 0; i < nx * ny; ++i) {
    buf[i] = cu[i] * wh[i];
    buf[nx * ny + i] = cv[i] * wh[i];
  }
  fft::inverse(buf, nx, ny);
  std::vector<double> out(buf.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[i].real();
  return Tensor({2, nx, ny}, std::move(out));
}

Var velocity_from_vorticity(const Var& w, double length) {
  const Shape& s = w.shape();
  if (s.size() != 3 || s[0] != 1) throw ShapeError("velocity_from_vorticity expects [1,H,W], got " + to_string(s));
  const auto [mu, mv] = velocity_multipliers(s[1], s[2], length);
  Var parts[] = {spectral_filter(w, mu), spectral_filter(w, mv)};
  return concat(parts);
}

Tensor spectral_divergence(const Tensor& velocity, double length) {
  const Shape& s = velocity.shape();
  if (s.size() != 3 || s[0] != 2) throw ShapeError("spectral_divergence expects [2,H,W]");
  const Tensor ux = spectral_derivative(velocity(0), length, length, 1, 0);
  const Tensor vy = spectral_derivative(velocity(1), length, length, 0, 1);
  std::vector<double> out(ux.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ux[i] + vy[i];
  return Tensor({s[1], s[2]}, std::move(out));
}

}  // namespace pdenetpp
