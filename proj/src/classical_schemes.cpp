#include "pdenetpp/classical_schemes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pdenetpp::schemes {
namespace {

std::size_t wrap(std::ptrdiff_t j, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  return static_cast<std::size_t>(((j % m) + m) % m);
}

void require_nonempty(std::span<const double> u) {
  if (u.empty()) throw std::invalid_argument("empty grid");
}

}  // namespace

std::vector<double> upwind_step_1(std::span<const double> u, double mu) {
  require_nonempty(u);
  const std::size_t n = u.size();
  const double a = std::abs(mu);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<std::ptrdiff_t>(j);
    out[j] = (1.0 - a) * u[j] + 0.5 * (mu + a) * u[wrap(jj - 1, n)] - 0.5 * (mu - a) * u[wrap(jj + 1, n)];
  }
  return out;
}

std::vector<double> upwind_step_2(std::span<const double> u, double mu) {
  require_nonempty(u);
  const std::size_t n = u.size();
  const double a = std::abs(mu);
  const double c0 = (2.0 - 3.0 * a) / 2.0;
  const double cm1 = mu + a, cp1 = -(mu - a);
  const double cm2 = -(mu + a) / 4.0, cp2 = (mu - a) / 4.0;
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<std::ptrdiff_t>(j);
    out[j] = c0 * u[j] + cm1 * u[wrap(jj - 1, n)] + cp1 * u[wrap(jj + 1, n)] + cm2 * u[wrap(jj - 2, n)] +
             cp2 * u[wrap(jj + 2, n)];
  }
  return out;
}

std::string_view to_string(Limiter limiter) { return limiter == Limiter::Minmod ? "minmod" : "vanleer"; }

double limiter_value(Limiter limiter, double theta) {
  if (limiter == Limiter::Minmod) return std::max(0.0, std::min(1.0, theta));
  return (theta + std::abs(theta)) / (1.0 + std::abs(theta));
}

std::vector<double> flux_limited_step(std::span<const double> u, double mu, Limiter limiter) {
  require_nonempty(u);
  if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("flux_limited_step requires 0 < mu <= 1");
  const std::size_t n = u.size();
  // Fluxes in units of c: F_{j+1/2} for j = 0..n-1.
  std::vector<double> flux(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<std::ptrdiff_t>(j);
    const double ujm = u[wrap(jj - 1, n)], uj = u[j], ujp = u[wrap(jj + 1, n)];
    const double low = uj;
    const double high = uj + 0.5 * (1.0 - mu) * (ujp - uj);
    const double jump = ujp - uj;
    const double theta = jump == 0.0 ? 0.0 : (uj - ujm) / jump;
    flux[j] = low + limiter_value(limiter, theta) * (high - low);
  }
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = u[j] - mu * (flux[j] - flux[wrap(static_cast<std::ptrdiff_t>(j) - 1, n)]);
  }
  return out;
}

Weno3Result weno3_reconstruct(std::span<const double> a) {
  require_nonempty(a);
  const std::size_t n = a.size();
  constexpr double eps = 1e-6;
  Weno3Result r;
  r.values.resize(n);
  r.w_left.resize(n);
  r.w_right.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<std::ptrdiff_t>(j);
    const double am = a[wrap(jj - 1, n)], a0 = a[j], ap = a[wrap(jj + 1, n)], ap2 = a[wrap(jj + 2, n)];
    const double q_left = -am / 6.0 + 5.0 * a0 / 6.0 + ap / 3.0;
    const double q_right = a0 / 3.0 + 5.0 * ap / 6.0 - ap2 / 6.0;
    const double beta_left = (a0 - am) * (a0 - am);
    const double beta_right = (ap - a0) * (ap - a0);
    const double al = (1.0 / 3.0) / ((eps + beta_left) * (eps + beta_left));
    const double ar = (2.0 / 3.0) / ((eps + beta_right) * (eps + beta_right));
    r.w_left[j] = al / (al + ar);
    r.w_right[j] = ar / (al + ar);
    r.values[j] = r.w_left[j] * q_left + r.w_right[j] * q_right;
  }
  return r;
}

std::vector<double> weno3_step(std::span<const double> u, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("weno3_step requires mu > 0");
  const std::size_t n = u.size();
  // mu times -(F_{j+1/2} - F_{j-1/2}) with the upwind WENO3 interface state:
  // 2-cell candidates {j-1, j} and {j, j+1}, the same smoothness indicators
  // and linear weights 1/3 and 2/3.
  auto rate = [&](std::span<const double> v) {
    constexpr double eps = 1e-6;
    std::vector<double> flux(n), r(n);
    for (std::size_t j = 0; j < n; ++j) {
      const auto jj = static_cast<std::ptrdiff_t>(j);
      const double am = v[wrap(jj - 1, n)], a0 = v[j], ap = v[wrap(jj + 1, n)];
      const double q0 = -0.5 * am + 1.5 * a0;
      const double q1 = 0.5 * a0 + 0.5 * ap;
      const double b0 = (a0 - am) * (a0 - am), b1 = (ap - a0) * (ap - a0);
      const double w0 = (1.0 / 3.0) / ((eps + b0) * (eps + b0));
      const double w1 = (2.0 / 3.0) / ((eps + b1) * (eps + b1));
      flux[j] = (w0 * q0 + w1 * q1) / (w0 + w1);
    }
    for (std::size_t j = 0; j < n; ++j) r[j] = -mu * (flux[j] - flux[wrap(static_cast<std::ptrdiff_t>(j) - 1, n)]);
    return r;
  };
  // Three-stage strong-stability-preserving Runge-Kutta (Shu-Osher form).
  const auto k1 = rate(u);
  std::vector<double> s1(n), s2(n), out(n);
  for (std::size_t j = 0; j < n; ++j) s1[j] = u[j] + k1[j];
  const auto k2 = rate(s1);
  for (std::size_t j = 0; j < n; ++j) s2[j] = 0.75 * u[j] + 0.25 * (s1[j] + k2[j]);
  const auto k3 = rate(s2);
  for (std::size_t j = 0; j < n; ++j) out[j] = u[j] / 3.0 + 2.0 / 3.0 * (s2[j] + k3[j]);
  return out;
}

double total_variation(std::span<const double> u) {
  double tv = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) tv += std::abs(u[(j + 1) % u.size()] - u[j]);
  return tv;
}

std::vector<double> shifted(std::span<const double> u, double shift) {
  require_nonempty(u);
  const std::size_t n = u.size();
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double src = static_cast<double>(j) - shift;
    const double fl = std::floor(src);
    const double frac = src - fl;
    const auto i0 = static_cast<std::ptrdiff_t>(fl);
    out[j] = (1.0 - frac) * u[wrap(i0, n)] + frac * u[wrap(i0 + 1, n)];
  }
  return out;
}

}  // namespace pdenetpp::schemes
