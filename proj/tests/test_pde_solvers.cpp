#include <doctest.h>

#include <cmath>
#include <numeric>

#include "pdenetpp/fft.hpp"
#include "pdenetpp/pde_solvers.hpp"
#include "pdenetpp/spectral.hpp"
#include "support.hpp"

using namespace pdenetpp;
using namespace testing;

namespace {

double mean_of(const double* p, std::size_t n) { return std::accumulate(p, p + n, 0.0) / static_cast<double>(n); }

double sd_of(const double* p, std::size_t n) {
  const double m = mean_of(p, n);
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) v += (p[i] - m) * (p[i] - m);
  return std::sqrt(v / static_cast<double>(n));
}

// Integral of a*b over the square via the grid mean; exact for band-limited products.
double inner(const Tensor& a, const Tensor& b, double length) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  const std::size_t plane = a.dim(a.rank() - 1) * a.dim(a.rank() - 2);
  return s * length * length / static_cast<double>(plane);
}

// Random real field with Fourier support in |kx|, |ky| < n/3, no mean.
Tensor band_limited(std::size_t n, double length, Rng& rng, int kmax) {
  std::normal_distribution<double> normal;
  std::vector<std::array<double, 4>> modes;
  for (int a = -kmax; a <= kmax; ++a)
    for (int b = 0; b <= kmax; ++b)
      if (!(a == 0 && b == 0)) modes.push_back({double(a), double(b), normal(rng), normal(rng)});
  const double base = 2 * kPi / length;
  return sample(n, n, length, length, [&](double x, double y) {
    double s = 0.0;
    for (const auto& m : modes) {
      const double ph = base * (m[0] * x + m[1] * y);
      s += (m[2] * std::cos(ph) + m[3] * std::sin(ph)) / (1.0 + m[0] * m[0] + m[1] * m[1]);
    }
    return s;
  });
}

Tensor stack(std::initializer_list<Tensor> parts) {
  std::vector<double> v;
  for (const auto& p : parts) v.insert(v.end(), p.begin(), p.end());
  const Tensor& f = *parts.begin();
  return Tensor({parts.size(), f.dim(f.rank() - 2), f.dim(f.rank() - 1)}, v);
}

Tensor plane(const Tensor& t, std::size_t c) {
  const std::size_t n = t.dim(1) * t.dim(2);
  return Tensor({t.dim(1), t.dim(2)}, std::vector<double>(t.begin() + c * n, t.begin() + (c + 1) * n));
}

PdeConfig small(Pde pde, std::size_t fine, std::size_t coarse) {
  PdeConfig c = PdeConfig::defaults(pde);
  c.fine_grid = fine;
  c.coarse_grid = coarse;
  return c;
}

// a + c * b elementwise.
Tensor combine(const Tensor& a, double c, const Tensor& b) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + c * b[i];
  return Tensor(a.shape(), v);
}

double kinetic(const Tensor& u) {
  double s = 0.0;
  for (double x : u) s += x * x;
  return 0.5 * s;
}

}  // namespace

TEST_CASE("configuration defaults and validation") {
  const auto b = PdeConfig::defaults(Pde::Burgers);
  CHECK(b.coarse_dt() == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(b.substeps == 16);
  const auto f = PdeConfig::defaults(Pde::FitzHughNagumo);
  CHECK(f.coarse_dt() == doctest::Approx(0.002).epsilon(1e-14));
  CHECK(f.substeps == 200);
  CHECK(f.length == 6.4);
  CHECK(f.coefficient == 1.0);
  const auto ns = PdeConfig::defaults(Pde::NavierStokes);
  CHECK(ns.coarse_dt() == doctest::Approx(0.025).epsilon(1e-14));
  CHECK(ns.substeps == 500);
  CHECK(ns.coefficient == 1e-3);
  const auto hard = PdeConfig::ns_hard();
  CHECK(hard.coarse_dt() == doctest::Approx(0.00625).epsilon(1e-14));
  CHECK(hard.substeps == 125);
  CHECK(hard.coefficient == 1e-4);
  CHECK(b.fine_grid == 256);
  CHECK(b.coarse_grid == 64);
  PdeConfig bad = b;
  bad.coarse_grid = 48;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = b;
  bad.substeps = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("Gaussian random fields") {
  const Tensor a = sample_grf(7, 64, 1.0), b = sample_grf(7, 64, 1.0);
  CHECK(max_abs_diff(a, b) == 0.0);
  CHECK(max_abs_diff(a, sample_grf(8, 64, 1.0)) > 0.1);
  CHECK(std::abs(mean_of(a.begin(), a.size())) < 1e-12);
  CHECK(std::abs(sd_of(a.begin(), a.size()) - 1.0) < 1e-12);
}

TEST_CASE("Gaussian random field spectrum follows (|k|^2 + 25)^-3") {
  // Power averaged over 100 samples in integer shells 1..9 of a 2*pi-periodic
  // 32 x 32 grid, fitted in log-log against |k|^2 + 25.
  const std::size_t n = 32, samples = 100;
  const int shells = 9;
  std::vector<double> power(shells + 1, 0.0), k2sum(shells + 1, 0.0);
  std::vector<int> count(shells + 1, 0);
  for (std::size_t s = 0; s < samples; ++s) {
    const ComplexField z = dft2(sample_grf(100 + s, n, 2 * kPi));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double kx = i <= n / 2 ? double(i) : double(i) - double(n);
        const double ky = j <= n / 2 ? double(j) : double(j) - double(n);
        const int shell = static_cast<int>(std::lround(std::sqrt(kx * kx + ky * ky)));
        if (shell < 1 || shell > shells) continue;
        const double re = z.re[i * n + j], im = z.im[i * n + j];
        power[shell] += re * re + im * im;
        k2sum[shell] += kx * kx + ky * ky;
        ++count[shell];
      }
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 1; k <= shells; ++k) {
    const double x = std::log(k2sum[k] / count[k] + 25.0), y = std::log(power[k] / count[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (shells * sxy - sx * sy) / (shells * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-3.0).epsilon(0.1));
}

TEST_CASE("spectral right-hand sides") {
  const std::size_t n = 32;
  const SpectralSolver solver(n, 2 * kPi);
  const Tensor zero = Tensor::zeros({n, n});
  SUBCASE("unforced Burgers on single modes") {
    const double nu = 0.05;
    const Tensor s = sample(n, n, 2 * kPi, 2 * kPi, [](double x, double) { return std::sin(2 * x); });
    const Tensor rhs = solver.burgers_rhs(stack({zero, s}), nu, false);
    CHECK(max_abs(plane(rhs, 0)) < 1e-10);
    const Tensor expected = sample(n, n, 2 * kPi, 2 * kPi, [&](double x, double) { return -4 * nu * std::sin(2 * x); });
    CHECK(max_abs_diff(plane(rhs, 1), expected) < 1e-10);
    // u = sin x: -u u_x = -sin(2x)/2, well inside the kept band.
    const Tensor u = sample(n, n, 2 * kPi, 2 * kPi, [](double x, double) { return std::sin(x); });
    const Tensor r2 = solver.burgers_rhs(stack({u, zero}), nu, false);
    const Tensor e2 = sample(n, n, 2 * kPi, 2 * kPi, [&](double x, double) { return -0.5 * std::sin(2 * x) - nu * std::sin(x); });
    CHECK(max_abs_diff(plane(r2, 0), e2) < 1e-10);
  }
  SUBCASE("Burgers forcing") {
    Rng rng(1);
    const Tensor u = random_normal({n, n}, rng), v = random_normal({n, n}, rng);
    const Tensor state = stack({u, v});
    const Tensor diff = combine(solver.burgers_rhs(state, 0.05, true), -1.0, solver.burgers_rhs(state, 0.05, false));
    const double h = 2 * kPi / n;
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double x = h * i, y = h * j;
        const std::size_t p = i * n + j;
        err = std::max(err, std::abs(diff[p] - std::sin(v[p]) * std::cos(5 * x + 5 * y)));
        err = std::max(err, std::abs(diff[n * n + p] - std::sin(u[p]) * std::cos(5 * x - 5 * y)));
      }
    CHECK(err < 1e-12);
  }
  SUBCASE("FitzHugh-Nagumo on a constant state is the reaction") {
    const double u0 = 0.6, v0 = -0.3;
    std::vector<double> s(2 * n * n);
    std::fill(s.begin(), s.begin() + n * n, u0);
    std::fill(s.begin() + n * n, s.end(), v0);
    const Tensor rhs = solver.fn_rhs(Tensor({2, n, n}, s), 1.0, 0.01, 0.25);
    double err = 0.0;
    for (std::size_t p = 0; p < n * n; ++p) {
      err = std::max(err, std::abs(rhs[p] - (u0 - u0 * u0 * u0 - v0 + 0.01)));
      err = std::max(err, std::abs(rhs[n * n + p] - 0.25 * (u0 - v0)));
    }
    CHECK(err < 1e-14);
  }
  SUBCASE("two-thirds rule") {
    CHECK(solver.kept(0, 0));
    CHECK(solver.kept(10, 10));
    CHECK_FALSE(solver.kept(11, 0));
    CHECK_FALSE(solver.kept(0, 11));
    CHECK(solver.kept(n - 10, 3));
    CHECK_FALSE(solver.kept(n - 11, 3));
  }
  CHECK_THROWS_AS(SpectralSolver(15, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(solver.fn_rhs(Tensor::zeros({1, n, n}), 1.0, 0.0, 0.0), ShapeError);
}

TEST_CASE("Navier-Stokes energy and enstrophy balance") {
  const std::size_t n = 32;
  const double len = 1.0, nu = 1e-3;
  const SpectralSolver solver(n, len);
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor w = band_limited(n, len, rng, 10);
    const Tensor f = band_limited(n, len, rng, 6);
    const Tensor w3 = w.reshaped({1, n, n});
    const Tensor rhs = solver.ns_rhs(w3, nu, f);
    const Tensor vel = velocity_from_vorticity(w3, len), force = velocity_from_vorticity(f, len);
    const Tensor dvel = velocity_from_vorticity(rhs, len);
    const double dE = inner(vel, dvel, len);
    double grad2 = 0.0;
    for (int c = 0; c < 2; ++c) {
      const Tensor comp = plane(vel, c);
      for (auto [p, q] : {std::pair{1, 0}, std::pair{0, 1}}) {
        const Tensor d = spectral_derivative(comp, len, len, p, q);
        grad2 += inner(d, d, len);
      }
    }
    const double expected_e = -nu * grad2 + inner(vel, force, len);
    CHECK(std::abs(dE - expected_e) <= 1e-6 * std::abs(expected_e));
    const double dZ = inner(w3, rhs, len);
    double gw = 0.0;
    for (auto [p, q] : {std::pair{1, 0}, std::pair{0, 1}}) {
      const Tensor d = spectral_derivative(w, len, len, p, q);
      gw += inner(d, d, len);
    }
    const double expected_z = -nu * gw + inner(w, f, len);
    CHECK(std::abs(dZ - expected_z) <= 1e-6 * std::abs(expected_z));
  }
}

TEST_CASE("velocity from vorticity") {
  const std::size_t n = 32;
  CHECK(max_abs(velocity_from_vorticity(Tensor::zeros({n, n}), 1.0)) == 0.0);
  const Tensor w = sample(n, n, 1.0, 1.0, [](double x, double) { return std::sin(2 * kPi * x); });
  const Tensor vel = velocity_from_vorticity(w, 1.0);
  const Tensor v = sample(n, n, 1.0, 1.0, [](double x, double) { return -std::cos(2 * kPi * x) / (2 * kPi); });
  CHECK(max_abs(plane(vel, 0)) < 1e-14);
  CHECK(max_abs_diff(plane(vel, 1), v) < 1e-14);
  Rng rng(3);
  const Tensor g = random_normal({n, n}, rng);
  const Tensor gv = velocity_from_vorticity(g, 1.0);
  CHECK(max_abs(spectral_divergence(gv, 1.0)) < 1e-10);
  // Curl of the recovered velocity reproduces w minus its mean (fields without Nyquist content).
  const Tensor bl = band_limited(n, 1.0, rng, 10);
  std::vector<double> shifted = bl.to_vector();
  for (auto& x : shifted) x += 0.75;
  const Tensor bv = velocity_from_vorticity(Tensor({n, n}, shifted), 1.0);
  const Tensor curl = combine(spectral_derivative(plane(bv, 1), 1.0, 1.0, 1, 0), -1.0, spectral_derivative(plane(bv, 0), 1.0, 1.0, 0, 1));
  const Tensor& expected = bl;
  CHECK(max_abs_diff(curl, expected) < 1e-10);
}

TEST_CASE("rk4 step") {
  const Tensor x({3}, {1.0, -2.0, 0.5});
  CHECK(max_abs_diff(rk4_step(x, [](const Tensor& s) { return Tensor::zeros(s.shape()); }, 0.3), x) == 0.0);
  const Rhs decay = [](const Tensor& s) { return combine(Tensor::zeros(s.shape()), -1.0, s); };
  CHECK(std::abs(rk4_step(Tensor({1}, {1.0}), decay, 0.1)[0] - std::exp(-0.1)) < 1e-7);
  auto error = [&](int steps) {
    Tensor s({1}, {1.0});
    for (int i = 0; i < steps; ++i) s = rk4_step(s, decay, 1.0 / steps);
    return std::abs(s[0] - std::exp(-1.0));
  };
  for (int steps : {4, 8, 16}) CHECK(std::log2(error(steps) / error(2 * steps)) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("downsampling") {
  const Tensor c = Tensor::full({2, 16, 16}, 3.5);
  CHECK(max_abs_diff(downsample(c, 4), Tensor::full({2, 4, 4}, 3.5)) == 0.0);
  const Tensor xs = sample(16, 16, 1.0, 1.0, [](double x, double) { return x; });
  CHECK(max_abs_diff(downsample(xs, 4), sample(4, 4, 1.0, 1.0, [](double x, double) { return x; })) == 0.0);
  auto f = [](double x, double) { return std::sin(2 * kPi * x); };
  CHECK(max_abs_diff(downsample(sample(256, 256, 1.0, 1.0, f), 64), sample(64, 64, 1.0, 1.0, f)) < 1e-15);
  CHECK_THROWS_AS(downsample(c, 5), ShapeError);
}

TEST_CASE("noise injection") {
  Rng rng(4);
  const Tensor data = random_normal({3, 4, 2, 64, 64}, rng, 2.0);
  CHECK(max_abs_diff(add_noise(data, 0.0, 1), data) == 0.0);
  const Tensor noisy = add_noise(data, 0.001, 9);
  CHECK(max_abs_diff(noisy, add_noise(data, 0.001, 9)) == 0.0);
  const std::size_t plane = 64 * 64;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t p = 0; p < data.size() / plane; ++p) {
    const double sigma = sd_of(data.begin() + p * plane, plane);
    for (std::size_t i = 0; i < plane; ++i) {
      const double z = (noisy[p * plane + i] - data[p * plane + i]) / sigma;
      sum += z;
      sum2 += z * z;
    }
  }
  const double m = sum / data.size();
  CHECK(std::sqrt(sum2 / data.size() - m * m) == doctest::Approx(0.001).epsilon(0.05));
}

TEST_CASE("dataset generation") {
  PdeConfig cfg = small(Pde::Burgers, 32, 16);
  const Dataset ds = generate_dataset(cfg, 2, 3, 11);
  CHECK(ds.data.shape() == Shape{2, 4, 2, 16, 16});
  CHECK(ds.data.all_finite());
  CHECK(max_abs_diff(ds.data, generate_dataset(cfg, 2, 3, 11).data) == 0.0);
  // The first snapshot is the subsampled initial state.
  CHECK(max_abs_diff(ds.snapshot(1, 0), downsample(initial_state(cfg, 11, 1), 16)) == 0.0);
  // Offsetting the first index reproduces later trajectories.
  const Dataset tail = generate_dataset(cfg, 1, 3, 11, 1);
  CHECK(max_abs_diff(tail.snapshot(0, 3), ds.snapshot(1, 3)) == 0.0);
  CHECK_FALSE(ds.forcing.has_value());
  PdeConfig ns = small(Pde::NavierStokes, 32, 16);
  ns.substeps = 20;
  const Dataset nds = generate_dataset(ns, 2, 1, 3);
  REQUIRE(nds.forcing.has_value());
  CHECK(max_abs_diff(*nds.forcing, ns_forcing(ns)) == 0.0);
  CHECK(nds.data.shape() == Shape{2, 2, 1, 16, 16});
}

TEST_CASE("FitzHugh-Nagumo from a constant state follows the reaction ODE") {
  PdeConfig cfg = small(Pde::FitzHughNagumo, 16, 8);
  const double u0 = 0.8, v0 = 0.1;
  std::vector<double> s(2 * 256);
  std::fill(s.begin(), s.begin() + 256, u0);
  std::fill(s.begin() + 256, s.end(), v0);
  const Tensor traj = simulate(cfg, Tensor({2, 16, 16}, s), 5, std::nullopt);
  // Reference: the scalar ODE with a four times finer step.
  double u = u0, v = v0;
  const double dt = cfg.fine_dt / 4;
  auto r = [&](double a, double b) { return std::pair{a - a * a * a - b + cfg.alpha, cfg.beta * (a - b)}; };
  double err = 0.0, spread = 0.0;
  for (std::size_t j = 1; j <= 5; ++j) {
    for (std::size_t k = 0; k < 4 * cfg.substeps; ++k) {
      const auto k1 = r(u, v);
      const auto k2 = r(u + 0.5 * dt * k1.first, v + 0.5 * dt * k1.second);
      const auto k3 = r(u + 0.5 * dt * k2.first, v + 0.5 * dt * k2.second);
      const auto k4 = r(u + dt * k3.first, v + dt * k3.second);
      u += dt / 6 * (k1.first + 2 * k2.first + 2 * k3.first + k4.first);
      v += dt / 6 * (k1.second + 2 * k2.second + 2 * k3.second + k4.second);
    }
    const double* snap = traj.begin() + j * 128;
    for (std::size_t p = 0; p < 64; ++p) {
      err = std::max({err, std::abs(snap[p] - u), std::abs(snap[64 + p] - v)});
      spread = std::max({spread, std::abs(snap[p] - snap[0]), std::abs(snap[64 + p] - snap[64])});
    }
  }
  CHECK(err < 1e-6);
  CHECK(spread < 1e-10);
}

TEST_CASE("Navier-Stokes trajectories stay divergence free and conserve the mean") {
  PdeConfig cfg = small(Pde::NavierStokes, 32, 32);
  cfg.substeps = 100;
  const Tensor forcing = ns_forcing(cfg);
  CHECK(std::abs(mean_of(forcing.begin(), forcing.size())) < 1e-12);
  const Tensor init = initial_state(cfg, 5, 0);
  const Tensor traj = simulate(cfg, init, 3, forcing);
  const std::size_t plane = 32 * 32;
  const double m0 = mean_of(traj.begin(), plane);
  for (std::size_t j = 0; j <= 3; ++j) {
    const Tensor w({32, 32}, std::vector<double>(traj.begin() + j * plane, traj.begin() + (j + 1) * plane));
    CHECK(max_abs(spectral_divergence(velocity_from_vorticity(w, cfg.length), cfg.length)) < 1e-10);
    CHECK(std::abs(mean_of(w.begin(), plane) - m0) < 1e-8 * (j + 1));
  }
}

TEST_CASE("unforced viscous Burgers does not gain kinetic energy") {
  PdeConfig cfg = small(Pde::Burgers, 64, 64);
  cfg.forced = false;
  cfg.substeps = 4;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Tensor traj = simulate(cfg, initial_state(cfg, seed, 0), 60, std::nullopt);
    const std::size_t per = 2 * 64 * 64;
    double previous = kinetic(Tensor({per}, std::vector<double>(traj.begin(), traj.begin() + per)));
    bool monotone = true;
    for (std::size_t j = 1; j <= 60; ++j) {
      const double e = kinetic(Tensor({per}, std::vector<double>(traj.begin() + j * per, traj.begin() + (j + 1) * per)));
      if (e > previous * (1 + 1e-12)) {
        monotone = false;
        MESSAGE("energy rose at step " << j << ": " << previous << " -> " << e);
      }
      previous = e;
    }
    CHECK(monotone);
  }
}

TEST_CASE("halving the fine step barely changes recorded snapshots") {
  PdeConfig cfg = small(Pde::Burgers, 32, 16);
  const Tensor init = initial_state(cfg, 6, 0);
  const Tensor a = simulate(cfg, init, 3, std::nullopt);
  PdeConfig half = cfg;
  half.fine_dt /= 2;
  half.substeps *= 2;
  const Tensor b = simulate(half, init, 3, std::nullopt);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  CHECK(std::sqrt(num / den) < 1e-5);
}

TEST_CASE("simulation blow-up is reported") {
  PdeConfig cfg = small(Pde::Burgers, 16, 8);
  cfg.fine_dt = 5.0;
  cfg.substeps = 20;
  CHECK_THROWS_AS(simulate(cfg, initial_state(cfg, 1, 0), 5, std::nullopt), NumericalError);
  CHECK_THROWS_AS(simulate(cfg, Tensor::zeros({1, 16, 16}), 1, std::nullopt), ShapeError);
}
