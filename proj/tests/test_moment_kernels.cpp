#include <doctest.h>

#include <cmath>

#include "pdenetpp/moments.hpp"
#include "support.hpp"

using namespace pdenetpp;
using namespace testing;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Definition of the moment matrix as a plain sum.
Tensor moment_by_definition(const Tensor& k, int L, double dx, double dy) {
  const std::size_t n = static_cast<std::size_t>(2 * L + 1);
  std::vector<double> m(n * n, 0.0);
  for (int u = 0; u <= 2 * L; ++u)
    for (int v = 0; v <= 2 * L; ++v) {
      double acc = 0.0;
      for (int s = -L; s <= L; ++s)
        for (int t = -L; t <= L; ++t) {
          acc += k.at({static_cast<std::size_t>(s + L), static_cast<std::size_t>(t + L)}) * std::pow(s, u) *
                 std::pow(t, v) * std::pow(dx, u) * std::pow(dy, v);
        }
      m[u * n + v] = acc / (factorial(u) * factorial(v));
    }
  return Tensor({n, n}, m);
}

Tensor row_kernel(int L, std::initializer_list<double> row) {
  const std::size_t n = static_cast<std::size_t>(2 * L + 1);
  std::vector<double> v(n * n, 0.0);
  std::size_t s = 0;
  for (double x : row) v[s++ * n + static_cast<std::size_t>(L)] = x;
  return Tensor({n, n}, v);
}

Tensor unit(int L, int u, int v) {
  const std::size_t n = static_cast<std::size_t>(2 * L + 1);
  std::vector<double> m(n * n, 0.0);
  m[static_cast<std::size_t>(u) * n + static_cast<std::size_t>(v)] = 1.0;
  return Tensor({n, n}, m);
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  const Tensor t = random_normal({n}, rng);
  return t.to_vector();
}

}  // namespace

TEST_CASE("MomentSpec validation") {
  CHECK_NOTHROW((MomentSpec{1, 0, 2, 2, 0.1, 0.1}.validate()));
  CHECK_THROWS_AS((MomentSpec{2, 0, 1, 1, 1, 1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((MomentSpec{1, 0, 1, 0, 1, 1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((MomentSpec{-1, 0, 1, 1, 1, 1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((MomentSpec{1, 0, 1, 1, 0.0, 1}.validate()), std::invalid_argument);
}

TEST_CASE("vandermonde_factor") {
  const Tensor q = vandermonde_factor(1, 1.0);
  const std::vector<double> expected{1, 1, 1, -1, 0, 1, 0.5, 0, 0.5};
  for (std::size_t i = 0; i < 9; ++i) CHECK(q[i] == doctest::Approx(expected[i]));
  for (double h : {0.1, 1.0, 7.0}) {
    const Tensor q2 = vandermonde_factor(2, h);
    for (std::size_t s = 0; s < 5; ++s) CHECK(q2.at({0, s}) == 1.0);
  }
  // Determinant of the L=2, h=0.1 factor by Gaussian elimination: it is the
  // Vandermonde determinant prod_{i<j}(s_j-s_i) times prod_u h^u/u!.
  const Tensor q3 = vandermonde_factor(2, 0.1);
  std::vector<double> a = q3.to_vector();
  double det = 1.0;
  for (std::size_t c = 0; c < 5; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < 5; ++r)
      if (std::abs(a[r * 5 + c]) > std::abs(a[piv * 5 + c])) piv = r;
    if (piv != c) {
      for (std::size_t k = 0; k < 5; ++k) std::swap(a[c * 5 + k], a[piv * 5 + k]);
      det = -det;
    }
    det *= a[c * 5 + c];
    for (std::size_t r = c + 1; r < 5; ++r) {
      const double f = a[r * 5 + c] / a[c * 5 + c];
      for (std::size_t k = c; k < 5; ++k) a[r * 5 + k] -= f * a[c * 5 + k];
    }
  }
  double vdm = 1.0;
  for (int i = -2; i <= 2; ++i)
    for (int j = i + 1; j <= 2; ++j) vdm *= (j - i);
  double diag = 1.0;
  for (int u = 0; u <= 4; ++u) diag *= std::pow(0.1, u) / factorial(u);
  CHECK(det != 0.0);
  CHECK(det == doctest::Approx(vdm * diag).epsilon(1e-10));
}

TEST_CASE("moment_from_kernel examples and definition cross-check") {
  const MomentSpec s1{0, 0, 0, 1, 1.0, 1.0};
  CHECK(max_abs_diff(moment_from_kernel(unit(1, 1, 1), s1), unit(1, 0, 0)) < 1e-15);

  for (double dx : {1.0, 0.3}) {
    const MomentSpec spec{1, 0, 1, 1, dx, 0.7};
    const Tensor cd = row_kernel(1, {-0.5 / dx, 0.0, 0.5 / dx});
    const Tensor m = moment_from_kernel(cd, spec);
    CHECK(m.at({1, 0}) == doctest::Approx(1.0));
    for (auto [u, v] : std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {2, 0}, {0, 1}, {1, 1}, {0, 2}}) {
      CHECK(std::abs(m.at({u, v})) < 1e-14);
    }
  }

  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const double dx = 0.1 + trial * 0.2, dy = 1.3 - trial * 0.1;
    const MomentSpec spec{0, 0, 0, 2, dx, dy};
    const Tensor k = random_normal({5, 5}, rng);
    CHECK(max_abs_diff(moment_from_kernel(k, spec), moment_by_definition(k, 2, dx, dy)) < 1e-12);
  }
  CHECK_THROWS_AS(moment_from_kernel(Tensor::zeros({3, 3}), MomentSpec{0, 0, 0, 2, 1, 1}), ShapeError);
}

TEST_CASE("kernel_from_moment examples and bijection") {
  const MomentSpec s1{0, 0, 0, 1, 1.0, 1.0};
  CHECK(max_abs_diff(kernel_from_moment(unit(1, 0, 0), s1), unit(1, 1, 1)) < 1e-14);
  CHECK(max_abs_diff(kernel_from_moment(unit(1, 1, 0), s1), row_kernel(1, {-0.5, 0.0, 0.5})) < 1e-14);

  Rng rng(8);
  for (int L : {1, 2}) {
    const std::size_t n = static_cast<std::size_t>(2 * L + 1);
    for (double h : {1.0, 0.1, 2 * kPi / 64}) {
      const MomentSpec spec{0, 0, 0, L, h, h};
      for (int trial = 0; trial < 10; ++trial) {
        const Tensor k = random_normal({n, n}, rng);
        CHECK(max_abs_diff(kernel_from_moment(moment_from_kernel(k, spec), spec), k) < 1e-10);
      }
    }
    const MomentSpec unit_spacing{0, 0, 0, L, 1.0, 1.0};
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor m = random_normal({n, n}, rng);
      CHECK(max_abs_diff(moment_from_kernel(kernel_from_moment(m, unit_spacing), unit_spacing), m) < 1e-10);
    }
  }
  CHECK_THROWS_AS(kernel_from_moment(unit(2, 0, 0), MomentSpec{0, 0, 0, 2, 1e-200, 1.0}), NumericalError);
}

TEST_CASE("moment round trip on unit-scale random moments at fine spacings") {
  Rng rng(81);
  for (int L : {1, 2}) {
    const std::size_t n = static_cast<std::size_t>(2 * L + 1);
    for (double h : {0.1, 2 * kPi / 64}) {
      const MomentSpec spec{0, 0, 0, L, h, h};
      double worst = 0.0;
      for (int trial = 0; trial < 10; ++trial) {
        const Tensor m = random_normal({n, n}, rng);
        worst = std::max(worst, max_abs_diff(moment_from_kernel(kernel_from_moment(m, spec), spec), m));
      }
      INFO("L=" << L << " h=" << h);
      CHECK(worst < 1e-10);
    }
  }
}

TEST_CASE("free_param_count and free_indices") {
  CHECK(free_param_count({1, 0, 2, 2, 1, 1}) == 15);
  CHECK(free_param_count({2, 0, 2, 2, 1, 1}) == 10);
  CHECK(free_param_count({0, 0, 0, 1, 1, 1}) == 8);
  CHECK_THROWS_AS(free_param_count({2, 0, 1, 1, 1, 1}), std::invalid_argument);
  const auto idx = free_indices({1, 0, 1, 1, 1, 1});
  REQUIRE(idx.size() == free_param_count({1, 0, 1, 1, 1, 1}));
  const std::vector<std::pair<int, int>> expected{{1, 2}, {2, 1}, {2, 2}};
  CHECK(idx == expected);
}

TEST_CASE("assemble_constrained_kernel") {
  const MomentSpec s10{1, 0, 1, 1, 1.0, 1.0};
  const std::vector<double> zeros(free_param_count(s10), 0.0);
  CHECK(max_abs_diff(assemble_constrained_kernel(s10, zeros), row_kernel(1, {-0.5, 0.0, 0.5})) < 1e-14);

  const double dx = 0.25;
  const MomentSpec s20{2, 0, 0, 1, dx, dx};
  const std::vector<double> z20(free_param_count(s20), 0.0);
  CHECK(max_abs_diff(assemble_constrained_kernel(s20, z20), row_kernel(1, {16.0, -32.0, 16.0})) < 1e-10);

  CHECK_THROWS_AS(assemble_constrained_kernel(s10, std::vector<double>(4, 0.0)), std::invalid_argument);

  // Unit-scale free moments on a unit grid, and on the fine grid the
  // grid-scaled parameterization c_uv = theta dx^(u-p) dy^(v-q) used by the
  // trainable layers.
  Rng rng(4);
  for (auto [p, q] : std::vector<std::pair<int, int>>{{1, 0}, {0, 1}, {2, 0}, {0, 2}}) {
    for (int r : {1, 2}) {
      for (double h : {1.0, 2 * kPi / 64}) {
        const MomentSpec spec{p, q, r, 2, h, h};
        const auto idx = free_indices(spec);
        for (int trial = 0; trial < 100; ++trial) {
          auto c = random_vector(idx.size(), rng);
          for (std::size_t i = 0; i < idx.size(); ++i) c[i] *= std::pow(h, idx[i].first + idx[i].second - p - q);
          const Tensor k = assemble_constrained_kernel(spec, c);
          INFO("p=" << p << " q=" << q << " r=" << r << " h=" << h);
          CHECK(satisfies_moment_constraint(k, spec, 1e-10));
        }
      }
    }
  }

  // Linearity in the free vector.
  const MomentSpec spec{1, 0, 2, 2, 0.5, 0.5};
  const auto a = random_vector(free_param_count(spec), rng), b = random_vector(free_param_count(spec), rng);
  std::vector<double> ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) ab[i] = 2.0 * a[i] - b[i];
  const Tensor k0 = assemble_constrained_kernel(spec, std::vector<double>(a.size(), 0.0));
  const Tensor ka = assemble_constrained_kernel(spec, a), kb = assemble_constrained_kernel(spec, b);
  const Tensor kab = assemble_constrained_kernel(spec, ab);
  double worst = 0.0;
  for (std::size_t i = 0; i < 25; ++i) worst = std::max(worst, std::abs(kab[i] - (2 * ka[i] - kb[i])));
  CHECK(worst < 1e-9 * max_abs(k0));
}

TEST_CASE("flip_x and flip_y") {
  const Tensor cd = row_kernel(1, {-0.5, 0.0, 0.5});
  CHECK(max_abs_diff(flip_x(cd), cd) == 0.0);
  CHECK(max_abs_diff(flip_x(row_kernel(1, {0.0, -1.0, 1.0})), row_kernel(1, {-1.0, 1.0, 0.0})) == 0.0);

  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const MomentSpec sx{1, 0, 2, 2, 1.0, 1.0}, sy{0, 1, 2, 2, 1.0, 1.0};
    const Tensor kx = assemble_constrained_kernel(sx, random_vector(free_param_count(sx), rng));
    const Tensor ky = assemble_constrained_kernel(sy, random_vector(free_param_count(sy), rng));
    CHECK(satisfies_moment_constraint(flip_x(kx), sx, 1e-10));
    CHECK(satisfies_moment_constraint(flip_y(ky), sy, 1e-10));
  }
}

TEST_CASE("flip sign law M(K')(u,v) = (-1)^(u+1) M(K)(u,v)") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const MomentSpec spec{0, 0, 0, 2, 0.3, 0.7};
    const Tensor k = random_normal({5, 5}, rng);
    const Tensor m = moment_from_kernel(k, spec), mf = moment_from_kernel(flip_x(k), spec);
    const Tensor my = moment_from_kernel(flip_y(k), spec);
    for (std::size_t u = 0; u < 5; ++u)
      for (std::size_t v = 0; v < 5; ++v) {
        CHECK(std::abs(mf.at({u, v}) - ((u + 1) % 2 ? -1.0 : 1.0) * m.at({u, v})) < 1e-12);
        CHECK(std::abs(my.at({u, v}) - ((v + 1) % 2 ? -1.0 : 1.0) * m.at({u, v})) < 1e-12);
      }
  }
}

TEST_CASE("BasisBank reproduces every unit moment") {
  for (int L : {1, 2}) {
    for (double h : {1.0, 0.1, 2 * kPi / 64}) {
      const BasisBank bank(L, h, h);
      const MomentSpec spec{0, 0, 0, L, h, h};
      for (int u = 0; u <= 2 * L; ++u)
        for (int v = 0; v <= 2 * L; ++v) {
          INFO("L=" << L << " h=" << h << " u=" << u << " v=" << v);
          CHECK(max_abs_diff(moment_from_kernel(bank.kernel(u, v), spec), unit(L, u, v)) < 1e-10);
        }
    }
  }
  const BasisBank bank(2, 0.5, 0.5);
  const MomentSpec spec{1, 0, 2, 2, 0.5, 0.5};
  CHECK(bank.free_basis(spec).shape() == Shape{15, 5, 5});
  CHECK(max_abs_diff(bank.base(spec), bank.kernel(1, 0)) == 0.0);
  CHECK(max_abs_diff(bank.base(spec), assemble_constrained_kernel(spec, std::vector<double>(15, 0.0))) < 1e-10);
}

TEST_CASE("empirical_order") {
  const std::vector<std::size_t> res{32, 64, 128};
  const TestFunction s2x{[](double x, double) { return std::sin(2 * x); },
                         [](double x, double) { return 2 * std::cos(2 * x); }};
  auto central = [](const MomentSpec& s) { return row_kernel(1, {-0.5 / s.dx, 0.0, 0.5 / s.dx}); };
  const OrderStudy cd = empirical_order({1, 0, 1, 1, 1, 1}, central, s2x, res);
  CHECK(cd.order >= 1.8);
  CHECK(cd.order <= 2.2);

  const TestFunction ident{[](double x, double y) { return std::sin(2 * x) * std::cos(3 * y); },
                           [](double x, double y) { return std::sin(2 * x) * std::cos(3 * y); }};
  const OrderStudy delta = empirical_order({0, 0, 0, 1, 1, 1}, [](const MomentSpec&) { return unit(1, 1, 1); },
                                           ident, res);
  for (double e : delta.max_errors) CHECK(e < 1e-12);

  // Free = 0 on the 5x5 support with r=2: at least the target order r+1.
  auto assembled = [](const MomentSpec& s) {
    return assemble_constrained_kernel(s, std::vector<double>(free_param_count(s), 0.0));
  };
  const OrderStudy a = empirical_order({1, 0, 2, 2, 1, 1}, assembled, s2x, res);
  CHECK(a.order >= 2.7);
}
