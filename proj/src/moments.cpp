#include "pdenetpp/moments.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "pdenetpp/autodiff.hpp"

namespace pdenetpp {
namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_geometry(int half_width, double dx, double dy) {
  if (half_width < 1) throw std::invalid_argument("half width must be >= 1");
  if (!(dx > 0.0) || !(dy > 0.0)) throw std::invalid_argument("grid spacings must be positive");
}

// Integer Vandermonde V(u, s+L) = s^u, exact in floating point for L <= 8.
Mat integer_vandermonde(int half_width) {
  const int n = 2 * half_width + 1;
  Mat v(n, n);
  for (int u = 0; u < n; ++u) {
    for (int s = -half_width; s <= half_width; ++s) {
      double p = 1.0;
      for (int e = 0; e < u; ++e) p *= s;
      v(u, s + half_width) = p;
    }
  }
  return v;
}

// spacing^u / u!
std::vector<double> moment_scales(int n, double spacing) {
  std::vector<double> out(n);
  double acc = 1.0;
  for (int u = 0; u < n; ++u) {
    out[u] = acc;
    acc *= spacing / (u + 1);
  }
  return out;
}

Mat as_matrix(const Tensor& t, int n, const char* what) {
  if (t.shape() != Shape{static_cast<std::size_t>(n), static_cast<std::size_t>(n)}) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(n) + "x" + std::to_string(n) + ", got " +
                     to_string(t.shape()));
  }
  Mat m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = t[static_cast<std::size_t>(i * n + j)];
  }
  return m;
}

Tensor as_tensor(const Mat& m) {
  const auto n = static_cast<std::size_t>(m.rows());
  std::vector<double> v(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return Tensor({n, n}, std::move(v));
}

}  // namespace

void MomentSpec::validate() const {
  if (p < 0 || q < 0 || r < 0) throw std::invalid_argument("derivative and truncation orders must be non-negative");
  check_geometry(half_width, dx, dy);
  if (p + q + r > 2 * half_width) {
    throw std::invalid_argument("p+q+r = " + std::to_string(p + q + r) + " exceeds 2L = " +
                                std::to_string(2 * half_width));
  }
}

Tensor vandermonde_factor(int half_width, double spacing) {
  check_geometry(half_width, spacing, spacing);
  const int n = 2 * half_width + 1;
  Mat v = integer_vandermonde(half_width);
  const auto sc = moment_scales(n, spacing);
  for (int u = 0; u < n; ++u) v.row(u) *= sc[u];
  return as_tensor(v);
}

Tensor moment_from_kernel(const Tensor& kernel, const MomentSpec& spec) {
  check_geometry(spec.half_width, spec.dx, spec.dy);
  const int n = spec.size();
  const Mat k = as_matrix(kernel, n, "moment_from_kernel");
  const Mat v = integer_vandermonde(spec.half_width);
  Mat m = (v * k) * v.transpose();
  const auto sx = moment_scales(n, spec.dx);
  const auto sy = moment_scales(n, spec.dy);
  for (int u = 0; u < n; ++u) {
    for (int w = 0; w < n; ++w) m(u, w) *= sx[u] * sy[w];
  }
  return as_tensor(m);
}

Tensor kernel_from_moment(const Tensor& moment, const MomentSpec& spec) {
  check_geometry(spec.half_width, spec.dx, spec.dy);
  const int n = spec.size();
  Mat b = as_matrix(moment, n, "kernel_from_moment");
  const auto sx = moment_scales(n, spec.dx);
  const auto sy = moment_scales(n, spec.dy);
  for (int u = 0; u < n; ++u) {
    for (int w = 0; w < n; ++w) {
      const double s = sx[u] * sy[w];
      if (s == 0.0 || !std::isfinite(s)) throw NumericalError("moment scaling under/overflows for these spacings");
      b(u, w) /= s;
    }
  }
  const Eigen::PartialPivLU<Mat> lu(integer_vandermonde(spec.half_width));
  if (lu.rcond() < 1e3 * std::numeric_limits<double>::epsilon()) {
    throw NumericalError("Vandermonde factorization is numerically singular");
  }
  const Mat half = lu.solve(b);
  const Mat k = lu.solve(half.transpose()).transpose();
  if (!k.allFinite()) throw NumericalError("kernel_from_moment produced non-finite entries");
  return as_tensor(k);
}

std::size_t free_param_count(const MomentSpec& spec) {
  spec.validate();
  const int n = spec.size();
  const int c = spec.p + spec.q + spec.r;
  return static_cast<std::size_t>(n * n - (c + 1) * (c + 2) / 2);
}

std::vector<std::pair<int, int>> free_indices(const MomentSpec& spec) {
  spec.validate();
  std::vector<std::pair<int, int>> out;
  const int n = spec.size();
  const int c = spec.p + spec.q + spec.r;
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u + v > c) out.emplace_back(u, v);
    }
  }
  return out;
}

Tensor assemble_constrained_kernel(const MomentSpec& spec, std::span<const double> free) {
  const auto idx = free_indices(spec);
  if (free.size() != idx.size()) {
    throw std::invalid_argument("expected " + std::to_string(idx.size()) + " free moments, got " +
                                std::to_string(free.size()));
  }
  const auto n = static_cast<std::size_t>(spec.size());
  std::vector<double> m(n * n, 0.0);
  m[static_cast<std::size_t>(spec.p) * n + static_cast<std::size_t>(spec.q)] = 1.0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    m[static_cast<std::size_t>(idx[i].first) * n + static_cast<std::size_t>(idx[i].second)] = free[i];
  }
  return kernel_from_moment(Tensor({n, n}, std::move(m)), spec);
}

Tensor flip_x(const Tensor& kernel) {
  if (kernel.rank() != 2 || kernel.dim(0) != kernel.dim(1)) throw ShapeError("flip_x expects a square kernel");
  const std::size_t n = kernel.dim(0);
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = -kernel[(n - 1 - i) * n + j];
  }
  return Tensor(kernel.shape(), std::move(out));
}

Tensor flip_y(const Tensor& kernel) {
  if (kernel.rank() != 2 || kernel.dim(0) != kernel.dim(1)) throw ShapeError("flip_y expects a square kernel");
  const std::size_t n = kernel.dim(0);
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = -kernel[i * n + (n - 1 - j)];
  }
  return Tensor(kernel.shape(), std::move(out));
}

bool satisfies_moment_constraint(const Tensor& kernel, const MomentSpec& spec, double tol) {
  const Tensor m = moment_from_kernel(kernel, spec);
  const int n = spec.size();
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u + v > spec.p + spec.q + spec.r) continue;
      const double target = (u == spec.p && v == spec.q) ? 1.0 : 0.0;
      if (std::abs(m[static_cast<std::size_t>(u * n + v)] - target) > tol) return false;
    }
  }
  return true;
}

namespace {

// K0_uv = g N with N = w_u w_v^T, w_u the u-th column of (2L)! V^{-1} (an
// integer vector), and g = u! v! / (dx^u dy^v ((2L)!)^2) rounded to as many
// significant bits as keep every product and partial sum of V N V^T exact.
// The moment image of such a kernel is then E_uv up to the rounding of g.
std::optional<Tensor> exact_basis_kernel(const Mat& v, const Mat& w, double den, int u, int vv, double sx, double sy,
                                         const MomentSpec& geom) {
  const int n = static_cast<int>(v.rows());
  const Mat nmat = w.col(u) * w.col(vv).transpose();
  const Mat av = v.cwiseAbs();
  const Mat first = av * nmat.cwiseAbs();
  const Mat second = (v * nmat).cwiseAbs() * av.transpose();
  const double bound = std::max({first.maxCoeff(), second.maxCoeff(), av.maxCoeff() * nmat.cwiseAbs().maxCoeff(), 1.0});
  const int bits = 52 - static_cast<int>(std::ceil(std::log2(bound + 1.0)));
  if (bits < 36) return std::nullopt;
  const double g = 1.0 / (sx * sy * den * den);
  if (!std::isfinite(g) || g == 0.0) return std::nullopt;
  auto build = [&](double scale) {
    std::vector<double> out(static_cast<std::size_t>(n * n));
    for (int s = 0; s < n; ++s) {
      for (int t = 0; t < n; ++t) out[static_cast<std::size_t>(s * n + t)] = scale * nmat(s, t);
    }
    return Tensor({static_cast<std::size_t>(n), static_cast<std::size_t>(n)}, std::move(out));
  };
  // Full precision when plain rounding already reproduces E_uv.
  Tensor plain = build(g);
  const Tensor m = moment_from_kernel(plain, geom);
  double err = 0.0;
  for (int a = 0; a < n; ++a) {
    for (int c = 0; c < n; ++c) {
      err = std::max(err, std::abs(m[static_cast<std::size_t>(a * n + c)] - (a == u && c == vv ? 1.0 : 0.0)));
    }
  }
  if (err < 1e-13) return plain;
  int e = 0;
  const double frac = std::frexp(g, &e);
  return build(std::ldexp(std::round(std::ldexp(frac, bits)), e - bits));
}

}  // namespace

BasisBank::BasisBank(int half_width, double dx, double dy) : half_width_(half_width), dx_(dx), dy_(dy) {
  check_geometry(half_width, dx, dy);
  const int ni = 2 * half_width + 1;
  const auto n = static_cast<std::size_t>(ni);
  MomentSpec geom{0, 0, 0, half_width, dx, dy};
  const Mat v = integer_vandermonde(half_width);
  double den = 1.0;
  for (int i = 2; i <= 2 * half_width; ++i) den *= i;
  const Mat scaled_inverse = Eigen::PartialPivLU<Mat>(v).solve(Mat::Identity(ni, ni)) * den;
  const Mat w = scaled_inverse.array().round().matrix();
  const bool integral = (scaled_inverse - w).cwiseAbs().maxCoeff() < 1e-6;
  const auto sx = moment_scales(ni, dx);
  const auto sy = moment_scales(ni, dy);
  kernels_.reserve(n * n);
  for (int u = 0; u < ni; ++u) {
    for (int vv = 0; vv < ni; ++vv) {
      std::optional<Tensor> k;
      if (integral) k = exact_basis_kernel(v, w, den, u, vv, sx[static_cast<std::size_t>(u)], sy[static_cast<std::size_t>(vv)], geom);
      if (!k) {
        std::vector<double> e(n * n, 0.0);
        e[static_cast<std::size_t>(u * ni + vv)] = 1.0;
        k = kernel_from_moment(Tensor({n, n}, std::move(e)), geom);
      }
      kernels_.push_back(std::move(*k));
    }
  }
}

const Tensor& BasisBank::kernel(int u, int v) const {
  const int n = 2 * half_width_ + 1;
  if (u < 0 || v < 0 || u >= n || v >= n) throw std::out_of_range("basis index out of range");
  return kernels_[static_cast<std::size_t>(u * n + v)];
}

Tensor BasisBank::base(const MomentSpec& spec) const {
  spec.validate();
  if (spec.half_width != half_width_) throw std::invalid_argument("spec half width differs from basis bank");
  return kernel(spec.p, spec.q);
}

Tensor BasisBank::free_basis(const MomentSpec& spec) const {
  spec.validate();
  if (spec.half_width != half_width_) throw std::invalid_argument("spec half width differs from basis bank");
  const auto idx = free_indices(spec);
  const auto n = static_cast<std::size_t>(spec.size());
  std::vector<Tensor> parts;
  parts.reserve(idx.size());
  for (auto [u, v] : idx) parts.push_back(kernel(u, v));
  if (parts.empty()) return Tensor({0, n, n});
  return stack(parts);
}

OrderStudy empirical_order(const MomentSpec& spec, const std::function<Tensor(const MomentSpec&)>& kernel_for,
                           const TestFunction& fn, std::span<const std::size_t> resolutions) {
  if (resolutions.size() < 2) throw std::invalid_argument("order study needs at least two resolutions");
  OrderStudy study;
  for (std::size_t n : resolutions) {
    const double h = fn.length / static_cast<double>(n);
    MomentSpec s = spec;
    s.dx = s.dy = h;
    const Tensor k = kernel_for(s);
    const std::size_t ks = k.dim(0);
    std::vector<double> f(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) f[i * n + j] = fn.value(i * h, j * h);
    }
    const Tensor d = conv2d_periodic(Tensor({1, n, n}, std::move(f)), k.reshaped({1, 1, ks, ks}));
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) err = std::max(err, std::abs(d[i * n + j] - fn.derivative(i * h, j * h)));
    }
    study.spacings.push_back(h);
    study.max_errors.push_back(err);
  }
  // Least squares on log-log data.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < study.spacings.size(); ++i) {
    if (study.max_errors[i] < 1e-14) continue;
    const double x = std::log(study.spacings[i]), y = std::log(study.max_errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++used;
  }
  if (used < 2) {
    study.order = std::numeric_limits<double>::quiet_NaN();
  } else {
    const double nu = static_cast<double>(used);
    study.order = (nu * sxy - sx * sy) / (nu * sxx - sx * sx);
  }
  return study;
}

}  // namespace pdenetpp
