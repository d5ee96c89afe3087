#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "pdenetpp/tensor.hpp"

namespace pdenetpp {

/// Target derivative d^{p+q}/dx^p dy^q with truncation order r on a
/// (2L+1) x (2L+1) stencil. Kernel index s runs along x, t along y.
struct MomentSpec {
  int p = 1;
  int q = 0;
  int r = 2;
  int half_width = 2;
  double dx = 1.0;
  double dy = 1.0;

  int size() const { return 2 * half_width + 1; }
  int order() const { return p + q; }
  /// Throws std::invalid_argument when p,q,r < 0, L < 1, p+q+r > 2L or a spacing is not positive.
  void validate() const;
};

/// Q(u, s+L) = s^u spacing^u / u!, u in [0,2L], s in [-L,L], 0^0 = 1.
Tensor vandermonde_factor(int half_width, double spacing);

/// M(u,v) = sum_{s,t} K(s,t) s^u t^v dx^u dy^v / (u! v!), i.e. Q_x K Q_y^T.
Tensor moment_from_kernel(const Tensor& kernel, const MomentSpec& spec);
/// Inverse of moment_from_kernel. Throws NumericalError if the factorization
/// is numerically singular.
Tensor kernel_from_moment(const Tensor& moment, const MomentSpec& spec);

/// (2L+1)^2 - (p+q+r+1)(p+q+r+2)/2.
std::size_t free_param_count(const MomentSpec& spec);
/// Moment positions (u,v) with u+v > p+q+r, row-major.
std::vector<std::pair<int, int>> free_indices(const MomentSpec& spec);

/// Kernel whose moment matrix is E_pq plus `free` at the free positions.
Tensor assemble_constrained_kernel(const MomentSpec& spec, std::span<const double> free);

/// K'(s,t) = -K(-s,t).
Tensor flip_x(const Tensor& kernel);
/// K'(s,t) = -K(s,-t).
Tensor flip_y(const Tensor& kernel);

/// True when M(K)(u,v) = delta_up delta_vq for all u+v <= p+q+r, within tol.
bool satisfies_moment_constraint(const Tensor& kernel, const MomentSpec& spec, double tol);

/// Precomputed kernels K0_uv = Q_x^{-1} E_uv Q_y^{-T} for one (L, dx, dy).
/// Any constrained kernel is K0_pq plus a combination of the free K0_uv.
class BasisBank {
 public:
  BasisBank(int half_width, double dx, double dy);

  int half_width() const { return half_width_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  const Tensor& kernel(int u, int v) const;

  /// K0_pq for the spec's derivative, shape [k,k].
  Tensor base(const MomentSpec& spec) const;
  /// Stack of K0_uv over free_indices(spec), shape [m,k,k].
  Tensor free_basis(const MomentSpec& spec) const;

 private:
  int half_width_;
  double dx_, dy_;
  std::vector<Tensor> kernels_;
};

/// Scalar test function with a known analytic derivative, on a periodic
/// square [0, length)^2.
struct TestFunction {
  std::function<double(double, double)> value;
  std::function<double(double, double)> derivative;
  double length = 2.0 * 3.14159265358979323846;
};

struct OrderStudy {
  std::vector<double> spacings;
  std::vector<double> max_errors;
  /// Least-squares slope of log(error) against log(spacing); NaN when every
  /// error is below roundoff.
  double order = 0.0;
};

/// Grid-refinement study of the stencil produced by `kernel_for` at each
/// resolution.
OrderStudy empirical_order(const MomentSpec& spec, const std::function<Tensor(const MomentSpec&)>& kernel_for,
                           const TestFunction& fn, std::span<const std::size_t> resolutions);

}  // namespace pdenetpp
