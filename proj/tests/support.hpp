#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "pdenetpp/autodiff.hpp"
#include "pdenetpp/parameters.hpp"

namespace testing {

using pdenetpp::Rng;
using pdenetpp::Shape;
using pdenetpp::Tensor;
using pdenetpp::Var;

inline constexpr double kPi = std::numbers::pi;

inline Tensor random_normal(Shape shape, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<double> v(pdenetpp::element_count(shape));
  for (auto& x : v) x = nd(rng);
  return Tensor(std::move(shape), std::move(v));
}

inline Tensor random_uniform(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> ud(lo, hi);
  std::vector<double> v(pdenetpp::element_count(shape));
  for (auto& x : v) x = ud(rng);
  return Tensor(std::move(shape), std::move(v));
}

/// Samples f(x_i, y_j) at x_i = i*lx/nx, y_j = j*ly/ny.
inline Tensor sample(std::size_t nx, std::size_t ny, double lx, double ly, const std::function<double(double, double)>& f) {
  std::vector<double> v(nx * ny);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      v[i * ny + j] = f(lx * static_cast<double>(i) / static_cast<double>(nx), ly * static_cast<double>(j) / static_cast<double>(ny));
    }
  }
  return Tensor({nx, ny}, std::move(v));
}

inline Tensor with_entry(const Tensor& t, std::size_t k, double value) {
  std::vector<double> v = t.to_vector();
  v[k] = value;
  return Tensor(t.shape(), std::move(v));
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Per-entry relative error |a - n| / max(|a|, |n|, floor), where floor is a
/// small fraction of the largest analytic entry so that entries that are zero
/// up to roundoff do not dominate.
inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

using Graph = std::function<Var(pdenetpp::Tape&, std::span<const Var>)>;

/// Central-difference check of every entry of every input. Perturbations that
/// change the tape's kink signature straddle a branch and are skipped.
inline GradCheck check_gradients(const Graph& f, const std::vector<Tensor>& inputs, double h = 1e-5) {
  auto evaluate = [&](const std::vector<Tensor>& xs, std::uint64_t* kinks) {
    pdenetpp::Tape tape;
    std::vector<Var> leaves;
    for (const auto& x : xs) leaves.push_back(tape.leaf(x));
    const Var out = f(tape, leaves);
    if (kinks) *kinks = tape.kink_signature();
    return out.value().item();
  };
  pdenetpp::Tape tape;
  std::vector<Var> leaves;
  for (const auto& x : inputs) leaves.push_back(tape.leaf(x));
  const Var out = f(tape, leaves);
  const std::uint64_t base_kinks = tape.kink_signature();
  const auto grads = tape.backward(out);

  GradCheck result;
  double scale = 0.0;
  std::vector<Tensor> analytic;
  for (const auto& leaf : leaves) {
    analytic.push_back(grads.of(leaf));
    for (double g : analytic.back().data()) scale = std::max(scale, std::abs(g));
  }
  const double floor = std::max(1e-3 * scale, 1e-9);
  std::vector<Tensor> xs = inputs;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    for (std::size_t k = 0; k < inputs[a].size(); ++k) {
      std::uint64_t kp = 0, km = 0;
      xs[a] = with_entry(inputs[a], k, inputs[a][k] + h);
      const double fp = evaluate(xs, &kp);
      xs[a] = with_entry(inputs[a], k, inputs[a][k] - h);
      const double fm = evaluate(xs, &km);
      xs[a] = inputs[a];
      if (kp != base_kinks || km != base_kinks) {
        ++result.skipped;
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * h);
      result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[a][k], numeric, floor));
      ++result.checked;
    }
  }
  return result;
}

using ParamLoss = std::function<Var(pdenetpp::Binding&)>;

/// Finite-difference check of d loss / d parameter for up to `per_param`
/// randomly chosen entries of every parameter in the store.
inline GradCheck check_param_gradients(pdenetpp::ParamStore& store, const ParamLoss& loss, std::size_t per_param,
                                       std::uint64_t seed, double h = 1e-5) {
  auto evaluate = [&](std::uint64_t* kinks) {
    pdenetpp::Tape tape;
    pdenetpp::Binding b(tape, store, false);
    const double v = loss(b).value().item();
    if (kinks) *kinks = tape.kink_signature();
    return v;
  };
  pdenetpp::Tape tape;
  pdenetpp::Binding b(tape, store, true);
  const Var out = loss(b);
  const std::uint64_t base_kinks = tape.kink_signature();
  const auto grads = b.gradients(tape.backward(out));
  double scale = 0.0;
  for (const auto& g : grads) {
    for (double x : g.data()) scale = std::max(scale, std::abs(x));
  }
  const double floor = std::max(1e-3 * scale, 1e-9);
  GradCheck result;
  Rng rng(seed);
  for (std::size_t p = 0; p < store.size(); ++p) {
    const Tensor original = store.value(p);
    std::vector<std::size_t> entries(original.size());
    for (std::size_t k = 0; k < entries.size(); ++k) entries[k] = k;
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(std::min(entries.size(), per_param));
    for (std::size_t k : entries) {
      std::uint64_t kp = 0, km = 0;
      store.set(p, with_entry(original, k, original[k] + h));
      const double fp = evaluate(&kp);
      store.set(p, with_entry(original, k, original[k] - h));
      const double fm = evaluate(&km);
      store.set(p, original);
      if (kp != base_kinks || km != base_kinks) {
        ++result.skipped;
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * h);
      result.max_rel_error = std::max(result.max_rel_error, relative_error(grads[p][k], numeric, floor));
      ++result.checked;
    }
  }
  return result;
}

/// Overwrites every parameter with random values of the given spread.
inline void randomize(pdenetpp::ParamStore& store, Rng& rng, double sd) {
  for (std::size_t p = 0; p < store.size(); ++p) store.set(p, random_normal(store.value(p).shape(), rng, sd));
}

/// out(o,i,j) = sum K(o,c,s+L,t+L) in(c,(i+s)%H,(j+t)%W) by nested loops.
inline Tensor conv_oracle(const Tensor& in, const Tensor& k) {
  const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2), O = k.dim(0), ks = k.dim(2);
  const long L = static_cast<long>(ks - 1) / 2;
  std::vector<double> out(O * H * W, 0.0);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c)
          for (long s = -L; s <= L; ++s)
            for (long t = -L; t <= L; ++t) {
              const std::size_t ii = static_cast<std::size_t>((static_cast<long>(i) + s + static_cast<long>(H)) % static_cast<long>(H));
              const std::size_t jj = static_cast<std::size_t>((static_cast<long>(j) + t + static_cast<long>(W)) % static_cast<long>(W));
              acc += k.at({o, c, static_cast<std::size_t>(s + L), static_cast<std::size_t>(t + L)}) * in.at({c, ii, jj});
            }
        out[(o * H + i) * W + j] = acc;
      }
  return Tensor({O, H, W}, std::move(out));
}

inline double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace testing
