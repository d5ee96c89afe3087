#include "pdenetpp/autodiff.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "pdenetpp/fft.hpp"

namespace pdenetpp {
namespace {

std::atomic<std::uint64_t> next_tape_id{1};

std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

Tape& common_tape(std::initializer_list<const Var*> vars) {
  Tape* t = nullptr;
  for (const Var* v : vars) {
    if (!v->valid()) throw std::invalid_argument("operation on an unbound Var");
    if (t && &v->tape() != t) throw std::invalid_argument("operands recorded on different tapes");
    t = &v->tape();
  }
  return *t;
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

template <typename F, typename D>
Var unary(const char* op, const Var& a, F f, D df) {
  const Tensor& x = a.value();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(x[i]);
  Var in[] = {a};
  return a.tape().record(op, Tensor(x.shape(), std::move(y)), in,
                         [x, df](std::span<const double> g, GradSink& p) {
                           auto gx = p[0];
                           for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * df(x[i]);
                         });
}

// ---- periodic convolution primitives --------------------------------------

struct ConvDims {
  std::size_t cin, cout, nx, ny, k, half;
};

ConvDims conv_dims(const Shape& in, const Shape& ker) {
  if (in.size() != 3 || ker.size() != 4) {
    throw ShapeError("conv2d_periodic expects input [C,Nx,Ny] and kernels [O,C,k,k], got " + to_string(in) +
                     " and " + to_string(ker));
  }
  if (ker[1] != in[0]) throw ShapeError("conv2d_periodic: kernel input channels " + std::to_string(ker[1]) +
                                        " vs field channels " + std::to_string(in[0]));
  if (ker[2] != ker[3]) throw ShapeError("conv2d_periodic: non-square kernel " + to_string(ker));
  if (ker[2] % 2 == 0) throw ShapeError("conv2d_periodic: kernel size must be odd, got " + std::to_string(ker[2]));
  if (in[1] < ker[2] || in[2] < ker[2]) throw ShapeError("conv2d_periodic: grid smaller than kernel");
  return {in[0], ker[0], in[1], in[2], ker[2], ker[2] / 2};
}

// [C][nx+2L][ny+2L] with periodic wrap.
std::vector<double> pad_periodic(const double* x, std::size_t c, std::size_t nx, std::size_t ny, std::size_t l) {
  const std::size_t px = nx + 2 * l, py = ny + 2 * l;
  std::vector<double> out(c * px * py);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < px; ++i) {
      const std::size_t si = (i + nx - l % nx) % nx;
      const double* src = x + (ch * nx + si) * ny;
      double* dst = out.data() + (ch * px + i) * py;
      for (std::size_t j = 0; j < py; ++j) dst[j] = src[(j + ny - l % ny) % ny];
    }
  }
  return out;
}

// out[o] += sum_c K[o,c] (*) padded[c]
void conv_accumulate(const double* padded, const double* kernels, double* out, const ConvDims& d) {
  const std::size_t py = d.ny + 2 * d.half, px = d.nx + 2 * d.half;
  for (std::size_t o = 0; o < d.cout; ++o) {
    double* oplane = out + o * d.nx * d.ny;
    for (std::size_t c = 0; c < d.cin; ++c) {
      const double* kern = kernels + (o * d.cin + c) * d.k * d.k;
      const double* pplane = padded + c * px * py;
      for (std::size_t s = 0; s < d.k; ++s) {
        for (std::size_t t = 0; t < d.k; ++t) {
          const double w = kern[s * d.k + t];
          if (w == 0.0) continue;
          for (std::size_t i = 0; i < d.nx; ++i) {
            const double* __restrict prow = pplane + (i + s) * py + t;
            double* __restrict orow = oplane + i * d.ny;
            for (std::size_t j = 0; j < d.ny; ++j) orow[j] += w * prow[j];
          }
        }
      }
    }
  }
}

// Input gradient: gin[c] += sum_o K[o,c] correlated with grad[o].
void conv_input_grad(const double* grad, const double* kernels, double* gin, const ConvDims& d) {
  const std::size_t l = d.half;
  auto pg = pad_periodic(grad, d.cout, d.nx, d.ny, l);
  const std::size_t py = d.ny + 2 * l, px = d.nx + 2 * l;
  for (std::size_t c = 0; c < d.cin; ++c) {
    double* gplane = gin + c * d.nx * d.ny;
    for (std::size_t o = 0; o < d.cout; ++o) {
      const double* kern = kernels + (o * d.cin + c) * d.k * d.k;
      const double* pplane = pg.data() + o * px * py;
      for (std::size_t s = 0; s < d.k; ++s) {
        for (std::size_t t = 0; t < d.k; ++t) {
          const double w = kern[s * d.k + t];
          if (w == 0.0) continue;
          for (std::size_t i = 0; i < d.nx; ++i) {
            const double* __restrict prow = pplane + (i + 2 * l - s) * py + (2 * l - t);
            double* __restrict grow = gplane + i * d.ny;
            for (std::size_t j = 0; j < d.ny; ++j) grow[j] += w * prow[j];
          }
        }
      }
    }
  }
}

// Kernel gradient: gk[o,c,s,t] += sum_{i,j} grad[o,i,j] padded[c,i+s,j+t].
void conv_kernel_grad(const double* grad, const double* padded, double* gk, const ConvDims& d) {
  const std::size_t py = d.ny + 2 * d.half, px = d.nx + 2 * d.half;
  for (std::size_t o = 0; o < d.cout; ++o) {
    const double* gplane = grad + o * d.nx * d.ny;
    for (std::size_t c = 0; c < d.cin; ++c) {
      const double* pplane = padded + c * px * py;
      double* kern = gk + (o * d.cin + c) * d.k * d.k;
      for (std::size_t s = 0; s < d.k; ++s) {
        for (std::size_t t = 0; t < d.k; ++t) {
          double acc = 0.0;
          for (std::size_t i = 0; i < d.nx; ++i) {
            const double* prow = pplane + (i + s) * py + t;
            const double* grow = gplane + i * d.ny;
            double row = 0.0;
            for (std::size_t j = 0; j < d.ny; ++j) row += grow[j] * prow[j];
            acc += row;
          }
          kern[s * d.k + t] += acc;
        }
      }
    }
  }
}

std::pair<std::size_t, std::size_t> plane_dims(const Shape& s, std::size_t trailing, const char* op) {
  if (s.size() < 2 + trailing) throw ShapeError(std::string(op) + ": too few axes in " + to_string(s));
  return {s[s.size() - 2 - trailing], s[s.size() - 1 - trailing]};
}

void require_complex(const Shape& s, const char* op) {
  if (s.empty() || s.back() != 2) throw ShapeError(std::string(op) + ": expected trailing complex axis, got " + to_string(s));
}

std::vector<cplx> as_complex(std::span<const double> v) {
  std::vector<cplx> out(v.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {v[2 * i], v[2 * i + 1]};
  return out;
}

std::vector<double> as_pairs(std::span<const cplx> v) {
  std::vector<double> out(2 * v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[2 * i] = v[i].real();
    out[2 * i + 1] = v[i].imag();
  }
  return out;
}

}  // namespace

// ---- Var / Tape ------------------------------------------------------------

Tape& Var::tape() const {
  if (!tape_) throw std::invalid_argument("unbound Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().value(id_); }

bool Var::requires_grad() const { return tape().requires_grad(id_); }

bool GradSink::wants(std::size_t parent) const { return tape_.requires_grad(parents_[parent]); }

std::span<double> GradSink::operator[](std::size_t parent) {
  const std::size_t id = parents_[parent];
  auto& g = grads_[id];
  if (g.empty()) g.assign(tape_.value(id).size(), 0.0);
  return g;
}

Tensor Gradients::of(const Var& v) const {
  if (!v.valid() || &v.tape() != tape_) throw std::invalid_argument("Var is not on the differentiated tape");
  const auto& g = grads_[v.id()];
  if (g.empty()) return Tensor::zeros(v.shape());
  return Tensor(v.shape(), g);
}

Tape::Tape() : id_(next_tape_id++) {}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericalError("non-finite value in leaf tensor");
  nodes_.push_back({std::move(value), {}, {}, requires_grad});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> parents, BackwardRule rule) {
  if (!value.all_finite()) throw NumericalError("non-finite value produced by " + std::string(op));
  Node n;
  n.value = std::move(value);
  for (const auto& p : parents) {
    if (&p.tape() != this) throw std::invalid_argument(std::string(op) + ": parent from another tape");
    n.parents.push_back(p.id());
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.rule = std::move(rule);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::mix_kinks(std::uint64_t h) { kinks_ = hash_mix(kinks_, h); }

Gradients Tape::backward(const Var& output) const {
  if (!output.valid() || &output.tape() != this) throw std::invalid_argument("backward: output not on this tape");
  if (!output.shape().empty()) throw ShapeError("backward: output must be 0-dim, got " + to_string(output.shape()));
  Gradients result;
  result.tape_ = this;
  result.grads_.resize(nodes_.size());
  result.grads_[output.id()] = {1.0};
  auto& mutable_self = const_cast<Tape&>(*this);
  for (std::size_t id = output.id() + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.rule || result.grads_[id].empty()) continue;
    GradSink sink(mutable_self, n.parents, result.grads_);
    n.rule(result.grads_[id], sink);
    // Intermediate adjoints are no longer needed once propagated.
    if (!n.parents.empty()) std::vector<double>().swap(result.grads_[id]);
  }
  return result;
}

// ---- elementwise -----------------------------------------------------------

Var add(const Var& a, const Var& b) {
  Tape& t = common_tape({&a, &b});
  require_same_shape("add", a, b);
  std::vector<double> y(a.value().begin(), a.value().end());
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  Var in[] = {a, b};
  return t.record("add", Tensor(a.shape(), std::move(y)), in, [](std::span<const double> g, GradSink& p) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!p.wants(k)) continue;
      auto gk = p[k];
      for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = common_tape({&a, &b});
  require_same_shape("sub", a, b);
  std::vector<double> y(a.value().begin(), a.value().end());
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  Var in[] = {a, b};
  return t.record("sub", Tensor(a.shape(), std::move(y)), in, [](std::span<const double> g, GradSink& p) {
    if (p.wants(0)) {
      auto ga = p[0];
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }
    if (p.wants(1)) {
      auto gb = p[1];
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = common_tape({&a, &b});
  require_same_shape("mul", a, b);
  const Tensor av = a.value(), bv = b.value();
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  Var in[] = {a, b};
  return t.record("mul", Tensor(a.shape(), std::move(y)), in, [av, bv](std::span<const double> g, GradSink& p) {
    if (p.wants(0)) {
      auto ga = p[0];
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (p.wants(1)) {
      auto gb = p[1];
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(const Var& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double) { return s; });
}

Var add_const(const Var& a, const Tensor& c) {
  if (a.shape() != c.shape()) throw ShapeError("add_const: " + to_string(a.shape()) + " vs " + to_string(c.shape()));
  std::vector<double> y(a.value().begin(), a.value().end());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c[i];
  Var in[] = {a};
  return a.tape().record("add_const", Tensor(a.shape(), std::move(y)), in, [](std::span<const double> g, GradSink& p) {
    auto ga = p[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
}

Var mul_const(const Var& a, const Tensor& c) {
  if (a.shape() != c.shape()) throw ShapeError("mul_const: " + to_string(a.shape()) + " vs " + to_string(c.shape()));
  std::vector<double> y(a.value().begin(), a.value().end());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= c[i];
  Var in[] = {a};
  return a.tape().record("mul_const", Tensor(a.shape(), std::move(y)), in, [c](std::span<const double> g, GradSink& p) {
    auto ga = p[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * c[i];
  });
}

Var relu(const Var& a) {
  std::uint64_t mask_hash = 0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    if (a.value()[i] > 0.0) mask_hash = hash_mix(mask_hash, i);
  }
  a.tape().mix_kinks(mask_hash);
  // relu'(0) := 0
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(const Var& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double x) {
                 const double th = std::tanh(x);
                 return 1.0 - th * th;
               });
}

Var sin(const Var& a) {
  return unary("sin", a, [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); });
}

Var cos(const Var& a) {
  return unary("cos", a, [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); });
}

Var pow3(const Var& a) {
  return unary("pow3", a, [](double x) { return x * x * x; }, [](double x) { return 3.0 * x * x; });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  Var in[] = {a};
  return a.tape().record("sum", Tensor::scalar(s), in, [](std::span<const double> g, GradSink& p) {
    auto ga = p[0];
    for (auto& v : ga) v += g[0];
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var l1_norm(const Var& a) {
  const Tensor x = a.value();
  double s = 0.0;
  std::uint64_t signs = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += std::abs(x[i]);
    signs = hash_mix(signs, x[i] > 0.0 ? 1 : (x[i] < 0.0 ? 2 : 3));
  }
  a.tape().mix_kinks(signs);
  Var in[] = {a};
  return a.tape().record("l1_norm", Tensor::scalar(s), in, [x](std::span<const double> g, GradSink& p) {
    auto ga = p[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0));
  });
}

Var l2_norm(const Var& a) {
  const Tensor x = a.value();
  double ss = 0.0;
  for (double v : x.data()) ss += v * v;
  const double norm = std::sqrt(ss);
  Var in[] = {a};
  return a.tape().record("l2_norm", Tensor::scalar(norm), in, [x, norm](std::span<const double> g, GradSink& p) {
    if (norm == 0.0) return;
    auto ga = p[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * x[i] / norm;
  });
}

// ---- layout ----------------------------------------------------------------

Var reshape(const Var& a, Shape shape) {
  Tensor y = a.value().reshaped(std::move(shape));
  Var in[] = {a};
  return a.tape().record("reshape", std::move(y), in, [](std::span<const double> g, GradSink& p) {
    auto ga = p[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  Tape& t = parts.front().tape();
  const Shape& first = parts.front().shape();
  if (first.empty()) throw ShapeError("concat of scalars");
  Shape out_shape = first;
  out_shape[0] = 0;
  std::vector<double> y;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    if (&p.tape() != &t) throw std::invalid_argument("concat: operands on different tapes");
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin() + 1, s.end(), first.begin() + 1)) {
      throw ShapeError("concat: " + to_string(s) + " vs " + to_string(first));
    }
    out_shape[0] += s[0];
    y.insert(y.end(), p.value().begin(), p.value().end());
    sizes.push_back(p.value().size());
  }
  return t.record("concat", Tensor(out_shape, std::move(y)), parts, [sizes](std::span<const double> g, GradSink& p) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (p.wants(k)) {
        auto gk = p[k];
        for (std::size_t i = 0; i < sizes[k]; ++i) gk[i] += g[off + i];
      }
      off += sizes[k];
    }
  });
}

Var slice(const Var& a, std::size_t begin, std::size_t end) {
  Tensor y = a.value().slice(begin, end);
  const std::size_t inner = y.size() / std::max<std::size_t>(end - begin, 1);
  const std::size_t off = begin * inner;
  Var in[] = {a};
  return a.tape().record("slice", std::move(y), in, [off](std::span<const double> g, GradSink& p) {
    auto ga = p[0];
    for (std::size_t i = 0; i < g.size(); ++i) ga[off + i] += g[i];
  });
}

// ---- convolution -----------------------------------------------------------

Tensor conv2d_periodic(const Tensor& input, const Tensor& kernels) {
  const ConvDims d = conv_dims(input.shape(), kernels.shape());
  auto padded = pad_periodic(input.begin(), d.cin, d.nx, d.ny, d.half);
  std::vector<double> out(d.cout * d.nx * d.ny, 0.0);
  conv_accumulate(padded.data(), kernels.begin(), out.data(), d);
  return Tensor({d.cout, d.nx, d.ny}, std::move(out));
}

Var conv2d_periodic(const Var& input, const Var& kernels) {
  Tape& t = common_tape({&input, &kernels});
  const ConvDims d = conv_dims(input.shape(), kernels.shape());
  auto padded = std::make_shared<std::vector<double>>(pad_periodic(input.value().begin(), d.cin, d.nx, d.ny, d.half));
  std::vector<double> out(d.cout * d.nx * d.ny, 0.0);
  conv_accumulate(padded->data(), kernels.value().begin(), out.data(), d);
  const Tensor kv = kernels.value();
  Var in[] = {input, kernels};
  return t.record("conv2d_periodic", Tensor({d.cout, d.nx, d.ny}, std::move(out)), in,
                  [d, padded, kv](std::span<const double> g, GradSink& p) {
                    if (p.wants(0)) conv_input_grad(g.data(), kv.begin(), p[0].data(), d);
                    if (p.wants(1)) conv_kernel_grad(g.data(), padded->data(), p[1].data(), d);
                  });
}

Var add_channel_bias(const Var& x, const Var& bias) {
  Tape& t = common_tape({&x, &bias});
  const Shape& s = x.shape();
  if (s.size() != 3 || bias.shape() != Shape{s[0]}) {
    throw ShapeError("add_channel_bias: " + to_string(s) + " with bias " + to_string(bias.shape()));
  }
  const std::size_t plane = s[1] * s[2];
  std::vector<double> y(x.value().begin(), x.value().end());
  for (std::size_t c = 0; c < s[0]; ++c) {
    const double b = bias.value()[c];
    for (std::size_t i = 0; i < plane; ++i) y[c * plane + i] += b;
  }
  Var in[] = {x, bias};
  return t.record("add_channel_bias", Tensor(s, std::move(y)), in, [plane](std::span<const double> g, GradSink& p) {
    if (p.wants(0)) {
      auto gx = p[0];
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    }
    if (p.wants(1)) {
      auto gb = p[1];
      for (std::size_t c = 0; c < gb.size(); ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += g[c * plane + i];
        gb[c] += acc;
      }
    }
  });
}

Var matvec(const Tensor& a, const Var& x) {
  if (a.rank() != 2 || x.shape() != Shape{a.dim(1)}) {
    throw ShapeError("matvec: " + to_string(a.shape()) + " times " + to_string(x.shape()));
  }
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += a[i * m + j] * x.value()[j];
    y[i] = acc;
  }
  Var in[] = {x};
  return x.tape().record("matvec", Tensor({n}, std::move(y)), in, [a, n, m](std::span<const double> g, GradSink& p) {
    auto gx = p[0];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) gx[j] += a[i * m + j] * g[i];
    }
  });
}

Var flip_kernel(const Var& k, FlipAxis axis) {
  const Shape& s = k.shape();
  if (s.size() < 2 || s[s.size() - 1] != s[s.size() - 2] || s.back() % 2 == 0) {
    throw ShapeError("flip_kernel: expected odd square trailing axes, got " + to_string(s));
  }
  const std::size_t n = s.back();
  const std::size_t plane = n * n;
  const std::size_t count = k.value().size() / plane;
  std::vector<std::size_t> src(k.value().size());
  for (std::size_t b = 0; b < count; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t si = axis == FlipAxis::X ? n - 1 - i : i;
        const std::size_t sj = axis == FlipAxis::Y ? n - 1 - j : j;
        src[b * plane + i * n + j] = b * plane + si * n + sj;
      }
    }
  }
  std::vector<double> y(src.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = -k.value()[src[i]];
  Var in[] = {k};
  return k.tape().record("flip_kernel", Tensor(s, std::move(y)), in, [src](std::span<const double> g, GradSink& p) {
    auto gk = p[0];
    for (std::size_t i = 0; i < src.size(); ++i) gk[src[i]] -= g[i];
  });
}

Var local_stencil(const Var& field, const Var& coeffs, const Tensor& base, const Tensor& basis) {
  Tape& t = common_tape({&field, &coeffs});
  const Shape& fs = field.shape();
  const Shape& cs = coeffs.shape();
  if (fs.size() != 2 || cs.size() != 3 || cs[1] != fs[0] || cs[2] != fs[1]) {
    throw ShapeError("local_stencil: field " + to_string(fs) + " with coefficients " + to_string(cs));
  }
  const std::size_t m = cs[0];
  if (base.rank() != 2 || basis.rank() != 3 || basis.dim(0) != m || basis.dim(1) != base.dim(0) ||
      basis.dim(2) != base.dim(1)) {
    throw ShapeError("local_stencil: base " + to_string(base.shape()) + " / basis " + to_string(basis.shape()));
  }
  const std::size_t k = base.dim(0);
  const Tensor f3 = field.value().reshaped({1, fs[0], fs[1]});
  const ConvDims dbase = conv_dims(f3.shape(), {1, 1, k, k});
  const ConvDims dbasis{1, m, fs[0], fs[1], k, k / 2};
  auto padded = pad_periodic(f3.begin(), 1, fs[0], fs[1], k / 2);

  std::vector<double> out(fs[0] * fs[1], 0.0);
  conv_accumulate(padded.data(), base.begin(), out.data(), dbase);
  auto responses = std::make_shared<std::vector<double>>(m * out.size(), 0.0);
  if (m > 0) conv_accumulate(padded.data(), basis.begin(), responses->data(), dbasis);
  const Tensor& w = coeffs.value();
  for (std::size_t i = 0; i < m; ++i) {
    const double* r = responses->data() + i * out.size();
    const double* wi = w.begin() + i * out.size();
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += wi[p] * r[p];
  }
  Var in[] = {field, coeffs};
  return t.record("local_stencil", Tensor(fs, std::move(out)), in,
                  [=](std::span<const double> g, GradSink& p) {
                    const std::size_t plane = g.size();
                    if (p.wants(1)) {
                      auto gw = p[1];
                      for (std::size_t i = 0; i < m; ++i) {
                        const double* r = responses->data() + i * plane;
                        for (std::size_t q = 0; q < plane; ++q) gw[i * plane + q] += g[q] * r[q];
                      }
                    }
                    if (p.wants(0)) {
                      auto gf = p[0];
                      conv_input_grad(g.data(), base.begin(), gf.data(), dbase);
                      if (m > 0) {
                        std::vector<double> weighted(m * plane);
                        for (std::size_t i = 0; i < m; ++i) {
                          for (std::size_t q = 0; q < plane; ++q) weighted[i * plane + q] = g[q] * w[i * plane + q];
                        }
                        conv_input_grad(weighted.data(), basis.begin(), gf.data(), dbasis);
                      }
                    }
                  });
}

// ---- spectral --------------------------------------------------------------

Var dft2(const Var& x) {
  const auto [nx, ny] = plane_dims(x.shape(), 0, "dft2");
  std::vector<cplx> buf(x.value().begin(), x.value().end());
  fft::forward(buf, nx, ny);
  Shape s = x.shape();
  s.push_back(2);
  Var in[] = {x};
  return x.tape().record("dft2", Tensor(s, as_pairs(buf)), in, [nx, ny](std::span<const double> g, GradSink& p) {
    // Adjoint of the unnormalized DFT on real input: Re(F^H g) = Re(N * idft(g)).
    auto gc = as_complex(g);
    fft::inverse(gc, nx, ny);
    const double n = static_cast<double>(nx * ny);
    auto gx = p[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n * gc[i].real();
  });
}

Var idft2(const Var& z) {
  require_complex(z.shape(), "idft2");
  const auto [nx, ny] = plane_dims(z.shape(), 1, "idft2");
  auto buf = as_complex(z.value().data());
  fft::inverse(buf, nx, ny);
  Var in[] = {z};
  return z.tape().record("idft2", Tensor(z.shape(), as_pairs(buf)), in, [nx, ny](std::span<const double> g, GradSink& p) {
    // Adjoint of F^H / N is F / N.
    auto gc = as_complex(g);
    fft::forward(gc, nx, ny);
    const double inv = 1.0 / static_cast<double>(nx * ny);
    auto gz = p[0];
    for (std::size_t i = 0; i < gc.size(); ++i) {
      gz[2 * i] += inv * gc[i].real();
      gz[2 * i + 1] += inv * gc[i].imag();
    }
  });
}

Var real_part(const Var& z) {
  require_complex(z.shape(), "real_part");
  Shape s(z.shape().begin(), z.shape().end() - 1);
  std::vector<double> y(z.value().size() / 2);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = z.value()[2 * i];
  Var in[] = {z};
  return z.tape().record("real_part", Tensor(s, std::move(y)), in, [](std::span<const double> g, GradSink& p) {
    auto gz = p[0];
    for (std::size_t i = 0; i < g.size(); ++i) gz[2 * i] += g[i];
  });
}

Var spectral_filter(const Var& x, const ComplexField& multiplier) {
  const auto [nx, ny] = plane_dims(x.shape(), 0, "spectral_filter");
  if (multiplier.shape() != Shape{nx, ny}) {
    throw ShapeError("spectral_filter: multiplier " + to_string(multiplier.shape()) + " for planes " + std::to_string(nx) +
                     "x" + std::to_string(ny));
  }
  auto mult = std::make_shared<std::vector<cplx>>(to_complex(multiplier));
  auto apply = [nx, ny, mult](std::span<const double> in, bool conjugate) {
    std::vector<cplx> buf(in.begin(), in.end());
    fft::forward(buf, nx, ny);
    const std::size_t plane = nx * ny;
    for (std::size_t i = 0; i < buf.size(); ++i) {
      const cplx m = (*mult)[i % plane];
      buf[i] *= conjugate ? std::conj(m) : m;
    }
    fft::inverse(buf, nx, ny);
    std::vector<double> out(buf.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[i].real();
    return out;
  };
  Var in[] = {x};
  return x.tape().record("spectral_filter", Tensor(x.shape(), apply(x.value().data(), false)), in,
                         [apply](std::span<const double> g, GradSink& p) {
                           auto back = apply(g, true);
                           auto gx = p[0];
                           for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += back[i];
                         });
}

Var mode_mix(const Var& z, const Var& w, std::span<const std::size_t> modes) {
  Tape& t = common_tape({&z, &w});
  const Shape& zs = z.shape();
  const Shape& ws = w.shape();
  if (zs.size() != 4 || zs[3] != 2 || ws.size() != 4 || ws[3] != 2 || ws[0] != zs[0] || ws[2] != modes.size()) {
    throw ShapeError("mode_mix: spectrum " + to_string(zs) + " with weights " + to_string(ws));
  }
  const std::size_t cin = zs[0], cout = ws[1], plane = zs[1] * zs[2], nm = modes.size();
  for (auto p : modes) {
    if (p >= plane) throw ShapeError("mode_mix: mode index out of range");
  }
  std::vector<std::size_t> mode_list(modes.begin(), modes.end());
  const auto zc = std::make_shared<std::vector<cplx>>(as_complex(z.value().data()));
  const auto wc = std::make_shared<std::vector<cplx>>(as_complex(w.value().data()));
  std::vector<cplx> out(cout * plane);
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t s = 0; s < nm; ++s) {
        out[o * plane + mode_list[s]] += (*wc)[(c * cout + o) * nm + s] * (*zc)[c * plane + mode_list[s]];
      }
    }
  }
  Var in[] = {z, w};
  return t.record("mode_mix", Tensor({cout, zs[1], zs[2], 2}, as_pairs(out)), in,
                  [=](std::span<const double> g, GradSink& p) {
                    auto gc = as_complex(g);
                    if (p.wants(0)) {
                      auto gz = p[0];
                      for (std::size_t c = 0; c < cin; ++c) {
                        for (std::size_t o = 0; o < cout; ++o) {
                          for (std::size_t s = 0; s < nm; ++s) {
                            const std::size_t q = mode_list[s];
                            const cplx v = std::conj((*wc)[(c * cout + o) * nm + s]) * gc[o * plane + q];
                            gz[2 * (c * plane + q)] += v.real();
                            gz[2 * (c * plane + q) + 1] += v.imag();
                          }
                        }
                      }
                    }
                    if (p.wants(1)) {
                      auto gw = p[1];
                      for (std::size_t c = 0; c < cin; ++c) {
                        for (std::size_t o = 0; o < cout; ++o) {
                          for (std::size_t s = 0; s < nm; ++s) {
                            const std::size_t q = mode_list[s];
                            const cplx v = std::conj((*zc)[c * plane + q]) * gc[o * plane + q];
                            const std::size_t idx = (c * cout + o) * nm + s;
                            gw[2 * idx] += v.real();
                            gw[2 * idx + 1] += v.imag();
                          }
                        }
                      }
                    }
                  });
}

}  // namespace pdenetpp
