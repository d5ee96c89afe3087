#include "pdenetpp/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace pdenetpp {
namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per (h, w, sign) and kept for the
// lifetime of the process.
fftw_plan plan_for(std::size_t h, std::size_t w, int sign) {
  static std::mutex mutex;
  static std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto key = std::make_tuple(h, w, sign);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  std::vector<cplx> scratch(h * w);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  fftw_plan p = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf, buf, sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.emplace(key, p);
  return p;
}

enum class Kind { R2C, C2R };

fftw_plan real_plan_for(std::size_t h, std::size_t w, Kind kind) {
  static std::mutex mutex;
  static std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto key = std::make_tuple(h, w, static_cast<int>(kind));
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  std::vector<double> real(h * w);
  std::vector<cplx> spec(h * (w / 2 + 1));
  auto* c = reinterpret_cast<fftw_complex*>(spec.data());
  const int hi = static_cast<int>(h), wi = static_cast<int>(w);
  fftw_plan p = kind == Kind::R2C
                    ? fftw_plan_dft_r2c_2d(hi, wi, real.data(), c, FFTW_ESTIMATE | FFTW_UNALIGNED)
                    : fftw_plan_dft_c2r_2d(hi, wi, c, real.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.emplace(key, p);
  return p;
}

void run(std::span<cplx> planes, std::size_t h, std::size_t w, int sign) {
  const std::size_t plane = h * w;
  if (plane == 0 || planes.size() % plane != 0) throw ShapeError("fft: buffer is not a whole number of planes");
  fftw_plan p = plan_for(h, w, sign);
  for (std::size_t off = 0; off < planes.size(); off += plane) {
    auto* buf = reinterpret_cast<fftw_complex*>(planes.data() + off);
    fftw_execute_dft(p, buf, buf);
  }
}

void check_rank(const Shape& s) {
  if (s.size() < 2) throw ShapeError("dft2 needs at least two axes, got " + to_string(s));
}

}  // namespace

namespace fft {

void forward(std::span<cplx> planes, std::size_t h, std::size_t w) { run(planes, h, w, FFTW_FORWARD); }

void inverse(std::span<cplx> planes, std::size_t h, std::size_t w) {
  run(planes, h, w, FFTW_BACKWARD);
  const double norm = 1.0 / static_cast<double>(h * w);
  for (auto& z : planes) z *= norm;
}

void forward_real(const double* in, cplx* out, std::size_t h, std::size_t w) {
  fftw_execute_dft_r2c(real_plan_for(h, w, Kind::R2C), const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
}

void inverse_real(cplx* in, double* out, std::size_t h, std::size_t w) {
  fftw_execute_dft_c2r(real_plan_for(h, w, Kind::C2R), reinterpret_cast<fftw_complex*>(in), out);
  const double norm = 1.0 / static_cast<double>(h * w);
  for (std::size_t i = 0; i < h * w; ++i) out[i] *= norm;
}

}  // namespace fft

std::vector<cplx> to_complex(const ComplexField& field) {
  std::vector<cplx> out(field.re.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {field.re[i], field.im[i]};
  return out;
}

ComplexField from_complex(const Shape& shape, std::span<const cplx> values) {
  std::vector<double> re(values.size()), im(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    re[i] = values[i].real();
    im[i] = values[i].imag();
  }
  return {Tensor(shape, std::move(re)), Tensor(shape, std::move(im))};
}

ComplexField dft2(const Tensor& field) {
  check_rank(field.shape());
  std::vector<cplx> buf(field.begin(), field.end());
  const auto& s = field.shape();
  fft::forward(buf, s[s.size() - 2], s.back());
  return from_complex(s, buf);
}

ComplexField dft2(const ComplexField& field) {
  check_rank(field.shape());
  auto buf = to_complex(field);
  const auto& s = field.shape();
  fft::forward(buf, s[s.size() - 2], s.back());
  return from_complex(s, buf);
}

ComplexField idft2(const ComplexField& spectrum) {
  check_rank(spectrum.shape());
  auto buf = to_complex(spectrum);
  const auto& s = spectrum.shape();
  fft::inverse(buf, s[s.size() - 2], s.back());
  return from_complex(s, buf);
}

Tensor idft2_real(const ComplexField& spectrum) { return idft2(spectrum).re; }

}  // namespace pdenetpp
