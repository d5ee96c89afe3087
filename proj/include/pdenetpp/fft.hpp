#pragma once

#include <complex>
#include <span>

#include "pdenetpp/tensor.hpp"

namespace pdenetpp {

using cplx = std::complex<double>;

namespace fft {

/// In-place 2-D transforms over `batch` contiguous h*w planes.
/// forward is unnormalized; inverse carries the 1/(h*w) factor.
void forward(std::span<cplx> planes, std::size_t h, std::size_t w);
void inverse(std::span<cplx> planes, std::size_t h, std::size_t w);

/// Real-to-half-complex transform of one h x w plane; `out` holds h*(w/2+1) values.
void forward_real(const double* in, cplx* out, std::size_t h, std::size_t w);
/// Normalized inverse of forward_real. `in` is overwritten.
void inverse_real(cplx* in, double* out, std::size_t h, std::size_t w);

}  // namespace fft

/// Unnormalized forward DFT over the last two axes of a real tensor.
ComplexField dft2(const Tensor& field);
ComplexField dft2(const ComplexField& field);
/// Inverse DFT over the last two axes, normalized by 1/(H*W).
ComplexField idft2(const ComplexField& spectrum);
/// Real part of idft2.
Tensor idft2_real(const ComplexField& spectrum);

std::vector<cplx> to_complex(const ComplexField& field);
ComplexField from_complex(const Shape& shape, std::span<const cplx> values);

}  // namespace pdenetpp
