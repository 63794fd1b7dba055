#pragma once

#include "fracpile/torus.hpp"

namespace fracpile {

// d-dimensional DFT over the flat row-major layout of torus.hpp, applied one
// axis at a time.  Sign/normalization convention:
//   forward:  F(w) = sum_z f(z) exp(-2*pi*i z.w / n)      (unnormalized)
//   inverse:  f(z) = n^{-d} sum_w F(w) exp(+2*pi*i z.w / n)
// so inverse(forward(f)) == f.  The normalized transform of the inner-product
// convention (hat f = n^{-d} forward) is obtained by scaling when needed.
void dft_forward(const LatticeSpec& spec, CField& data);
void dft_inverse(const LatticeSpec& spec, CField& data);

CField dft_forward(const LatticeSpec& spec, const Field& f);

// Inverse transform of a spectral array, returning the real part after
// checking that the imaginary residue is at the roundoff level.
Field dft_inverse_real(const LatticeSpec& spec, const CField& data,
                       double imag_tol = 1e-9);

// Circular convolution (f * g)(x) = sum_y f(x-y) g(y) via the transform.
Field circular_convolve(const LatticeSpec& spec, const Field& f, const Field& g);

}  // namespace fracpile
