#pragma once

#include "fracpile/rng.hpp"
#include "fracpile/spectrum.hpp"

namespace fracpile {

// Odometer computed in the transform domain; min u = 0 exactly.
struct OdometerField {
  LatticeSpec spec;
  double alpha = 0.0;
  Field u;
};

// Solves  lambda_w u_hat(w) = (1-s)_hat(w)  for w != 0 and pins the zero mode
// by min-normalization.  Rejects configurations whose total mass is not n^d
// (their zero mode is inconsistent with stabilization).
OdometerField spectral_odometer(const Spectrum& spectrum, const Field& s);

// Translation-invariant Green table G(z) = -n^{-d} sum_{w != 0} psi_w(z)/lambda_w,
// so that applying the generator to G gives -delta_0 + n^{-d}.
struct GreenTable {
  LatticeSpec spec;
  double alpha = 0.0;
  Field row;

  double at(const Coords& x, const Coords& y) const {
    return row[flat_index(torus_diff(x, y, spec), spec)];
  }
};

GreenTable green_function(const Spectrum& spectrum);

// Covariance row  C(z) = n^{-d} sum_{w != 0} psi_w(z) / lambda_w^2  of the
// zero-mean Gaussian solution field; field_covariance(x, y) = C(y - x).
Field covariance_row(const Spectrum& spectrum);
double field_covariance(const Spectrum& spectrum, const Coords& x, const Coords& y);

// Sampler of the zero-mean Gaussian field  v = G (*) (s - 1)  for Gaussian
// initial mass; the odometer of that configuration is v - min v.  The Green
// row is materialized once and samples go through the convolution route.
class FieldSampler {
 public:
  explicit FieldSampler(const Spectrum& spectrum);

  // v for a fresh Gaussian initial condition drawn from `rng`.
  Field sample(RngStream& rng) const;

  // v for the centered mass field s - 1 (must sum to ~0).
  Field from_centered_mass(const Field& centered) const;

  // The initial configuration s matching the last building block, exposed so
  // toppling audits can replay the identical replicate.
  Field draw_initial_mass(RngStream& rng, Field* sigma_out = nullptr) const;

  const LatticeSpec& spec() const { return spec_; }
  const GreenTable& green() const { return green_; }

 private:
  LatticeSpec spec_;
  GreenTable green_;
  CField green_hat_;  // forward transform of the Green row
};

}  // namespace fracpile
