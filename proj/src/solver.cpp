#include "fracpile/solver.hpp"

#include "fracpile/fft.hpp"

namespace fracpile {

OdometerField spectral_odometer(const Spectrum& spectrum, const Field& s) {
  const LatticeSpec& spec = spectrum.spec;
  if (s.size() != spec.sites())
    throw std::invalid_argument("spectral_odometer: field size mismatch");
  const double total = double(spec.sites());
  CField rhs = (1.0 - s).cast<std::complex<double>>();
  dft_forward(spec, rhs);
  if (std::abs(rhs[0]) > 1e-9 * total)
    throw std::invalid_argument(
        "spectral_odometer: total mass differs from the site count (zero mode "
        "inconsistent)");
  rhs[0] = 0.0;
  for (std::int64_t i = 1; i < spec.sites(); ++i) rhs[i] /= spectrum.lambda[i];
  Field u = dft_inverse_real(spec, rhs);
  OdometerField out;
  out.spec = spec;
  out.alpha = spectrum.alpha;
  out.u = u - u.minCoeff();
  return out;
}

GreenTable green_function(const Spectrum& spectrum) {
  const LatticeSpec& spec = spectrum.spec;
  const std::int64_t sites = spec.sites();
  // psi_{+-w} pair into a real row; the residue check guards kernel symmetry.
  CField work(sites);
  work[0] = 0.0;
  for (std::int64_t i = 1; i < sites; ++i) work[i] = -1.0 / spectrum.lambda[i];
  Field row = dft_inverse_real(spec, work, 1e-12);
  GreenTable g;
  g.spec = spec;
  g.alpha = spectrum.alpha;
  g.row = row;
  return g;
}

Field covariance_row(const Spectrum& spectrum) {
  const LatticeSpec& spec = spectrum.spec;
  const std::int64_t sites = spec.sites();
  CField chat(sites);
  chat[0] = 0.0;
  for (std::int64_t i = 1; i < sites; ++i)
    chat[i] = 1.0 / (spectrum.lambda[i] * spectrum.lambda[i]);
  return dft_inverse_real(spec, chat, 1e-12);
}

double field_covariance(const Spectrum& spectrum, const Coords& x, const Coords& y) {
  Field row = covariance_row(spectrum);
  return row[flat_index(torus_diff(y, x, spectrum.spec), spectrum.spec)];
}

FieldSampler::FieldSampler(const Spectrum& spectrum)
    : spec_(spectrum.spec), green_(green_function(spectrum)) {
  green_hat_ = green_.row.cast<std::complex<double>>();
  dft_forward(spec_, green_hat_);
}

Field FieldSampler::draw_initial_mass(RngStream& rng, Field* sigma_out) const {
  const std::int64_t sites = spec_.sites();
  Field sigma(sites);
  for (std::int64_t i = 0; i < sites; ++i) sigma[i] = rng.normal();
  if (sigma_out) *sigma_out = sigma;
  return 1.0 + sigma - sigma.mean();
}

Field FieldSampler::from_centered_mass(const Field& centered) const {
  if (centered.size() != spec_.sites())
    throw std::invalid_argument("FieldSampler: field size mismatch");
  CField work = centered.cast<std::complex<double>>();
  dft_forward(spec_, work);
  work *= green_hat_;
  dft_inverse(spec_, work);
  return work.real();
}

Field FieldSampler::sample(RngStream& rng) const {
  Field s = draw_initial_mass(rng);
  return from_centered_mass(s - 1.0);
}

}  // namespace fracpile
