#pragma once

#include <complex>
#include <vector>

#include "fracpile/solver.hpp"

namespace fracpile {

// Growth order of the expected odometer on the side-n torus (gamma = min{alpha,2}):
//   n^{gamma-d/2}  if gamma > d/2;  log n  if gamma = d/2;  sqrt(log n)  otherwise.
// The gamma = 2 case (alpha >= 2) carries log corrections not covered by the
// power table; callers treat it as descriptive there.
double odometer_growth_reference(int d, double gamma, int n);

// Order of the squared field increment E[(v_0 - v_x)^2] at lattice distance r:
// five regimes in alpha for alpha in (0,2).  r = 1 in the log regime is
// degenerate (log 1 = 0); comparisons start at r = 2.
double variogram_growth_reference(int d, double alpha, double n, double r);

// Squared Gaussian distance between sites 0 and x:
//   E[(v_0 - v_x)^2] = C(0,0) + C(x,x) - 2 C(0,x)
//                    = (4/n^d) sum_{w != 0} sin^2(pi x.w / n) / lambda_w^2.
double variogram(const Spectrum& spectrum, const Coords& x);

// Same quantity for every site at once (one transform).
Field variogram_table(const Spectrum& spectrum);

// Finite combination of nonzero Fourier modes phi_nu(x) = exp(2 pi i nu.x);
// mean-zero by construction (nu = 0 is rejected).
struct TestFunction {
  int d = 0;
  std::vector<std::pair<Coords, std::complex<double>>> modes;

  TestFunction(int d_, std::vector<std::pair<Coords, std::complex<double>>> m);

  static TestFunction fourier_mode(const Coords& nu);  // coefficient 1
};

// Normalization and calibrated constant for the rescaled field pairings.
struct FieldSpec {
  double alpha = 0.0;
  double gamma = 0.0;  // min{alpha, 2}
  LimitConstant c_tilde;

  FieldSpec(double alpha_, LimitConstant c) : alpha(alpha_), gamma(std::min(alpha_, 2.0)), c_tilde(c) {}

  // a(n): n^{(d-2 alpha)/2} below alpha = 2, with the log factor exactly at 2.
  double normalization(int d, int n) const;
};

// Cube average of the test function over the cell of side 1/n centered at
// z = x/n, in closed form per mode (product of one-dimensional factors).
std::complex<double> cell_integral(const TestFunction& f, const LatticeSpec& spec,
                                   const Coords& x);

// Pairing of the rescaled step-function field built from `u` with f:
//   c_tilde * a(n) * sum_z u(nz) * integral of f over the cell at z.
// Constant fields pair to zero because the cell integrals sum to integral f = 0.
std::complex<double> pair_field(const Field& u, const TestFunction& f,
                                const FieldSpec& fs, const LatticeSpec& spec);

// Limiting covariance  sum_{w != 0} f_hat(w) conj(g_hat(w)) ||w||^{-2 gamma}
// over the finitely many modes present.
std::complex<double> limit_covariance(const TestFunction& f, const TestFunction& g,
                                      double gamma);

// Batched pairing against a fixed mode set: one transform of u serves every
// mode.  Used by the Monte Carlo campaigns.
class PairingEngine {
 public:
  PairingEngine(const LatticeSpec& spec, const FieldSpec& fs,
                std::vector<Coords> modes);

  std::vector<std::complex<double>> pair(const Field& u) const;

  const std::vector<Coords>& modes() const { return modes_; }

 private:
  LatticeSpec spec_;
  double scale_ = 0.0;  // c_tilde * a(n)
  std::vector<Coords> modes_;
  std::vector<std::complex<double>> cell_factors_;  // product of 1-d integrals
  std::vector<std::int64_t> mode_index_;            // flat index of nu mod n
};

}  // namespace fracpile
