#pragma once

#include <string>
#include <vector>

#include "fracpile/kernel.hpp"

namespace fracpile {

// Eigenvalues of the generator (p * .) - id at every torus frequency, in
// flat-index order.  lambda[0] = 0 and lambda[w] < 0 otherwise.
struct Spectrum {
  LatticeSpec spec;
  double alpha = 0.0;
  Field lambda;
  double kernel_cert = 0.0;  // inherited truncation certificate

  double at(const Coords& w) const { return lambda[flat_index(w, spec)]; }
};

Spectrum eigenvalues(const LongRangeKernel& kernel);

// Independent per-mode route: the raw lattice sum
//   lambda_w = -2 c_alpha sum_{0 < ||z||_inf <= R} sin^2(pi z.w / n) ||z||^{-(d+alpha)}
// plus the averaged tail past R (sin^2 -> 1/2 on full residue classes).
// `cert` bounds |value - exact| including the normalizer's certificate.
struct DirectEigenvalue {
  double value = 0.0;
  double cert = 0.0;
};

DirectEigenvalue eigenvalue_direct(const LatticeSpec& spec, double alpha,
                                   const Coords& w, int R);

// Constant of the continuum limit:  n^alpha (-lambda_w) -> c_tilde ||w||^alpha
// for alpha in (0,2).  `extrapolation` runs a Richardson ladder of kernels;
// `quadrature` evaluates 2 c_alpha int sin^2(pi z_1) ||z||^{-(d+alpha)} dz.
struct LimitConstant {
  double c_tilde = 0.0;
  std::string method;
  double error_estimate = 0.0;
};

enum class LimitMethod { extrapolation, quadrature };

LimitConstant limit_constant(int d, double alpha, LimitMethod method,
                             std::vector<int> ladder = {});

// Constant of the gamma = 2 regime (alpha >= 2):
//   alpha > 2:  n^2 (-lambda_w) -> c ||w||^2
//   alpha = 2:  n^2 (-lambda_w) / log(n/||w||) -> c ||w||^2
// measured by ladder extrapolation; feeds the field normalization.
LimitConstant limit_constant_gamma2(int d, double alpha, std::vector<int> ladder = {});

// Regime-dispatching helper used by the field layer.
LimitConstant calibrated_limit_constant(int d, double alpha);

// Empirical verification of the eigenvalue asymptotics along an n-ladder.
struct ModeFit {
  Coords w;
  double slope = 0.0;      // fitted decay exponent of the residual in n
  double stderr_ = 0.0;
  double expected = 0.0;   // -(2-alpha) in the stable regime
  double r2 = 0.0;
};

struct RateReport {
  int d = 0;
  double alpha = 0.0;
  std::vector<int> ladder;
  double c_tilde = 0.0;           // reference constant used for residuals
  // (i) two-sided band of n^alpha(-lambda_w) / (c_tilde ||w||^alpha), alpha<2
  double band_min = 0.0, band_max = 0.0;
  double band_min_top = 0.0, band_max_top = 0.0;  // top of the ladder only
  // (ii) residual decay fits per mode, alpha<2
  std::vector<ModeFit> fits;
  // (iii) alpha = 2: r(n,w) = n^2(-lambda_w) / (||w||^2 log(n/||w||));
  // (iv) alpha > 2: r(n,w) = n^2(-lambda_w) / ||w||^2.
  // stabilization[i] = relative change of r between ladder[i] and ladder[i+1]
  // at the first mode; r_table holds r(n, w) rows (n major, modes minor).
  std::vector<Coords> modes;
  std::vector<std::vector<double>> r_table;
  std::vector<double> stabilization;
  // inverse-square bound sup over (n,w) of ||w||^{2 alpha} / (n^alpha lambda_w)^2
  double inv_square_bound = 0.0;
};

RateReport verify_rate_lemmas(int d, double alpha, const std::vector<int>& ladder,
                              int max_mode_norm = 4, double kernel_tol = 1e-12);

std::string rate_report_to_json(const RateReport& report);

}  // namespace fracpile
