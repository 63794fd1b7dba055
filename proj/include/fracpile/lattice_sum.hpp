#pragma once

#include "fracpile/torus.hpp"

namespace fracpile {

// Compensated (Kahan) accumulator for sums mixing many orders of magnitude.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    double y = v - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

// Integral of ||y||_2^{-sigma} over the cube complement { ||y||_inf > H },
// for sigma > d.  Reduces to a (d-1)-dimensional cross-section integral that
// is evaluated once per sigma by Gauss-Legendre and memoized.
double cube_complement_integral(int d, double sigma, double H);

// Residue-class sums of the power law:
//   values[x] = sum over z in Z^d, z = x (mod n), z != 0 of ||z||_2^{-(d+alpha)}
// for every canonical residue x, in flat-index order.
//
// Images with ||k||_inf <= R are summed directly (one shell at a time, with
// compensated accumulation).  The remaining tail over each residue class is a
// midpoint-rule sample of a smooth radial integrand on cells of side n, so it
// is replaced by
//   [ A_s(H) + (n^2/24 + ||x||^2/(2d)) * s(s+2-d) * A_{s+2}(H) ] / n^d ,
// H = (R + 1/2) n,  A_sigma = cube_complement_integral.  The residual error
// of that correction scales like R^{-(alpha+4)}, so a Richardson step over
// the last two shell radii removes it and its magnitude certifies the result.
struct ResidueSumResult {
  Eigen::ArrayXd values;   // per-residue sums, flat order
  double total = 0.0;      // sum over residues = full-lattice sum
  double cert = 0.0;       // certified absolute error bound on `total`
  int radius = 0;          // final image radius R actually used
};

ResidueSumResult periodized_power_sum(const LatticeSpec& spec, double alpha,
                                      double rel_tol);

// Full-lattice sum  S(d, alpha) = sum_{z in Z^d \ {0}} ||z||^{-(d+alpha)}
// by the same corrected-truncation scheme on unit cells.
struct LatticeSumResult {
  double value = 0.0;
  double cert = 0.0;  // certified absolute error bound
  int radius = 0;
};

LatticeSumResult lattice_power_sum(int d, double alpha, double rel_tol);

// Tail of the full-lattice sum past sup-norm radius R, with the same
// correction terms; used by the per-mode eigenvalue oracle.
double lattice_tail_estimate(int d, double alpha, int R);

// Closed-form upper bound on  sum_{||z||_inf > R} ||z||^{-(d+alpha)}  via the
// integral comparison ||z||_2 >= ||z||_inf over sup-norm shells:
//   bound = d * 2^d / alpha * (R-1)^{-alpha}.
double tail_bound(int R, int d, double alpha);

}  // namespace fracpile
