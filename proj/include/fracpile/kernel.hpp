#pragma once

#include <memory>

#include "fracpile/lattice_sum.hpp"
#include "fracpile/torus.hpp"

namespace fracpile {

// Normalizer of the long-range step distribution on Z^d:
//   c_alpha = 1 / sum_{z != 0} ||z||^{-(d+alpha)}.
struct LatticeConstant {
  double c_alpha = 0.0;
  int radius = 0;
  double tail_cert = 0.0;  // certified relative error of c_alpha
};

LatticeConstant lattice_constant(int d, double alpha, double rel_tol = 1e-12);

// Periodized long-range jump distribution on the torus.  weights[i] is the
// probability of the step whose canonical displacement has flat index i;
// weights sum to one and are exactly even under x -> -x.
struct LongRangeKernel {
  LatticeSpec spec;
  double alpha = 0.0;
  double rel_tol = 0.0;
  Field weights;
  int truncation_radius = 0;  // image radius R (images summed over ||z||_inf <= R*n)
  double tail_cert = 0.0;     // certified relative error of the unnormalized sums
  double unnormalized_total = 0.0;  // equals 1/c_alpha up to tail_cert

  double weight(const Coords& x) const { return weights[flat_index(x, spec)]; }
};

// Builds the kernel: direct image sums out to an adaptively chosen radius,
// a cell-midpoint tail correction, and exact normalization/symmetrization.
LongRangeKernel build_kernel(const LatticeSpec& spec, double alpha,
                             double rel_tol = 1e-12);

// Process-wide cache of built kernels, keyed by (d, n, alpha, rel_tol).
// When FRACPILE_CACHE_DIR is set, kernels are also persisted to disk.
std::shared_ptr<const LongRangeKernel> get_or_build_kernel(
    const LatticeSpec& spec, double alpha, double rel_tol = 1e-12);

// Generator of the walk: (p * f) - f, i.e. minus the fractional Laplacian of
// the kernel's order.  Transform route, O(n^d log n).
Field apply_generator(const LongRangeKernel& kernel, const Field& f);

// Direct O(n^{2d}) evaluation of the same operator; audit path for tests.
Field apply_generator_dense(const LongRangeKernel& kernel, const Field& f);

}  // namespace fracpile
