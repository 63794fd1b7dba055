#pragma once

#include <functional>

#include "fracpile/kernel.hpp"
#include "fracpile/rng.hpp"

namespace fracpile {

// Mass configuration together with the running odometer.
struct SandpileState {
  LatticeSpec spec;
  Field s;                 // mass per site
  Field u;                 // total mass emitted per site so far
  std::int64_t steps = 0;  // parallel toppling rounds taken

  double max_excess() const { return (s - 1.0).maxCoeff(); }
};

// s = 1 + sigma - mean(sigma) with sigma i.i.d. standard normal from the
// given stream; total mass is n^d up to rounding.
SandpileState init_gaussian(const LatticeSpec& spec, RngStream& rng);

// Deterministic initial condition; rejects configurations whose total mass
// is not n^d (those cannot stabilize to the all-1 state).
SandpileState init_deterministic(const LatticeSpec& spec, const Field& s_values);

// One parallel toppling round: every unstable site keeps mass 1 and routes
// its excess through the kernel (self-loop included).  `damping` in (0,1]
// releases only that fraction of the excess; any value is a legal schedule
// and reaches the same odometer.
void topple_step(SandpileState& state, const LongRangeKernel& kernel,
                 double damping = 1.0);

struct StabilizationResult {
  SandpileState state;
  std::int64_t iterations = 0;
  double max_residual_excess = 0.0;
  bool converged = false;
  double observed_decay_ratio = 0.0;  // diagnostic on non-convergence
};

using ProgressFn = std::function<void(std::int64_t step, double max_excess)>;

StabilizationResult stabilize(SandpileState state, const LongRangeKernel& kernel,
                              double eps = 1e-12, std::int64_t max_steps = 1000000,
                              double damping = 1.0, ProgressFn progress = nullptr);

// Odometer with its minimum subtracted (the stabilization pins min u = 0).
Field min_normalized(const Field& u);

}  // namespace fracpile
