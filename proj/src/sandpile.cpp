#include "fracpile/sandpile.hpp"

#include "fracpile/fft.hpp"

namespace fracpile {

SandpileState init_gaussian(const LatticeSpec& spec, RngStream& rng) {
  const std::int64_t sites = spec.sites();
  Field sigma(sites);
  for (std::int64_t i = 0; i < sites; ++i) sigma[i] = rng.normal();
  SandpileState st;
  st.spec = spec;
  st.s = 1.0 + sigma - sigma.mean();
  st.u = Field::Zero(sites);
  return st;
}

SandpileState init_deterministic(const LatticeSpec& spec, const Field& s_values) {
  if (s_values.size() != spec.sites())
    throw std::invalid_argument("init_deterministic: field size mismatch");
  const double total = double(spec.sites());
  if (std::abs(s_values.sum() - total) > 1e-9 * total)
    throw std::invalid_argument(
        "init_deterministic: total mass must equal the site count");
  SandpileState st;
  st.spec = spec;
  st.s = s_values;
  st.u = Field::Zero(spec.sites());
  return st;
}

void topple_step(SandpileState& state, const LongRangeKernel& kernel, double damping) {
  if (state.spec != kernel.spec)
    throw std::invalid_argument("topple_step: lattice mismatch");
  Field excess = damping * (state.s - 1.0).max(0.0);
  if ((excess > 0.0).any()) {
    state.u += excess;
    state.s += apply_generator(kernel, excess);
  }
  state.steps += 1;
}

StabilizationResult stabilize(SandpileState state, const LongRangeKernel& kernel,
                              double eps, std::int64_t max_steps, double damping,
                              ProgressFn progress) {
  if (eps <= 0) throw std::invalid_argument("stabilize: eps must be > 0");
  StabilizationResult res;
  double prev_excess = state.max_excess();
  double decay = 0.0;
  std::int64_t taken = 0;
  while (taken < max_steps) {
    double excess = state.max_excess();
    if (excess <= eps) {
      res.state = std::move(state);
      res.iterations = taken;
      res.max_residual_excess = excess;
      res.converged = true;
      res.observed_decay_ratio = decay;
      return res;
    }
    topple_step(state, kernel, damping);
    ++taken;
    if (taken % 1000 == 0) {
      double e = state.max_excess();
      if (progress) progress(taken, e);
      if (prev_excess > 0 && e > 0) decay = std::pow(e / prev_excess, 1.0 / 1000.0);
      prev_excess = e;
    }
  }
  res.max_residual_excess = state.max_excess();
  res.state = std::move(state);
  res.iterations = taken;
  res.converged = false;
  res.observed_decay_ratio = decay;
  return res;
}

Field min_normalized(const Field& u) { return u - u.minCoeff(); }

}  // namespace fracpile
