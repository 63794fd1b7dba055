#include "doctest.h"

#include <cmath>

#include "fracpile/sandpile.hpp"
#include "fracpile/solver.hpp"

using namespace fracpile;

namespace {
Field field2(double a, double b) {
  Field f(2);
  f[0] = a;
  f[1] = b;
  return f;
}
}  // namespace

TEST_CASE("gaussian initialization") {
  LatticeSpec spec(2, 8);
  RngStream rng(123, 0);
  SandpileState st = init_gaussian(spec, rng);
  CHECK(std::abs(st.s.sum() - double(spec.sites())) < 1e-9 * spec.sites());
  CHECK((st.u == 0.0).all());
  CHECK(st.steps == 0);

  RngStream rng2(123, 0);
  SandpileState st2 = init_gaussian(spec, rng2);
  CHECK((st.s == st2.s).all());  // determinism contract

  // site mean over replicates approaches 1 (standard error ~ 1/sqrt(N))
  double acc = 0.0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    RngStream s(7, std::uint64_t(r));
    acc += init_gaussian(LatticeSpec(1, 4), s).s[0];
  }
  CHECK(std::abs(acc / reps - 1.0) < 4.0 / std::sqrt(double(reps)));
}

TEST_CASE("deterministic initialization validates total mass") {
  LatticeSpec spec(1, 2);
  CHECK_NOTHROW(init_deterministic(spec, Field::Constant(2, 1.0)));
  CHECK_NOTHROW(init_deterministic(spec, field2(0.0, 2.0)));
  CHECK_THROWS_AS(init_deterministic(spec, field2(1.0, 2.0)), std::invalid_argument);
  CHECK_THROWS_AS(init_deterministic(spec, Field::Constant(3, 1.0)), std::invalid_argument);
}

TEST_CASE("single toppling round on the two-site instance") {
  LatticeSpec spec(1, 2);
  LongRangeKernel k = build_kernel(spec, 1.0, 1e-12);

  SandpileState stable = init_deterministic(spec, Field::Constant(2, 1.0));
  topple_step(stable, k);
  CHECK((stable.s == 1.0).all());
  CHECK((stable.u == 0.0).all());

  SandpileState st = init_deterministic(spec, field2(0.0, 2.0));
  topple_step(st, k);
  CHECK(st.s[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(st.s[1] == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(st.u[0] == 0.0);
  CHECK(st.u[1] == doctest::Approx(1.0));
  CHECK(std::abs(st.s.sum() - 2.0) < 1e-12);
}

TEST_CASE("two-site stabilization reaches the geometric-series odometer") {
  LatticeSpec spec(1, 2);
  LongRangeKernel k = build_kernel(spec, 1.0, 1e-12);
  StabilizationResult res =
      stabilize(init_deterministic(spec, field2(0.0, 2.0)), k, 1e-12, 100000);
  REQUIRE(res.converged);
  Field u = min_normalized(res.state.u);
  CHECK(u[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(u[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-9));
  CHECK((res.state.s - 1.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("already-stable state converges in zero steps") {
  LatticeSpec spec(1, 4);
  LongRangeKernel k = build_kernel(spec, 1.0, 1e-12);
  StabilizationResult res =
      stabilize(init_deterministic(spec, Field::Constant(4, 1.0)), k, 1e-12, 10);
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK((res.state.u == 0.0).all());
}

TEST_CASE("random states: conservation, monotonicity, coupled identity") {
  for (auto [d, n, alpha] : std::vector<std::tuple<int, int, double>>{
           {1, 16, 0.5}, {1, 16, 1.5}, {2, 8, 1.0}, {2, 8, 3.0}}) {
    LatticeSpec spec(d, n);
    LongRangeKernel k = build_kernel(spec, alpha, 1e-12);
    RngStream rng(17, std::uint64_t(n + d));
    SandpileState st = init_gaussian(spec, rng);
    const Field s0 = st.s;
    Field prev_u = st.u;
    for (int step = 0; step < 64; ++step) {
      topple_step(st, k);
      CHECK((st.u - prev_u >= -1e-15).all());  // odometer never decreases
      prev_u = st.u;
    }
    CHECK(std::abs(st.s.sum() - double(spec.sites())) < 1e-9 * spec.sites());
    Field coupled = s0 + apply_generator(k, st.u) - st.s;
    CHECK(coupled.abs().maxCoeff() < 1e-9);

    StabilizationResult res = stabilize(std::move(st), k, 1e-12, 2000000);
    REQUIRE(res.converged);
    CHECK((res.state.s - 1.0).abs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("damped schedules reach the same odometer (least action)") {
  LatticeSpec spec(1, 8);
  LongRangeKernel k = build_kernel(spec, 1.0, 1e-12);
  RngStream rng(99, 0);
  SandpileState st = init_gaussian(spec, rng);
  const Field s0 = st.s;

  StabilizationResult full = stabilize(st, k, 1e-13, 2000000, 1.0);
  StabilizationResult damped =
      stabilize(init_deterministic(spec, s0), k, 1e-13, 2000000, 0.5);
  REQUIRE(full.converged);
  REQUIRE(damped.converged);
  CHECK(damped.iterations > full.iterations);
  Field gap = min_normalized(full.state.u) - min_normalized(damped.state.u);
  CHECK(gap.abs().maxCoeff() < 1e-6);
}

TEST_CASE("non-convergence is loud and diagnosed") {
  LatticeSpec spec(1, 8);
  LongRangeKernel k = build_kernel(spec, 1.0, 1e-12);
  RngStream rng(5, 0);
  StabilizationResult res = stabilize(init_gaussian(spec, rng), k, 1e-12, 3);
  CHECK(!res.converged);
  CHECK(res.iterations == 3);
  CHECK(res.max_residual_excess > 0.0);
  CHECK_THROWS_AS(stabilize(init_gaussian(spec, rng), k, -1.0, 3), std::invalid_argument);
}

TEST_CASE("progress callback fires every thousand rounds") {
  // alpha = 3 on a small torus has a tight spectral gap, so it takes many rounds
  LatticeSpec spec(1, 8);
  LongRangeKernel k = build_kernel(spec, 3.0, 1e-12);
  RngStream rng(2, 0);
  int calls = 0;
  StabilizationResult res = stabilize(init_gaussian(spec, rng), k, 1e-12, 2000000, 1.0,
                                      [&](std::int64_t, double) { ++calls; });
  CHECK(res.converged);
  if (res.iterations >= 1000) CHECK(calls >= 1);
}
