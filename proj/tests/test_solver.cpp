#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "fracpile/sandpile.hpp"
#include "fracpile/solver.hpp"

using namespace fracpile;

namespace {

// Independent oracle: assemble the generator as a dense matrix, solve the
// singular system L u = 1 - s on the mean-zero complement, min-normalize.
Field dense_odometer_oracle(const LongRangeKernel& k, const Field& s) {
  const std::int64_t m = k.spec.sites();
  Eigen::MatrixXd L(m, m);
  for_each_site(k.spec, [&](std::int64_t i, const Coords& x) {
    for_each_site(k.spec, [&](std::int64_t j, const Coords& y) {
      L(i, j) = k.weights[flat_index(torus_diff(x, y, k.spec), k.spec)] - (i == j ? 1.0 : 0.0);
    });
  });
  // pin the zero mode by appending the mean-zero constraint
  Eigen::MatrixXd A(m + 1, m);
  A.topRows(m) = L;
  A.bottomRows(1).setOnes();
  Eigen::VectorXd b(m + 1);
  b.head(m) = (1.0 - s).matrix();
  b[m] = 0.0;
  Eigen::VectorXd u = A.colPivHouseholderQr().solve(b);
  Field out = u.array();
  return out - out.minCoeff();
}

Field field2(double a, double b) {
  Field f(2);
  f[0] = a;
  f[1] = b;
  return f;
}

}  // namespace

TEST_CASE("two-site odometer: closed form, dense oracle, spectral route") {
  LatticeSpec spec(1, 2);
  LongRangeKernel k = build_kernel(spec, 1.0, 1e-12);
  Spectrum sp = eigenvalues(k);
  Field s = field2(0.0, 2.0);

  OdometerField u = spectral_odometer(sp, s);
  CHECK(u.u[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(u.u[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-9));

  Field oracle = dense_odometer_oracle(k, s);
  CHECK((u.u - oracle).abs().maxCoeff() < 1e-9);
}

TEST_CASE("uniform configuration has zero odometer") {
  Spectrum sp = eigenvalues(build_kernel(LatticeSpec(2, 4), 1.0, 1e-12));
  OdometerField u = spectral_odometer(sp, Field::Constant(16, 1.0));
  CHECK(u.u.abs().maxCoeff() < 1e-12);
}

TEST_CASE("solver rejects mass-sum violations") {
  Spectrum sp = eigenvalues(build_kernel(LatticeSpec(1, 4), 1.0, 1e-12));
  Field bad = Field::Constant(4, 1.1);
  CHECK_THROWS_AS(spectral_odometer(sp, bad), std::invalid_argument);
}

TEST_CASE("solve residual and dense-oracle agreement on random states") {
  for (auto [d, n, alpha] : std::vector<std::tuple<int, int, double>>{
           {1, 8, 0.5}, {1, 16, 1.0}, {2, 4, 1.5}}) {
    LatticeSpec spec(d, n);
    LongRangeKernel k = build_kernel(spec, alpha, 1e-12);
    Spectrum sp = eigenvalues(k);
    RngStream rng(31, std::uint64_t(10 * n + d));
    SandpileState st = init_gaussian(spec, rng);
    OdometerField u = spectral_odometer(sp, st.s);
    CHECK(u.u.minCoeff() == 0.0);
    Field resid = st.s + apply_generator(k, u.u) - 1.0;
    CHECK(resid.abs().maxCoeff() < 1e-9);
    Field oracle = dense_odometer_oracle(k, st.s);
    CHECK((u.u - oracle).abs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("spectral and toppling odometers coincide") {
  for (auto [d, n, alpha] : std::vector<std::tuple<int, int, double>>{
           {1, 16, 0.5}, {1, 8, 1.0}, {2, 8, 1.5}, {1, 8, 3.0}}) {
    LatticeSpec spec(d, n);
    LongRangeKernel k = build_kernel(spec, alpha, 1e-12);
    Spectrum sp = eigenvalues(k);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      RngStream rng(seed, 0);
      SandpileState st = init_gaussian(spec, rng);
      Field s0 = st.s;
      OdometerField spectral = spectral_odometer(sp, s0);
      StabilizationResult res = stabilize(std::move(st), k, 1e-12, 2000000);
      REQUIRE(res.converged);
      Field gap = min_normalized(res.state.u) - spectral.u;
      CHECK(gap.abs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("green table properties and the two-site value") {
  LatticeSpec spec(1, 2);
  Spectrum sp = eigenvalues(build_kernel(spec, 1.0, 1e-12));
  GreenTable g = green_function(sp);
  CHECK(g.row[0] - g.row[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  for (auto [d, n, alpha] :
       std::vector<std::tuple<int, int, double>>{{1, 8, 1.0}, {2, 6, 0.75}}) {
    LatticeSpec sp2(d, n);
    LongRangeKernel k = build_kernel(sp2, alpha, 1e-12);
    Spectrum spc = eigenvalues(k);
    GreenTable green = green_function(spc);
    // evenness and translation invariance through torus_diff
    for_each_site(sp2, [&](std::int64_t i, const Coords& c) {
      std::int64_t j = flat_index(canonical(Coords(-c), sp2), sp2);
      CHECK(green.row[i] == doctest::Approx(green.row[j]).epsilon(1e-13));
    });
    // generator of the row gives -delta_0 + n^{-d}
    Field image = apply_generator(k, green.row);
    Field expected = Field::Constant(sp2.sites(), 1.0 / double(sp2.sites()));
    expected[0] -= 1.0;
    CHECK((image - expected).abs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("covariance: symmetry and positive semidefiniteness") {
  for (auto [d, n, alpha] :
       std::vector<std::tuple<int, int, double>>{{1, 8, 1.0}, {2, 4, 1.5}}) {
    LatticeSpec spec(d, n);
    Spectrum sp = eigenvalues(build_kernel(spec, alpha, 1e-12));
    Field row = covariance_row(sp);
    const std::int64_t m = spec.sites();
    Eigen::MatrixXd C(m, m);
    for_each_site(spec, [&](std::int64_t i, const Coords& x) {
      for_each_site(spec, [&](std::int64_t j, const Coords& y) {
        C(i, j) = row[flat_index(torus_diff(y, x, spec), spec)];
      });
    });
    CHECK((C - C.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    CHECK(es.eigenvalues().minCoeff() > -1e-9);

    Coords x = site_at(1, spec), y = site_at(m - 1, spec);
    CHECK(field_covariance(sp, x, y) == doctest::Approx(field_covariance(sp, y, x)));
  }
}

TEST_CASE("sampler: odometer identity and convolution-route audit") {
  LatticeSpec spec(2, 6);
  Spectrum sp = eigenvalues(build_kernel(spec, 1.0, 1e-12));
  FieldSampler sampler(sp);

  RngStream rng(77, 0);
  Field sigma;
  Field s = sampler.draw_initial_mass(rng, &sigma);
  Field v = sampler.from_centered_mass(s - 1.0);

  // the spectral odometer of the same draw is exactly v - min v
  OdometerField u = spectral_odometer(sp, s);
  CHECK((u.u - (v - v.minCoeff())).abs().maxCoeff() < 1e-12);

  // space-domain convolution against the Green row gives the same field
  Field direct(spec.sites());
  for_each_site(spec, [&](std::int64_t i, const Coords& x) {
    KahanSum acc;
    for_each_site(spec, [&](std::int64_t j, const Coords& z) {
      acc.add(sampler.green().row[flat_index(torus_diff(x, z, spec), spec)] *
              (s[j] - 1.0));
    });
    direct[i] = acc.value();
  });
  CHECK((direct - v).abs().maxCoeff() < 1e-11);
}

TEST_CASE("sampled field matches its covariance (Monte Carlo)") {
  LatticeSpec spec(1, 8);
  Spectrum sp = eigenvalues(build_kernel(spec, 1.0, 1e-12));
  FieldSampler sampler(sp);
  Field row = covariance_row(sp);

  const int reps = 10000;
  double acc00 = 0.0, acc03 = 0.0, mean0 = 0.0;
  for (int r = 0; r < reps; ++r) {
    RngStream rng(2024, std::uint64_t(r));
    Field v = sampler.sample(rng);
    mean0 += v[0];
    acc00 += v[0] * v[0];
    acc03 += v[0] * v[3];
  }
  mean0 /= reps;
  double var0 = acc00 / reps - mean0 * mean0;
  double cov03 = acc03 / reps - mean0 * mean0;
  double se_var = row[0] * std::sqrt(2.0 / reps);
  double se_cov = std::sqrt((row[0] * row[0] + row[3] * row[3]) / reps);
  CHECK(std::abs(mean0) < 4.0 * std::sqrt(row[0] / reps));
  CHECK(std::abs(var0 - row[0]) < 3.0 * se_var);
  CHECK(std::abs(cov03 - row[3]) < 3.0 * se_cov);
}
