#include "doctest.h"

#include <cmath>

#include "fracpile/fields.hpp"
#include "fracpile/rng.hpp"

using namespace fracpile;

namespace {
Coords mode(std::initializer_list<int> v) {
  Coords c(int(v.size()));
  int i = 0;
  for (int x : v) c[i++] = x;
  return c;
}

FieldSpec unit_field_spec(double alpha) {
  LimitConstant c;
  c.c_tilde = 1.0;
  c.method = "fixed";
  return FieldSpec(alpha, c);
}
}  // namespace

TEST_CASE("odometer growth reference cases") {
  CHECK(odometer_growth_reference(1, 1.5, 10) == doctest::Approx(10.0));       // n^{g-d/2}
  CHECK(odometer_growth_reference(2, 1.0, 10) == doctest::Approx(std::log(10.0)));
  CHECK(odometer_growth_reference(4, 1.5, 10) ==
        doctest::Approx(std::sqrt(std::log(10.0))));
  for (auto [d, g] : std::vector<std::pair<int, double>>{{1, 1.5}, {2, 1.0}, {4, 1.5}}) {
    double prev = 0.0;
    for (int n : {4, 8, 16, 32, 64}) {
      double v = odometer_growth_reference(d, g, n);
      CHECK(v >= prev);
      prev = v;
    }
  }
  CHECK_THROWS_AS(odometer_growth_reference(1, 0.0, 8), std::invalid_argument);
}

TEST_CASE("variogram growth reference cases") {
  // d=2, alpha=1 = d/2: log r
  CHECK(variogram_growth_reference(2, 1.0, 64, 8) == doctest::Approx(std::log(8.0)));
  // d=3, alpha=1 < d/2: constant
  CHECK(variogram_growth_reference(3, 1.0, 64, 5) == doctest::Approx(1.0));
  // d=1, alpha in (d/2, d/2+1): r^{2a-d}
  CHECK(variogram_growth_reference(1, 1.2, 64, 4) == doctest::Approx(std::pow(4.0, 1.4)));
  // boundary alpha = d/2+1 carries the log(n/r) factor
  CHECK(variogram_growth_reference(1, 1.5, 64, 4) ==
        doctest::Approx(std::log(16.0) * 16.0));
  // d=1, alpha above d/2+1: n^{2a-d-2} r^2
  CHECK(variogram_growth_reference(1, 1.8, 64, 4) ==
        doctest::Approx(std::pow(64.0, 0.6) * 16.0));
  // degenerate log point
  CHECK(variogram_growth_reference(2, 1.0, 64, 1) == doctest::Approx(0.0));
  CHECK_THROWS_AS(variogram_growth_reference(2, 1.0, 64, 0.5), std::invalid_argument);
}

TEST_CASE("variogram equals the covariance polarization") {
  for (auto [d, n, alpha] : std::vector<std::tuple<int, int, double>>{
           {1, 8, 0.75}, {2, 8, 1.5}, {2, 6, 1.0}}) {
    LatticeSpec spec(d, n);
    Spectrum sp = eigenvalues(build_kernel(spec, alpha, 1e-12));
    Field table = variogram_table(sp);
    for_each_site(spec, [&](std::int64_t i, const Coords& x) {
      double direct = variogram(sp, x);
      Coords zero = Coords::Zero(d);
      double polar = field_covariance(sp, zero, zero) + field_covariance(sp, x, x) -
                     2.0 * field_covariance(sp, zero, x);
      CHECK(std::abs(direct - polar) < 1e-10 * (1.0 + std::abs(direct)));
      CHECK(std::abs(table[i] - direct) < 1e-10 * (1.0 + std::abs(direct)));
    });
    CHECK(variogram(sp, Coords::Zero(d)) == doctest::Approx(0.0));
  }
}

TEST_CASE("variogram-to-reference ratio is two-sided bounded (small instance)") {
  const int n = 32;
  LatticeSpec spec(2, n);
  for (double alpha : {0.75, 1.0, 1.5}) {
    Spectrum sp = eigenvalues(build_kernel(spec, alpha, 1e-12));
    Field table = variogram_table(sp);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for_each_site(spec, [&](std::int64_t i, const Coords& x) {
      double r = l2_norm(x);
      if (r < 2.0 || r > n / 4.0) return;
      double ratio = table[i] / variogram_growth_reference(2, alpha, n, r);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    });
    INFO("alpha=", alpha, " band=[", lo, ",", hi, "]");
    CHECK(hi / lo <= 5.0);
  }
}

TEST_CASE("test functions validate their modes") {
  CHECK_THROWS_AS(TestFunction::fourier_mode(mode({0, 0})), std::invalid_argument);
  CHECK_THROWS_AS(TestFunction(2, {{mode({1, 0}), 1.0}, {mode({1, 0}), 2.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(TestFunction(2, {{mode({1}), 1.0}}), std::invalid_argument);
  CHECK_NOTHROW(TestFunction(2, {{mode({1, 0}), 1.0}, {mode({-1, 0}), 1.0}}));
}

TEST_CASE("cell integrals sum to the (zero) mean of the test function") {
  LatticeSpec spec(2, 16);
  TestFunction f(2, {{mode({1, 0}), {0.7, 0.1}}, {mode({2, -1}), {0.0, -1.3}}});
  std::complex<double> total = 0.0;
  for_each_site(spec, [&](std::int64_t, const Coords& x) {
    total += cell_integral(f, spec, x);
  });
  CHECK(std::abs(total) < 1e-13);
}

TEST_CASE("pairing: constants vanish, bilinearity, engine equivalence") {
  LatticeSpec spec(2, 8);
  FieldSpec fs = unit_field_spec(1.0);
  TestFunction f = TestFunction::fourier_mode(mode({1, 0}));
  TestFunction g = TestFunction::fourier_mode(mode({1, 1}));

  CHECK(std::abs(pair_field(Field::Constant(64, 3.7), f, fs, spec)) < 1e-13);

  RngStream rng(8, 0);
  Field u(64), v(64);
  for (int i = 0; i < 64; ++i) {
    u[i] = rng.normal();
    v[i] = rng.normal();
  }
  auto puv = pair_field(u + 2.0 * v, f, fs, spec);
  auto pu = pair_field(u, f, fs, spec);
  auto pv = pair_field(v, f, fs, spec);
  CHECK(std::abs(puv - (pu + 2.0 * pv)) < 1e-12);

  TestFunction fg(2, {{mode({1, 0}), 1.0}, {mode({1, 1}), {0.0, 2.0}}});
  auto combined = pair_field(u, fg, fs, spec);
  auto parts = pu + std::complex<double>(0.0, 2.0) * pair_field(u, g, fs, spec);
  CHECK(std::abs(combined - parts) < 1e-12);

  PairingEngine engine(spec, fs, {mode({1, 0}), mode({1, 1})});
  auto fast = engine.pair(u);
  CHECK(std::abs(fast[0] - pu) < 1e-12);
  CHECK(std::abs(fast[1] - pair_field(u, g, fs, spec)) < 1e-12);
}

TEST_CASE("pairing is invariant under constant shifts (min-normalization)") {
  LatticeSpec spec(2, 8);
  Spectrum sp = eigenvalues(build_kernel(spec, 1.0, 1e-12));
  FieldSampler sampler(sp);
  RngStream rng(4, 0);
  Field v = sampler.sample(rng);
  FieldSpec fs = unit_field_spec(1.0);
  TestFunction f = TestFunction::fourier_mode(mode({2, 0}));
  auto a = pair_field(v, f, fs, spec);
  auto b = pair_field(Field(v - v.minCoeff()), f, fs, spec);
  CHECK(std::abs(a - b) < 1e-12 * (1.0 + std::abs(a)));
}

TEST_CASE("limit covariance on modes") {
  TestFunction f = TestFunction::fourier_mode(mode({1, 1}));
  TestFunction g = TestFunction::fourier_mode(mode({2, 0}));
  CHECK(limit_covariance(f, f, 1.0).real() == doctest::Approx(0.5));  // ||(1,1)||^-2
  CHECK(std::abs(limit_covariance(f, g, 1.0)) == doctest::Approx(0.0));
  CHECK(limit_covariance(g, g, 2.0).real() == doctest::Approx(1.0 / 16.0));
  TestFunction h(2, {{mode({1, 1}), {0.0, 3.0}}});
  CHECK(limit_covariance(h, h, 1.0).real() == doctest::Approx(4.5));
}

TEST_CASE("cell-averaged pairing converges to the continuum integral at rate 1/n") {
  // u(x) = sin(2 pi x_1 / n) sampled on the lattice, f = phi_{-e1}:
  // integral over the torus is -i/2.
  const std::complex<double> target(0.0, -0.5);
  FieldSpec fs = unit_field_spec(1.0);  // alpha=1, d=2: a(n)=1, c=1
  double prev_err = std::numeric_limits<double>::infinity();
  for (int n : {8, 16, 32, 64}) {
    LatticeSpec spec(2, n);
    Field u(spec.sites());
    for_each_site(spec, [&](std::int64_t i, const Coords& x) {
      u[i] = std::sin(2.0 * M_PI * x[0] / n);
    });
    TestFunction f = TestFunction::fourier_mode(mode({-1, 0}));
    auto val = pair_field(u, f, fs, spec);
    double err = std::abs(val - target);
    CHECK(err < prev_err + 1e-15);
    CHECK(err < 4.0 / n);
    prev_err = err;
  }
}

TEST_CASE("field normalization switches at alpha = 2") {
  CHECK(unit_field_spec(1.0).normalization(2, 16) == doctest::Approx(1.0));
  CHECK(unit_field_spec(0.5).normalization(1, 16) == doctest::Approx(1.0));  // (1-1)/2
  CHECK(unit_field_spec(2.0).normalization(2, 16) ==
        doctest::Approx(std::pow(16.0, -1.0) * std::log(16.0)));
  CHECK(unit_field_spec(3.0).normalization(2, 16) == doctest::Approx(1.0 / 16.0));
  CHECK(unit_field_spec(1.0).gamma == doctest::Approx(1.0));
  CHECK(unit_field_spec(3.0).gamma == doctest::Approx(2.0));
}
