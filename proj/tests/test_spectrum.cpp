#include "doctest.h"

#include <cmath>

#include "fracpile/fft.hpp"
#include "fracpile/rng.hpp"
#include "fracpile/spectrum.hpp"

using namespace fracpile;

namespace {

Coords mode1(int v) {
  Coords w(1);
  w[0] = v;
  return w;
}

// Closed form of the stable-regime limit constant in one dimension:
//   c_tilde = 2 c_alpha (2 pi)^alpha Gamma(1-alpha) cos(pi alpha / 2) / alpha
// (at alpha = 1 the removable singularity evaluates to 2 c_alpha (2 pi)(pi/2)).
double c_tilde_exact_d1(double alpha) {
  double c_alpha = 1.0 / (2.0 * std::riemann_zeta(1.0 + alpha));
  double factor = alpha == 1.0
                      ? M_PI / 2.0
                      : std::tgamma(1.0 - alpha) * std::cos(M_PI * alpha / 2.0) / alpha;
  return 2.0 * c_alpha * std::pow(2.0 * M_PI, alpha) * factor;
}

}  // namespace

TEST_CASE("eigenvalue basics: d=1 n=2 alpha=1") {
  Spectrum sp = eigenvalues(build_kernel(LatticeSpec(1, 2), 1.0, 1e-12));
  CHECK(sp.lambda[0] == 0.0);
  CHECK(sp.at(mode1(-1)) == doctest::Approx(-1.5).epsilon(1e-12));
}

TEST_CASE("spectrum symmetry and negativity") {
  for (auto [d, n, alpha] : std::vector<std::tuple<int, int, double>>{
           {1, 16, 0.5}, {2, 8, 1.0}, {2, 8, 3.0}}) {
    Spectrum sp = eigenvalues(build_kernel(LatticeSpec(d, n), alpha, 1e-12));
    CHECK(sp.lambda[0] == 0.0);
    for_each_site(sp.spec, [&](std::int64_t i, const Coords& c) {
      if (i == 0) return;
      CHECK(sp.lambda[i] < 0.0);
      std::int64_t j = flat_index(canonical(Coords(-c), sp.spec), sp.spec);
      CHECK(sp.lambda[i] == sp.lambda[j]);
    });
  }
}

TEST_CASE("direct route matches the transform route within certificates") {
  for (auto [d, n, alpha] : std::vector<std::tuple<int, int, double>>{
           {1, 8, 1.0}, {1, 8, 0.5}, {2, 4, 1.5}, {2, 4, 3.0}}) {
    LongRangeKernel k = build_kernel(LatticeSpec(d, n), alpha, 1e-12);
    Spectrum sp = eigenvalues(k);
    const int radius = d == 1 ? 4000 : 600;
    for_each_site(k.spec, [&](std::int64_t i, const Coords& w) {
      if (i == 0) return;
      DirectEigenvalue de = eigenvalue_direct(k.spec, alpha, w, radius);
      CHECK(std::abs(de.value - sp.lambda[i]) <=
            de.cert + sp.kernel_cert * std::abs(de.value) + 1e-8);
      CHECK(de.value < 0.0);
    });
  }
}

TEST_CASE("direct eigenvalue rejects the zero mode") {
  CHECK_THROWS_AS(eigenvalue_direct(LatticeSpec(1, 8), 1.0, mode1(0), 100),
                  std::invalid_argument);
}

TEST_CASE("mode-size scaling: lambda at (2w, 2n) equals lambda at (w, n)") {
  // sin^2(pi x (2w) / (2n)) = sin^2(pi x w / n) termwise, so the full lattice
  // sums coincide exactly; the periodized kernels must reproduce that.
  for (double alpha : {0.5, 1.0, 1.5}) {
    Spectrum sp8 = eigenvalues(build_kernel(LatticeSpec(1, 8), alpha, 1e-13));
    Spectrum sp16 = eigenvalues(build_kernel(LatticeSpec(1, 16), alpha, 1e-13));
    for (int w : {1, 2, 3}) {
      CHECK(sp8.at(mode1(w)) ==
            doctest::Approx(sp16.at(mode1(2 * w))).epsilon(1e-11));
    }
  }
}

TEST_CASE("generator diagonalizes on the Fourier basis") {
  RngStream rng(3, 0);
  for (auto [d, n, alpha] :
       std::vector<std::tuple<int, int, double>>{{1, 16, 1.0}, {2, 8, 0.75}}) {
    LongRangeKernel k = build_kernel(LatticeSpec(d, n), alpha, 1e-12);
    Spectrum sp = eigenvalues(k);
    Field f(k.spec.sites());
    for (std::int64_t i = 0; i < f.size(); ++i) f[i] = rng.normal();
    CField fhat = dft_forward(k.spec, f);
    for (std::int64_t i = 0; i < f.size(); ++i) fhat[i] *= sp.lambda[i];
    Field via_spectrum = dft_inverse_real(k.spec, fhat);
    Field direct = apply_generator(k, f);
    CHECK((via_spectrum - direct).abs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("limit constant: quadrature vs closed form in d=1") {
  for (double alpha : {0.5, 1.0, 1.5}) {
    LimitConstant lc = limit_constant(1, alpha, LimitMethod::quadrature);
    double exact = c_tilde_exact_d1(alpha);
    INFO("alpha = ", alpha, " got ", lc.c_tilde, " want ", exact);
    CHECK(std::abs(lc.c_tilde - exact) <= lc.error_estimate + 1e-9 * exact);
    CHECK(lc.c_tilde > 0.0);
  }
  // alpha = 1 closed form collapses to exactly 6
  CHECK(limit_constant(1, 1.0, LimitMethod::quadrature).c_tilde ==
        doctest::Approx(6.0).epsilon(1e-8));
}

TEST_CASE("limit constant: the two methods agree (anti-factor-2 audit)") {
  for (auto [d, alpha] : std::vector<std::pair<int, double>>{{1, 1.0}, {1, 0.5}}) {
    LimitConstant q = limit_constant(d, alpha, LimitMethod::quadrature);
    LimitConstant e =
        limit_constant(d, alpha, LimitMethod::extrapolation, {32, 64, 128, 256, 512});
    INFO("d=", d, " alpha=", alpha, " quad=", q.c_tilde, " extrap=", e.c_tilde);
    CHECK(std::abs(q.c_tilde - e.c_tilde) <=
          q.error_estimate + e.error_estimate + 1e-4 * q.c_tilde);
  }
}

TEST_CASE("limit constant domain") {
  CHECK_THROWS_AS(limit_constant(1, 2.0, LimitMethod::quadrature), std::invalid_argument);
  CHECK_THROWS_AS(limit_constant(1, -1.0, LimitMethod::quadrature), std::invalid_argument);
  CHECK_THROWS_AS(limit_constant_gamma2(1, 1.0), std::invalid_argument);
}

TEST_CASE("rescaled eigenvalue approaches the limit monotonically from below") {
  double c6 = 6.0;
  double prev = 0.0;
  for (int n : {32, 64, 128, 256}) {
    Spectrum sp = eigenvalues(build_kernel(LatticeSpec(1, n), 1.0, 1e-12));
    double v = n * (-sp.at(mode1(1))) / c6;
    CHECK(v > prev);
    prev = v;
  }
  CHECK(prev > 0.9);
  CHECK(prev < 1.001);
}

TEST_CASE("rate report: stable regime smoke") {
  RateReport rep = verify_rate_lemmas(1, 1.0, {64, 128, 256, 512}, 3);
  CHECK(rep.band_min > 0.0);
  CHECK(rep.band_max < std::numeric_limits<double>::infinity());
  REQUIRE(!rep.fits.empty());
  CHECK(rep.fits.front().slope == doctest::Approx(-1.0).epsilon(0.3));
  CHECK(rep.inv_square_bound > 0.0);
  CHECK(rep.c_tilde == doctest::Approx(6.0).epsilon(1e-6));

  std::string json_text = rate_report_to_json(rep);
  CHECK(json_text.find("fitted_exponent") != std::string::npos);
  CHECK(json_text.find("two-sided eigenvalue band") != std::string::npos);
}

TEST_CASE("gamma=2 limit constant closed form: alpha=3, d=1") {
  // n^2(-lambda_{e1}) -> 2 c_3 pi^2 sum_z z^{-2} = 2 pi^2 zeta(2)/zeta(4) = 30
  double exact = 2.0 * M_PI * M_PI * std::riemann_zeta(2.0) / std::riemann_zeta(4.0);
  CHECK(exact == doctest::Approx(30.0).epsilon(1e-14));
  LimitConstant lc = limit_constant_gamma2(1, 3.0, {64, 128, 256, 512});
  CHECK(std::abs(lc.c_tilde - 30.0) <= lc.error_estimate + 0.05);
}

TEST_CASE("rate report: gamma=2 regimes smoke") {
  RateReport rep3 = verify_rate_lemmas(1, 3.0, {32, 64, 128, 256}, 2);
  REQUIRE(rep3.stabilization.size() == 3);
  CHECK(rep3.stabilization.back() < rep3.stabilization.front());
  CHECK(rep3.c_tilde > 0.0);
  for (const auto& row : rep3.r_table)
    for (double r : row) CHECK(r > 0.0);

  RateReport rep2 = verify_rate_lemmas(1, 2.0, {32, 64, 128, 256}, 2);
  CHECK(rep2.stabilization.back() < 0.2);

  CHECK_THROWS_AS(verify_rate_lemmas(1, 1.0, {8, 16, 32}, 2), std::invalid_argument);
  CHECK_THROWS_AS(verify_rate_lemmas(1, 1.0, {8, 8, 16, 32}, 2), std::invalid_argument);
}
