#include "fracpile/lattice_sum.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>

namespace fracpile {
namespace {

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration.
void gauss_legendre(int m, std::vector<double>& x, std::vector<double>& w) {
  x.assign(m, 0.0);
  w.assign(m, 0.0);
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < m; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = m * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[m - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[m - 1 - i] = w[i];
  }
}

// J_m(sigma) = integral over [-1,1]^m of (1 + ||u||^2)^{-sigma/2}.
double cross_section_integral(int m, double sigma) {
  if (m == 0) return 1.0;
  static std::map<std::pair<int, double>, double> cache;
  static std::mutex mtx;
  {
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find({m, sigma});
    if (it != cache.end()) return it->second;
  }
  static std::vector<double> gx, gw;
  static std::once_flag once;
  std::call_once(once, [] { gauss_legendre(48, gx, gw); });

  double val = 0.0;
  if (m == 1) {
    for (size_t i = 0; i < gx.size(); ++i)
      val += gw[i] * std::pow(1.0 + gx[i] * gx[i], -sigma / 2.0);
  } else if (m == 2) {
    for (size_t i = 0; i < gx.size(); ++i)
      for (size_t j = 0; j < gx.size(); ++j)
        val += gw[i] * gw[j] *
               std::pow(1.0 + gx[i] * gx[i] + gx[j] * gx[j], -sigma / 2.0);
  } else if (m == 3) {
    for (size_t i = 0; i < gx.size(); ++i)
      for (size_t j = 0; j < gx.size(); ++j)
        for (size_t k = 0; k < gx.size(); ++k)
          val += gw[i] * gw[j] * gw[k] *
                 std::pow(1.0 + gx[i] * gx[i] + gx[j] * gx[j] + gx[k] * gx[k],
                          -sigma / 2.0);
  } else {
    throw std::invalid_argument("cross_section_integral: d > 4 not supported");
  }
  std::lock_guard<std::mutex> lock(mtx);
  cache[{m, sigma}] = val;
  return val;
}

// Iterate k over the sup-norm shell  R_lo < ||k||_inf <= R_hi  of Z^d
// (R_lo < 0 includes the origin).
template <typename Fn>
void for_each_shell_point(int d, int R_lo, int R_hi, Fn&& fn) {
  std::vector<int> k(d, -R_hi);
  for (;;) {
    int kinf = 0;
    for (int j = 0; j < d; ++j) kinf = std::max(kinf, std::abs(k[j]));
    if (kinf > R_lo) fn(k);
    int axis = d - 1;
    while (axis >= 0) {
      if (++k[axis] <= R_hi) break;
      k[axis] = -R_hi;
      --axis;
    }
    if (axis < 0) break;
  }
}

}  // namespace

double cube_complement_integral(int d, double sigma, double H) {
  if (sigma <= d) throw std::invalid_argument("cube_complement_integral: sigma <= d");
  return 2.0 * d / (sigma - d) * std::pow(H, d - sigma) *
         cross_section_integral(d - 1, sigma);
}

double tail_bound(int R, int d, double alpha) {
  if (R < 2) throw std::invalid_argument("tail_bound: R must be >= 2");
  if (alpha <= 0) throw std::invalid_argument("tail_bound: alpha must be > 0");
  return d * std::pow(2.0, d) / alpha * std::pow(double(R - 1), -alpha);
}

ResidueSumResult periodized_power_sum(const LatticeSpec& spec, double alpha,
                                      double rel_tol) {
  if (alpha <= 0) throw std::invalid_argument("periodized_power_sum: alpha <= 0");
  if (!(rel_tol > 0)) throw std::invalid_argument("periodized_power_sum: rel_tol <= 0");
  const int d = spec.d;
  const int n = spec.n;
  const double s = d + alpha;
  const double p_rich = alpha + 4.0;  // residual order of the corrected tail
  const std::int64_t sites = spec.sites();
  const double c_delta = s * (s + 2.0 - d);

  // Canonical coordinate of every site along each axis, in flat order, so a
  // whole shell image is accumulated with array arithmetic (vectorized
  // exp/log instead of per-site pow calls).
  std::vector<Eigen::ArrayXd> axis_coord;
  for (int j = 0; j < d; ++j) axis_coord.emplace_back(Eigen::ArrayXd(sites));
  Eigen::ArrayXd xsq(sites);
  for_each_site(spec, [&](std::int64_t i, const Coords& c) {
    for (int j = 0; j < d; ++j) axis_coord[size_t(j)][i] = double(c[j]);
    xsq[i] = double(sq_norm(c));
  });

  // Compensated accumulation, vectorized over sites.
  Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(sites);
  Eigen::ArrayXd comp = Eigen::ArrayXd::Zero(sites);
  Eigen::ArrayXd r2(sites), term(sites), y(sites), t(sites);
  // Two Richardson levels over the doubling radii: the corrected-tail error
  // is an even power series c1 R^-(a+4) + c2 R^-(a+6) + ..., so eliminating
  // the first two terms leaves R^-(a+8) and small radii already certify.
  Eigen::ArrayXd prev_est, prev_lvl1, prev_lvl2;
  ResidueSumResult out;

  const double term_budget = 1.5e9;  // direct-sum work cap; build fails loudly past it
  double terms_done = 0.0;
  int R_prev = -1;  // shells are (R_prev, R] in ||k||_inf
  std::vector<int> radii = {2};
  while (radii.back() < (1 << 24)) radii.push_back(radii.back() * 2);

  double H_prev = 0.0;
  for (size_t stage = 0; stage < radii.size(); ++stage) {
    const int R = radii[stage];
    double shell_terms = std::pow(2.0 * R + 1.0, d) * double(sites);
    if (terms_done + shell_terms > term_budget)
      throw std::runtime_error(
          "periodized_power_sum: requested tolerance unattainable within the "
          "configured image-radius budget (alpha too small or rel_tol too tight)");
    terms_done += shell_terms;

    for_each_shell_point(d, R_prev, R, [&](const std::vector<int>& k) {
      bool k_zero = true;
      for (int j = 0; j < d; ++j) k_zero &= (k[j] == 0);
      r2 = (axis_coord[0] + double(n) * k[0]).square();
      for (int j = 1; j < d; ++j) r2 += (axis_coord[size_t(j)] + double(n) * k[j]).square();
      if (k_zero) r2[0] = 1.0;  // placeholder; the z = 0 term is zeroed below
      term = (r2.log() * (-0.5 * s)).exp();
      if (k_zero) term[0] = 0.0;
      // Kahan step on the whole array
      y = term - comp;
      t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    });
    R_prev = R;

    // Tail correction on cells of side n past image radius R.
    const double H = (R + 0.5) * n;
    const double A_s = cube_complement_integral(d, s, H);
    const double A_s2 = cube_complement_integral(d, s + 2.0, H);
    const double invnd = 1.0 / double(sites);
    Eigen::ArrayXd est =
        sum + (A_s + (xsq / (2.0 * d) - n * n / 24.0) * c_delta * A_s2) * invnd;

    if (stage > 0) {
      auto certify = [&](const Eigen::ArrayXd& values, const Eigen::ArrayXd& deltas) {
        KahanSum tot, cert;
        for (std::int64_t i = 0; i < sites; ++i) {
          tot.add(values[i]);
          cert.add(std::abs(deltas[i]));
        }
        double total = tot.value();
        double cert_total = cert.value() + 8.0 * 1e-16 * total;
        if (cert_total <= rel_tol * total) {
          out.values = values;
          out.total = total;
          out.cert = cert_total;
          out.radius = R;
          return true;
        }
        return false;
      };
      // the tail's natural variable is H, and successive H ratios are not 2
      const double ratio = H / H_prev;
      const double denom1 = std::pow(ratio, p_rich) - 1.0;
      Eigen::ArrayXd lvl1 = est + (est - prev_est) / denom1;
      if (stage > 1) {
        const double denom2 = std::pow(ratio, p_rich + 2.0) - 1.0;
        Eigen::ArrayXd lvl2 = lvl1 + (lvl1 - prev_lvl1) / denom2;
        if (stage > 2 && certify(lvl2, Eigen::ArrayXd(lvl2 - prev_lvl2))) return out;
        prev_lvl2 = std::move(lvl2);
      }
      if (certify(lvl1, Eigen::ArrayXd((est - prev_est) / denom1))) return out;
      prev_lvl1 = std::move(lvl1);
    }
    prev_est = std::move(est);
    H_prev = H;
  }
  throw std::runtime_error("periodized_power_sum: radius schedule exhausted");
}

LatticeSumResult lattice_power_sum(int d, double alpha, double rel_tol) {
  if (d < 1 || d > 4) throw std::invalid_argument("lattice_power_sum: d out of range");
  if (alpha <= 0) throw std::invalid_argument("lattice_power_sum: alpha <= 0");
  const double s = d + alpha;
  const double p_rich = alpha + 4.0;
  const double c_delta = s * (s + 2.0 - d);

  KahanSum acc;
  int R_prev = -1;
  double prev_est = 0.0;
  LatticeSumResult out;
  int R = 16;
  for (int stage = 0; stage < 24; ++stage) {
    if (std::pow(2.0 * R + 1.0, d) > 1.5e9)
      throw std::runtime_error("lattice_power_sum: tolerance unattainable");
    for_each_shell_point(d, R_prev, R, [&](const std::vector<int>& k) {
      double r2 = 0.0;
      for (int j = 0; j < d; ++j) r2 += double(k[j]) * k[j];
      if (r2 != 0.0) acc.add(std::pow(r2, -0.5 * s));
    });
    R_prev = R;

    const double H = R + 0.5;
    double est = acc.value() + cube_complement_integral(d, s, H) -
                 (1.0 / 24.0) * c_delta * cube_complement_integral(d, s + 2.0, H);
    if (stage > 0) {
      double corr = (est - prev_est) / (std::pow(H / (0.5 * R + 0.5), p_rich) - 1.0);
      double extrap = est + corr;
      double cert = std::abs(corr) + 8e-16 * extrap;
      if (cert <= rel_tol * extrap) {
        out.value = extrap;
        out.cert = cert;
        out.radius = R;
        return out;
      }
    }
    prev_est = est;
    R *= 2;
  }
  throw std::runtime_error("lattice_power_sum: radius schedule exhausted");
}

double lattice_tail_estimate(int d, double alpha, int R) {
  const double s = d + alpha;
  const double H = R + 0.5;
  return cube_complement_integral(d, s, H) -
         (1.0 / 24.0) * s * (s + 2.0 - d) * cube_complement_integral(d, s + 2.0, H);
}

}  // namespace fracpile
