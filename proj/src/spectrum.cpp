#include "fracpile/spectrum.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "json.hpp"

#include "fracpile/fft.hpp"

namespace fracpile {
namespace {

const LatticeConstant& cached_lattice_constant(int d, double alpha) {
  static std::map<std::pair<int, double>, LatticeConstant> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(d, alpha);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, lattice_constant(d, alpha, 1e-13)).first;
  return it->second;
}

std::vector<int> default_ladder(int d) {
  switch (d) {
    case 1: return {64, 128, 256, 512, 1024};
    case 2: return {16, 32, 64, 128, 256};
    default: return {8, 16, 32};
  }
}

// Unit frequency along the first axis.
Coords unit_mode(int d) {
  Coords w = Coords::Zero(d);
  w[0] = 1;
  return w;
}

struct LinFit {
  double intercept = 0.0, slope = 0.0, slope_stderr = 0.0, r2 = 0.0;
};

LinFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const int m = int(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = m * sxx - sx * sx;
  LinFit f;
  f.slope = (m * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / m;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / m;
  for (int i = 0; i < m; ++i) {
    double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  if (m > 2) f.slope_stderr = std::sqrt(ss_res / (m - 2) / (sxx - sx * sx / m));
  return f;
}

// Modes with ||w|| <= max_norm, one representative per +/- pair.
std::vector<Coords> low_modes(int d, double max_norm) {
  LatticeSpec probe(d, 2 * int(max_norm) + 4);
  std::vector<Coords> out;
  for_each_site(probe, [&](std::int64_t, const Coords& c) {
    if (sq_norm(c) == 0 || l2_norm(c) > max_norm) return;
    for (int j = 0; j < d; ++j) {
      if (c[j] > 0) {
        out.push_back(c);
        return;
      }
      if (c[j] < 0) return;  // the mirrored partner represents this pair
    }
  });
  std::sort(out.begin(), out.end(), [](const Coords& a, const Coords& b) {
    if (sq_norm(a) != sq_norm(b)) return sq_norm(a) < sq_norm(b);
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                        b.data() + b.size());
  });
  return out;
}

}  // namespace

Spectrum eigenvalues(const LongRangeKernel& kernel) {
  const LatticeSpec& spec = kernel.spec;
  CField data = kernel.weights.cast<std::complex<double>>();
  dft_forward(spec, data);
  double imag_res = data.imag().abs().maxCoeff();
  if (imag_res > 1e-12)
    throw std::runtime_error("eigenvalues: transform of a symmetric kernel has imaginary part");

  Spectrum sp;
  sp.spec = spec;
  sp.alpha = kernel.alpha;
  sp.kernel_cert = 2.0 * kernel.tail_cert + 1e-14;
  sp.lambda = data.real() - 1.0;
  sp.lambda[0] = 0.0;
  // lambda(w) = lambda(-w) exactly after pair averaging.
  for_each_site(spec, [&](std::int64_t i, const Coords& c) {
    std::int64_t j = flat_index(canonical(Coords(-c), spec), spec);
    if (j > i) {
      double avg = 0.5 * (sp.lambda[i] + sp.lambda[j]);
      sp.lambda[i] = avg;
      sp.lambda[j] = avg;
    }
  });
  for (std::int64_t i = 1; i < spec.sites(); ++i)
    if (!(sp.lambda[i] < 0.0))
      throw std::runtime_error("eigenvalues: nonzero mode with nonnegative eigenvalue");
  return sp;
}

DirectEigenvalue eigenvalue_direct(const LatticeSpec& spec, double alpha,
                                   const Coords& w, int R) {
  if (sq_norm(w) == 0)
    throw std::invalid_argument("eigenvalue_direct: w = 0 is the trivial eigenvalue");
  if (w.size() != spec.d) throw std::invalid_argument("eigenvalue_direct: dimension mismatch");
  const int d = spec.d;
  const int n = spec.n;
  const double s = d + alpha;
  const double c_delta = s * (s + 2.0 - d);
  const double p_rich = alpha + 4.0;
  const std::int64_t sites = spec.sites();

  // sin^2(pi x.w / n) and cos(2 pi x.w / n) depend only on the residue class.
  Eigen::ArrayXd sin2(sites), cos2(sites), xsq(sites);
  for_each_site(spec, [&](std::int64_t i, const Coords& c) {
    double phase = 0.0;
    for (int j = 0; j < d; ++j) phase += double(c[j]) * w[j];
    double t = M_PI * phase / n;
    sin2[i] = std::sin(t) * std::sin(t);
    cos2[i] = std::cos(2.0 * t);
    xsq[i] = double(sq_norm(c));
  });

  // Direct sums over residue-complete cubes of image radius m and m/2.
  const int m_hi = std::max(4, (R + n / 2) / n);
  const int m_lo = std::max(2, m_hi / 2);
  auto direct_sum = [&](int m_from, int m_to, std::vector<KahanSum>& acc) {
    std::vector<double> coord(n);
    for (int q = 0; q < n; ++q) coord[q] = canonical_coord(q, n);
    std::vector<int> k(d, -m_to);
    for (;;) {
      int kinf = 0;
      for (int j = 0; j < d; ++j) kinf = std::max(kinf, std::abs(k[j]));
      if (kinf > m_from && kinf <= m_to) {
        bool k_zero = (kinf == 0);
        std::vector<std::int64_t> digits(d, 0);
        for (std::int64_t i = 0; i < sites; ++i) {
          double r2 = 0.0;
          for (int j = 0; j < d; ++j) {
            double z = coord[digits[j]] + double(n) * k[j];
            r2 += z * z;
          }
          if (!(k_zero && r2 == 0.0)) acc[size_t(i)].add(std::pow(r2, -0.5 * s));
          int axis = d - 1;
          while (axis >= 0 && ++digits[axis] == n) {
            digits[axis] = 0;
            --axis;
          }
        }
      }
      int axis = d - 1;
      while (axis >= 0) {
        if (++k[axis] <= m_to) break;
        k[axis] = -m_to;
        --axis;
      }
      if (axis < 0) break;
    }
  };

  std::vector<KahanSum> acc(static_cast<size_t>(sites));
  direct_sum(-1, m_lo, acc);
  auto weighted_estimate = [&](const std::vector<KahanSum>& a, int m) {
    const double H = (m + 0.5) * n;
    const double A_s = cube_complement_integral(d, s, H);
    const double A_s2 = cube_complement_integral(d, s + 2.0, H);
    KahanSum total;
    for (std::int64_t i = 0; i < sites; ++i) {
      double tail = (A_s + (xsq[i] / (2.0 * d) - n * n / 24.0) * c_delta * A_s2) / sites;
      total.add(sin2[i] * (a[size_t(i)].value() + tail));
    }
    return total.value();
  };
  const double est_lo = weighted_estimate(acc, m_lo);
  direct_sum(m_lo, m_hi, acc);
  const double est_hi = weighted_estimate(acc, m_hi);

  const double denom = std::pow((m_hi + 0.5) / (m_lo + 0.5), p_rich) - 1.0;
  const double corr = (est_hi - est_lo) / denom;
  const double series = est_hi + corr;

  const LatticeConstant& c = cached_lattice_constant(d, alpha);
  DirectEigenvalue out;
  out.value = -2.0 * c.c_alpha * series;
  out.cert = 2.0 * (c.c_alpha * std::abs(corr) + c.c_alpha * c.tail_cert * series);
  return out;
}

LimitConstant limit_constant(int d, double alpha, LimitMethod method,
                             std::vector<int> ladder) {
  if (!(alpha > 0.0 && alpha < 2.0))
    throw std::invalid_argument("limit_constant: alpha must lie in (0,2)");

  if (method == LimitMethod::quadrature) {
    const LatticeConstant& c = cached_lattice_constant(d, alpha);

    // Angular reduction: the integral of sin^2(pi z_1) ||z||^{-(d+alpha)}
    // equals (omega_{d-1}/2) * int_0^inf r^{-1-alpha} (1 - L_d(2 pi r)) dr,
    // where L_1 = cos, L_2 = J_0, L_3 = sinc (the radial means of cos(t u_1)).
    auto lam = [d](double t) -> double {
      switch (d) {
        case 1: return std::cos(t);
        case 2: return std::cyl_bessel_j(0.0, t);
        case 3: return t == 0.0 ? 1.0 : std::sin(t) / t;
        default: throw std::invalid_argument("limit_constant: quadrature supports d <= 3");
      }
    };
    const double omega =
        2.0 * std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0);  // |S^{d-1}|

    // (0,1]: term-by-term integration of the power series of 1 - L_d.
    double inner = 0.0, inner_err = 0.0;
    {
      double coef = 1.0;  // c_m with sign, recurrence per d
      for (int m = 1; m <= 60; ++m) {
        switch (d) {
          case 1: coef /= (2.0 * m - 1.0) * (2.0 * m); break;         // 1/(2m)!
          case 2: coef /= 4.0 * m * m; break;                          // 1/(4^m (m!)^2)
          case 3: coef /= (2.0 * m) * (2.0 * m + 1.0); break;          // 1/(2m+1)!
        }
        double term = ((m % 2) ? 1.0 : -1.0) * coef * std::pow(2.0 * M_PI, 2.0 * m) /
                      (2.0 * m - alpha);
        inner += term;
        inner_err = std::abs(term);
        if (inner_err < 1e-17 * std::abs(inner)) break;
      }
    }

    // [1, Z]: composite Gauss-Legendre, quarter-period panels.
    const double Z = 256.0;
    double mid = 0.0;
    {
      static const double gx[8] = {-0.9602898564975362, -0.7966664774136267,
                                   -0.5255324099163290, -0.1834346424956498,
                                   0.1834346424956498,  0.5255324099163290,
                                   0.7966664774136267,  0.9602898564975362};
      static const double gw[8] = {0.1012285362903763, 0.2223810344533745,
                                   0.3137066458778873, 0.3626837833783620,
                                   0.3626837833783620, 0.3137066458778873,
                                   0.2223810344533745, 0.1012285362903763};
      const double h = 0.25;
      for (double a = 1.0; a < Z - 1e-9; a += h) {
        double acc = 0.0;
        for (int i = 0; i < 8; ++i) {
          double r = a + 0.5 * h * (gx[i] + 1.0);
          acc += gw[i] * std::pow(r, -1.0 - alpha) * (1.0 - lam(2.0 * M_PI * r));
        }
        mid += 0.5 * h * acc;
      }
    }

    // [Z, inf): exact power part minus the oscillatory remainder, which is
    // integrated by parts twice (evaluated terms + bound on the rest).
    double tail = std::pow(Z, -alpha) / alpha;
    double tail_err;
    {
      const double twopi = 2.0 * M_PI;
      if (d == 1) {
        double o = -std::sin(twopi * Z) * std::pow(Z, -1.0 - alpha) / twopi +
                   (1.0 + alpha) * std::cos(twopi * Z) * std::pow(Z, -2.0 - alpha) /
                       (twopi * twopi);
        tail -= o;
        tail_err = (1.0 + alpha) * (2.0 + alpha) * std::pow(Z, -3.0 - alpha) /
                   (twopi * twopi * M_PI);
      } else if (d == 2) {
        const double amp = std::sqrt(2.0 / (M_PI * twopi));
        double g = std::pow(Z, -1.5 - alpha);
        double o1 = -g * std::sin(twopi * Z - M_PI / 4.0) / twopi +
                    (1.5 + alpha) * std::cos(twopi * Z - M_PI / 4.0) *
                        std::pow(Z, -2.5 - alpha) / (twopi * twopi);
        tail -= amp * o1;
        tail_err = amp * (1.5 + alpha) * (2.5 + alpha) * std::pow(Z, -3.5 - alpha) /
                       (twopi * twopi * M_PI) +
                   0.1 * std::pow(twopi, -1.5) * std::pow(Z, -1.5 - alpha) / (1.5 + alpha);
      } else {
        double o = std::cos(twopi * Z) * std::pow(Z, -2.0 - alpha) / (twopi * twopi);
        tail -= o;
        tail_err = (2.0 + alpha) * std::pow(Z, -3.0 - alpha) / (twopi * twopi * M_PI);
      }
    }

    const double integral = 0.5 * omega * (inner + mid + tail);
    const double integral_err = 0.5 * omega * (inner_err + tail_err) + 1e-13 * integral;
    LimitConstant out;
    out.c_tilde = 2.0 * c.c_alpha * integral;
    out.method = "quadrature";
    out.error_estimate = 2.0 * (c.c_alpha * integral_err + c.tail_cert * c.c_alpha * integral);
    return out;
  }

  // Richardson ladder of n^alpha(-lambda_{e1}); residual order n^{-(2-alpha)}.
  if (ladder.empty()) ladder = default_ladder(d);
  if (ladder.size() < 3) throw std::invalid_argument("limit_constant: ladder too short");
  const Coords e1 = unit_mode(d);
  std::vector<double> v;
  for (int n : ladder) {
    auto kernel = get_or_build_kernel(LatticeSpec(d, n), alpha, 1e-12);
    Spectrum sp = eigenvalues(*kernel);
    v.push_back(std::pow(double(n), alpha) * (-sp.at(e1)));
  }
  const double p = 2.0 - alpha;
  std::vector<double> extr;
  for (size_t i = 1; i < v.size(); ++i) {
    double ratio = std::pow(double(ladder[i]) / ladder[i - 1], p);
    extr.push_back(v[i] + (v[i] - v[i - 1]) / (ratio - 1.0));
  }
  LimitConstant out;
  out.c_tilde = extr.back();
  out.method = "extrapolation";
  out.error_estimate = std::abs(extr.back() - extr[extr.size() - 2]) +
                       1e-11 * std::abs(out.c_tilde);
  return out;
}

LimitConstant limit_constant_gamma2(int d, double alpha, std::vector<int> ladder) {
  if (alpha < 2.0) throw std::invalid_argument("limit_constant_gamma2: alpha must be >= 2");
  if (ladder.empty()) ladder = default_ladder(d);
  const Coords e1 = unit_mode(d);
  std::vector<double> v;
  for (int n : ladder) {
    auto kernel = get_or_build_kernel(LatticeSpec(d, n), alpha, 1e-12);
    Spectrum sp = eigenvalues(*kernel);
    double val = double(n) * double(n) * (-sp.at(e1));
    if (alpha == 2.0) val /= std::log(double(n));
    v.push_back(val);
  }
  LimitConstant out;
  out.method = "extrapolation";
  if (alpha == 2.0) {
    // v(n) = c + b / log n; linear fit in 1/log n, intercept is the constant.
    std::vector<double> x;
    for (int n : ladder) x.push_back(1.0 / std::log(double(n)));
    LinFit f = least_squares(x, v);
    out.c_tilde = f.intercept;
    out.error_estimate = std::abs(f.slope) * x.back() * 0.5 + 1e-10;
  } else {
    const double p = std::min(3.0, alpha) - 2.0;
    std::vector<double> extr;
    for (size_t i = 1; i < v.size(); ++i) {
      double ratio = std::pow(double(ladder[i]) / ladder[i - 1], p);
      extr.push_back(v[i] + (v[i] - v[i - 1]) / (ratio - 1.0));
    }
    out.c_tilde = extr.back();
    out.error_estimate =
        extr.size() > 1 ? std::abs(extr.back() - extr[extr.size() - 2]) : 1e-3;
  }
  return out;
}

LimitConstant calibrated_limit_constant(int d, double alpha) {
  if (alpha < 2.0) return limit_constant(d, alpha, LimitMethod::extrapolation);
  return limit_constant_gamma2(d, alpha);
}

RateReport verify_rate_lemmas(int d, double alpha, const std::vector<int>& ladder,
                              int max_mode_norm, double kernel_tol) {
  if (ladder.size() < 4)
    throw std::invalid_argument("verify_rate_lemmas: ladder needs at least 4 points");
  for (size_t i = 1; i < ladder.size(); ++i)
    if (ladder[i] <= ladder[i - 1])
      throw std::invalid_argument("verify_rate_lemmas: ladder must increase");

  RateReport rep;
  rep.d = d;
  rep.alpha = alpha;
  rep.ladder = ladder;
  rep.modes = low_modes(d, double(max_mode_norm));

  std::vector<Spectrum> spectra;
  for (int n : ladder)
    spectra.push_back(eigenvalues(*get_or_build_kernel(LatticeSpec(d, n), alpha, kernel_tol)));

  if (alpha < 2.0) {
    rep.c_tilde = limit_constant(d, alpha, LimitMethod::quadrature).c_tilde;
    rep.band_min = rep.band_min_top = std::numeric_limits<double>::infinity();
    rep.band_max = rep.band_max_top = 0.0;
    rep.inv_square_bound = 0.0;
    for (size_t ni = 0; ni < ladder.size(); ++ni) {
      std::vector<double> row;
      for (const Coords& w : rep.modes) {
        double lam = spectra[ni].at(w);
        double v = std::pow(double(ladder[ni]), alpha) * (-lam);
        double ratio = v / (rep.c_tilde * std::pow(l2_norm(w), alpha));
        rep.band_min = std::min(rep.band_min, ratio);
        rep.band_max = std::max(rep.band_max, ratio);
        if (ni + 1 == ladder.size()) {
          rep.band_min_top = std::min(rep.band_min_top, ratio);
          rep.band_max_top = std::max(rep.band_max_top, ratio);
        }
        rep.inv_square_bound =
            std::max(rep.inv_square_bound, std::pow(l2_norm(w), 2.0 * alpha) / (v * v));
        row.push_back(v);
      }
      rep.r_table.push_back(row);
    }
    for (size_t wi = 0; wi < rep.modes.size(); ++wi) {
      std::vector<double> xs, ys;
      const double target = rep.c_tilde * std::pow(l2_norm(rep.modes[wi]), alpha);
      for (size_t ni = 0; ni < ladder.size(); ++ni) {
        double resid = std::abs(rep.r_table[ni][wi] - target);
        if (resid <= 0.0) continue;
        xs.push_back(std::log(double(ladder[ni])));
        ys.push_back(std::log(resid));
      }
      if (xs.size() < 3) continue;
      LinFit f = least_squares(xs, ys);
      ModeFit mf;
      mf.w = rep.modes[wi];
      mf.slope = f.slope;
      mf.stderr_ = f.slope_stderr;
      mf.expected = -(2.0 - alpha);
      mf.r2 = f.r2;
      rep.fits.push_back(mf);
    }
    for (size_t ni = 1; ni < ladder.size(); ++ni) {
      double a = rep.r_table[ni - 1][0], b = rep.r_table[ni][0];
      rep.stabilization.push_back(std::abs(b - a) / std::abs(b));
    }
    return rep;
  }

  // gamma = 2 regimes: track r(n,w), its log-corrected version at alpha = 2.
  for (size_t ni = 0; ni < ladder.size(); ++ni) {
    std::vector<double> row;
    for (const Coords& w : rep.modes) {
      double lam = spectra[ni].at(w);
      double r = double(ladder[ni]) * double(ladder[ni]) * (-lam) / sq_norm(w);
      if (alpha == 2.0) r /= std::log(double(ladder[ni]) / l2_norm(w));
      row.push_back(r);
    }
    rep.r_table.push_back(row);
  }
  LimitConstant ext = limit_constant_gamma2(d, alpha, ladder);
  rep.c_tilde = ext.c_tilde;
  for (size_t ni = 1; ni < ladder.size(); ++ni) {
    double a = rep.r_table[ni - 1][0], b = rep.r_table[ni][0];
    rep.stabilization.push_back(std::abs(b - a) / std::abs(b));
  }
  if (alpha > 2.0) {
    // Correction-decay fit: |r(n, e1) - c| ~ n^{-(min(3,alpha)-2)}.
    std::vector<double> xs, ys;
    for (size_t ni = 0; ni < ladder.size(); ++ni) {
      double resid = std::abs(rep.r_table[ni][0] - ext.c_tilde);
      if (resid <= 0.0) continue;
      xs.push_back(std::log(double(ladder[ni])));
      ys.push_back(std::log(resid));
    }
    if (xs.size() >= 3) {
      LinFit f = least_squares(xs, ys);
      ModeFit mf;
      mf.w = unit_mode(d);
      mf.slope = f.slope;
      mf.stderr_ = f.slope_stderr;
      mf.expected = -(std::min(3.0, alpha) - 2.0);
      mf.r2 = f.r2;
      rep.fits.push_back(mf);
    }
  }
  return rep;
}

std::string rate_report_to_json(const RateReport& rep) {
  nlohmann::json j;
  j["schema_version"] = "fracpile/rate-report/1";
  j["d"] = rep.d;
  j["alpha"] = rep.alpha;
  j["ladder"] = rep.ladder;
  j["c_tilde"] = rep.c_tilde;
  auto mode_list = nlohmann::json::array();
  for (const Coords& w : rep.modes) {
    std::vector<int> c(w.data(), w.data() + w.size());
    mode_list.push_back(c);
  }
  j["modes"] = mode_list;
  if (rep.alpha < 2.0) {
    j["band"] = {{"lemma", "two-sided eigenvalue band"},
                 {"min", rep.band_min},
                 {"max", rep.band_max},
                 {"min_top", rep.band_min_top},
                 {"max_top", rep.band_max_top}};
    j["inverse_square_bound"] = {{"lemma", "inverse-square eigenvalue bound"},
                                 {"sup", rep.inv_square_bound}};
  }
  auto fits = nlohmann::json::array();
  for (const ModeFit& f : rep.fits) {
    std::vector<int> c(f.w.data(), f.w.data() + f.w.size());
    fits.push_back({{"lemma", "residual decay rate"},
                    {"mode", c},
                    {"fitted_exponent", f.slope},
                    {"stderr", f.stderr_},
                    {"expected", f.expected},
                    {"r2", f.r2}});
  }
  j["fits"] = fits;
  j["r_table"] = rep.r_table;
  j["stabilization"] = rep.stabilization;
  return j.dump(2);
}

}  // namespace fracpile
