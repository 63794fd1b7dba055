#include "fracpile/fields.hpp"

#include <cmath>
#include <set>

#include "fracpile/fft.hpp"

namespace fracpile {
namespace {

constexpr double kCaseTol = 1e-12;

}  // namespace

double odometer_growth_reference(int d, double gamma, int n) {
  if (n < 2) throw std::invalid_argument("odometer_growth_reference: n must be >= 2");
  if (!(gamma > 0.0) || gamma > 2.0 + kCaseTol)
    throw std::invalid_argument("odometer_growth_reference: gamma must lie in (0,2]");
  const double half_d = 0.5 * d;
  if (gamma > half_d + kCaseTol) return std::pow(double(n), gamma - half_d);
  if (gamma > half_d - kCaseTol) return std::log(double(n));
  return std::sqrt(std::log(double(n)));
}

double variogram_growth_reference(int d, double alpha, double n, double r) {
  if (r < 1.0 || r > n)
    throw std::invalid_argument("variogram_growth_reference: need 1 <= r <= n");
  const double half_d = 0.5 * d;
  if (alpha > half_d + 1.0 + kCaseTol) return std::pow(n, 2.0 * alpha - d - 2.0) * r * r;
  if (alpha > half_d + 1.0 - kCaseTol) return std::log(n / r) * r * r;
  if (alpha > half_d + kCaseTol) return std::pow(r, 2.0 * alpha - d);
  if (alpha > half_d - kCaseTol) return std::log(r);  // degenerate 0 at r = 1
  return 1.0;
}

double variogram(const Spectrum& spectrum, const Coords& x) {
  const LatticeSpec& spec = spectrum.spec;
  if (x.size() != spec.d) throw std::invalid_argument("variogram: dimension mismatch");
  KahanSum acc;
  for_each_site(spec, [&](std::int64_t i, const Coords& w) {
    if (i == 0) return;
    double phase = 0.0;
    for (int j = 0; j < spec.d; ++j) phase += double(x[j]) * w[j];
    double sn = std::sin(M_PI * phase / spec.n);
    acc.add(sn * sn / (spectrum.lambda[i] * spectrum.lambda[i]));
  });
  return 4.0 * acc.value() / double(spec.sites());
}

Field variogram_table(const Spectrum& spectrum) {
  Field row = covariance_row(spectrum);
  return 2.0 * (row[0] - row);
}

TestFunction::TestFunction(int d_, std::vector<std::pair<Coords, std::complex<double>>> m)
    : d(d_), modes(std::move(m)) {
  std::set<std::vector<int>> seen;
  for (const auto& [nu, c] : modes) {
    (void)c;
    if (nu.size() != d) throw std::invalid_argument("TestFunction: mode dimension mismatch");
    if (sq_norm(nu) == 0)
      throw std::invalid_argument("TestFunction: the zero mode is excluded (mean-zero)");
    if (!seen.insert(std::vector<int>(nu.data(), nu.data() + nu.size())).second)
      throw std::invalid_argument("TestFunction: duplicate mode");
  }
}

TestFunction TestFunction::fourier_mode(const Coords& nu) {
  return TestFunction(int(nu.size()), {{nu, std::complex<double>(1.0, 0.0)}});
}

double FieldSpec::normalization(int d, int n) const {
  if (alpha < 2.0) return std::pow(double(n), 0.5 * (d - 2.0 * alpha));
  double base = std::pow(double(n), 0.5 * (d - 4.0));
  return alpha == 2.0 ? base * std::log(double(n)) : base;
}

std::complex<double> cell_integral(const TestFunction& f, const LatticeSpec& spec,
                                   const Coords& x) {
  if (f.d != spec.d) throw std::invalid_argument("cell_integral: dimension mismatch");
  std::complex<double> total = 0.0;
  for (const auto& [nu, coef] : f.modes) {
    std::complex<double> prod = coef;
    for (int j = 0; j < spec.d; ++j) {
      double zj = double(x[j]) / spec.n;
      if (nu[j] == 0) {
        prod *= 1.0 / spec.n;
      } else {
        // integral of exp(2 pi i nu t) over [z - 1/2n, z + 1/2n]
        prod *= std::polar(std::sin(M_PI * nu[j] / double(spec.n)) / (M_PI * nu[j]),
                           2.0 * M_PI * nu[j] * zj);
      }
    }
    total += prod;
  }
  return total;
}

std::complex<double> pair_field(const Field& u, const TestFunction& f,
                                const FieldSpec& fs, const LatticeSpec& spec) {
  if (u.size() != spec.sites()) throw std::invalid_argument("pair_field: size mismatch");
  std::complex<double> acc = 0.0;
  for_each_site(spec, [&](std::int64_t i, const Coords& x) {
    acc += u[i] * cell_integral(f, spec, x);
  });
  return fs.c_tilde.c_tilde * fs.normalization(spec.d, spec.n) * acc;
}

std::complex<double> limit_covariance(const TestFunction& f, const TestFunction& g,
                                      double gamma) {
  std::complex<double> acc = 0.0;
  for (const auto& [nu_f, cf] : f.modes)
    for (const auto& [nu_g, cg] : g.modes)
      if ((nu_f == nu_g).all())
        acc += cf * std::conj(cg) * std::pow(sq_norm(nu_f), -gamma);
  return acc;
}

PairingEngine::PairingEngine(const LatticeSpec& spec, const FieldSpec& fs,
                             std::vector<Coords> modes)
    : spec_(spec),
      scale_(fs.c_tilde.c_tilde * fs.normalization(spec.d, spec.n)),
      modes_(std::move(modes)) {
  for (const Coords& nu : modes_) {
    if (nu.size() != spec.d) throw std::invalid_argument("PairingEngine: mode dimension");
    if (sq_norm(nu) == 0) throw std::invalid_argument("PairingEngine: zero mode");
    std::complex<double> prod = 1.0;
    for (int j = 0; j < spec.d; ++j)
      prod *= nu[j] == 0 ? 1.0 / spec.n
                         : std::sin(M_PI * nu[j] / double(spec.n)) / (M_PI * nu[j]);
    cell_factors_.push_back(prod);
    mode_index_.push_back(flat_index(canonical(nu, spec), spec));
  }
}

std::vector<std::complex<double>> PairingEngine::pair(const Field& u) const {
  if (u.size() != spec_.sites()) throw std::invalid_argument("PairingEngine: size mismatch");
  CField F = dft_forward(spec_, u);
  std::vector<std::complex<double>> out(modes_.size());
  for (size_t k = 0; k < modes_.size(); ++k)
    out[k] = scale_ * cell_factors_[k] * std::conj(F[mode_index_[k]]);
  return out;
}

}  // namespace fracpile
