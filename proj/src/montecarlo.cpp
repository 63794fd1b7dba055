#include "fracpile/montecarlo.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"

namespace fracpile {
namespace {

Field draw_centered_noise(const LatticeSpec& spec, RngStream& rng, WeightDist dist) {
  const std::int64_t sites = spec.sites();
  Field sigma(sites);
  if (dist == WeightDist::gaussian) {
    for (std::int64_t i = 0; i < sites; ++i) sigma[i] = rng.normal();
  } else {
    const double scale = std::sqrt(3.0);  // variance-1 uniform
    for (std::int64_t i = 0; i < sites; ++i) sigma[i] = scale * rng.uniform_sym();
  }
  return sigma - sigma.mean();
}

}  // namespace

void ExperimentPlan::validate() const {
  if (d < 1) throw std::invalid_argument("plan: dimension must be >= 1");
  if (alpha <= 0) throw std::invalid_argument("plan: alpha must be > 0");
  if (n_ladder.empty()) throw std::invalid_argument("plan: empty n ladder");
  for (int n : n_ladder)
    if (n < 2) throw std::invalid_argument("plan: ladder entries must be >= 2");
  for (size_t i = 1; i < n_ladder.size(); ++i)
    if (n_ladder[i] <= n_ladder[i - 1])
      throw std::invalid_argument("plan: ladder must be strictly increasing");
  if (kind != ExperimentKind::eigen_rates && n_ladder.size() >= 3 && replicates < 3)
    throw std::invalid_argument("plan: too few replicates for a fit");
  if (kind == ExperimentKind::field_cov) {
    if (replicates < 30)
      throw std::invalid_argument("plan: variance estimates need >= 30 replicates");
    if (modes.empty()) throw std::invalid_argument("plan: field_cov needs modes");
  }
  if (replicates < 1) throw std::invalid_argument("plan: replicates must be >= 1");
}

std::string plan_to_json(const ExperimentPlan& plan) {
  nlohmann::json j;
  j["schema_version"] = "fracpile/plan/1";
  j["kind"] = plan.kind == ExperimentKind::odometer_mean ? "odometer-mean"
              : plan.kind == ExperimentKind::field_cov   ? "field-cov"
                                                         : "eigen-rates";
  j["d"] = plan.d;
  j["alpha"] = plan.alpha;
  j["n_ladder"] = plan.n_ladder;
  j["replicates"] = plan.replicates;
  j["master_seed"] = plan.master_seed;
  j["kernel_tol"] = plan.kernel_tol;
  j["eps"] = plan.eps;
  j["audit_every"] = plan.audit_every;
  j["weights"] = plan.weights == WeightDist::gaussian ? "gaussian" : "uniform";
  auto modes = nlohmann::json::array();
  for (const Coords& nu : plan.modes)
    modes.push_back(std::vector<int>(nu.data(), nu.data() + nu.size()));
  j["modes"] = modes;
  j["threads"] = plan.threads;
  return j.dump(2);
}

ExperimentPlan plan_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  static const std::set<std::string> known = {
      "schema_version", "kind",  "d",           "alpha",   "n_ladder", "replicates",
      "master_seed",    "kernel_tol", "eps",    "audit_every", "weights",  "modes",
      "threads"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw std::invalid_argument("plan: unknown key '" + it.key() + "'");

  ExperimentPlan p;
  std::string kind = j.value("kind", "odometer-mean");
  if (kind == "odometer-mean")
    p.kind = ExperimentKind::odometer_mean;
  else if (kind == "field-cov")
    p.kind = ExperimentKind::field_cov;
  else if (kind == "eigen-rates")
    p.kind = ExperimentKind::eigen_rates;
  else
    throw std::invalid_argument("plan: unknown kind '" + kind + "'");
  p.d = j.value("d", 1);
  p.alpha = j.value("alpha", 1.0);
  p.n_ladder = j.value("n_ladder", std::vector<int>{});
  p.replicates = j.value("replicates", 200);
  p.master_seed = j.value("master_seed", std::uint64_t(1));
  p.kernel_tol = j.value("kernel_tol", 1e-12);
  p.eps = j.value("eps", 1e-12);
  p.audit_every = j.value("audit_every", 50);
  std::string weights = j.value("weights", "gaussian");
  if (weights == "gaussian")
    p.weights = WeightDist::gaussian;
  else if (weights == "uniform")
    p.weights = WeightDist::uniform;
  else
    throw std::invalid_argument("plan: unknown weights '" + weights + "'");
  if (j.contains("modes"))
    for (const auto& m : j["modes"]) {
      std::vector<int> v = m.get<std::vector<int>>();
      Coords nu(int(v.size()));
      for (size_t i = 0; i < v.size(); ++i) nu[int(i)] = v[i];
      p.modes.push_back(nu);
    }
  p.threads = j.value("threads", 0);
  p.validate();
  return p;
}

void parallel_for_index(std::int64_t count, int threads,
                        const std::function<void(std::int64_t)>& fn) {
  int workers = threads > 0 ? threads : int(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, int(std::min<std::int64_t>(count, 64))));
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mtx;
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (;;) {
        std::int64_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mtx);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<OdometerMeanRow> run_odometer_mean(const ExperimentPlan& plan) {
  plan.validate();
  std::vector<OdometerMeanRow> rows;
  for (size_t ni = 0; ni < plan.n_ladder.size(); ++ni) {
    const int n = plan.n_ladder[ni];
    const LatticeSpec spec(plan.d, n);
    auto kernel = get_or_build_kernel(spec, plan.alpha, plan.kernel_tol);
    Spectrum sp = eigenvalues(*kernel);
    FieldSampler sampler(sp);

    std::vector<double> site_mean(plan.replicates, 0.0);
    std::vector<double> audit_gap(plan.replicates, -1.0);
    const std::uint64_t base = std::uint64_t(ni) * std::uint64_t(plan.replicates);
    parallel_for_index(plan.replicates, plan.threads, [&](std::int64_t r) {
      RngStream rng = seed_stream(plan.master_seed, base + std::uint64_t(r));
      Field centered = draw_centered_noise(spec, rng, plan.weights);
      Field v = sampler.from_centered_mass(centered);
      // site-averaged odometer: mean(v - min v) = -min v since v has zero mean
      site_mean[size_t(r)] = -v.minCoeff();
      if (plan.audit_every > 0 && r % plan.audit_every == 0) {
        SandpileState st = init_deterministic(spec, 1.0 + centered);
        StabilizationResult topple = stabilize(st, *kernel, plan.eps, 2000000);
        if (!topple.converged)
          throw std::runtime_error("odometer audit: toppling did not converge (seed index " +
                                   std::to_string(base + std::uint64_t(r)) + ")");
        Field diff = min_normalized(topple.state.u) - (v - v.minCoeff());
        audit_gap[size_t(r)] = diff.abs().maxCoeff();
      }
    });

    OdometerMeanRow row;
    row.n = n;
    row.replicates = plan.replicates;
    KahanSum sum, sq;
    for (double m : site_mean) sum.add(m);
    row.mean = sum.value() / plan.replicates;
    for (double m : site_mean) sq.add((m - row.mean) * (m - row.mean));
    row.stderr_ = plan.replicates > 1
                      ? std::sqrt(sq.value() / (plan.replicates - 1) / plan.replicates)
                      : 0.0;
    for (double g : audit_gap)
      if (g >= 0) {
        ++row.audits;
        row.max_audit_gap = std::max(row.max_audit_gap, g);
      }
    if (row.audits > 0 && row.max_audit_gap > 1e-6)
      throw std::runtime_error("odometer audit: spectral vs toppling gap above 1e-6");
    rows.push_back(row);
  }
  return rows;
}

std::vector<FieldCovRow> run_field_cov(const ExperimentPlan& plan) {
  plan.validate();
  LimitConstant c = calibrated_limit_constant(plan.d, plan.alpha);
  FieldSpec fs(plan.alpha, c);

  std::vector<FieldCovRow> rows;
  for (size_t ni = 0; ni < plan.n_ladder.size(); ++ni) {
    const int n = plan.n_ladder[ni];
    const LatticeSpec spec(plan.d, n);
    auto kernel = get_or_build_kernel(spec, plan.alpha, plan.kernel_tol);
    Spectrum sp = eigenvalues(*kernel);
    FieldSampler sampler(sp);
    PairingEngine engine(spec, fs, plan.modes);

    const size_t m = plan.modes.size();
    std::vector<std::vector<std::complex<double>>> vals(
        size_t(plan.replicates), std::vector<std::complex<double>>(m));
    const std::uint64_t base = std::uint64_t(ni) * std::uint64_t(plan.replicates);
    parallel_for_index(plan.replicates, plan.threads, [&](std::int64_t r) {
      RngStream rng = seed_stream(plan.master_seed, base + std::uint64_t(r));
      Field centered = draw_centered_noise(spec, rng, plan.weights);
      Field v = sampler.from_centered_mass(centered);
      vals[size_t(r)] = engine.pair(v);
    });

    for (size_t k = 0; k < m; ++k) {
      FieldCovRow row;
      row.n = n;
      row.nu = plan.modes[k];
      row.replicates = plan.replicates;
      KahanSum re, im, sq;
      for (int r = 0; r < plan.replicates; ++r) {
        re.add(vals[size_t(r)][k].real());
        im.add(vals[size_t(r)][k].imag());
      }
      std::complex<double> mean(re.value() / plan.replicates, im.value() / plan.replicates);
      for (int r = 0; r < plan.replicates; ++r)
        sq.add(std::norm(vals[size_t(r)][k] - mean));
      row.empirical_var = sq.value() / (plan.replicates - 1);
      // fourth-moment error bar: sd(|X|^2)/sqrt(N) with Gaussian X is var*sqrt(2/N)
      row.var_stderr = row.empirical_var * std::sqrt(2.0 / plan.replicates);
      row.limit_var = std::pow(double(sq_norm(plan.modes[k])), -fs.gamma);
      row.ratio = row.empirical_var / row.limit_var;
      rows.push_back(row);
    }
  }
  return rows;
}

ScalingFit fit_scaling(const std::vector<ScalingPoint>& table, FitModel model) {
  if (table.size() < 3) throw std::invalid_argument("fit_scaling: need >= 3 points");
  std::vector<double> x(table.size()), y(table.size()), wgt(table.size());
  for (size_t i = 0; i < table.size(); ++i) {
    const ScalingPoint& p = table[i];
    if (p.n <= 1.0) throw std::invalid_argument("fit_scaling: n must exceed 1");
    switch (model) {
      case FitModel::power_in_n:
        if (p.value <= 0) throw std::invalid_argument("fit_scaling: log of nonpositive value");
        x[i] = std::log(p.n);
        y[i] = std::log(p.value);
        wgt[i] = p.stderr_ > 0 ? std::pow(p.value / p.stderr_, 2.0) : 1.0;
        break;
      case FitModel::linear_in_log_n:
        x[i] = std::log(p.n);
        y[i] = p.value;
        wgt[i] = p.stderr_ > 0 ? 1.0 / (p.stderr_ * p.stderr_) : 1.0;
        break;
      case FitModel::sqrt_log_n:
        x[i] = std::sqrt(std::log(p.n));
        y[i] = p.value;
        wgt[i] = p.stderr_ > 0 ? 1.0 / (p.stderr_ * p.stderr_) : 1.0;
        break;
    }
  }
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sw += wgt[i];
    sx += wgt[i] * x[i];
    sy += wgt[i] * y[i];
    sxx += wgt[i] * x[i] * x[i];
    sxy += wgt[i] * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (std::abs(det) < 1e-12 * sw * sxx)
    throw std::invalid_argument("fit_scaling: singular design (constant ladder?)");
  ScalingFit fit;
  fit.model = model;
  fit.slope = (sw * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.slope * sx) / sw;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / sw;
  for (size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += wgt[i] * r * r;
    ss_tot += wgt[i] * (y[i] - ybar) * (y[i] - ybar);
  }
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  if (x.size() > 2) {
    double dof = double(x.size()) - 2.0;
    fit.slope_stderr = std::sqrt(std::max(0.0, ss_res / dof) * sw / det);
  }
  return fit;
}

}  // namespace fracpile
