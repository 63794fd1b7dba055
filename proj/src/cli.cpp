#include "fracpile/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fracpile/campaign.hpp"
#include "fracpile/io.hpp"
#include "fracpile/montecarlo.hpp"

namespace fracpile::cli {
namespace {

using nlohmann::json;

struct RunConfig {
  std::string subcommand;
  int dim = 1;
  int n = 0;
  std::vector<int> n_ladder;
  double alpha = 0.0;
  std::uint64_t seed = 1;
  int replicates = 0;
  double eps = 1e-12;
  std::int64_t max_steps = 1000000;
  double rel_tol = 1e-12;
  std::string method = "spectral";
  std::string out;
  std::string format = "csv";
  int threads = 0;
  bool check = false;
  std::string modes;     // "1,0;1,1;2,0"
  std::string plan;      // plan JSON path
  std::string script;    // campaign script path
  std::string out_dir;   // campaign output directory
};

std::vector<Coords> parse_modes(const std::string& text, int d) {
  std::vector<Coords> out;
  std::stringstream groups(text);
  std::string group;
  while (std::getline(groups, group, ';')) {
    if (group.empty()) continue;
    std::stringstream parts(group);
    std::string part;
    std::vector<int> v;
    while (std::getline(parts, part, ',')) v.push_back(std::stoi(part));
    if (int(v.size()) != d)
      throw std::invalid_argument("mode '" + group + "' does not have " +
                                  std::to_string(d) + " coordinates");
    Coords nu(d);
    for (int j = 0; j < d; ++j) nu[j] = v[size_t(j)];
    out.push_back(nu);
  }
  return out;
}

struct Gate {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string note;
};

json gates_to_json(const std::vector<Gate>& gates) {
  json arr = json::array();
  for (const Gate& g : gates)
    arr.push_back({{"gate", g.name},
                   {"pass", g.pass},
                   {"value", g.value},
                   {"threshold", g.threshold},
                   {"note", g.note}});
  return arr;
}

// Data goes to `cfg.out` when given (atomically), else to stdout.
void emit(const RunConfig& cfg, const std::string& contents) {
  if (cfg.out.empty())
    std::cout << contents;
  else
    atomic_write(cfg.out, contents);
}

void emit_aux(const RunConfig& cfg, const std::string& suffix, const std::string& contents) {
  if (cfg.out.empty())
    std::cout << contents << "\n";
  else
    atomic_write(cfg.out + suffix, contents);
}

json config_echo(const RunConfig& cfg) {
  return json{{"subcommand", cfg.subcommand},
              {"dim", cfg.dim},
              {"n", cfg.n},
              {"n_ladder", cfg.n_ladder},
              {"alpha", cfg.alpha},
              {"seed", cfg.seed},
              {"replicates", cfg.replicates},
              {"eps", cfg.eps},
              {"max_steps", cfg.max_steps},
              {"rel_tol", cfg.rel_tol},
              {"method", cfg.method},
              {"format", cfg.format},
              {"threads", cfg.threads},
              {"check", cfg.check},
              {"modes", cfg.modes},
              {"plan", cfg.plan}};
}

void write_manifest(const RunConfig& cfg, double wall_seconds,
                    const std::vector<std::string>& artifacts) {
  if (cfg.out.empty()) return;
  json m;
  m["schema_version"] = "fracpile/manifest/1";
  m["version"] = kVersion;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
               std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  m["config"] = config_echo(cfg);
  m["master_seed"] = cfg.seed;
  m["wall_seconds"] = wall_seconds;
  m["artifacts"] = artifacts;
  atomic_write(cfg.out + ".manifest.json", m.dump(2));
}

// Gate evaluation + reporting shared by every --check mode.
int finish_gates(const RunConfig& cfg, const std::vector<Gate>& gates) {
  bool all = true;
  for (const Gate& g : gates) all = all && g.pass;
  json report;
  report["schema_version"] = "fracpile/gates/1";
  report["subcommand"] = cfg.subcommand;
  report["pass"] = all;
  report["gates"] = gates_to_json(gates);
  emit_aux(cfg, ".gates.json", report.dump(2));
  for (const Gate& g : gates)
    std::cerr << (g.pass ? "PASS " : "FAIL ") << cfg.subcommand << "/" << g.name
              << " value=" << g.value << " threshold=" << g.threshold
              << (g.note.empty() ? "" : " (" + g.note + ")") << "\n";
  return all ? 0 : 3;
}

// ---------------------------------------------------------------- kernel ---

int cmd_kernel(const RunConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  LatticeSpec spec(cfg.dim, cfg.n);
  auto kernel = get_or_build_kernel(spec, cfg.alpha, cfg.rel_tol);

  std::vector<std::string> artifacts;
  if (cfg.format == "bin") {
    emit(cfg, encode_kernel(*kernel));
  } else {
    emit(cfg, kernel_to_csv(*kernel));
  }
  if (!cfg.out.empty()) artifacts.push_back(cfg.out);

  int rc = 0;
  if (cfg.check) {
    std::vector<Gate> gates;
    KahanSum total;
    for (std::int64_t i = 0; i < kernel->weights.size(); ++i) total.add(kernel->weights[i]);
    gates.push_back({"probability-sum", std::abs(total.value() - 1.0) <= 1e-12,
                     std::abs(total.value() - 1.0), 1e-12, "|sum w - 1|"});
    bool sym = true;
    for_each_site(spec, [&](std::int64_t i, const Coords& c) {
      std::int64_t j = flat_index(canonical(Coords(-c), spec), spec);
      sym = sym && (kernel->weights[i] == kernel->weights[j]);
    });
    gates.push_back({"symmetry-exact", sym, sym ? 0.0 : 1.0, 0.0, "bitwise w(x)==w(-x)"});
    gates.push_back({"positivity", (kernel->weights > 0.0).all(),
                     double(kernel->weights.minCoeff()), 0.0, "min weight"});
    gates.push_back({"tail-certificate", kernel->tail_cert <= cfg.rel_tol,
                     kernel->tail_cert, cfg.rel_tol, ""});
    if (cfg.dim == 1 && cfg.n == 2 && cfg.alpha == 1.0) {
      double err = std::max(std::abs(kernel->weights[0] - 0.25),
                            std::abs(kernel->weights[1] - 0.75));
      gates.push_back({"closed-form-oracle", err <= 1e-10, err, 1e-10, "(1/4, 3/4)"});
    }
    rc = finish_gates(cfg, gates);
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg, wall, artifacts);
  return rc;
}

// -------------------------------------------------------------- spectrum ---

std::string spectrum_to_csv(const Spectrum& sp) {
  std::ostringstream out;
  out << "# schema: fracpile/spectrum/1\n";
  out << "w_coords,lambda\n";
  for_each_site(sp.spec, [&](std::int64_t i, const Coords& c) {
    for (int j = 0; j < sp.spec.d; ++j) out << (j ? ";" : "") << c[j];
    out << "," << format_double(sp.lambda[i]) << "\n";
  });
  return out.str();
}

int cmd_spectrum(const RunConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> artifacts;
  int rc = 0;

  if (!cfg.n_ladder.empty()) {
    RateReport rep = verify_rate_lemmas(cfg.dim, cfg.alpha, cfg.n_ladder, 4, cfg.rel_tol);
    emit(cfg, rate_report_to_json(rep));
    if (!cfg.out.empty()) artifacts.push_back(cfg.out);
  } else {
    LatticeSpec spec(cfg.dim, cfg.n);
    auto kernel = get_or_build_kernel(spec, cfg.alpha, cfg.rel_tol);
    Spectrum sp = eigenvalues(*kernel);
    emit(cfg, spectrum_to_csv(sp));
    if (!cfg.out.empty()) artifacts.push_back(cfg.out);

    if (cfg.check) {
      std::vector<Gate> gates;
      gates.push_back({"zero-mode", std::abs(sp.lambda[0]) <= 1e-12,
                       std::abs(sp.lambda[0]), 1e-12, ""});
      double max_nonneg = -std::numeric_limits<double>::infinity();
      double max_asym = 0.0;
      for_each_site(spec, [&](std::int64_t i, const Coords& c) {
        if (i == 0) return;
        max_nonneg = std::max(max_nonneg, sp.lambda[i]);
        std::int64_t j = flat_index(canonical(Coords(-c), spec), spec);
        max_asym = std::max(max_asym, std::abs(sp.lambda[i] - sp.lambda[j]));
      });
      gates.push_back({"negativity", max_nonneg < 0.0, max_nonneg, 0.0, "max nonzero mode"});
      gates.push_back({"evenness", max_asym <= 1e-12, max_asym, 1e-12, ""});

      RngStream rng(cfg.seed, 0);
      Field f(spec.sites());
      for (std::int64_t i = 0; i < spec.sites(); ++i) f[i] = rng.normal();
      Field dense = apply_generator_dense(*kernel, f);
      Field fast = apply_generator(*kernel, f);
      double gap = (dense - fast).abs().maxCoeff();
      gates.push_back({"dense-vs-transform", gap <= 1e-10, gap, 1e-10, "sup norm"});

      Coords e1 = Coords::Zero(spec.d);
      e1[0] = 1;
      DirectEigenvalue de = eigenvalue_direct(spec, cfg.alpha, e1, std::max(4000, 64 * cfg.n));
      double lam_gap = std::abs(de.value - sp.at(e1));
      double budget = de.cert + sp.kernel_cert + 1e-10;
      gates.push_back({"direct-route", lam_gap <= budget, lam_gap, budget, "mode e1"});
      rc = finish_gates(cfg, gates);
    }
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg, wall, artifacts);
  return rc;
}

// ----------------------------------------------------- eigen-asymptotics ---

int cmd_eigen_asymptotics(const RunConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<int> ladder = cfg.n_ladder;
  if (ladder.empty()) ladder = {64, 128, 256, 512, 1024};
  RateReport rep = verify_rate_lemmas(cfg.dim, cfg.alpha, ladder, 4, cfg.rel_tol);
  emit(cfg, rate_report_to_json(rep));
  std::vector<std::string> artifacts;
  if (!cfg.out.empty()) artifacts.push_back(cfg.out);

  int rc = 0;
  if (cfg.check) {
    std::vector<Gate> gates;
    if (cfg.alpha < 2.0) {
      gates.push_back({"band-top-low", rep.band_min_top >= 0.8, rep.band_min_top, 0.8,
                       "min of n^a(-lambda)/(c||w||^a), top rung"});
      gates.push_back({"band-top-high", rep.band_max_top <= 1.25, rep.band_max_top, 1.25,
                       "max of n^a(-lambda)/(c||w||^a), top rung"});
      double expected = -(2.0 - cfg.alpha);
      double slope = rep.fits.empty() ? 0.0 : rep.fits.front().slope;
      gates.push_back({"residual-decay", std::abs(slope - expected) <= 0.3,
                       slope, expected, "fitted exponent at e1; threshold is target"});
    } else if (cfg.alpha == 2.0) {
      // log-corrected ratio stabilizes: relative change over the last rung pair
      size_t last = rep.ladder.size() - 1;
      double worst = 0.0;
      for (size_t k = 0; k < rep.modes.size(); ++k) {
        if (l2_norm(rep.modes[k]) > 2.0) continue;
        double a = rep.r_table[last - 1][k], b = rep.r_table[last][k];
        worst = std::max(worst, std::abs(b - a) / std::abs(b));
      }
      gates.push_back({"log-ratio-stabilizes", worst < 0.10, worst, 0.10,
                       "modes with ||w||<=2, last rung pair"});
    } else {
      double change = rep.stabilization.back();
      gates.push_back({"n2-lambda-stabilizes", change < 0.05, change, 0.05,
                       "mode e1, last rung pair"});
      gates.push_back({"limit-positive", rep.c_tilde > 0.0, rep.c_tilde, 0.0, ""});
    }
    rc = finish_gates(cfg, gates);
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg, wall, artifacts);
  return rc;
}

// ------------------------------------------------------------- stabilize ---

std::string odometer_to_csv(const Field& u, const LatticeSpec& spec) {
  std::ostringstream out;
  out << "# schema: fracpile/odometer/1\n";
  out << "index,u\n";
  for (std::int64_t i = 0; i < spec.sites(); ++i)
    out << i << "," << format_double(u[i]) << "\n";
  return out.str();
}

int cmd_stabilize(const RunConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  LatticeSpec spec(cfg.dim, cfg.n);
  auto kernel = get_or_build_kernel(spec, cfg.alpha, cfg.rel_tol);
  RngStream rng(cfg.seed, 0);
  SandpileState st = init_gaussian(spec, rng);
  const Field s0 = st.s;
  StabilizationResult res = stabilize(std::move(st), *kernel, cfg.eps, cfg.max_steps);

  Field u_min = min_normalized(res.state.u);
  json summary;
  summary["schema_version"] = "fracpile/stabilize/1";
  summary["iterations"] = res.iterations;
  summary["converged"] = res.converged;
  summary["max_residual"] = res.max_residual_excess;
  summary["observed_decay_ratio"] = res.observed_decay_ratio;
  summary["odometer"] = {{"min", res.state.u.minCoeff()},
                         {"max", res.state.u.maxCoeff()},
                         {"mean", res.state.u.mean()},
                         {"min_normalized_max", u_min.maxCoeff()}};
  summary["mass_error"] = std::abs(res.state.s.sum() - double(spec.sites()));

  std::vector<std::string> artifacts;
  if (!cfg.out.empty()) {
    atomic_write(cfg.out, odometer_to_csv(u_min, spec));
    artifacts.push_back(cfg.out);
    emit_aux(cfg, ".summary.json", summary.dump(2));
  } else {
    std::cout << summary.dump(2) << "\n";
  }

  int rc = res.converged ? 0 : 1;
  if (cfg.check) {
    std::vector<Gate> gates;
    gates.push_back({"converged", res.converged, double(res.iterations),
                     double(cfg.max_steps), ""});
    double dev = (res.state.s - 1.0).abs().maxCoeff();
    gates.push_back({"all-one-limit", dev <= 1e-9, dev, 1e-9, "sup |s - 1|"});
    double mass = std::abs(res.state.s.sum() - double(spec.sites()));
    gates.push_back({"mass-conservation", mass <= 1e-9 * double(spec.sites()), mass,
                     1e-9 * double(spec.sites()), ""});
    Field resid = s0 + apply_generator(*kernel, res.state.u) - res.state.s;
    double coupled = resid.abs().maxCoeff();
    gates.push_back({"odometer-identity", coupled <= 1e-9, coupled, 1e-9,
                     "sup |s0 + L u - s_t|"});
    rc = finish_gates(cfg, gates);
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg, wall, artifacts);
  return rc;
}

// -------------------------------------------------------------- odometer ---

int cmd_odometer(const RunConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  LatticeSpec spec(cfg.dim, cfg.n);
  auto kernel = get_or_build_kernel(spec, cfg.alpha, cfg.rel_tol);
  Spectrum sp = eigenvalues(*kernel);
  RngStream rng(cfg.seed, 0);
  Field sigma(spec.sites());
  for (std::int64_t i = 0; i < spec.sites(); ++i) sigma[i] = rng.normal();
  Field s = 1.0 + sigma - sigma.mean();

  Field u_spectral, u_topple;
  bool want_spectral = cfg.method == "spectral" || cfg.method == "both";
  bool want_topple = cfg.method == "topple" || cfg.method == "both";
  if (want_spectral) u_spectral = spectral_odometer(sp, s).u;
  if (want_topple) {
    StabilizationResult res =
        stabilize(init_deterministic(spec, s), *kernel, cfg.eps, cfg.max_steps);
    if (!res.converged) {
      std::cerr << "odometer: toppling did not converge within " << cfg.max_steps
                << " steps (max excess " << res.max_residual_excess << ")\n";
      return 1;
    }
    u_topple = min_normalized(res.state.u);
  }
  const Field& u = want_spectral ? u_spectral : u_topple;

  json summary;
  summary["schema_version"] = "fracpile/odometer/1";
  summary["method"] = cfg.method;
  summary["odometer"] = {{"max", u.maxCoeff()}, {"mean", u.mean()}};
  Field resid = s + apply_generator(*kernel, u) - 1.0;
  summary["residual_sup"] = resid.abs().maxCoeff();
  double gap = 0.0;
  if (cfg.method == "both") {
    gap = (u_spectral - u_topple).abs().maxCoeff();
    summary["route_discrepancy_sup"] = gap;
  }

  std::vector<std::string> artifacts;
  if (!cfg.out.empty()) {
    atomic_write(cfg.out, odometer_to_csv(u, spec));
    artifacts.push_back(cfg.out);
    emit_aux(cfg, ".summary.json", summary.dump(2));
  } else {
    std::cout << summary.dump(2) << "\n";
  }

  int rc = 0;
  if (cfg.check) {
    std::vector<Gate> gates;
    double res_sup = resid.abs().maxCoeff();
    gates.push_back({"solve-residual", res_sup <= 1e-9, res_sup, 1e-9,
                     "sup |s + L u - 1|"});
    gates.push_back({"min-normalized", u.minCoeff() == 0.0, u.minCoeff(), 0.0, ""});
    if (cfg.method == "both")
      gates.push_back({"route-equivalence", gap <= 1e-6, gap, 1e-6,
                       "spectral vs toppling sup distance"});
    rc = finish_gates(cfg, gates);
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg, wall, artifacts);
  return rc;
}

// --------------------------------------------------------- odometer-stats ---

ExperimentPlan plan_from_config(const RunConfig& cfg, ExperimentKind kind) {
  if (!cfg.plan.empty()) {
    std::ifstream in(cfg.plan);
    if (!in) throw std::invalid_argument("cannot open plan file " + cfg.plan);
    std::ostringstream ss;
    ss << in.rdbuf();
    ExperimentPlan p = plan_from_json(ss.str());
    p.kind = kind;
    return p;
  }
  ExperimentPlan p;
  p.kind = kind;
  p.d = cfg.dim;
  p.alpha = cfg.alpha;
  p.n_ladder = cfg.n_ladder.empty() && cfg.n > 0 ? std::vector<int>{cfg.n} : cfg.n_ladder;
  p.replicates = cfg.replicates > 0 ? cfg.replicates
                 : kind == ExperimentKind::field_cov ? 10000
                                                     : 200;
  p.master_seed = cfg.seed;
  p.kernel_tol = cfg.rel_tol;
  p.eps = cfg.eps;
  p.threads = cfg.threads;
  if (!cfg.modes.empty()) p.modes = parse_modes(cfg.modes, cfg.dim);
  p.validate();
  return p;
}

int cmd_odometer_stats(const RunConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  ExperimentPlan plan = plan_from_config(cfg, ExperimentKind::odometer_mean);
  std::vector<OdometerMeanRow> rows = run_odometer_mean(plan);

  std::ostringstream csv;
  csv << "# schema: fracpile/odometer-stats/1\n";
  csv << "n,replicates,mean,stderr,audits,max_audit_gap\n";
  for (const auto& r : rows)
    csv << r.n << "," << r.replicates << "," << format_double(r.mean) << ","
        << format_double(r.stderr_) << "," << r.audits << ","
        << format_double(r.max_audit_gap) << "\n";
  emit(cfg, csv.str());
  std::vector<std::string> artifacts;
  if (!cfg.out.empty()) artifacts.push_back(cfg.out);

  // Regime-dependent fit: gamma vs d/2 selects the reference growth model.
  const double gamma = std::min(plan.alpha, 2.0);
  const double half_d = 0.5 * plan.d;
  json fit_json;
  fit_json["schema_version"] = "fracpile/scaling-fit/1";
  int rc = 0;
  std::vector<Gate> gates;

  // Pre-registered lack-of-fit rule: if the smallest rung sits more than four
  // quoted standard errors from the fit through the remaining rungs, it is
  // treated as transient, excluded, and the exclusion is logged.
  auto fit_with_exclusion = [&fit_json](std::vector<ScalingPoint> pts, FitModel model) {
    ScalingFit fit = fit_scaling(pts, model);
    fit_json["excluded_smallest_n"] = false;
    if (pts.size() >= 4) {
      std::vector<ScalingPoint> rest(pts.begin() + 1, pts.end());
      ScalingFit partial = fit_scaling(rest, model);
      const ScalingPoint& p0 = pts.front();
      double x, y, se;
      switch (model) {
        case FitModel::power_in_n:
          x = std::log(p0.n);
          y = std::log(p0.value);
          se = p0.stderr_ > 0 ? p0.stderr_ / p0.value : 0.0;
          break;
        case FitModel::linear_in_log_n:
          x = std::log(p0.n);
          y = p0.value;
          se = p0.stderr_;
          break;
        default:
          x = std::sqrt(std::log(p0.n));
          y = p0.value;
          se = p0.stderr_;
      }
      double pred = partial.intercept + partial.slope * x;
      if (se > 0 && std::abs(y - pred) > 4.0 * se) {
        fit_json["excluded_smallest_n"] = true;
        fit_json["exclusion_note"] =
            "smallest rung flagged transient by the 4-sigma lack-of-fit probe";
        return partial;
      }
    }
    return fit;
  };

  if (rows.size() >= 3) {
    std::vector<ScalingPoint> pts;
    for (const auto& r : rows) pts.push_back({double(r.n), r.mean, r.stderr_});
    if (gamma > half_d + 1e-12) {
      ScalingFit fit = fit_with_exclusion(pts, FitModel::power_in_n);
      fit_json["model"] = "power-in-n";
      fit_json["slope"] = fit.slope;
      fit_json["slope_stderr"] = fit.slope_stderr;
      fit_json["r2"] = fit.r2;
      fit_json["expected_slope"] = gamma - half_d;
      if (cfg.check)
        gates.push_back({"growth-exponent", std::abs(fit.slope - (gamma - half_d)) <= 0.15,
                         fit.slope, gamma - half_d, "log-log slope; threshold is target"});
    } else if (gamma > half_d - 1e-12) {
      ScalingFit fit = fit_with_exclusion(pts, FitModel::linear_in_log_n);
      fit_json["model"] = "linear-in-log-n";
      fit_json["slope"] = fit.slope;
      fit_json["slope_stderr"] = fit.slope_stderr;
      fit_json["r2"] = fit.r2;
      if (cfg.check)
        gates.push_back({"log-growth-fit", fit.r2 >= 0.95, fit.r2, 0.95, "R^2"});
    } else {
      ScalingFit fit = fit_with_exclusion(pts, FitModel::sqrt_log_n);
      fit_json["model"] = "sqrt-log-n";
      fit_json["slope"] = fit.slope;
      fit_json["slope_stderr"] = fit.slope_stderr;
      fit_json["r2"] = fit.r2;
      fit_json["note"] =
          "sqrt(log n) growth is numerically near-flat at these sizes; "
          "reported descriptively, not gated";
    }
  }
  emit_aux(cfg, ".fit.json", fit_json.dump(2));
  if (cfg.check) {
    double worst_gap = 0.0;
    for (const auto& r : rows) worst_gap = std::max(worst_gap, r.max_audit_gap);
    gates.push_back({"toppling-audit", worst_gap <= 1e-6, worst_gap, 1e-6,
                     "spectral vs toppling sup distance"});
    rc = finish_gates(cfg, gates);
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg, wall, artifacts);
  return rc;
}

// -------------------------------------------------------------- field-cov ---

int cmd_field_cov(const RunConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  ExperimentPlan plan = plan_from_config(cfg, ExperimentKind::field_cov);
  std::vector<FieldCovRow> rows = run_field_cov(plan);

  std::ostringstream csv;
  csv << "# schema: fracpile/field-cov/1\n";
  csv << "nu_coords,n,replicates,empirical_var,limit_var,ratio\n";
  for (const auto& r : rows) {
    for (int j = 0; j < r.nu.size(); ++j) csv << (j ? ";" : "") << r.nu[j];
    csv << "," << r.n << "," << r.replicates << "," << format_double(r.empirical_var)
        << "," << format_double(r.limit_var) << "," << format_double(r.ratio) << "\n";
  }
  emit(cfg, csv.str());
  std::vector<std::string> artifacts;
  if (!cfg.out.empty()) artifacts.push_back(cfg.out);

  int rc = 0;
  if (cfg.check) {
    // Gates evaluated on the largest n of the ladder.
    int top_n = plan.n_ladder.back();
    double qmin = std::numeric_limits<double>::infinity(), qmax = 0.0;
    for (const auto& r : rows) {
      if (r.n != top_n) continue;
      qmin = std::min(qmin, r.ratio);
      qmax = std::max(qmax, r.ratio);
    }
    double spread = (qmax - qmin) / (0.5 * (qmax + qmin));
    std::vector<Gate> gates;
    gates.push_back({"mode-shape-spread", spread <= 0.10, spread, 0.10,
                     "relative spread of Var*||nu||^{2 gamma} across modes"});
    gates.push_back({"absolute-band-low", qmin >= 0.5, qmin, 0.5,
                     "Var/limit with extrapolated constant"});
    gates.push_back({"absolute-band-high", qmax <= 2.0, qmax, 2.0, ""});
    rc = finish_gates(cfg, gates);
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg, wall, artifacts);
  return rc;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  RunConfig cfg;

  CLI::App app{"fracpile: long-range divisible sandpile simulator and spectral toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (flags override it)");
    sub->add_option("--dim", cfg.dim, "lattice dimension d");
    sub->add_option("--n", cfg.n, "torus side length");
    sub->add_option("--n-ladder", cfg.n_ladder, "increasing list of side lengths")
        ->delimiter(',');
    sub->add_option("--alpha", cfg.alpha, "long-range exponent");
    sub->add_option("--seed", cfg.seed, "master seed");
    sub->add_option("--replicates", cfg.replicates, "Monte Carlo replicates");
    sub->add_option("--eps", cfg.eps, "toppling convergence threshold");
    sub->add_option("--max-steps", cfg.max_steps, "toppling step cap");
    sub->add_option("--rel-tol", cfg.rel_tol, "kernel truncation tolerance");
    sub->add_option("--method", cfg.method, "odometer route: spectral|topple|both");
    sub->add_option("--out", cfg.out, "output path (stdout when omitted)");
    sub->add_option("--format", cfg.format, "output format: csv|bin");
    sub->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
    sub->add_option("--modes", cfg.modes, "Fourier modes, e.g. \"1,0;1,1;2,0\"");
    sub->add_option("--plan", cfg.plan, "experiment plan JSON");
    sub->add_flag("--check", cfg.check, "run acceptance gates; exit 3 on failure");
  };

  CLI::App* sub_kernel = app.add_subcommand("kernel", "build and export a jump kernel");
  CLI::App* sub_spectrum = app.add_subcommand("spectrum", "eigenvalues and rate report");
  CLI::App* sub_eigen =
      app.add_subcommand("eigen-asymptotics", "eigenvalue asymptotics along a ladder");
  CLI::App* sub_stab = app.add_subcommand("stabilize", "parallel-toppling stabilization");
  CLI::App* sub_odo = app.add_subcommand("odometer", "odometer by spectral/toppling route");
  CLI::App* sub_stats =
      app.add_subcommand("odometer-stats", "odometer-mean scaling campaign");
  CLI::App* sub_cov = app.add_subcommand("field-cov", "field-covariance campaign");
  CLI::App* sub_campaign = app.add_subcommand("campaign", "run a scripted campaign");
  for (CLI::App* sub :
       {sub_kernel, sub_spectrum, sub_eigen, sub_stab, sub_odo, sub_stats, sub_cov})
    add_common(sub);
  sub_campaign->add_option("--script", cfg.script, "campaign script JSON")->required();
  sub_campaign->add_option("--out-dir", cfg.out_dir, "output directory")->required();
  sub_campaign->add_option("--seed", cfg.seed, "master seed override");

  // Config file first (lowest precedence), then flags.  A config file can
  // only be located by scanning because it must be loaded before parsing.
  for (size_t i = 0; i + 1 < args.size(); ++i)
    if (args[i] == "--config") config_path = args[i + 1];
  std::vector<std::string> problems;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config file " << config_path << "\n";
      return 2;
    }
    try {
      json j = json::parse(in);
      static const std::map<std::string, int> known = {
          {"dim", 0},     {"n", 0},       {"n_ladder", 0}, {"alpha", 0},
          {"seed", 0},    {"replicates", 0}, {"eps", 0},   {"max_steps", 0},
          {"rel_tol", 0}, {"method", 0},  {"out", 0},      {"format", 0},
          {"threads", 0}, {"modes", 0},   {"plan", 0},     {"check", 0}};
      for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) problems.push_back("config: unknown key '" + it.key() + "'");
      if (j.contains("dim")) cfg.dim = j["dim"];
      if (j.contains("n")) cfg.n = j["n"];
      if (j.contains("n_ladder")) cfg.n_ladder = j["n_ladder"].get<std::vector<int>>();
      if (j.contains("alpha")) cfg.alpha = j["alpha"];
      if (j.contains("seed")) cfg.seed = j["seed"];
      if (j.contains("replicates")) cfg.replicates = j["replicates"];
      if (j.contains("eps")) cfg.eps = j["eps"];
      if (j.contains("max_steps")) cfg.max_steps = j["max_steps"];
      if (j.contains("rel_tol")) cfg.rel_tol = j["rel_tol"];
      if (j.contains("method")) cfg.method = j["method"];
      if (j.contains("out")) cfg.out = j["out"];
      if (j.contains("format")) cfg.format = j["format"];
      if (j.contains("threads")) cfg.threads = j["threads"];
      if (j.contains("modes")) cfg.modes = j["modes"];
      if (j.contains("plan")) cfg.plan = j["plan"];
      if (j.contains("check")) cfg.check = j["check"];
    } catch (const json::exception& e) {
      std::cerr << "error: config file is not valid JSON: " << e.what() << "\n";
      return 2;
    }
  }

  std::vector<const char*> argv;
  std::string prog = "fracpile";
  argv.push_back(prog.c_str());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App* active = app.get_subcommands().front();
  cfg.subcommand = active->get_name();

  // Collect every validation problem before giving up.
  const bool needs_alpha = cfg.subcommand != "campaign";
  const bool needs_n =
      cfg.subcommand == "kernel" || cfg.subcommand == "stabilize" ||
      cfg.subcommand == "odometer" ||
      (cfg.subcommand == "spectrum" && cfg.n_ladder.empty());
  if (cfg.dim < 1) problems.push_back("--dim must be >= 1");
  if (needs_n && cfg.n < 2 && cfg.plan.empty()) problems.push_back("--n must be >= 2");
  if (needs_alpha && cfg.alpha <= 0 && cfg.plan.empty())
    problems.push_back("--alpha must be > 0 (got " + std::to_string(cfg.alpha) + ")");
  if (cfg.eps <= 0) problems.push_back("--eps must be > 0");
  if (cfg.max_steps < 1) problems.push_back("--max-steps must be >= 1");
  if (!(cfg.rel_tol > 0) || cfg.rel_tol > 1e-6)
    problems.push_back("--rel-tol must lie in (0, 1e-6]");
  if (cfg.method != "spectral" && cfg.method != "topple" && cfg.method != "both")
    problems.push_back("--method must be spectral|topple|both");
  if (cfg.format != "csv" && cfg.format != "bin")
    problems.push_back("--format must be csv|bin");
  if (cfg.threads < 0) problems.push_back("--threads must be >= 0");
  if (cfg.replicates < 0) problems.push_back("--replicates must be >= 0");
  for (size_t i = 1; i < cfg.n_ladder.size(); ++i)
    if (cfg.n_ladder[i] <= cfg.n_ladder[i - 1]) {
      problems.push_back("--n-ladder must be strictly increasing");
      break;
    }
  if (!problems.empty()) {
    for (const auto& p : problems) std::cerr << "error: " << p << "\n";
    return 2;
  }

  try {
    if (cfg.subcommand == "kernel") return cmd_kernel(cfg);
    if (cfg.subcommand == "spectrum") return cmd_spectrum(cfg);
    if (cfg.subcommand == "eigen-asymptotics") return cmd_eigen_asymptotics(cfg);
    if (cfg.subcommand == "stabilize") return cmd_stabilize(cfg);
    if (cfg.subcommand == "odometer") return cmd_odometer(cfg);
    if (cfg.subcommand == "odometer-stats") return cmd_odometer_stats(cfg);
    if (cfg.subcommand == "field-cov") return cmd_field_cov(cfg);
    if (cfg.subcommand == "campaign")
      return run_campaign_file(cfg.script, cfg.out_dir, cfg.seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: unknown subcommand\n";
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace fracpile::cli
