#pragma once

#include <optional>
#include <string>

#include "fracpile/fields.hpp"
#include "fracpile/sandpile.hpp"

namespace fracpile {

enum class ExperimentKind { odometer_mean, field_cov, eigen_rates };
enum class WeightDist { gaussian, uniform };

struct ExperimentPlan {
  ExperimentKind kind = ExperimentKind::odometer_mean;
  int d = 1;
  double alpha = 1.0;
  std::vector<int> n_ladder;
  int replicates = 200;
  std::uint64_t master_seed = 1;
  double kernel_tol = 1e-12;
  double eps = 1e-12;                       // toppling threshold for audits
  int audit_every = 50;                     // 1-in-k replicates audited
  // Parallel toppling needs ~n^d log(1/eps) rounds, so audited replicates are
  // re-run by toppling only up to this many sites; above it they are checked
  // against the solve residual |s0 + L u - 1| instead.
  std::int64_t audit_site_cap = 4096;
  WeightDist weights = WeightDist::gaussian;
  std::vector<Coords> modes;                // field_cov only
  int threads = 0;                          // 0 = hardware concurrency

  void validate() const;
};

std::string plan_to_json(const ExperimentPlan& plan);
ExperimentPlan plan_from_json(const std::string& text);

struct OdometerMeanRow {
  int n = 0;
  int replicates = 0;
  double mean = 0.0;    // replicate average of the site-averaged odometer
  double stderr_ = 0.0;
  int audits = 0;
  double max_audit_gap = 0.0;  // worst toppling-vs-spectral sup distance
};

std::vector<OdometerMeanRow> run_odometer_mean(const ExperimentPlan& plan);

struct FieldCovRow {
  int n = 0;
  Coords nu;
  int replicates = 0;
  double empirical_var = 0.0;
  double var_stderr = 0.0;
  double limit_var = 0.0;  // ||nu||^{-2 gamma}
  double ratio = 0.0;
};

std::vector<FieldCovRow> run_field_cov(const ExperimentPlan& plan);

enum class FitModel { power_in_n, linear_in_log_n, sqrt_log_n };

// Weighted least squares of a scaling table against the chosen model:
//   power_in_n:       log y = b + slope log n
//   linear_in_log_n:  y = b + slope log n
//   sqrt_log_n:       y = b + slope sqrt(log n)
struct ScalingFit {
  FitModel model;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
};

struct ScalingPoint {
  double n = 0.0;
  double value = 0.0;
  double stderr_ = 0.0;
};

ScalingFit fit_scaling(const std::vector<ScalingPoint>& table, FitModel model);

// Deterministic per-replicate stream (see rng.hpp for the derivation contract).
inline RngStream seed_stream(std::uint64_t master_seed, std::uint64_t replicate_index) {
  return RngStream(master_seed, replicate_index);
}

// Runs fn(i) for i in [0, count) on a pool; results must be written to
// per-index slots so the aggregation order never depends on scheduling.
void parallel_for_index(std::int64_t count, int threads,
                        const std::function<void(std::int64_t)>& fn);

}  // namespace fracpile
