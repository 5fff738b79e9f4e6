#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace pds {

// One aggregated row of a Monte Carlo experiment.
struct McSummary {
  std::string estimator;
  std::string design;
  double r2_y = 0.0;
  double r2_d = 0.0;
  int reps = 0;
  double mean_bias = 0.0;
  double median_bias = 0.0;
  double rmse = 0.0;
  double rejection_rate_5pct = 0.0;
  double coverage_95 = 0.0;
  double mean_ci_length = 0.0;
  double mean_s_hat = 0.0;
  int failures = 0;
};

// Per-replication outcome. `failed` marks replications whose estimator threw;
// they carry no usable numbers. `flagged` marks degraded-but-finite runs
// (degrees-of-freedom truncation, non-converged selection).
struct RepRecord {
  double bias = 0.0;
  double ci_length = 0.0;
  double s_hat = 0.0;
  bool cover = false;
  bool reject = false;
  bool flagged = false;
  bool failed = false;
};

// Aggregates records into a summary. Hard failures are excluded from the
// moment metrics (dropping them silently would hide breakage, so they are
// counted in `failures` together with flagged runs). Median bias uses the
// lower median for even counts.
inline McSummary summarize(const std::vector<RepRecord>& recs, std::string estimator,
                           std::string design, double r2_y, double r2_d) {
  McSummary s;
  s.estimator = std::move(estimator);
  s.design = std::move(design);
  s.r2_y = r2_y;
  s.r2_d = r2_d;
  s.reps = static_cast<int>(recs.size());

  std::vector<double> biases;
  double sum_bias = 0.0, sum_sq = 0.0, sum_len = 0.0, sum_s = 0.0;
  int covered = 0, rejected = 0, used = 0;
  for (const auto& r : recs) {
    if (r.flagged || r.failed) ++s.failures;
    if (r.failed) continue;
    ++used;
    biases.push_back(r.bias);
    sum_bias += r.bias;
    sum_sq += r.bias * r.bias;
    sum_len += r.ci_length;
    sum_s += r.s_hat;
    covered += r.cover ? 1 : 0;
    rejected += r.reject ? 1 : 0;
  }
  if (used == 0) return s;
  const double m = static_cast<double>(used);
  s.mean_bias = sum_bias / m;
  s.rmse = std::sqrt(sum_sq / m);
  s.mean_ci_length = sum_len / m;
  s.mean_s_hat = sum_s / m;
  s.coverage_95 = covered / m;
  s.rejection_rate_5pct = rejected / m;
  std::sort(biases.begin(), biases.end());
  s.median_bias = biases[(biases.size() - 1) / 2];
  return s;
}

}  // namespace pds
