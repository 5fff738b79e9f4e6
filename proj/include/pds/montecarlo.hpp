#pragma once

#include <bit>
#include <charconv>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pds/dgp.hpp"
#include "pds/estimators.hpp"
#include "pds/metrics.hpp"
#include "pds/split_sample.hpp"

namespace pds {

inline const std::vector<std::string>& estimator_catalog() {
  static const std::vector<std::string> names = {"oracle",  "ds-oracle", "post-lasso", "lasso",
                                                 "ds",      "ds-i3",     "union-ads",  "split"};
  return names;
}

inline bool estimator_known(const std::string& name) {
  const auto& names = estimator_catalog();
  return std::find(names.begin(), names.end(), name) != names.end();
}

namespace detail {

// One replication: every requested estimator sees the same sample. The
// double-selection and single-selection reports are shared where several
// requested estimators need them.
struct RepContext {
  const GeneratedSample& gs;
  const PenaltyConfig& cfg;
  double level;
  std::uint64_t master_seed;
  int rep;
  std::optional<EstimateReport> ds_report;
  std::optional<EstimateReport> pl_report;

  const EstimateReport& ds() {
    if (!ds_report) ds_report = double_selection(gs.data, cfg, level);
    return *ds_report;
  }
  const EstimateReport& post_lasso() {
    if (!pl_report) pl_report = single_selection_post_lasso(gs.data, cfg, level);
    return *pl_report;
  }
  EstimateReport dispatch(const std::string& name) {
    if (name == "oracle") return oracle(gs.data, level);
    if (name == "ds-oracle") return ds_oracle(gs.data, level);
    if (name == "post-lasso") return post_lasso();
    if (name == "lasso") return lasso_direct(gs.data, cfg, level);
    if (name == "ds") return ds();
    if (name == "ds-i3") return ds_plus_i3(gs.data, cfg, level);
    if (name == "union-ads") return union_ads(ds(), post_lasso());
    // "split": the partition seed is keyed by (master seed, replication,
    // estimator name) so other estimators never see these draws.
    return split_sample_estimate(
               gs.data, cfg, level,
               derive_seed(master_seed, static_cast<std::uint64_t>(rep), hash_tag("split")))
        .report;
  }
};

inline RepRecord record_from_report(const EstimateReport& rep, double alpha0) {
  RepRecord r;
  r.bias = rep.alpha_hat - alpha0;
  r.cover = rep.ci_lower <= alpha0 && alpha0 <= rep.ci_upper;
  r.reject = !r.cover;  // the symmetric t-test and the interval are duals
  r.ci_length = rep.ci_upper - rep.ci_lower;
  r.s_hat = rep.s_hat;
  r.flagged = rep.flagged;
  return r;
}

}  // namespace detail

// Runs `reps` replications of one design cell. Replication r draws its data
// from the (master_seed, r) stream, so any parallelism degree produces the
// same summaries.
inline std::vector<McSummary> run_cell(const DesignSpec& spec,
                                       const std::vector<std::string>& estimators, int reps,
                                       std::uint64_t master_seed, int parallelism = 1,
                                       const PenaltyConfig& cfg = {}, double level = 0.95) {
  if (reps < 1) throw std::invalid_argument("run_cell: need reps >= 1");
  if (parallelism < 1) throw std::invalid_argument("run_cell: need parallelism >= 1");
  if (!design_known(spec.design)) {
    throw std::invalid_argument("run_cell: unknown design '" + spec.design + "'");
  }
  for (const auto& name : estimators) {
    if (!estimator_known(name)) {
      std::string msg = "run_cell: unknown estimator '" + name + "'; valid names:";
      for (const auto& c : estimator_catalog()) msg += " " + c;
      throw std::invalid_argument(msg);
    }
  }

  std::vector<std::vector<RepRecord>> records(estimators.size(),
                                              std::vector<RepRecord>(static_cast<std::size_t>(reps)));

  auto worker = [&](int lo, int hi) {
    for (int rep = lo; rep < hi; ++rep) {
      Rng rng(derive_seed(master_seed, static_cast<std::uint64_t>(rep), hash_tag("data")));
      GeneratedSample gs = generate(spec, rng);
      detail::RepContext ctx{gs, cfg, level, master_seed, rep, std::nullopt, std::nullopt};
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        RepRecord& slot = records[e][static_cast<std::size_t>(rep)];
        try {
          slot = detail::record_from_report(ctx.dispatch(estimators[e]), spec.alpha0);
        } catch (const std::exception&) {
          slot.failed = true;
        }
      }
    }
  };

  const int threads = std::min(parallelism, reps);
  if (threads <= 1) {
    worker(0, reps);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (reps + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int lo = t * chunk;
      const int hi = std::min(reps, lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  std::vector<McSummary> out;
  out.reserve(estimators.size());
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    out.push_back(summarize(records[e], estimators[e], spec.design, spec.r2_y, spec.r2_d));
  }
  return out;
}

// Full R^2_y x R^2_d cross of one design. Each cell derives its own seed from
// the grid coordinates, so results do not depend on evaluation order.
inline std::vector<McSummary> run_grid(const std::string& design_id,
                                       const std::vector<double>& r2_values,
                                       const std::vector<std::string>& estimators, int reps,
                                       std::uint64_t master_seed, int n = 100, int p = 200,
                                       int parallelism = 1, const PenaltyConfig& cfg = {},
                                       double level = 0.95) {
  std::vector<McSummary> rows;
  for (double r2y : r2_values) {
    for (double r2d : r2_values) {
      DesignSpec spec;
      spec.design = design_id;
      spec.n = n;
      spec.p = p;
      spec.r2_y = r2y;
      spec.r2_d = r2d;
      const std::uint64_t cell_seed =
          derive_seed(master_seed, std::bit_cast<std::uint64_t>(r2y),
                      std::bit_cast<std::uint64_t>(r2d), hash_tag(design_id));
      auto cell = run_cell(spec, estimators, reps, cell_seed, parallelism, cfg, level);
      rows.insert(rows.end(), cell.begin(), cell.end());
    }
  }
  return rows;
}

enum class ReportFormat { csv, json };

inline constexpr const char* kReportHeader =
    "estimator,design,r2_y,r2_d,reps,mean_bias,median_bias,rmse,rejection_rate_5pct,"
    "coverage_95,mean_ci_length,mean_s_hat,failures";

namespace detail {

// Shortest decimal representation that round-trips.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline nlohmann::json to_json(const McSummary& s) {
  return nlohmann::json{{"estimator", s.estimator},
                        {"design", s.design},
                        {"r2_y", s.r2_y},
                        {"r2_d", s.r2_d},
                        {"reps", s.reps},
                        {"mean_bias", s.mean_bias},
                        {"median_bias", s.median_bias},
                        {"rmse", s.rmse},
                        {"rejection_rate_5pct", s.rejection_rate_5pct},
                        {"coverage_95", s.coverage_95},
                        {"mean_ci_length", s.mean_ci_length},
                        {"mean_s_hat", s.mean_s_hat},
                        {"failures", s.failures}};
}

}  // namespace detail

inline void emit_report(const std::vector<McSummary>& rows, ReportFormat format,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_report: cannot write '" + path + "'");
  if (format == ReportFormat::csv) {
    out << kReportHeader << "\n";
    for (const auto& s : rows) {
      out << s.estimator << ',' << s.design << ',' << detail::format_double(s.r2_y) << ','
          << detail::format_double(s.r2_d) << ',' << s.reps << ','
          << detail::format_double(s.mean_bias) << ',' << detail::format_double(s.median_bias)
          << ',' << detail::format_double(s.rmse) << ','
          << detail::format_double(s.rejection_rate_5pct) << ','
          << detail::format_double(s.coverage_95) << ','
          << detail::format_double(s.mean_ci_length) << ','
          << detail::format_double(s.mean_s_hat) << ',' << s.failures << "\n";
    }
  } else {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : rows) arr.push_back(detail::to_json(s));
    out << arr.dump(2) << "\n";
  }
  if (!out) throw std::runtime_error("emit_report: write to '" + path + "' failed");
}

}  // namespace pds
