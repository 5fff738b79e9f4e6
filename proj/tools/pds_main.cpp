// Command-line front end: simulation cells, estimation from CSV data, the
// ATE/ATT pipeline, and the single-control selection demo.

#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pds/pds.hpp"

namespace {

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void print_summary_table(const std::vector<pds::McSummary>& rows) {
  std::printf("%-10s %-6s %5s %5s %6s %9s %9s %8s %7s %7s %8s %7s %5s\n", "estimator", "design",
              "r2_y", "r2_d", "reps", "bias", "med.bias", "rmse", "rej5%", "cov95", "ci.len",
              "s.hat", "fail");
  for (const auto& s : rows) {
    std::printf("%-10s %-6s %5.2f %5.2f %6d %9.4f %9.4f %8.4f %7.3f %7.3f %8.4f %7.2f %5d\n",
                s.estimator.c_str(), s.design.c_str(), s.r2_y, s.r2_d, s.reps, s.mean_bias,
                s.median_bias, s.rmse, s.rejection_rate_5pct, s.coverage_95, s.mean_ci_length,
                s.mean_s_hat, s.failures);
  }
}

void print_report(const std::string& method, const pds::EstimateReport& rep) {
  std::printf("method:    %s\n", method.c_str());
  std::printf("alpha_hat: %.6g\n", rep.alpha_hat);
  std::printf("se:        %.6g\n", rep.se);
  std::printf("ci_%g:     [%.6g, %.6g]\n", rep.level * 100.0, rep.ci_lower, rep.ci_upper);
  std::printf("s_hat:     %d\n", rep.s_hat);
  if (rep.flagged) std::printf("flagged:   yes (truncated selection or non-converged fit)\n");
}

int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

struct SimulateArgs {
  std::string design = "1";
  double r2y = 0.0, r2d = 0.0;
  int reps = 1000;
  std::uint64_t seed = 1;
  std::string estimators = "ds";
  std::string out = "pds_report.csv";
  std::string format = "csv";
  int n = 100, p = 200;
  int threads = default_threads();
};

struct EstimateArgs {
  std::string data;
  std::string outcome = "y";
  std::string treatment = "d";
  std::string method = "ds";
  double level = 0.95;
  std::uint64_t seed = 1;
};

struct AteArgs {
  std::string data;
  std::string outcome = "y";
  std::string treatment = "d";
  std::string kind = "ate";
  std::string link = "linear";
  double trim = 0.01;
  double level = 0.95;
};

struct DemoArgs {
  double beta_g = 0.0;
  double beta_m = 0.0;
  int n = 100;
  int reps = 2000;
  std::uint64_t seed = 1;
};

int run_simulate(const SimulateArgs& a) {
  if (!pds::design_known(a.design)) {
    std::string msg = "unknown design '" + a.design + "'; valid designs:";
    for (const auto& id : pds::design_catalog()) msg += " " + id;
    throw std::invalid_argument(msg);
  }
  pds::DesignSpec spec;
  spec.design = a.design;
  spec.n = a.n;
  spec.p = a.p;
  spec.r2_y = a.r2y;
  spec.r2_d = a.r2d;
  spec.seed = a.seed;
  auto names = split_csv_list(a.estimators);
  if (names.empty()) throw std::invalid_argument("no estimators requested");
  auto rows = pds::run_cell(spec, names, a.reps, a.seed, a.threads);
  const auto format =
      a.format == "json" ? pds::ReportFormat::json : pds::ReportFormat::csv;
  pds::emit_report(rows, format, a.out);
  print_summary_table(rows);
  std::printf("report written to %s\n", a.out.c_str());
  return 0;
}

int run_estimate(const EstimateArgs& a) {
  auto table = pds::read_csv(a.data);
  auto data = pds::dataset_from_table(table, a.outcome, a.treatment);
  pds::PenaltyConfig cfg;
  pds::EstimateReport rep;
  if (a.method == "ds") {
    rep = pds::double_selection(data, cfg, a.level);
  } else if (a.method == "post-lasso") {
    rep = pds::single_selection_post_lasso(data, cfg, a.level);
  } else if (a.method == "ds-i3") {
    rep = pds::ds_plus_i3(data, cfg, a.level);
  } else if (a.method == "union-ads") {
    rep = pds::union_ads(pds::double_selection(data, cfg, a.level),
                         pds::single_selection_post_lasso(data, cfg, a.level));
  } else if (a.method == "split") {
    rep = pds::split_sample_estimate(data, cfg, a.level, a.seed).report;
  } else if (a.method == "lasso") {
    rep = pds::lasso_direct(data, cfg, a.level);
  } else {
    throw std::invalid_argument("unknown method '" + a.method +
                                "'; use ds|post-lasso|ds-i3|union-ads|split|lasso");
  }
  print_report(a.method, rep);
  return 0;
}

int run_ate(const AteArgs& a) {
  auto table = pds::read_csv(a.data);
  auto data = pds::dataset_from_table(table, a.outcome, a.treatment);
  for (Eigen::Index i = 0; i < data.d.size(); ++i) {
    if (data.d[i] != 0.0 && data.d[i] != 1.0) {
      throw std::invalid_argument("treatment column must be binary 0/1; row " +
                                  std::to_string(i + 2) + " holds " + std::to_string(data.d[i]));
    }
  }
  const auto link = a.link == "logit" ? pds::PropensityLink::logit : pds::PropensityLink::linear;
  if (a.link != "logit" && a.link != "linear") {
    throw std::invalid_argument("unknown link '" + a.link + "'; use linear|logit");
  }
  pds::PenaltyConfig cfg;
  pds::AteReport rep;
  if (a.kind == "ate") {
    rep = pds::ate_estimate(data.y, data.d, data.X, link, cfg, a.level, a.trim);
  } else if (a.kind == "att") {
    rep = pds::att_estimate(data.y, data.d, data.X, link, cfg, a.level, a.trim);
  } else {
    throw std::invalid_argument("unknown kind '" + a.kind + "'; use ate|att");
  }
  std::printf("kind:       %s\n", a.kind.c_str());
  std::printf("effect_hat: %.6g\n", rep.effect_hat);
  std::printf("se:         %.6g\n", rep.se);
  std::printf("ci_%g:      [%.6g, %.6g]\n", rep.level * 100.0, rep.ci_lower, rep.ci_upper);
  std::printf("mu_hat:     %.6g\n", rep.mu_hat);
  return 0;
}

int run_demo(const DemoArgs& a) {
  if (a.reps < 10) throw std::invalid_argument("demo-p1: need --reps >= 10");
  auto res = pds::p1_ttest_demo(a.beta_g, a.beta_m, a.n, a.reps, a.seed);
  std::printf("%-18s %10s %10s %10s %10s %10s\n", "method", "coverage95", "rejection5",
              "mean_bias", "rmse", "keep_rate");
  for (const auto* s : {&res.single_sel, &res.double_sel}) {
    std::printf("%-18s %10.4f %10.4f %10.4f %10.4f %10.4f\n", s->estimator.c_str(),
                s->coverage_95, s->rejection_rate_5pct, s->mean_bias, s->rmse, s->mean_s_hat);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"post-double-selection inference toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read option defaults from a key=value file");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo design cell");
  simulate->add_option("--design", sim.design, "design id (1, 2, 22, ..., 1001a)");
  simulate->add_option("--r2y", sim.r2y, "target R^2 of the outcome reduced form");
  simulate->add_option("--r2d", sim.r2d, "target R^2 of the treatment reduced form");
  simulate->add_option("--reps", sim.reps, "replications");
  simulate->add_option("--seed", sim.seed, "master seed");
  simulate->add_option("--estimators", sim.estimators,
                       "comma list of oracle,ds-oracle,post-lasso,lasso,ds,ds-i3,union-ads,split");
  simulate->add_option("--out", sim.out, "report path");
  simulate->add_option("--format", sim.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  simulate->add_option("--n", sim.n, "sample size");
  simulate->add_option("--p", sim.p, "number of controls");
  simulate->add_option("--threads", sim.threads, "worker threads")->envname("PDS_THREADS");

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "treatment-coefficient inference from a CSV file");
  estimate->add_option("--data", est.data, "CSV with a header row; non y/d columns are controls")
      ->required();
  estimate->add_option("--outcome", est.outcome, "outcome column name");
  estimate->add_option("--treatment", est.treatment, "treatment column name");
  estimate->add_option("--method", est.method, "ds|post-lasso|ds-i3|union-ads|split|lasso");
  estimate->add_option("--level", est.level, "confidence level");
  estimate->add_option("--seed", est.seed, "seed for the split method's partition");

  AteArgs ate;
  auto* atec = app.add_subcommand("ate", "average treatment effect (ATE/ATT) from a CSV file");
  atec->add_option("--data", ate.data, "CSV with a header row")->required();
  atec->add_option("--outcome", ate.outcome, "outcome column name");
  atec->add_option("--treatment", ate.treatment, "binary treatment column name");
  atec->add_option("--kind", ate.kind, "ate or att");
  atec->add_option("--link", ate.link, "propensity link: linear or logit");
  atec->add_option("--trim", ate.trim, "propensity trimming bound");
  atec->add_option("--level", ate.level, "confidence level");

  DemoArgs demo;
  auto* demop1 = app.add_subcommand("demo-p1", "single-control selection demo");
  demop1->add_option("--beta-g", demo.beta_g, "control coefficient in the outcome equation");
  demop1->add_option("--beta-m", demo.beta_m, "control coefficient in the treatment equation");
  demop1->add_option("--n", demo.n, "sample size");
  demop1->add_option("--reps", demo.reps, "replications");
  demop1->add_option("--seed", demo.seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(simulate)) return run_simulate(sim);
    if (app.got_subcommand(estimate)) return run_estimate(est);
    if (app.got_subcommand(atec)) return run_ate(ate);
    return run_demo(demo);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
