#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "pds/lasso.hpp"
#include "pds/metrics.hpp"
#include "pds/ols.hpp"
#include "pds/rng.hpp"
#include "pds/types.hpp"

namespace pds {

// Control sets picked by the individual selection regressions.
struct SelectionSets {
  IndexSet i1;                   // treatment equation: d on x
  IndexSet i2;                   // outcome equation: y on x
  std::optional<IndexSet> i3;    // outcome on (d, x) with d unpenalized
  IndexSet combined() const {
    IndexSet u = index_union(i1, i2);
    if (i3) u = index_union(u, *i3);
    return u;
  }
};

namespace detail {

struct SelectionResult {
  SelectionSets sets;
  // Largest |lasso coefficient| seen per control column; ranks candidates if
  // the post-selection design must be truncated to fit the sample.
  std::vector<double> magnitude;
  bool converged = true;
};

inline void record_magnitude(std::vector<double>& mag, int col, double value) {
  mag[static_cast<std::size_t>(col)] = std::max(mag[static_cast<std::size_t>(col)], std::abs(value));
}

// Runs the selection regressions. i1: d ~ x, i2: y ~ x, and optionally
// i3: y ~ (d, x) with d unpenalized.
inline SelectionResult select_controls(const Vec& y, const Vec& d, const Mat& X,
                                       const PenaltyConfig& cfg, bool with_i3) {
  const Eigen::Index p = X.cols();
  SelectionResult out;
  out.magnitude.assign(static_cast<std::size_t>(p), 0.0);

  PenaltyConfig plain = cfg;
  plain.unpenalized.clear();
  LassoFit f1 = feasible_lasso(X, d, plain);
  LassoFit f2 = feasible_lasso(X, y, plain);
  out.sets.i1 = f1.support;
  out.sets.i2 = f2.support;
  out.converged = f1.converged && f2.converged;
  for (int j : f1.support) record_magnitude(out.magnitude, j, f1.coef[j]);
  for (int j : f2.support) record_magnitude(out.magnitude, j, f2.coef[j]);

  if (with_i3) {
    Mat Xd(X.rows(), p + 1);
    Xd.col(0) = d;
    Xd.rightCols(p) = X;
    PenaltyConfig cfg_d = cfg;
    cfg_d.unpenalized = {0};
    LassoFit f3 = feasible_lasso(Xd, y, cfg_d);
    IndexSet i3;
    for (int j : f3.support) {
      if (j >= 1) {
        i3.push_back(j - 1);
        record_magnitude(out.magnitude, j - 1, f3.coef[j]);
      }
    }
    out.sets.i3 = std::move(i3);
    out.converged = out.converged && f3.converged;
  }
  return out;
}

// Caps the control count at n-2 keeping the largest-|coefficient| picks.
inline bool truncate_selection(IndexSet& selected, const std::vector<double>& magnitude,
                               Eigen::Index n) {
  if (static_cast<Eigen::Index>(selected.size()) + 1 < n) return false;
  const Eigen::Index cap = n - 2;
  if (cap < 0) throw std::runtime_error("selection: sample too small for any post-selection fit");
  std::sort(selected.begin(), selected.end(), [&](int a, int b) {
    const double ma = magnitude[static_cast<std::size_t>(a)];
    const double mb = magnitude[static_cast<std::size_t>(b)];
    return ma != mb ? ma > mb : a < b;
  });
  selected.resize(static_cast<std::size_t>(cap));
  std::sort(selected.begin(), selected.end());
  return true;
}

// OLS of y on (d, X[selected]) with the jackknife standard error for d.
inline EstimateReport estimate_with_controls(const Dataset& data, IndexSet selected,
                                             const std::vector<double>& magnitude, double level,
                                             bool flagged) {
  const Eigen::Index n = data.n();
  if (truncate_selection(selected, magnitude, n)) flagged = true;

  Mat design(n, 1 + static_cast<Eigen::Index>(selected.size()));
  design.col(0) = data.d;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    design.col(1 + static_cast<Eigen::Index>(k)) = data.X.col(selected[k]);
  }
  OlsFit fit = ols_fit(design, data.y);
  if (fit.kept.empty() || fit.kept.front() != 0) {
    throw std::runtime_error("estimate: treatment is collinear with the selected controls");
  }
  Mat cov = hc_jackknife_cov(fit, design);

  EstimateReport rep;
  rep.alpha_hat = fit.coef[0];
  rep.se = std::sqrt(std::max(cov(0, 0), 0.0));
  rep.level = level;
  std::tie(rep.ci_lower, rep.ci_upper) = t_interval(rep.alpha_hat, rep.se, level);
  rep.selected = std::move(selected);
  rep.s_hat = static_cast<int>(rep.selected.size());
  rep.flagged = flagged;
  return rep;
}

}  // namespace detail

// Post-double-selection: OLS of y on d and the union of the controls picked
// by the two selection equations.
inline EstimateReport double_selection(const Dataset& data, const PenaltyConfig& cfg,
                                       double level = 0.95) {
  data.validate();
  auto sel = detail::select_controls(data.y, data.d, data.X, cfg, /*with_i3=*/false);
  return detail::estimate_with_controls(data, sel.sets.combined(), sel.magnitude, level,
                                        !sel.converged);
}

// Post-double-selection plus the I3 set from the d-unpenalized outcome fit.
inline EstimateReport ds_plus_i3(const Dataset& data, const PenaltyConfig& cfg,
                                 double level = 0.95) {
  data.validate();
  auto sel = detail::select_controls(data.y, data.d, data.X, cfg, /*with_i3=*/true);
  return detail::estimate_with_controls(data, sel.sets.combined(), sel.magnitude, level,
                                        !sel.converged);
}

// Single-selection comparator: controls picked only from the outcome fit of
// y on (d, x) with d forced in unpenalized, then the usual OLS refit.
inline EstimateReport single_selection_post_lasso(const Dataset& data, const PenaltyConfig& cfg,
                                                  double level = 0.95) {
  data.validate();
  const Eigen::Index p = data.p();
  Mat Xd(data.n(), p + 1);
  Xd.col(0) = data.d;
  Xd.rightCols(p) = data.X;
  PenaltyConfig cfg_d = cfg;
  cfg_d.unpenalized = {0};
  LassoFit fit = feasible_lasso(Xd, data.y, cfg_d);
  IndexSet sel;
  std::vector<double> mag(static_cast<std::size_t>(p), 0.0);
  for (int j : fit.support) {
    if (j >= 1) {
      sel.push_back(j - 1);
      detail::record_magnitude(mag, j - 1, fit.coef[j]);
    }
  }
  return detail::estimate_with_controls(data, std::move(sel), mag, level, !fit.converged);
}

// Plain Lasso of y on (d, x) with d unpenalized: the point estimate is d's
// lasso coefficient; the standard error comes from the OLS refit on the
// active set, and the interval is recentered at the lasso estimate.
inline EstimateReport lasso_direct(const Dataset& data, const PenaltyConfig& cfg,
                                   double level = 0.95) {
  data.validate();
  const Eigen::Index p = data.p();
  Mat Xd(data.n(), p + 1);
  Xd.col(0) = data.d;
  Xd.rightCols(p) = data.X;
  PenaltyConfig cfg_d = cfg;
  cfg_d.unpenalized = {0};
  LassoFit fit = feasible_lasso(Xd, data.y, cfg_d);
  IndexSet active;
  std::vector<double> mag(static_cast<std::size_t>(p), 0.0);
  for (int j : fit.support) {
    if (j >= 1) {
      active.push_back(j - 1);
      detail::record_magnitude(mag, j - 1, fit.coef[j]);
    }
  }
  EstimateReport rep =
      detail::estimate_with_controls(data, std::move(active), mag, level, !fit.converged);
  rep.alpha_hat = fit.coef[0];
  std::tie(rep.ci_lower, rep.ci_upper) = t_interval(rep.alpha_hat, rep.se, level);
  return rep;
}

// Interval union of the double-selection and single-selection reports: the
// convex hull of the two intervals, point estimate at its midpoint, standard
// error backed out of the width.
inline EstimateReport union_ads(const EstimateReport& ds, const EstimateReport& post_lasso) {
  if (ds.level != post_lasso.level) {
    throw std::invalid_argument("union_ads: reports carry different confidence levels");
  }
  EstimateReport rep;
  rep.level = ds.level;
  rep.ci_lower = std::min(ds.ci_lower, post_lasso.ci_lower);
  rep.ci_upper = std::max(ds.ci_upper, post_lasso.ci_upper);
  rep.alpha_hat = 0.5 * (rep.ci_lower + rep.ci_upper);
  const double z = normal_quantile(0.5 * (1.0 + rep.level));
  rep.se = (rep.ci_upper - rep.ci_lower) / (2.0 * z);
  rep.selected = index_union(ds.selected, post_lasso.selected);
  rep.s_hat = static_cast<int>(rep.selected.size());
  rep.flagged = ds.flagged || post_lasso.flagged;
  return rep;
}

namespace detail {

inline EstimateReport estimate_on_signals(const Dataset& data, bool with_d_signal, double level) {
  data.validate();
  if (!data.truth) throw std::invalid_argument("oracle: dataset carries no ground truth");
  const Eigen::Index n = data.n();
  Mat design(n, with_d_signal ? 3 : 2);
  design.col(0) = data.d;
  design.col(1) = data.truth->signal_y;
  if (with_d_signal) design.col(2) = data.truth->signal_d;
  OlsFit fit = ols_fit(design, data.y);
  if (fit.kept.empty() || fit.kept.front() != 0) {
    throw std::runtime_error("oracle: treatment is collinear with the signal controls");
  }
  Mat cov = hc_jackknife_cov(fit, design);
  EstimateReport rep;
  rep.alpha_hat = fit.coef[0];
  rep.se = std::sqrt(std::max(cov(0, 0), 0.0));
  rep.level = level;
  std::tie(rep.ci_lower, rep.ci_upper) = t_interval(rep.alpha_hat, rep.se, level);
  rep.s_hat = static_cast<int>(fit.kept.size()) - 1;
  return rep;
}

}  // namespace detail

// Infeasible benchmarks: OLS of y on (d, true outcome signal), and with the
// true treatment signal added. Collinear or zero signals drop out via the
// rank screen.
inline EstimateReport oracle(const Dataset& data, double level = 0.95) {
  return detail::estimate_on_signals(data, /*with_d_signal=*/false, level);
}

inline EstimateReport ds_oracle(const Dataset& data, double level = 0.95) {
  return detail::estimate_on_signals(data, /*with_d_signal=*/true, level);
}

struct P1DemoResult {
  McSummary single_sel;
  McSummary double_sel;
};

// Single-control demonstration: conservative t-tests at Phi^-1(1 - 1/(2n))
// decide whether the one control stays. Single selection tests only the
// outcome equation; double selection keeps the control if either equation's
// t-statistic clears the threshold.
inline P1DemoResult p1_ttest_demo(double beta_g, double beta_m, int n, int reps,
                                  std::uint64_t seed) {
  if (n < 4) throw std::invalid_argument("p1_ttest_demo: need n >= 4");
  if (reps < 1) throw std::invalid_argument("p1_ttest_demo: need reps >= 1");
  const double alpha0 = 0.5;
  const double level = 0.95;
  const double threshold = normal_quantile(1.0 - 1.0 / (2.0 * static_cast<double>(n)));

  std::vector<RepRecord> rec_single(static_cast<std::size_t>(reps));
  std::vector<RepRecord> rec_double(static_cast<std::size_t>(reps));

  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(rep), hash_tag("p1")));
    Vec x(n), zeta(n), v(n);
    for (int i = 0; i < n; ++i) x[i] = rng.normal();
    for (int i = 0; i < n; ++i) zeta[i] = rng.normal();
    for (int i = 0; i < n; ++i) v[i] = rng.normal();
    Vec d = beta_m * x + v;
    Vec y = alpha0 * d + beta_g * x + zeta;

    Mat design(n, 2);
    design.col(0) = d;
    design.col(1) = x;
    OlsFit longfit = ols_fit(design, y);
    Mat cov_long = classical_cov(longfit, design);
    const double t_g = longfit.coef[1] / std::sqrt(cov_long(1, 1));

    OlsFit dfit = ols_fit(x, d);
    Mat cov_d = classical_cov(dfit, Mat(x));
    const double t_m = dfit.coef[0] / std::sqrt(cov_d(0, 0));

    auto finish = [&](bool keep_x) {
      Mat dsn = keep_x ? design : Mat(d);
      OlsFit fit = keep_x ? longfit : ols_fit(dsn, y);
      Mat cov = hc_jackknife_cov(fit, dsn);
      const double se = std::sqrt(std::max(cov(0, 0), 0.0));
      auto [lo, hi] = t_interval(fit.coef[0], se, level);
      RepRecord r;
      r.bias = fit.coef[0] - alpha0;
      r.cover = lo <= alpha0 && alpha0 <= hi;
      r.reject = !r.cover;
      r.ci_length = hi - lo;
      r.s_hat = keep_x ? 1.0 : 0.0;
      return r;
    };
    rec_single[static_cast<std::size_t>(rep)] = finish(std::abs(t_g) >= threshold);
    rec_double[static_cast<std::size_t>(rep)] =
        finish(std::abs(t_g) >= threshold || std::abs(t_m) >= threshold);
  }

  P1DemoResult out;
  out.single_sel = summarize(rec_single, "single-selection", "p1", 0.0, 0.0);
  out.double_sel = summarize(rec_double, "double-selection", "p1", 0.0, 0.0);
  return out;
}

}  // namespace pds
