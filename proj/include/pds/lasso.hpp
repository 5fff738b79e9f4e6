#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "pds/normal.hpp"
#include "pds/ols.hpp"
#include "pds/types.hpp"

namespace pds {

// Loadings never fall below this fraction of the largest loading (absolute
// floor when the outcome has no variation at all).
inline constexpr double kLoadingFloor = 1e-8;

struct PenaltyConfig {
  double c = 1.1;              // slack constant, > 1
  double gamma = 0.05;         // confidence parameter; penalty covers noise wp ~ 1-gamma
  int loading_iterations = 5;  // rounds of residual-based loading updates
  double tol = 1e-7;           // max |coefficient change| per sweep
  int max_iter = 10000;        // sweep cap
  IndexSet unpenalized;        // columns with zero penalty
  std::optional<double> lambda_override;  // fixed lambda instead of the data-driven level
};

struct LassoFit {
  Vec coef;
  double lambda = 0.0;
  Vec loadings;
  IndexSet support;  // exact nonzeros (soft-thresholding produces exact zeros)
  int iterations = 0;
  bool converged = false;
};

// lambda = 2 c sqrt(n) Phi^-1(1 - gamma / (2p)): the smallest level that
// dominates the maximal noise score over p coordinates wp ~ 1 - gamma.
inline double penalty_level(Eigen::Index n, Eigen::Index p, double c, double gamma) {
  if (n < 1 || p < 1) throw std::invalid_argument("penalty_level: n and p must be >= 1");
  if (!(c > 1.0)) throw std::invalid_argument("penalty_level: c must exceed 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("penalty_level: gamma must lie in (0, 1)");
  return 2.0 * c * std::sqrt(static_cast<double>(n)) *
         normal_quantile(1.0 - gamma / (2.0 * static_cast<double>(p)));
}

namespace detail {

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

inline std::vector<char> penalized_mask(Eigen::Index p, const IndexSet& unpenalized) {
  std::vector<char> mask(static_cast<std::size_t>(p), 1);
  for (int j : unpenalized) {
    if (j < 0 || j >= p) throw std::invalid_argument("unpenalized index out of range");
    mask[static_cast<std::size_t>(j)] = 0;
  }
  return mask;
}

}  // namespace detail

// Weighted-l1 least squares, (1/n)||y - X b||^2 + (lambda/n) sum_j Psi_j |b_j|,
// by cyclic coordinate descent with active-set passes. Convergence is declared
// on a full sweep started from a freshly recomputed residual, which keeps the
// stationarity conditions tight for every coordinate.
inline LassoFit lasso_cd(const Mat& X, const Vec& y, double lambda, const Vec& loadings,
                         const IndexSet& unpenalized = {}, double tol = 1e-7, int max_iter = 10000) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n == 0) throw std::invalid_argument("lasso_cd: zero-row input");
  if (y.size() != n) throw std::invalid_argument("lasso_cd: y length must match rows of X");
  if (loadings.size() != p) throw std::invalid_argument("lasso_cd: loadings length must match columns");
  if (!X.allFinite() || !y.allFinite() || !loadings.allFinite()) {
    throw std::invalid_argument("lasso_cd: non-finite input");
  }
  if (lambda < 0.0) throw std::invalid_argument("lasso_cd: lambda must be nonnegative");

  const auto penal = detail::penalized_mask(p, unpenalized);
  Vec thr(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (penal[static_cast<std::size_t>(j)]) {
      if (loadings[j] < 0.0) throw std::invalid_argument("lasso_cd: negative loading");
      thr[j] = lambda * loadings[j] / (2.0 * static_cast<double>(n));
    } else {
      thr[j] = 0.0;
    }
  }
  const Vec colsq = X.colwise().squaredNorm() / static_cast<double>(n);

  LassoFit fit;
  fit.lambda = lambda;
  fit.loadings = loadings;
  Vec beta = Vec::Zero(p);
  Vec r = y;
  int sweeps = 0;

  auto sweep = [&](const std::vector<int>& cols) {
    double maxd = 0.0;
    for (int j : cols) {
      if (colsq[j] <= 0.0) continue;
      const double rho = X.col(j).dot(r) / static_cast<double>(n) + colsq[j] * beta[j];
      const double bj = detail::soft_threshold(rho, thr[j]) / colsq[j];
      const double diff = bj - beta[j];
      if (diff != 0.0) {
        r.noalias() -= X.col(j) * diff;
        maxd = std::max(maxd, std::abs(diff));
        beta[j] = bj;
      }
    }
    return maxd;
  };

  std::vector<int> all_cols(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) all_cols[static_cast<std::size_t>(j)] = static_cast<int>(j);

  while (sweeps < max_iter) {
    r = y - X * beta;  // exact residual before each verification pass
    const double maxd = sweep(all_cols);
    ++sweeps;
    if (maxd < tol) {
      fit.converged = true;
      break;
    }
    std::vector<int> active;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (beta[j] != 0.0 || !penal[static_cast<std::size_t>(j)]) active.push_back(static_cast<int>(j));
    }
    while (sweeps < max_iter) {
      const double md = sweep(active);
      ++sweeps;
      if (md < tol) break;
    }
  }

  fit.coef = beta;
  fit.iterations = sweeps;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (beta[j] != 0.0) fit.support.push_back(static_cast<int>(j));
  }
  return fit;
}

// Largest stationarity violation of a fit: for active penalized coordinates
// the score 2 E_n[x_j (y - x'b)] must sit on the penalty boundary
// (lambda/n) Psi_j sign(b_j); for inactive ones it must stay inside; for
// unpenalized columns it must vanish.
inline double lasso_kkt_violation(const Mat& X, const Vec& y, const LassoFit& fit,
                                  const IndexSet& unpenalized = {}) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const auto penal = detail::penalized_mask(p, unpenalized);
  Vec r = y - X * fit.coef;
  Vec score = 2.0 * (X.transpose() * r) / static_cast<double>(n);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    double viol;
    if (!penal[static_cast<std::size_t>(j)]) {
      viol = std::abs(score[j]);
    } else {
      const double bound = fit.lambda * fit.loadings[j] / static_cast<double>(n);
      if (fit.coef[j] != 0.0) {
        viol = std::abs(score[j] - bound * (fit.coef[j] > 0.0 ? 1.0 : -1.0));
      } else {
        viol = std::max(0.0, std::abs(score[j]) - bound);
      }
    }
    worst = std::max(worst, viol);
  }
  return worst;
}

// (1/n)||y - X b||^2 + (lambda/n) sum_j Psi_j |b_j| over penalized columns.
inline double lasso_objective(const Mat& X, const Vec& y, const Vec& beta, double lambda,
                              const Vec& loadings, const IndexSet& unpenalized = {}) {
  const auto penal = detail::penalized_mask(X.cols(), unpenalized);
  double pen = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (penal[static_cast<std::size_t>(j)]) pen += loadings[j] * std::abs(beta[j]);
  }
  const double n = static_cast<double>(X.rows());
  return (y - X * beta).squaredNorm() / n + lambda * pen / n;
}

// Smallest lambda for which the all-penalized-zero vector is stationary:
// lambda_0 = max_j 2 |x_j'r| / Psi_j with r the target the penalized columns
// face (pass y, or y partialled off any unpenalized columns).
inline double lasso_zero_lambda(const Mat& X, const Vec& r, const Vec& loadings,
                                const IndexSet& unpenalized = {}) {
  const auto penal = detail::penalized_mask(X.cols(), unpenalized);
  double lam = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (!penal[static_cast<std::size_t>(j)] || loadings[j] <= 0.0) continue;
    lam = std::max(lam, 2.0 * std::abs(X.col(j).dot(r)) / loadings[j]);
  }
  return lam;
}

namespace detail {

// Starting residuals for the loading iteration: OLS of y on an intercept,
// any unpenalized columns, and the few penalized columns most correlated
// with y. Starting from the marginal outcome instead leaves the loadings at
// the outcome scale, where the penalty can dominate every true signal and
// the iteration never leaves the all-zero fit.
inline Vec pilot_residuals(const Mat& X, const Vec& y, const IndexSet& unpenalized,
                           const std::vector<char>& penal) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const Vec yc = y.array() - y.mean();
  const double ynorm = yc.norm();
  std::vector<std::pair<double, int>> ranked;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!penal[static_cast<std::size_t>(j)]) continue;
    Vec xc = X.col(j).array() - X.col(j).mean();
    const double denom = xc.norm() * ynorm;
    const double corr = denom > 0.0 ? std::abs(xc.dot(yc)) / denom : 0.0;
    ranked.emplace_back(corr, static_cast<int>(j));
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const auto k0 = static_cast<std::size_t>(
      std::min<Eigen::Index>({5, static_cast<Eigen::Index>(ranked.size()),
                              std::max<Eigen::Index>(n / 3, 1)}));

  Mat pilot(n, 1 + static_cast<Eigen::Index>(unpenalized.size() + k0));
  pilot.col(0) = Vec::Ones(n);
  Eigen::Index c = 1;
  for (int j : unpenalized) pilot.col(c++) = X.col(j);
  for (std::size_t k = 0; k < k0; ++k) pilot.col(c++) = X.col(ranked[k].second);
  return ols_fit(pilot, y).residuals;
}

}  // namespace detail

// Feasible Lasso: data-driven penalty level plus iterated residual-based
// loadings Psi_jj = sqrt(E_n[x_j^2 e^2]). Residuals start from a pilot OLS on
// the most-correlated columns; each round fits the Lasso, refits its support
// by OLS, and recomputes the loadings from the refit residuals. After
// `loading_iterations` rounds the model is fit once more with the final
// loadings so the returned fit and loadings agree.
inline LassoFit feasible_lasso(const Mat& X, const Vec& y, const PenaltyConfig& cfg) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n == 0) throw std::invalid_argument("feasible_lasso: zero-row input");
  if (cfg.loading_iterations < 1) throw std::invalid_argument("feasible_lasso: need loading_iterations >= 1");
  const auto penal = detail::penalized_mask(p, cfg.unpenalized);

  const Eigen::Index n_pen =
      p - static_cast<Eigen::Index>(cfg.unpenalized.size());
  const double lambda = cfg.lambda_override
                            ? *cfg.lambda_override
                            : penalty_level(n, std::max<Eigen::Index>(n_pen, 1), cfg.c, cfg.gamma);

  auto compute_loadings = [&](const Vec& eps) {
    Vec psi(p);
    const Vec e2 = eps.array().square();
    for (Eigen::Index j = 0; j < p; ++j) {
      psi[j] = std::sqrt(X.col(j).array().square().matrix().dot(e2) / static_cast<double>(n));
    }
    return psi;
  };
  auto floor_loadings = [&](Vec& psi) {
    const double lo = kLoadingFloor * psi.maxCoeff();
    psi = psi.cwiseMax(lo);
  };

  Vec eps = detail::pilot_residuals(X, y, cfg.unpenalized, penal);
  Vec psi = compute_loadings(eps);

  double max_pen_loading = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (penal[static_cast<std::size_t>(j)]) max_pen_loading = std::max(max_pen_loading, psi[j]);
  }
  if (max_pen_loading == 0.0) {
    // Outcome fully explained by the pilot regression (e.g. a constant y):
    // nothing to select. Fit any unpenalized columns by OLS and leave every
    // penalized coefficient at zero.
    LassoFit fit;
    fit.lambda = lambda;
    fit.loadings = Vec::Constant(p, kLoadingFloor);
    fit.coef = Vec::Zero(p);
    fit.converged = true;
    if (!cfg.unpenalized.empty()) {
      Mat Xu = select_columns(X, cfg.unpenalized);
      OlsFit f = ols_fit(Xu, y);
      for (std::size_t k = 0; k < cfg.unpenalized.size(); ++k) {
        fit.coef[cfg.unpenalized[k]] = f.coef[static_cast<Eigen::Index>(k)];
        if (f.coef[static_cast<Eigen::Index>(k)] != 0.0) fit.support.push_back(cfg.unpenalized[k]);
      }
      fit.support = make_index_set(fit.support);
    }
    return fit;
  }

  floor_loadings(psi);
  LassoFit fit;
  for (int it = 0; it < cfg.loading_iterations; ++it) {
    fit = lasso_cd(X, y, lambda, psi, cfg.unpenalized, cfg.tol, cfg.max_iter);
    IndexSet refit_cols = index_union(cfg.unpenalized, fit.support);
    eps = ols_fit(select_columns(X, refit_cols), y).residuals;
    psi = compute_loadings(eps);
    floor_loadings(psi);
  }
  return lasso_cd(X, y, lambda, psi, cfg.unpenalized, cfg.tol, cfg.max_iter);
}

// Unpenalized OLS refit on a selected support; an empty support yields the
// all-residual fit.
inline OlsFit post_lasso(const Mat& X, const Vec& y, const IndexSet& support) {
  for (int j : support) {
    if (j < 0 || j >= X.cols()) throw std::invalid_argument("post_lasso: support index out of range");
  }
  return ols_fit(select_columns(X, support), y);
}

// l1-penalized logistic regression,
//   E_n[log(1 + exp(x'b)) - d x'b] + (lambda/(2n)) sum_j Psi_j |b_j|,
// by proximal gradient with the 1/4 eigmax(X'X/n) Lipschitz step. The 1/(2n)
// weight makes the stationarity system |2 E_n[x_j (d - Lambda)]| vs
// (lambda/n) Psi_j line up with the squared-loss fits.
inline LassoFit logistic_lasso(const Mat& X, const Vec& d, double lambda, const Vec& loadings,
                               const IndexSet& unpenalized = {}, double tol = 1e-7,
                               int max_iter = 10000) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n == 0) throw std::invalid_argument("logistic_lasso: zero-row input");
  if (d.size() != n) throw std::invalid_argument("logistic_lasso: d length must match rows of X");
  if (loadings.size() != p) throw std::invalid_argument("logistic_lasso: loadings length must match columns");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d[i] != 0.0 && d[i] != 1.0) throw std::invalid_argument("logistic_lasso: d must be 0/1");
  }
  if (d.minCoeff() == d.maxCoeff()) {
    throw std::runtime_error("logistic_lasso: constant treatment (complete separation)");
  }
  const auto penal = detail::penalized_mask(p, unpenalized);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (penal[static_cast<std::size_t>(j)] && loadings[j] < 0.0) {
      throw std::invalid_argument("logistic_lasso: negative loading");
    }
  }

  // Lipschitz constant of the gradient via power iteration on X'X/n.
  double eigmax = 0.0;
  {
    Vec u = Vec::Ones(p).normalized();
    for (int it = 0; it < 60; ++it) {
      Vec w = X.transpose() * (X * u) / static_cast<double>(n);
      const double norm = w.norm();
      if (norm == 0.0) break;
      u = w / norm;
      eigmax = norm;
    }
  }
  const double step = eigmax > 0.0 ? 4.0 / eigmax : 1.0;

  LassoFit fit;
  fit.lambda = lambda;
  fit.loadings = loadings;
  Vec beta = Vec::Zero(p);
  Vec u = Vec::Zero(n);  // X beta
  int iters = 0;
  while (iters < max_iter) {
    Vec prob(n);
    for (Eigen::Index i = 0; i < n; ++i) prob[i] = 1.0 / (1.0 + std::exp(-u[i]));
    Vec grad = X.transpose() * (prob - d) / static_cast<double>(n);
    double maxd = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      double bj = beta[j] - step * grad[j];
      if (penal[static_cast<std::size_t>(j)]) {
        bj = detail::soft_threshold(bj, step * lambda * loadings[j] / (2.0 * static_cast<double>(n)));
      }
      maxd = std::max(maxd, std::abs(bj - beta[j]));
      beta[j] = bj;
    }
    u = X * beta;
    ++iters;
    if (maxd < tol) {
      fit.converged = true;
      break;
    }
  }
  fit.coef = beta;
  fit.iterations = iters;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (beta[j] != 0.0) fit.support.push_back(static_cast<int>(j));
  }
  return fit;
}

// Mean logistic negative log-likelihood plus the (lambda/(2n)) weighted-l1
// term; the quantity logistic_lasso minimizes.
inline double logistic_objective(const Mat& X, const Vec& d, const Vec& beta, double lambda,
                                 const Vec& loadings, const IndexSet& unpenalized = {}) {
  const Eigen::Index n = X.rows();
  const auto penal = detail::penalized_mask(X.cols(), unpenalized);
  Vec u = X * beta;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double li = u[i] > 0.0 ? u[i] + std::log1p(std::exp(-u[i])) : std::log1p(std::exp(u[i]));
    nll += li - d[i] * u[i];
  }
  double pen = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (penal[static_cast<std::size_t>(j)]) pen += loadings[j] * std::abs(beta[j]);
  }
  return nll / static_cast<double>(n) + lambda * pen / (2.0 * static_cast<double>(n));
}

}  // namespace pds
