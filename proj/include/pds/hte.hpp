#pragma once

#include <cmath>
#include <utility>

#include "pds/lasso.hpp"
#include "pds/ols.hpp"
#include "pds/types.hpp"

namespace pds {

enum class PropensityLink { linear, logit };
enum class EffectKind { ate, att };
enum class NuisanceBlock { g0, g1, m, alpha };

// Efficient moment for the average treatment effect.
inline double phi(double alpha, double y, double d, double g0, double g1, double m) {
  if (!(m > 0.0 && m < 1.0)) throw std::domain_error("phi: propensity must lie in (0, 1)");
  if (d != 0.0 && d != 1.0) throw std::domain_error("phi: d must be 0/1");
  return alpha - d * (y - g1) / m + (1.0 - d) * (y - g0) / (1.0 - m) - (g1 - g0);
}

// Efficient moment for the average treatment effect on the treated.
inline double phi_tilde(double gamma, double y, double d, double g0, double g1, double m,
                        double mu) {
  if (!(m > 0.0 && m < 1.0)) throw std::domain_error("phi_tilde: propensity must lie in (0, 1)");
  if (!(mu > 0.0 && mu <= 1.0)) throw std::domain_error("phi_tilde: mu must lie in (0, 1]");
  if (d != 0.0 && d != 1.0) throw std::domain_error("phi_tilde: d must be 0/1");
  return d * (y - g1) / mu - m * (1.0 - d) * (y - g0) / ((1.0 - m) * mu) +
         d * (g1 - g0) / mu - gamma * d / mu;
}

// Post-lasso regression and propensity fits. Coefficients are stored over the
// full dictionary (zeros off-support) so the fits can also be constructed
// directly from known truth.
struct NuisanceFits {
  Vec beta_g1;  // outcome coefficients, treated arm
  Vec beta_g0;  // outcome coefficients, control arm
  double icpt_g1 = 0.0;
  double icpt_g0 = 0.0;
  Vec beta_m;
  double icpt_m = 0.0;
  PropensityLink link = PropensityLink::linear;
  double trim_eps = 0.01;
  IndexSet support_g1, support_g0, support_m;
  bool converged = true;

  Vec predict_g1(const Mat& X) const { return (X * beta_g1).array() + icpt_g1; }
  Vec predict_g0(const Mat& X) const { return (X * beta_g0).array() + icpt_g0; }
  Vec propensity_index(const Mat& X) const { return (X * beta_m).array() + icpt_m; }
  Vec predict_m(const Mat& X) const {
    Vec u = propensity_index(X);
    Vec m(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) m[i] = link_apply(u[i]);
    return trim(m);
  }
  double link_apply(double u) const {
    return link == PropensityLink::linear ? u : 1.0 / (1.0 + std::exp(-u));
  }
  Vec trim(const Vec& m) const {
    return m.cwiseMax(trim_eps).cwiseMin(1.0 - trim_eps);
  }
};

struct AteReport {
  double effect_hat = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double level = 0.95;
  EffectKind kind = EffectKind::ate;
  double mu_hat = 0.0;  // E_n[d]; the ATT scale factor
  bool flagged = false;
};

namespace detail {

// Unpenalized logistic MLE by Newton/IRLS with step halving. Separation shows
// up as ever-growing coefficients; the iteration cap plus downstream trimming
// keeps that harmless.
inline Vec logistic_mle(const Mat& X, const Vec& d, int max_iter = 100, double tol = 1e-10) {
  const Eigen::Index p = X.cols();
  Vec beta = Vec::Zero(p);
  auto nll = [&](const Vec& b) {
    Vec u = X * b;
    double s = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double li = u[i] > 0.0 ? u[i] + std::log1p(std::exp(-u[i])) : std::log1p(std::exp(u[i]));
      s += li - d[i] * u[i];
    }
    return s;
  };
  double cur = nll(beta);
  for (int it = 0; it < max_iter; ++it) {
    Vec u = X * beta;
    Vec prob(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) prob[i] = 1.0 / (1.0 + std::exp(-u[i]));
    Vec w = prob.array() * (1.0 - prob.array());
    Mat H = X.transpose() * w.asDiagonal() * X;
    H.diagonal().array() += 1e-10;
    Vec g = X.transpose() * (prob - d);
    Vec step = H.ldlt().solve(g);
    double scale = 1.0;
    Vec next = beta - scale * step;
    double nv = nll(next);
    int halvings = 0;
    while (nv > cur && halvings < 30) {
      scale *= 0.5;
      next = beta - scale * step;
      nv = nll(next);
      ++halvings;
    }
    const double move = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    cur = nv;
    if (move < tol) break;
  }
  return beta;
}

}  // namespace detail

// Nuisance estimation. The outcome runs one feasible Lasso over the
// interacted dictionary (d, d*x, 1-d, (1-d)*x) with the two arm indicators
// unpenalized, then refits each arm by OLS on its selected columns. The
// propensity runs a feasible Lasso of d on (1, x) under the requested link
// and refits on the selection; fitted propensities are clipped to
// [trim_eps, 1 - trim_eps].
inline NuisanceFits fit_nuisances(const Vec& y, const Vec& d, const Mat& X, PropensityLink link,
                                  const PenaltyConfig& cfg, double trim_eps = 0.01) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n || d.size() != n) throw std::invalid_argument("fit_nuisances: row mismatch");
  if (!(trim_eps > 0.0 && trim_eps < 0.5)) {
    throw std::invalid_argument("fit_nuisances: trim_eps must lie in (0, 0.5)");
  }
  IndexSet treated, control;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d[i] == 1.0) {
      treated.push_back(static_cast<int>(i));
    } else if (d[i] == 0.0) {
      control.push_back(static_cast<int>(i));
    } else {
      throw std::invalid_argument("fit_nuisances: d must be 0/1");
    }
  }
  if (treated.size() < 2 || control.size() < 2) {
    throw std::runtime_error("fit_nuisances: a treatment arm has fewer than 2 observations");
  }

  NuisanceFits fits;
  fits.link = link;
  fits.trim_eps = trim_eps;

  // Outcome: interacted dictionary with unpenalized arm indicators.
  Mat W(n, 2 * p + 2);
  W.col(0) = d;
  W.col(p + 1) = Vec::Ones(n) - d;
  for (Eigen::Index j = 0; j < p; ++j) {
    W.col(1 + j) = d.cwiseProduct(X.col(j));
    W.col(p + 2 + j) = (Vec::Ones(n) - d).cwiseProduct(X.col(j));
  }
  PenaltyConfig cfg_out = cfg;
  cfg_out.unpenalized = {0, static_cast<int>(p) + 1};
  LassoFit outcome = feasible_lasso(W, y, cfg_out);
  fits.converged = outcome.converged;
  for (int j : outcome.support) {
    if (j >= 1 && j <= p) fits.support_g1.push_back(j - 1);
    if (j >= p + 2) fits.support_g0.push_back(j - static_cast<int>(p) - 2);
  }

  auto arm_refit = [&](const IndexSet& rows, const IndexSet& supp, Vec& beta, double& icpt) {
    Mat Xa(static_cast<Eigen::Index>(rows.size()), 1 + static_cast<Eigen::Index>(supp.size()));
    Xa.col(0) = Vec::Ones(Xa.rows());
    for (std::size_t c = 0; c < supp.size(); ++c) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        Xa(static_cast<Eigen::Index>(r), 1 + static_cast<Eigen::Index>(c)) = X(rows[r], supp[c]);
      }
    }
    OlsFit f = ols_fit(Xa, select_rows(y, rows));
    icpt = f.coef[0];
    beta = Vec::Zero(p);
    for (std::size_t c = 0; c < supp.size(); ++c) beta[supp[c]] = f.coef[1 + static_cast<Eigen::Index>(c)];
  };
  arm_refit(treated, fits.support_g1, fits.beta_g1, fits.icpt_g1);
  arm_refit(control, fits.support_g0, fits.beta_g0, fits.icpt_g0);

  // Propensity: d on (1, x), intercept unpenalized.
  Mat Z(n, p + 1);
  Z.col(0) = Vec::Ones(n);
  Z.rightCols(p) = X;
  PenaltyConfig cfg_m = cfg;
  cfg_m.unpenalized = {0};
  LassoFit pfit;
  if (link == PropensityLink::linear) {
    pfit = feasible_lasso(Z, d, cfg_m);
  } else {
    const double lambda = cfg.lambda_override
                              ? *cfg.lambda_override
                              : penalty_level(n, p, cfg.c, cfg.gamma);
    const double dbar = d.mean();
    Vec eps = d.array() - dbar;
    Vec psi(p + 1);
    auto update_loadings = [&](const Vec& resid) {
      const Vec e2 = resid.array().square();
      for (Eigen::Index j = 0; j < p + 1; ++j) {
        psi[j] = std::sqrt(Z.col(j).array().square().matrix().dot(e2) / static_cast<double>(n));
      }
      psi = psi.cwiseMax(kLoadingFloor * std::max(psi.maxCoeff(), 1.0));
    };
    update_loadings(eps);
    for (int it = 0; it < cfg.loading_iterations; ++it) {
      pfit = logistic_lasso(Z, d, lambda, psi, cfg_m.unpenalized, cfg.tol, cfg.max_iter);
      Vec u = Z * pfit.coef;
      Vec resid(n);
      for (Eigen::Index i = 0; i < n; ++i) resid[i] = d[i] - 1.0 / (1.0 + std::exp(-u[i]));
      update_loadings(resid);
    }
    pfit = logistic_lasso(Z, d, lambda, psi, cfg_m.unpenalized, cfg.tol, cfg.max_iter);
  }
  fits.converged = fits.converged && pfit.converged;
  for (int j : pfit.support) {
    if (j >= 1) fits.support_m.push_back(j - 1);
  }

  Mat Zs(n, 1 + static_cast<Eigen::Index>(fits.support_m.size()));
  Zs.col(0) = Vec::Ones(n);
  for (std::size_t c = 0; c < fits.support_m.size(); ++c) Zs.col(1 + static_cast<Eigen::Index>(c)) = X.col(fits.support_m[c]);
  Vec mcoef;
  if (link == PropensityLink::linear) {
    OlsFit f = ols_fit(Zs, d);
    mcoef = f.coef;
  } else {
    mcoef = detail::logistic_mle(Zs, d);
  }
  fits.icpt_m = mcoef[0];
  fits.beta_m = Vec::Zero(p);
  for (std::size_t c = 0; c < fits.support_m.size(); ++c) fits.beta_m[fits.support_m[c]] = mcoef[1 + static_cast<Eigen::Index>(c)];

  return fits;
}

namespace detail {

inline double solve_ate(const Vec& y, const Vec& d, const Vec& g0, const Vec& g1, const Vec& m) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    s += d[i] * (y[i] - g1[i]) / m[i] - (1.0 - d[i]) * (y[i] - g0[i]) / (1.0 - m[i]) +
         (g1[i] - g0[i]);
  }
  return s / static_cast<double>(y.size());
}

}  // namespace detail

// ATE from given nuisance fits: the moment is linear in alpha, so the solve
// is in closed form; the plug-in variance evaluates the moment at the
// estimate.
inline AteReport ate_from_nuisances(const Vec& y, const Vec& d, const Mat& X,
                                    const NuisanceFits& fits, double level = 0.95) {
  const Eigen::Index n = y.size();
  Vec g0 = fits.predict_g0(X);
  Vec g1 = fits.predict_g1(X);
  Vec m = fits.predict_m(X);
  const double alpha = detail::solve_ate(y, d, g0, g1, m);
  double s2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ph = phi(alpha, y[i], d[i], g0[i], g1[i], m[i]);
    s2 += ph * ph;
  }
  s2 /= static_cast<double>(n);
  AteReport rep;
  rep.kind = EffectKind::ate;
  rep.effect_hat = alpha;
  rep.se = std::sqrt(s2 / static_cast<double>(n));
  rep.level = level;
  std::tie(rep.ci_lower, rep.ci_upper) = t_interval(alpha, rep.se, level);
  rep.mu_hat = d.mean();
  rep.flagged = !fits.converged;
  return rep;
}

inline AteReport att_from_nuisances(const Vec& y, const Vec& d, const Mat& X,
                                    const NuisanceFits& fits, double level = 0.95) {
  const Eigen::Index n = y.size();
  const double mu = d.mean();
  if (mu <= 0.0) throw std::runtime_error("att_estimate: no treated observations");
  Vec g0 = fits.predict_g0(X);
  Vec g1 = fits.predict_g1(X);
  Vec m = fits.predict_m(X);
  double num = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    num += d[i] * (y[i] - g1[i]) - m[i] * (1.0 - d[i]) * (y[i] - g0[i]) / (1.0 - m[i]) +
           d[i] * (g1[i] - g0[i]);
  }
  const double gamma = num / (static_cast<double>(n) * mu);
  double s2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ph = phi_tilde(gamma, y[i], d[i], g0[i], g1[i], m[i], mu);
    s2 += ph * ph;
  }
  s2 /= static_cast<double>(n);
  AteReport rep;
  rep.kind = EffectKind::att;
  rep.effect_hat = gamma;
  rep.se = std::sqrt(s2 / static_cast<double>(n));
  rep.level = level;
  std::tie(rep.ci_lower, rep.ci_upper) = t_interval(gamma, rep.se, level);
  rep.mu_hat = mu;
  rep.flagged = !fits.converged;
  return rep;
}

inline AteReport ate_estimate(const Vec& y, const Vec& d, const Mat& X, PropensityLink link,
                              const PenaltyConfig& cfg, double level = 0.95,
                              double trim_eps = 0.01) {
  return ate_from_nuisances(y, d, X, fit_nuisances(y, d, X, link, cfg, trim_eps), level);
}

inline AteReport att_estimate(const Vec& y, const Vec& d, const Mat& X, PropensityLink link,
                              const PenaltyConfig& cfg, double level = 0.95,
                              double trim_eps = 0.01) {
  if (d.mean() <= 0.0) throw std::runtime_error("att_estimate: no treated observations");
  return att_from_nuisances(y, d, X, fit_nuisances(y, d, X, link, cfg, trim_eps), level);
}

// Central finite difference of E_n[phi(alpha_check, ...)] when one nuisance
// coefficient block moves along `direction`. The orthogonality of the moment
// makes this vanish (up to sampling noise) at correctly specified nuisances.
inline double immunization_check(const Vec& y, const Vec& d, const Mat& X,
                                 const NuisanceFits& fits, NuisanceBlock block,
                                 const Vec& direction, double h) {
  if (h <= 0.0) throw std::invalid_argument("immunization_check: h must be positive");
  const Eigen::Index n = y.size();
  Vec g0 = fits.predict_g0(X);
  Vec g1 = fits.predict_g1(X);
  Vec mi = fits.propensity_index(X);
  Vec m0(n);
  for (Eigen::Index i = 0; i < n; ++i) m0[i] = fits.link_apply(mi[i]);
  m0 = fits.trim(m0);
  const double alpha = detail::solve_ate(y, d, g0, g1, m0);

  Vec shift = Vec::Zero(n);
  if (block != NuisanceBlock::alpha) {
    if (direction.size() != X.cols()) {
      throw std::invalid_argument("immunization_check: direction length must match columns");
    }
    shift = X * direction;
  }

  auto moment = [&](double t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double a = alpha, v0 = g0[i], v1 = g1[i], vm = m0[i];
      switch (block) {
        case NuisanceBlock::g0: v0 += t * shift[i]; break;
        case NuisanceBlock::g1: v1 += t * shift[i]; break;
        case NuisanceBlock::m: {
          const double u = fits.link_apply(mi[i] + t * shift[i]);
          vm = std::min(std::max(u, fits.trim_eps), 1.0 - fits.trim_eps);
          break;
        }
        case NuisanceBlock::alpha: a += t; break;
      }
      s += phi(a, y[i], d[i], v0, v1, vm);
    }
    return s / static_cast<double>(n);
  };
  return (moment(h) - moment(-h)) / (2.0 * h);
}

}  // namespace pds
