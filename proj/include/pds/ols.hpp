#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "pds/normal.hpp"
#include "pds/types.hpp"

namespace pds {

// Relative pivot tolerance of the rank screen.
inline constexpr double kRankTol = 1e-10;

namespace detail {

struct QrScreen {
  IndexSet kept;  // surviving columns, ascending
  Mat Q;          // n x rank, orthonormal
  Mat R;          // rank x rank, upper triangular
};

// Left-to-right Gram-Schmidt (two projection passes per column). A column is
// dropped when its residual against the span of earlier kept columns falls
// below tol relative to its own norm, so the lowest-index member of any
// collinear group survives.
inline QrScreen qr_screen(const Mat& X, double tol = kRankTol) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  QrScreen s;
  s.Q.resize(n, std::min(n, k));
  s.R = Mat::Zero(std::min(n, k), std::min(n, k));
  Eigen::Index r = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    Vec v = X.col(j);
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    Vec proj = Vec::Zero(r);
    if (r > 0) {
      Vec c1 = s.Q.leftCols(r).transpose() * v;
      v.noalias() -= s.Q.leftCols(r) * c1;
      Vec c2 = s.Q.leftCols(r).transpose() * v;
      v.noalias() -= s.Q.leftCols(r) * c2;
      proj = c1 + c2;
    }
    const double rn = v.norm();
    if (rn > tol * norm0 && r < n) {
      s.R.col(r).head(r) = proj;
      s.R(r, r) = rn;
      s.Q.col(r) = v / rn;
      s.kept.push_back(static_cast<int>(j));
      ++r;
    }
  }
  s.Q.conservativeResize(n, r);
  s.R.conservativeResize(r, r);
  return s;
}

}  // namespace detail

inline IndexSet independent_columns(const Mat& X, double tol = kRankTol) {
  return detail::qr_screen(X, tol).kept;
}

struct OlsFit {
  Vec coef;       // one entry per input column; dropped columns stay 0
  Vec residuals;  // y - fitted
  Vec fitted;
  Vec hat_diag;         // leverage h_ii
  Eigen::Index dof = 0;  // n - rank
  IndexSet kept;         // columns surviving the rank screen
  Mat q;                 // thin Q over the kept columns
  Mat r;                 // matching R factor
};

inline OlsFit ols_fit(const Mat& X_aug, const Vec& y) {
  const Eigen::Index n = X_aug.rows();
  if (n == 0) throw std::invalid_argument("ols_fit: zero-row input");
  if (y.size() != n) throw std::invalid_argument("ols_fit: y length must match rows of X");
  if (!X_aug.allFinite() || !y.allFinite()) throw std::invalid_argument("ols_fit: non-finite input");

  OlsFit fit;
  auto s = detail::qr_screen(X_aug);
  const Eigen::Index rank = s.Q.cols();
  fit.coef = Vec::Zero(X_aug.cols());
  if (rank > 0) {
    Vec qty = s.Q.transpose() * y;
    Vec b = s.R.triangularView<Eigen::Upper>().solve(qty);
    for (Eigen::Index i = 0; i < rank; ++i) fit.coef[s.kept[static_cast<std::size_t>(i)]] = b[i];
    fit.fitted = s.Q * qty;
    fit.hat_diag = s.Q.rowwise().squaredNorm();
  } else {
    fit.fitted = Vec::Zero(n);
    fit.hat_diag = Vec::Zero(n);
  }
  fit.residuals = y - fit.fitted;
  fit.dof = n - rank;
  fit.kept = std::move(s.kept);
  fit.q = std::move(s.Q);
  fit.r = std::move(s.R);
  return fit;
}

// MacKinnon-White jackknife (HC3) covariance of the OLS coefficients:
// (X'X)^-1 X' diag(e_i^2 / (1 - h_ii)^2) X (X'X)^-1, expanded to the full
// column indexing with zero rows/columns for dropped regressors.
inline Mat hc_jackknife_cov(const OlsFit& fit, const Mat& X_aug) {
  const Eigen::Index n = X_aug.rows();
  const Eigen::Index k = X_aug.cols();
  const Eigen::Index rank = fit.q.cols();
  Mat cov = Mat::Zero(k, k);
  if (rank == 0) return cov;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (fit.hat_diag[i] >= 1.0 - 1e-12) {
      throw std::runtime_error("hc_jackknife_cov: leverage is 1 at row " + std::to_string(i));
    }
  }
  Vec w = fit.residuals.array().square() / (1.0 - fit.hat_diag.array()).square();
  Mat A = fit.q.transpose() * w.asDiagonal() * fit.q;
  Mat rinv = fit.r.triangularView<Eigen::Upper>().solve(Mat::Identity(rank, rank));
  Mat ck = rinv * A * rinv.transpose();
  for (Eigen::Index a = 0; a < rank; ++a) {
    for (Eigen::Index b = 0; b < rank; ++b) {
      cov(fit.kept[static_cast<std::size_t>(a)], fit.kept[static_cast<std::size_t>(b)]) = ck(a, b);
    }
  }
  return cov;
}

// Classical homoscedastic covariance sigma^2 (X'X)^-1 over the kept columns.
inline Mat classical_cov(const OlsFit& fit, const Mat& X_aug) {
  const Eigen::Index k = X_aug.cols();
  const Eigen::Index rank = fit.q.cols();
  Mat cov = Mat::Zero(k, k);
  if (rank == 0 || fit.dof <= 0) return cov;
  const double sigma2 = fit.residuals.squaredNorm() / static_cast<double>(fit.dof);
  Mat rinv = fit.r.triangularView<Eigen::Upper>().solve(Mat::Identity(rank, rank));
  Mat ck = sigma2 * rinv * rinv.transpose();
  for (Eigen::Index a = 0; a < rank; ++a) {
    for (Eigen::Index b = 0; b < rank; ++b) {
      cov(fit.kept[static_cast<std::size_t>(a)], fit.kept[static_cast<std::size_t>(b)]) = ck(a, b);
    }
  }
  return cov;
}

// Annihilator M v = v - P v, projecting off the column span of X_sel.
// An empty selection returns v unchanged.
inline Vec residual_maker(const Mat& X_sel, const Vec& v) {
  if (X_sel.cols() == 0) return v;
  if (X_sel.rows() != v.size()) throw std::invalid_argument("residual_maker: row mismatch");
  auto s = detail::qr_screen(X_sel);
  if (s.Q.cols() == 0) return v;
  Vec out = v - s.Q * (s.Q.transpose() * v);
  out.noalias() -= s.Q * (s.Q.transpose() * out);
  return out;
}

// Symmetric normal-critical-value interval [a_hat +/- z_{(1+level)/2} * se].
inline std::pair<double, double> t_interval(double alpha_hat, double se, double level) {
  if (se < 0.0) throw std::invalid_argument("t_interval: se must be nonnegative");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("t_interval: level must lie in (0, 1)");
  const double z = normal_quantile(0.5 * (1.0 + level));
  return {alpha_hat - z * se, alpha_hat + z * se};
}

}  // namespace pds
