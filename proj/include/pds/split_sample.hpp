#pragma once

#include <cmath>
#include <utility>

#include "pds/estimators.hpp"
#include "pds/lasso.hpp"
#include "pds/ols.hpp"
#include "pds/rng.hpp"
#include "pds/types.hpp"

namespace pds {

// State of one subsample k: the set selected ON it, the other half's set it
// estimates WITH, and the resulting coefficients and precision weight.
struct SplitHalf {
  IndexSet idx;       // rows of this half
  IndexSet selected;  // controls picked on this half (handed to the other)
  IndexSet used;      // the other half's picks, after any truncation
  double alpha = 0.0;  // treatment coefficient on this half
  Vec beta_y;          // outcome coefficients over `used`
  Vec beta_d;          // treatment-equation coefficients over `used`
  double upsilon = 0.0;  // D' M_used D / n_k
  int s_used = 0;        // |used|
};

struct SplitFit {
  SplitHalf a;
  SplitHalf b;
  double alpha_ab = 0.0;
  Vec zeta_hat;  // truncated outcome residuals, full-sample indexing
  Vec v_hat;     // treatment residuals, full-sample indexing
  bool flagged = false;
};

struct SplitEstimate {
  EstimateReport report;
  SplitFit fit;
};

// Uniformly random partition with |A| = ceil(n/2); deterministic given seed.
inline std::pair<IndexSet, IndexSet> split_indices(Eigen::Index n, std::uint64_t seed) {
  if (n < 4) throw std::invalid_argument("split_indices: need n >= 4");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, hash_tag("shuffle")));
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  const auto na = static_cast<std::size_t>((n + 1) / 2);
  IndexSet a(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(na));
  IndexSet b(perm.begin() + static_cast<std::ptrdiff_t>(na), perm.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {std::move(a), std::move(b)};
}

// Residual construction for the split estimator. For row i in half k,
//   zeta_o_i = (y_i - d_i a_k - x_i' b_k) sqrt(n_k / (n_k - s_used - 1)),
//   v_i      = d_i - x_i' beta_d_k,
//   zeta_i   = zeta_o_i 1{ |zeta_o_i| v |v_i| <= H_k },
// with H_k = trunc_c sqrt( n / ((s_used v sqrt(n)) log n) ).
inline std::pair<Vec, Vec> compute_residuals(const SplitFit& fit, const Dataset& data,
                                             double trunc_c) {
  const Eigen::Index n = data.n();
  Vec zeta = Vec::Zero(n);
  Vec vres = Vec::Zero(n);
  for (const SplitHalf* half : {&fit.a, &fit.b}) {
    const auto nk = static_cast<double>(half->idx.size());
    const double dofn = nk - half->s_used - 1.0;
    if (dofn <= 0.0) {
      throw std::runtime_error("compute_residuals: no degrees of freedom left in a subsample");
    }
    const double inflation = std::sqrt(nk / dofn);
    const double hk =
        trunc_c * std::sqrt(static_cast<double>(n) /
                            (std::max(static_cast<double>(half->s_used),
                                      std::sqrt(static_cast<double>(n))) *
                             std::log(static_cast<double>(n))));
    for (int i : half->idx) {
      double xb_y = 0.0, xb_d = 0.0;
      for (std::size_t k = 0; k < half->used.size(); ++k) {
        const double xij = data.X(i, half->used[k]);
        xb_y += xij * half->beta_y[static_cast<Eigen::Index>(k)];
        xb_d += xij * half->beta_d[static_cast<Eigen::Index>(k)];
      }
      const double zo = (data.y[i] - data.d[i] * half->alpha - xb_y) * inflation;
      const double vh = data.d[i] - xb_d;
      vres[i] = vh;
      zeta[i] = (std::max(std::abs(zo), std::abs(vh)) <= hk) ? zo : 0.0;
    }
  }
  return {std::move(zeta), std::move(vres)};
}

namespace detail {

// Estimation given the two halves and their cross-assigned control sets.
inline SplitEstimate split_core(const Dataset& data, IndexSet idx_a, IndexSet idx_b,
                                IndexSet sel_a, IndexSet sel_b,
                                const std::vector<double>& mag_a,
                                const std::vector<double>& mag_b, double level, double trunc_c,
                                bool flagged) {
  const Eigen::Index n = data.n();
  SplitFit fit;
  fit.a.idx = std::move(idx_a);
  fit.b.idx = std::move(idx_b);
  fit.a.selected = sel_a;
  fit.b.selected = sel_b;

  // The set selected on k estimates the complementary half; it must leave
  // that half at least one residual degree of freedom.
  auto fit_half = [&](SplitHalf& half, IndexSet used, const std::vector<double>& mag) {
    const auto nk = static_cast<Eigen::Index>(half.idx.size());
    if (static_cast<Eigen::Index>(used.size()) + 2 > nk) {
      const Eigen::Index cap = nk - 2;
      if (cap < 0) throw std::runtime_error("split: subsample too small");
      std::sort(used.begin(), used.end(), [&](int x, int y) {
        const double mx = mag[static_cast<std::size_t>(x)];
        const double my = mag[static_cast<std::size_t>(y)];
        return mx != my ? mx > my : x < y;
      });
      used.resize(static_cast<std::size_t>(cap));
      std::sort(used.begin(), used.end());
      fit.flagged = true;
    }
    Vec yk = select_rows(data.y, half.idx);
    Vec dk = select_rows(data.d, half.idx);
    Mat Xk_used(nk, static_cast<Eigen::Index>(used.size()));
    for (std::size_t c = 0; c < used.size(); ++c) {
      for (Eigen::Index r = 0; r < nk; ++r) Xk_used(r, static_cast<Eigen::Index>(c)) = data.X(half.idx[static_cast<std::size_t>(r)], used[c]);
    }

    Mat design(nk, 1 + Xk_used.cols());
    design.col(0) = dk;
    design.rightCols(Xk_used.cols()) = Xk_used;
    OlsFit yfit = ols_fit(design, yk);
    if (yfit.kept.empty() || yfit.kept.front() != 0) {
      throw std::runtime_error("split: treatment is collinear with the assigned controls");
    }
    half.alpha = yfit.coef[0];
    half.beta_y = yfit.coef.tail(Xk_used.cols());

    OlsFit dfit = ols_fit(Xk_used, dk);
    half.beta_d = dfit.coef;
    half.upsilon = dfit.residuals.squaredNorm() / static_cast<double>(nk);
    half.used = std::move(used);
    half.s_used = static_cast<int>(half.used.size());
  };
  fit_half(fit.a, sel_b, mag_b);
  fit_half(fit.b, sel_a, mag_a);
  fit.flagged = fit.flagged || flagged;

  const auto na = static_cast<double>(fit.a.idx.size());
  const auto nb = static_cast<double>(fit.b.idx.size());
  const double denom = na * fit.a.upsilon + nb * fit.b.upsilon;
  if (denom <= 0.0) {
    throw std::runtime_error("split: both precision weights vanish (treatment fully explained)");
  }
  fit.alpha_ab = (na * fit.a.upsilon * fit.a.alpha + nb * fit.b.upsilon * fit.b.alpha) / denom;

  std::tie(fit.zeta_hat, fit.v_hat) = compute_residuals(fit, data, trunc_c);
  const double ev2 = fit.v_hat.squaredNorm() / static_cast<double>(n);
  if (ev2 <= 0.0) throw std::runtime_error("split: treatment residuals vanish");
  const double meat = (fit.v_hat.array().square() * fit.zeta_hat.array().square()).mean();
  const double se = std::sqrt(meat / (ev2 * ev2) / static_cast<double>(n));

  SplitEstimate out;
  out.report.alpha_hat = fit.alpha_ab;
  out.report.se = se;
  out.report.level = level;
  std::tie(out.report.ci_lower, out.report.ci_upper) = t_interval(fit.alpha_ab, se, level);
  out.report.selected = index_union(fit.a.used, fit.b.used);
  out.report.s_hat = static_cast<int>(out.report.selected.size());
  out.report.flagged = fit.flagged;
  out.fit = std::move(fit);
  return out;
}

}  // namespace detail

// Split-sample double selection: select the three-way union I1 u I2 u I3 on
// each half independently, estimate each half with the other half's set, and
// combine with the precision weights Upsilon^k.
inline SplitEstimate split_sample_estimate(const Dataset& data, const PenaltyConfig& cfg,
                                           double level, std::uint64_t seed,
                                           double trunc_c = 10.0) {
  data.validate();
  auto [idx_a, idx_b] = split_indices(data.n(), seed);

  auto select_on = [&](const IndexSet& rows) {
    Vec yk = select_rows(data.y, rows);
    Vec dk = select_rows(data.d, rows);
    Mat Xk = select_rows(data.X, rows);
    return detail::select_controls(yk, dk, Xk, cfg, /*with_i3=*/true);
  };
  auto sel_a = select_on(idx_a);
  auto sel_b = select_on(idx_b);

  return detail::split_core(data, std::move(idx_a), std::move(idx_b), sel_a.sets.combined(),
                            sel_b.sets.combined(), sel_a.magnitude, sel_b.magnitude, level,
                            trunc_c, !(sel_a.converged && sel_b.converged));
}

}  // namespace pds
