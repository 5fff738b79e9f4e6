#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pds/rng.hpp"
#include "pds/types.hpp"

namespace pds {

// One Monte Carlo cell: a design label plus its dimensions, target reduced
// form R^2's, treatment coefficient and seed.
struct DesignSpec {
  std::string design = "1";
  int n = 100;
  int p = 200;
  double r2_y = 0.0;
  double r2_d = 0.0;
  double alpha0 = 0.5;
  std::uint64_t seed = 0;
  // Reproduce the printed second-family c_y (which reuses R^2_d) instead of
  // the R^2_y reading.
  bool literal_cy = false;
};

struct GeneratedSample {
  Dataset data;
  double c_y = 0.0;
  double c_d = 0.0;
  Vec beta0;
  Vec beta1;
  Vec sigma_y;  // realized error scales (all ones in homoscedastic designs)
  Vec sigma_d;
};

inline const std::vector<std::string>& design_catalog() {
  static const std::vector<std::string> ids = {
      "1",  "2",  "22",  "3",  "4",  "44",  "5",  "6",  "7",  "72",  "722",  "8",  "1001",
      "1a", "2a", "22a", "3a", "4a", "44a", "5a", "6a", "7a", "72a", "722a", "8a", "1001a"};
  return ids;
}

inline bool design_known(const std::string& id) {
  const auto& ids = design_catalog();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

// Second-family designs carry an "a" suffix and calibrate each equation with
// its own coefficient vector.
inline bool design_is_second_family(const std::string& id) { return id.back() == 'a'; }

inline bool design_is_binary(const std::string& id) { return id == "5" || id == "5a"; }

inline bool design_is_heteroscedastic(const std::string& id) {
  return id == "3" || id == "4" || id == "44" || id == "3a" || id == "4a" || id == "44a";
}

// AR(1)-in-index covariance, Sigma_kj = 0.5^|j-k|.
inline Mat toeplitz_sigma(Eigen::Index p) {
  if (p < 1) throw std::invalid_argument("toeplitz_sigma: p must be >= 1");
  Mat sigma(p, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    for (Eigen::Index j = 0; j < p; ++j) sigma(k, j) = std::pow(0.5, std::abs(j - k));
  }
  return sigma;
}

inline double quad_form(const Vec& beta, const Mat& sigma) {
  if (beta.size() != sigma.rows() || sigma.rows() != sigma.cols()) {
    throw std::invalid_argument("quad_form: dimension mismatch");
  }
  return beta.dot(sigma * beta);
}

// Draws one row of x ~ N(0, Sigma) through the AR(1) recursion
// x_1 = z_1, x_j = 0.5 x_{j-1} + sqrt(0.75) z_j, which is exactly the
// Cholesky factor of the 0.5-Toeplitz covariance applied to z.
inline Vec sample_toeplitz_row(Rng& rng, Eigen::Index p) {
  Vec row(p);
  row[0] = rng.normal();
  const double scale = std::sqrt(0.75);
  for (Eigen::Index j = 1; j < p; ++j) row[j] = 0.5 * row[j - 1] + scale * rng.normal();
  return row;
}

// First-family scale constants: c_d fixes the R^2 of d on x; c_y solves the
// reduced-form quadratic for y on x through the d channel.
inline std::pair<double, double> calibrate_first13(double r2_y, double r2_d, double alpha0,
                                                   const Vec& beta0, const Mat& sigma) {
  if (!(r2_y >= 0.0 && r2_y < 1.0) || !(r2_d >= 0.0 && r2_d < 1.0)) {
    throw std::invalid_argument("calibrate: R^2 targets must lie in [0, 1)");
  }
  const double S = quad_form(beta0, sigma);
  if (S <= 0.0) {
    if (r2_y == 0.0 && r2_d == 0.0) return {0.0, 0.0};
    throw std::invalid_argument("calibrate: beta' Sigma beta vanishes but an R^2 target is positive");
  }
  const double c_d = r2_d == 0.0 ? 0.0 : std::sqrt(r2_d / ((1.0 - r2_d) * S));
  const double c_y = (-(1.0 - r2_y) * alpha0 * c_d * S +
                      std::sqrt((1.0 - r2_y) * r2_y * S * (alpha0 * alpha0 + 1.0))) /
                     ((1.0 - r2_y) * S);
  return {c_y, c_d};
}

// Second-family constants: each equation is scaled against its own
// coefficient vector. The printed c_y reuses R^2_d; `literal_cy` keeps that,
// otherwise R^2_y drives the outcome scale.
inline std::pair<double, double> calibrate_last13(double r2_y, double r2_d, const Vec& beta0,
                                                  const Vec& beta1, const Mat& sigma,
                                                  bool literal_cy = false) {
  if (!(r2_y >= 0.0 && r2_y < 1.0) || !(r2_d >= 0.0 && r2_d < 1.0)) {
    throw std::invalid_argument("calibrate: R^2 targets must lie in [0, 1)");
  }
  auto scale = [](double r2, double S) {
    if (r2 == 0.0) return 0.0;
    if (S <= 0.0) {
      throw std::invalid_argument("calibrate: beta' Sigma beta vanishes but an R^2 target is positive");
    }
    return std::sqrt(r2 / ((1.0 - r2) * S));
  };
  const double c_d = scale(r2_d, quad_form(beta1, sigma));
  const double c_y = scale(literal_cy ? r2_d : r2_y, quad_form(beta0, sigma));
  return {c_y, c_d};
}

namespace detail {

// (1, 1/2, ..., 1/5) at slots 1..5 and 11..15 (1-indexed), zero elsewhere.
inline Vec pattern_two_block(Eigen::Index p, double power) {
  Vec b = Vec::Zero(p);
  for (Eigen::Index j = 0; j < std::min<Eigen::Index>(5, p); ++j) {
    b[j] = 1.0 / std::pow(static_cast<double>(j + 1), power);
  }
  for (Eigen::Index j = 10; j < std::min<Eigen::Index>(15, p); ++j) {
    b[j] = 1.0 / std::pow(static_cast<double>(j - 9), power);
  }
  return b;
}

// (1, 1/2^power, ..., 1/10^power) on the first ten slots.
inline Vec pattern_first_ten(Eigen::Index p, double power) {
  Vec b = Vec::Zero(p);
  for (Eigen::Index j = 0; j < std::min<Eigen::Index>(10, p); ++j) {
    b[j] = 1.0 / std::pow(static_cast<double>(j + 1), power);
  }
  return b;
}

inline Vec pattern_global_sq(Eigen::Index p) {
  Vec b(p);
  for (Eigen::Index j = 0; j < p; ++j) b[j] = 1.0 / ((j + 1.0) * (j + 1.0));
  return b;
}

// Indicators of even (or odd) 1-indexed slots up to 40.
inline Vec pattern_alternating(Eigen::Index p, bool even) {
  Vec b = Vec::Zero(p);
  for (Eigen::Index j = 0; j < std::min<Eigen::Index>(40, p); ++j) {
    const Eigen::Index pos = j + 1;
    if ((pos % 2 == 0) == even) b[j] = 1.0;
  }
  return b;
}

// A pair of standard normals with correlation 0.8 via a shared factor.
inline std::pair<double, double> correlated_pair(Rng& rng) {
  const double z0 = rng.normal();
  const double w = rng.normal();
  return {z0, 0.8 * z0 + 0.6 * w};
}

}  // namespace detail

// Coefficient vectors for a design. Random-coefficient designs consume the
// rng, so fresh draws happen per replication; fixed designs ignore it.
inline std::pair<Vec, Vec> make_beta(const std::string& id, Eigen::Index p, Rng& rng) {
  if (!design_known(id)) throw std::invalid_argument("make_beta: unknown design '" + id + "'");
  using detail::pattern_alternating;
  using detail::pattern_first_ten;
  using detail::pattern_global_sq;
  using detail::pattern_two_block;

  auto fixed_pair = [&](Vec b0, Vec b1) { return std::make_pair(std::move(b0), std::move(b1)); };

  if (id == "1" || id == "3" || id == "5") {
    Vec b = pattern_two_block(p, 1.0);
    return fixed_pair(b, b);
  }
  if (id == "2" || id == "4") {
    Vec b = pattern_two_block(p, 2.0);
    return fixed_pair(b, b);
  }
  if (id == "22" || id == "44") {
    Vec b = pattern_global_sq(p);
    return fixed_pair(b, b);
  }
  if (id == "1001") {
    Vec b = pattern_alternating(p, /*even=*/true);
    return fixed_pair(b, b);
  }
  if (id == "6") {
    Vec b(p);
    for (Eigen::Index j = 0; j < p; ++j) b[j] = rng.normal();
    return fixed_pair(b, b);
  }
  if (id == "7" || id == "72" || id == "722") {
    Vec scale = id == "7"    ? pattern_two_block(p, 1.0)
                : id == "72" ? pattern_two_block(p, 2.0)
                             : pattern_global_sq(p);
    Vec b(p);
    for (Eigen::Index j = 0; j < p; ++j) b[j] = scale[j] * rng.normal();
    return fixed_pair(b, b);
  }
  if (id == "8") {
    Vec b(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double u = rng.bernoulli(0.05) ? 1.0 : 0.0;
      const double z1 = 5.0 * rng.normal();
      const double z2 = 0.05 * rng.normal();
      b[j] = u * z1 + (1.0 - u) * z2;
    }
    return fixed_pair(b, b);
  }

  if (id == "1a" || id == "3a" || id == "5a") {
    return fixed_pair(pattern_two_block(p, 1.0), pattern_first_ten(p, 1.0));
  }
  if (id == "2a" || id == "4a") {
    return fixed_pair(pattern_two_block(p, 2.0), pattern_first_ten(p, 2.0));
  }
  if (id == "22a" || id == "44a") {
    return fixed_pair(pattern_global_sq(p), pattern_global_sq(p));
  }
  if (id == "1001a") {
    return fixed_pair(pattern_alternating(p, true), pattern_alternating(p, false));
  }
  if (id == "6a") {
    Vec b0(p), b1(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      auto [z0, z1] = detail::correlated_pair(rng);
      b0[j] = z0;
      b1[j] = z1;
    }
    return fixed_pair(std::move(b0), std::move(b1));
  }
  if (id == "7a" || id == "72a" || id == "722a") {
    const double power = id == "7a" ? 1.0 : 2.0;
    Vec s0 = id == "722a" ? pattern_global_sq(p) : pattern_two_block(p, power);
    Vec s1 = id == "722a" ? pattern_global_sq(p) : pattern_first_ten(p, power);
    Vec b0(p), b1(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      auto [z0, z1] = detail::correlated_pair(rng);
      b0[j] = s0[j] * z0;
      b1[j] = s1[j] * z1;
    }
    return fixed_pair(std::move(b0), std::move(b1));
  }
  // "8a": shared mixture indicator, independent scales per equation.
  Vec b0(p), b1(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double u = rng.bernoulli(0.05) ? 1.0 : 0.0;
    const double z11 = rng.normal();
    const double z12 = rng.normal();
    const double z21 = rng.normal();
    const double z22 = rng.normal();
    b0[j] = 5.0 * u * z11 + 0.05 * (1.0 - u) * z12;
    b1[j] = 5.0 * u * z21 + 0.05 * (1.0 - u) * z22;
  }
  return fixed_pair(std::move(b0), std::move(b1));
}

// Draws one sample of the structural model
//   y = alpha0 d + x'(c_y b0) + sigma_y * zeta,   d* = x'(c_d b1) + sigma_d * v
// with x ~ N(0, Sigma), independent standard normal zeta and v, d = d* or
// 1{d* > 0} for the binary designs. Heteroscedastic scale vectors are
// normalized to mean-square one within the sample, as defined.
inline GeneratedSample generate(const DesignSpec& spec, Rng& rng) {
  if (!design_known(spec.design)) {
    throw std::invalid_argument("generate: unknown design '" + spec.design + "'");
  }
  if (spec.n < 2 || spec.p < 1) throw std::invalid_argument("generate: need n >= 2 and p >= 1");
  if (!(spec.r2_y >= 0.0 && spec.r2_y < 1.0) || !(spec.r2_d >= 0.0 && spec.r2_d < 1.0)) {
    throw std::invalid_argument("generate: R^2 targets must lie in [0, 1)");
  }
  const Eigen::Index n = spec.n;
  const Eigen::Index p = spec.p;

  GeneratedSample out;
  std::tie(out.beta0, out.beta1) = make_beta(spec.design, p, rng);
  const Mat sigma = toeplitz_sigma(p);
  if (design_is_second_family(spec.design)) {
    std::tie(out.c_y, out.c_d) =
        calibrate_last13(spec.r2_y, spec.r2_d, out.beta0, out.beta1, sigma, spec.literal_cy);
  } else {
    std::tie(out.c_y, out.c_d) =
        calibrate_first13(spec.r2_y, spec.r2_d, spec.alpha0, out.beta0, sigma);
  }

  Mat X(n, p);
  for (Eigen::Index i = 0; i < n; ++i) X.row(i) = sample_toeplitz_row(rng, p).transpose();
  Vec zeta(n), v(n);
  for (Eigen::Index i = 0; i < n; ++i) zeta[i] = rng.normal();
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();

  const bool hetero = design_is_heteroscedastic(spec.design);
  Vec signal_d = X * (out.c_d * out.beta1);
  Vec sigma_d = Vec::Ones(n);
  if (hetero) {
    Vec a = (1.0 + (X * out.beta1).array()).square();
    sigma_d = (a / a.mean()).cwiseSqrt();
  }
  Vec dstar = signal_d + sigma_d.cwiseProduct(v);
  Vec d = dstar;
  if (design_is_binary(spec.design)) {
    for (Eigen::Index i = 0; i < n; ++i) d[i] = dstar[i] > 0.0 ? 1.0 : 0.0;
  }

  Vec signal_y = X * (out.c_y * out.beta0);
  Vec sigma_y = Vec::Ones(n);
  if (hetero) {
    Vec a = (1.0 + spec.alpha0 * d.array() + (X * out.beta0).array()).square();
    sigma_y = (a / a.mean()).cwiseSqrt();
  }
  Vec y = spec.alpha0 * d + signal_y + sigma_y.cwiseProduct(zeta);

  Truth truth;
  truth.alpha0 = spec.alpha0;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (out.c_y * out.beta0[j] != 0.0) truth.support_y.push_back(static_cast<int>(j));
    if (out.c_d * out.beta1[j] != 0.0) truth.support_d.push_back(static_cast<int>(j));
  }
  truth.signal_y = std::move(signal_y);
  truth.signal_d = std::move(signal_d);

  out.data.y = std::move(y);
  out.data.d = std::move(d);
  out.data.X = std::move(X);
  out.data.truth = std::move(truth);
  out.sigma_y = std::move(sigma_y);
  out.sigma_d = std::move(sigma_d);
  return out;
}

}  // namespace pds
