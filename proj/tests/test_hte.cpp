#include <catch2/catch_amalgamated.hpp>

#include "pds/dgp.hpp"
#include "pds/hte.hpp"
#include "test_util.hpp"

using pds::Mat;
using pds::NuisanceFits;
using pds::PenaltyConfig;
using pds::PropensityLink;
using pds::Vec;

namespace {

struct Sample {
  Vec y, d;
  Mat X;
};

// d randomized at 1/2, y = g0(x) + tau d + noise_sd * zeta with g0 = x' beta.
Sample randomized_sample(std::uint64_t seed, Eigen::Index n, Eigen::Index p, double tau,
                         double noise_sd, const Vec& beta) {
  pds::Rng rng(seed);
  Sample s;
  s.X.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) s.X.row(i) = pds::sample_toeplitz_row(rng, p).transpose();
  s.d.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.d[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  s.y = s.X * beta + tau * s.d;
  for (Eigen::Index i = 0; i < n; ++i) s.y[i] += noise_sd * rng.normal();
  return s;
}

NuisanceFits truth_fits(Eigen::Index p, const Vec& beta, double tau, double m_icpt) {
  NuisanceFits f;
  f.beta_g0 = beta;
  f.beta_g1 = beta;
  f.icpt_g0 = 0.0;
  f.icpt_g1 = tau;
  f.beta_m = Vec::Zero(p);
  f.icpt_m = m_icpt;
  f.link = PropensityLink::linear;
  f.trim_eps = 0.01;
  return f;
}

}  // namespace

TEST_CASE("phi hand values and structure") {
  REQUIRE(pds::phi(0.5, 1.0, 1.0, 0.0, 0.5, 0.5) == Catch::Approx(-1.0));
  // d = 1, y = g1: the correction vanishes
  REQUIRE(pds::phi(0.7, 2.0, 1.0, 0.5, 2.0, 0.3) == Catch::Approx(0.7 - (2.0 - 0.5)));
  // affine in alpha with unit slope
  const double delta = pds::phi(1.3, 1.0, 0.0, 0.2, 0.4, 0.6) -
                       pds::phi(0.3, 1.0, 0.0, 0.2, 0.4, 0.6);
  REQUIRE(delta == Catch::Approx(1.0));
  REQUIRE_THROWS_AS(pds::phi(0.0, 1.0, 1.0, 0.0, 0.0, 1.0), std::domain_error);
  REQUIRE_THROWS_AS(pds::phi(0.0, 1.0, 0.5, 0.0, 0.0, 0.5), std::domain_error);
}

TEST_CASE("phi_tilde hand values and structure") {
  REQUIRE(pds::phi_tilde(0.0, 1.0, 1.0, 0.0, 1.0, 0.5, 0.5) == Catch::Approx(2.0));
  // d = 0, y = g0: everything vanishes
  REQUIRE(pds::phi_tilde(0.9, 0.4, 0.0, 0.4, 1.0, 0.3, 0.5) == Catch::Approx(0.0));
  // affine in gamma with slope -d/mu
  const double mu = 0.25;
  const double dl = pds::phi_tilde(1.0, 1.0, 1.0, 0.1, 0.2, 0.5, mu) -
                    pds::phi_tilde(0.0, 1.0, 1.0, 0.1, 0.2, 0.5, mu);
  REQUIRE(dl == Catch::Approx(-1.0 / mu));
  REQUIRE_THROWS_AS(pds::phi_tilde(0.0, 1.0, 1.0, 0.0, 0.0, 0.5, 0.0), std::domain_error);
}

TEST_CASE("fit_nuisances null model gives arm means and the share of treated") {
  pds::Rng rng(201);
  const Eigen::Index n = 200, p = 20;
  Mat X = testutil::random_matrix(rng, n, p);
  Vec d(n);
  for (Eigen::Index i = 0; i < n; ++i) d[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  Vec y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = 1.0 + 0.1 * rng.normal();

  auto fits = pds::fit_nuisances(y, d, X, PropensityLink::linear, PenaltyConfig{});
  REQUIRE(fits.support_g0.empty());
  REQUIRE(fits.support_g1.empty());
  REQUIRE(fits.support_m.empty());

  double mean1 = 0.0, mean0 = 0.0;
  int n1 = 0, n0 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d[i] == 1.0) {
      mean1 += y[i];
      ++n1;
    } else {
      mean0 += y[i];
      ++n0;
    }
  }
  mean1 /= n1;
  mean0 /= n0;
  REQUIRE(fits.icpt_g1 == Catch::Approx(mean1).margin(1e-10));
  REQUIRE(fits.icpt_g0 == Catch::Approx(mean0).margin(1e-10));
  Vec m = fits.predict_m(X);
  REQUIRE(m.minCoeff() == Catch::Approx(d.mean()).margin(1e-10));
  REQUIRE(m.maxCoeff() == Catch::Approx(d.mean()).margin(1e-10));
}

TEST_CASE("propensities never leave the trimming bounds") {
  pds::Rng rng(203);
  const Eigen::Index n = 150, p = 5;
  Mat X = testutil::random_matrix(rng, n, p);
  Vec d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d[i] = (3.0 * X(i, 0) + 0.3 * rng.normal()) > 0.0 ? 1.0 : 0.0;  // near-separable
  }
  Vec y = X.col(0) + d;
  for (Eigen::Index i = 0; i < n; ++i) y[i] += 0.5 * rng.normal();
  for (auto link : {PropensityLink::linear, PropensityLink::logit}) {
    auto fits = pds::fit_nuisances(y, d, X, link, PenaltyConfig{}, 0.05);
    Vec m = fits.predict_m(X);
    REQUIRE(m.minCoeff() >= 0.05 - 1e-15);
    REQUIRE(m.maxCoeff() <= 0.95 + 1e-15);
  }
}

TEST_CASE("linear and logit links broadly agree") {
  pds::Rng rng(205);
  const Eigen::Index n = 400, p = 10;
  Mat X = testutil::random_matrix(rng, n, p);
  Vec d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = 0.8 * X(i, 0) - 0.5 * X(i, 1);
    d[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-u)) ? 1.0 : 0.0;
  }
  Vec y = X.col(0) + 0.5 * d;
  for (Eigen::Index i = 0; i < n; ++i) y[i] += rng.normal();

  auto lin = pds::fit_nuisances(y, d, X, PropensityLink::linear, PenaltyConfig{});
  auto log = pds::fit_nuisances(y, d, X, PropensityLink::logit, PenaltyConfig{});
  Vec ml = lin.predict_m(X);
  Vec mg = log.predict_m(X);
  const double cl = (ml.array() - ml.mean()).matrix().normalized().dot(
      (mg.array() - mg.mean()).matrix().normalized());
  REQUIRE(cl > 0.9);
}

TEST_CASE("fit_nuisances rejects degenerate arms") {
  pds::Rng rng(207);
  Mat X = testutil::random_matrix(rng, 20, 3);
  Vec y = testutil::random_vector(rng, 20);
  Vec d = Vec::Ones(20);
  REQUIRE_THROWS_AS(pds::fit_nuisances(y, d, X, PropensityLink::linear, PenaltyConfig{}),
                    std::runtime_error);
  d[0] = 0.5;
  REQUIRE_THROWS_AS(pds::fit_nuisances(y, d, X, PropensityLink::linear, PenaltyConfig{}),
                    std::invalid_argument);
}

TEST_CASE("ate solves its own moment and recovers a randomized effect") {
  Vec beta = Vec::Zero(30);
  beta.head(4) << 1.0, -0.8, 0.6, 0.5;
  Sample s = randomized_sample(209, 2000, 30, 1.0, 1.0, beta);
  auto fits = pds::fit_nuisances(s.y, s.d, s.X, PropensityLink::linear, PenaltyConfig{});
  auto rep = pds::ate_from_nuisances(s.y, s.d, s.X, fits);
  REQUIRE(std::abs(rep.effect_hat - 1.0) < 0.1);
  REQUIRE(rep.se > 0.0);

  // defining equation: E_n[phi(alpha_check, ...)] = 0
  Vec g0 = fits.predict_g0(s.X);
  Vec g1 = fits.predict_g1(s.X);
  Vec m = fits.predict_m(s.X);
  double moment = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < s.y.size(); ++i) {
    const double ph = pds::phi(rep.effect_hat, s.y[i], s.d[i], g0[i], g1[i], m[i]);
    moment += ph;
    s2 += ph * ph;
  }
  moment /= static_cast<double>(s.y.size());
  s2 /= static_cast<double>(s.y.size());
  REQUIRE(std::abs(moment) < 1e-12);
  // reported variance equals the recomputed moment variance
  REQUIRE(rep.se == Catch::Approx(std::sqrt(s2 / static_cast<double>(s.y.size()))).margin(1e-12));
}

TEST_CASE("degenerate zero outcome gives exactly zero effects") {
  pds::Rng rng(211);
  const Eigen::Index n = 100, p = 10;
  Mat X = testutil::random_matrix(rng, n, p);
  Vec d(n);
  for (Eigen::Index i = 0; i < n; ++i) d[i] = (i % 2 == 0) ? 1.0 : 0.0;
  Vec y = Vec::Zero(n);
  auto rep = pds::ate_estimate(y, d, X, PropensityLink::linear, PenaltyConfig{});
  REQUIRE(rep.effect_hat == 0.0);
  auto att = pds::att_estimate(y, d, X, PropensityLink::linear, PenaltyConfig{});
  REQUIRE(att.effect_hat == 0.0);
  REQUIRE(att.mu_hat == Catch::Approx(0.5));
}

TEST_CASE("att equals ate exactly under noiseless homogeneous effects") {
  Vec beta = Vec::Zero(12);
  beta.head(3) << 0.9, -0.4, 0.7;
  const double tau = 0.8;
  Sample s = randomized_sample(213, 300, 12, tau, 0.0, beta);  // noiseless
  auto fits = truth_fits(12, beta, tau, 0.5);
  auto ate = pds::ate_from_nuisances(s.y, s.d, s.X, fits);
  auto att = pds::att_from_nuisances(s.y, s.d, s.X, fits);
  REQUIRE(ate.effect_hat == Catch::Approx(tau).margin(1e-12));
  REQUIRE(att.effect_hat == Catch::Approx(tau).margin(1e-12));

  // the ATT moment is solved as well
  Vec g0 = fits.predict_g0(s.X);
  Vec g1 = fits.predict_g1(s.X);
  Vec m = fits.predict_m(s.X);
  double moment = 0.0;
  for (Eigen::Index i = 0; i < s.y.size(); ++i) {
    moment += pds::phi_tilde(att.effect_hat, s.y[i], s.d[i], g0[i], g1[i], m[i], att.mu_hat);
  }
  REQUIRE(std::abs(moment / static_cast<double>(s.y.size())) < 1e-12);
}

TEST_CASE("att_estimate refuses an untreated sample") {
  pds::Rng rng(215);
  Mat X = testutil::random_matrix(rng, 30, 3);
  Vec y = testutil::random_vector(rng, 30);
  Vec d = Vec::Zero(30);
  REQUIRE_THROWS_AS(pds::att_estimate(y, d, X, PropensityLink::linear, PenaltyConfig{}),
                    std::runtime_error);
}

TEST_CASE("immunization: zero direction, unit alpha slope, small nuisance slopes") {
  Vec beta = Vec::Zero(20);
  beta.head(5) << 0.8, -0.6, 0.5, 0.4, -0.3;
  Sample s = randomized_sample(217, 5000, 20, 1.0, 0.25, beta);
  auto fits = truth_fits(20, beta, 1.0, 0.5);

  Vec zero = Vec::Zero(20);
  REQUIRE(pds::immunization_check(s.y, s.d, s.X, fits, pds::NuisanceBlock::g0, zero, 1e-4) == 0.0);

  REQUIRE(pds::immunization_check(s.y, s.d, s.X, fits, pds::NuisanceBlock::alpha, zero, 1e-4) ==
          Catch::Approx(1.0).margin(1e-9));

  pds::Rng rng(219);
  Vec dir = testutil::random_vector(rng, 20).normalized();
  const double bound = 5.0 / std::sqrt(5000.0);
  for (auto block : {pds::NuisanceBlock::g0, pds::NuisanceBlock::g1, pds::NuisanceBlock::m}) {
    REQUIRE(std::abs(pds::immunization_check(s.y, s.d, s.X, fits, block, dir, 1e-5)) < bound);
  }
  REQUIRE_THROWS_AS(pds::immunization_check(s.y, s.d, s.X, fits, pds::NuisanceBlock::m, dir, 0.0),
                    std::invalid_argument);
}

TEST_CASE("propensity selection stays sparse on a sparse truth") {
  int within = 0;
  const int trials = 40;
  const Eigen::Index n = 200, p = 50;
  Vec beta_m = Vec::Zero(p);
  beta_m.head(3) << 1.5, -1.0, 0.8;
  for (int t = 0; t < trials; ++t) {
    pds::Rng rng(3000 + static_cast<std::uint64_t>(t));
    Mat X = testutil::random_matrix(rng, n, p);
    Vec d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      d[i] = rng.uniform() < 0.2 + 0.6 * (X.row(i).head(3).sum() > 0.0 ? 1.0 : 0.0) ? 1.0 : 0.0;
    }
    Vec y = X * beta_m + d;
    for (Eigen::Index i = 0; i < n; ++i) y[i] += rng.normal();
    try {
      auto fits = pds::fit_nuisances(y, d, X, PropensityLink::linear, PenaltyConfig{});
      if (static_cast<Eigen::Index>(fits.support_m.size()) <= 9) ++within;  // <= 3 s
    } catch (const std::exception&) {
    }
  }
  REQUIRE(within > trials / 2);
}
