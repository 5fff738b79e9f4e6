#include <catch2/catch_amalgamated.hpp>

#include "pds/dgp.hpp"
#include "test_util.hpp"

using pds::DesignSpec;
using pds::Mat;
using pds::Vec;

TEST_CASE("toeplitz_sigma small cases") {
  Mat s1 = pds::toeplitz_sigma(1);
  REQUIRE(s1(0, 0) == 1.0);

  Mat s2 = pds::toeplitz_sigma(2);
  REQUIRE(s2(0, 0) == 1.0);
  REQUIRE(s2(0, 1) == 0.5);
  REQUIRE(s2(1, 0) == 0.5);

  Mat s10 = pds::toeplitz_sigma(10);
  Eigen::LLT<Mat> llt(s10);
  REQUIRE(llt.info() == Eigen::Success);  // positive definite

  REQUIRE_THROWS_AS(pds::toeplitz_sigma(0), std::invalid_argument);
}

TEST_CASE("sampled rows reproduce the Toeplitz covariance") {
  const Eigen::Index n = 50000, p = 5;
  pds::Rng rng(301);
  Mat X(n, p);
  for (Eigen::Index i = 0; i < n; ++i) X.row(i) = pds::sample_toeplitz_row(rng, p).transpose();
  Mat centered = X.rowwise() - X.colwise().mean();
  Mat cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Mat target = pds::toeplitz_sigma(p);
  REQUIRE((cov - target).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("quad_form") {
  Mat sigma = pds::toeplitz_sigma(2);
  Vec e1(2);
  e1 << 1, 0;
  REQUIRE(pds::quad_form(e1, sigma) == Catch::Approx(1.0));
  Vec ones(2);
  ones << 1, 1;
  REQUIRE(pds::quad_form(ones, sigma) == Catch::Approx(3.0));
  REQUIRE(pds::quad_form(Vec::Zero(2), sigma) == 0.0);
  REQUIRE_THROWS_AS(pds::quad_form(Vec::Zero(3), sigma), std::invalid_argument);
}

TEST_CASE("calibrate_first13 formulas") {
  Vec e1(1);
  e1 << 1.0;  // beta'Sigma beta = 1
  Mat sigma = pds::toeplitz_sigma(1);

  auto [cy0, cd0] = pds::calibrate_first13(0.0, 0.0, 0.5, e1, sigma);
  REQUIRE(cy0 == 0.0);
  REQUIRE(cd0 == 0.0);

  auto [cy, cd] = pds::calibrate_first13(0.0, 0.5, 0.5, e1, sigma);
  REQUIRE(cd == Catch::Approx(1.0));
  // zero outcome reduced form: the direct channel must cancel alpha0 * c_d
  REQUIRE(cy == Catch::Approx(-0.5 * cd).margin(1e-12));

  // the solved c's reproduce the targeted population R^2's exactly
  for (double r2d : {0.2, 0.4, 0.8}) {
    for (double r2y : {0.2, 0.4, 0.8}) {
      auto [c_y, c_d] = pds::calibrate_first13(r2y, r2d, 0.5, e1, sigma);
      const double S = 1.0;
      REQUIRE(c_d * c_d * S / (c_d * c_d * S + 1.0) == Catch::Approx(r2d).margin(1e-12));
      const double total = 0.5 * c_d + c_y;  // reduced-form x coefficient of y
      REQUIRE(total * total * S / (total * total * S + 0.25 + 1.0) ==
              Catch::Approx(r2y).margin(1e-12));
    }
  }

  REQUIRE_THROWS_AS(pds::calibrate_first13(1.0, 0.0, 0.5, e1, sigma), std::invalid_argument);
  REQUIRE_THROWS_AS(pds::calibrate_first13(0.0, 0.5, 0.5, Vec::Zero(1), sigma),
                    std::invalid_argument);
}

TEST_CASE("calibrate_last13 formulas") {
  Mat sigma = pds::toeplitz_sigma(1);
  Vec b0(1), b1(1);
  b0 << 1.0;
  b1 << 2.0;  // beta1' Sigma beta1 = 4

  auto [cy, cd] = pds::calibrate_last13(0.3, 0.8, b0, b1, sigma);
  REQUIRE(cd == Catch::Approx(1.0));  // sqrt(0.8 / (0.2 * 4))
  REQUIRE(cy == Catch::Approx(std::sqrt(0.3 / 0.7)));

  auto [cy0, cd0] = pds::calibrate_last13(0.0, 0.0, b0, b1, sigma);
  REQUIRE(cy0 == 0.0);
  REQUIRE(cd0 == 0.0);

  // swapping (beta0, r2_y) with (beta1, r2_d) swaps the constants
  auto [cys, cds] = pds::calibrate_last13(0.8, 0.3, b1, b0, sigma);
  REQUIRE(cys == Catch::Approx(cd));
  REQUIRE(cds == Catch::Approx(cy));

  // literal mode reuses R^2_d inside c_y
  auto [cyl, cdl] = pds::calibrate_last13(0.3, 0.8, b0, b1, sigma, /*literal_cy=*/true);
  REQUIRE(cdl == Catch::Approx(1.0));
  REQUIRE(cyl == Catch::Approx(std::sqrt(0.8 / 0.2)));
}

TEST_CASE("make_beta fixed patterns") {
  pds::Rng rng(303);
  auto [b1, b1d] = pds::make_beta("1", 200, rng);
  REQUIRE(b1[0] == 1.0);
  REQUIRE(b1[4] == Catch::Approx(0.2));
  for (int j = 5; j < 10; ++j) REQUIRE(b1[j] == 0.0);
  REQUIRE(b1[10] == 1.0);
  REQUIRE(b1[14] == Catch::Approx(0.2));
  REQUIRE(b1[15] == 0.0);
  REQUIRE(b1 == b1d);

  auto [b2, b2d] = pds::make_beta("2", 200, rng);
  REQUIRE(b2[1] == Catch::Approx(0.25));
  REQUIRE(b2[11] == Catch::Approx(0.25));

  auto [b22, b22d] = pds::make_beta("22", 200, rng);
  REQUIRE(b22[0] == 1.0);
  REQUIRE(b22[99] == Catch::Approx(1.0 / (100.0 * 100.0)));

  auto [b1001, b1001d] = pds::make_beta("1001", 200, rng);
  int ones = 0;
  for (int j = 0; j < 200; ++j) {
    if (b1001[j] == 1.0) {
      ones++;
      REQUIRE((j + 1) % 2 == 0);
      REQUIRE(j + 1 <= 40);
    }
  }
  REQUIRE(ones == 20);

  auto [a0, a1] = pds::make_beta("1001a", 200, rng);
  for (int j = 0; j < 40; ++j) REQUIRE(a0[j] + a1[j] == 1.0);  // complementary slots
  REQUIRE(a1[0] == 1.0);  // odd 1-indexed slots

  auto [c0, c1] = pds::make_beta("1a", 200, rng);
  REQUIRE(c1[5] == Catch::Approx(1.0 / 6.0));
  REQUIRE(c1[10] == 0.0);
  REQUIRE(c0[10] == 1.0);

  REQUIRE_THROWS_AS(pds::make_beta("99", 200, rng), std::invalid_argument);
}

TEST_CASE("design 6a draws correlated coefficient pairs") {
  pds::Rng rng(305);
  auto [b0, b1] = pds::make_beta("6a", 10000, rng);
  const double c01 = (b0.array() - b0.mean()).matrix().dot((b1.array() - b1.mean()).matrix()) /
                     (b0.size() - 1.0);
  const double s0 = std::sqrt((b0.array() - b0.mean()).square().sum() / (b0.size() - 1.0));
  const double s1 = std::sqrt((b1.array() - b1.mean()).square().sum() / (b1.size() - 1.0));
  REQUIRE(c01 / (s0 * s1) == Catch::Approx(0.8).margin(0.02));
}

TEST_CASE("design 8 is a 5 percent scale mixture") {
  pds::Rng rng(307);
  auto [b, bd] = pds::make_beta("8", 20000, rng);
  int large = 0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    if (std::abs(b[j]) > 0.3) ++large;
  }
  // P(|N(0,25)| > .3) ~ .952, so the share of large entries is ~ 0.0476
  const double share = large / static_cast<double>(b.size());
  REQUIRE(share > 0.035);
  REQUIRE(share < 0.062);
}

TEST_CASE("generate is deterministic given the stream") {
  DesignSpec spec;
  spec.design = "5";
  spec.n = 60;
  spec.p = 30;
  spec.r2_y = 0.4;
  spec.r2_d = 0.6;
  pds::Rng r1(309), r2(309);
  auto a = pds::generate(spec, r1);
  auto b = pds::generate(spec, r2);
  REQUIRE(a.data.y == b.data.y);
  REQUIRE(a.data.d == b.data.d);
  REQUIRE(a.data.X == b.data.X);
  REQUIRE(a.c_y == b.c_y);
  REQUIRE(a.c_d == b.c_d);
}

TEST_CASE("generate with zero targets produces pure noise equations") {
  DesignSpec spec;
  spec.design = "1";
  spec.n = 1000;
  spec.p = 20;
  pds::Rng rng(311);
  auto gs = pds::generate(spec, rng);
  REQUIRE(gs.c_y == 0.0);
  REQUIRE(gs.c_d == 0.0);
  REQUIRE(gs.data.truth->signal_y.norm() == 0.0);
  REQUIRE(gs.data.truth->signal_d.norm() == 0.0);
  REQUIRE(gs.data.truth->support_y.empty());
  // y - alpha0 d is standard normal noise
  Vec resid = gs.data.y - 0.5 * gs.data.d;
  const double var = resid.squaredNorm() / 1000.0;
  REQUIRE(var == Catch::Approx(1.0).margin(0.15));
}

TEST_CASE("heteroscedastic scales average to one in sample") {
  DesignSpec spec;
  spec.design = "3";
  spec.n = 80;
  spec.p = 40;
  spec.r2_y = 0.4;
  spec.r2_d = 0.4;
  pds::Rng rng(313);
  auto gs = pds::generate(spec, rng);
  REQUIRE(gs.sigma_d.array().square().mean() == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(gs.sigma_y.array().square().mean() == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(gs.sigma_d.minCoeff() >= 0.0);
}

TEST_CASE("binary design produces both arms") {
  DesignSpec spec;
  spec.design = "5";
  spec.n = 100;
  spec.p = 30;
  spec.r2_y = 0.4;
  spec.r2_d = 0.4;
  pds::Rng rng(315);
  auto gs = pds::generate(spec, rng);
  int treated = 0;
  for (Eigen::Index i = 0; i < 100; ++i) {
    REQUIRE((gs.data.d[i] == 0.0 || gs.data.d[i] == 1.0));
    treated += gs.data.d[i] == 1.0 ? 1 : 0;
  }
  REQUIRE(treated > 0);
  REQUIRE(treated < 100);
}

TEST_CASE("empirical treatment R^2 tracks the target") {
  DesignSpec spec;
  spec.design = "1";
  spec.n = 20000;
  spec.p = 50;
  spec.r2_y = 0.2;
  spec.r2_d = 0.6;
  pds::Rng rng(317);
  auto gs = pds::generate(spec, rng);
  const Vec& signal = gs.data.truth->signal_d;
  const double var_sig = (signal.array() - signal.mean()).square().mean();
  const double var_d = (gs.data.d.array() - gs.data.d.mean()).square().mean();
  REQUIRE(var_sig / var_d == Catch::Approx(0.6).margin(0.02));
}

TEST_CASE("generate validates its spec") {
  DesignSpec spec;
  spec.design = "nope";
  pds::Rng rng(319);
  REQUIRE_THROWS_AS(pds::generate(spec, rng), std::invalid_argument);
  spec.design = "1";
  spec.r2_y = 1.0;
  REQUIRE_THROWS_AS(pds::generate(spec, rng), std::invalid_argument);
}
