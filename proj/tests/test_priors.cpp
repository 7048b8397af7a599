#include <cmath>

#include "doctest.h"
#include "gst/error.hpp"
#include "gst/priors.hpp"
#include "gst/random.hpp"

using namespace gst;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

constexpr double kMw2 = 1e-6;  // (mW/m^2)^2 in (W/m^2)^2

}  // namespace

TEST_CASE("moment matching reproduces the default inverse gamma pairs") {
  const auto y = elicit_inverse_gamma(0.11 * 0.11, 1.0);
  CHECK(rel(y.shape, 2.000146) < 1e-4);
  CHECK(rel(y.scale, 0.012102) < 1e-4);
  const auto m = elicit_inverse_gamma(0.5 * 0.5, 100.0);
  CHECK(rel(m.shape, 2.000625) < 1e-4);
  CHECK(rel(m.scale, 0.250156) < 1e-4);
  const auto t = elicit_inverse_gamma(0.01, 1.0);
  CHECK(rel(t.shape, 2.0001) < 1e-4);
  CHECK(rel(t.scale, 0.010001) < 1e-4);
}

TEST_CASE("the default history-variance pair has mean 0.8 and variance 10") {
  const HyperParameters h;
  CHECK(h.history.mean() == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(h.history.variance() == doctest::Approx(10.0).epsilon(1e-9));
  const auto from_moments = elicit_inverse_gamma(0.8, 10.0);
  CHECK(rel(from_moments.shape, 2.064) < 1e-12);
  CHECK(rel(from_moments.scale, 0.8512) < 1e-12);
  // Variance 1 would instead give shape 2.64.
  CHECK(elicit_inverse_gamma(0.8, 1.0).shape == doctest::Approx(2.64));
}

TEST_CASE("elicitation round-trips mean and variance") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const double mean = std::exp(4.0 * rng.normal());
    const double var = std::exp(4.0 * rng.normal());
    const auto ig = elicit_inverse_gamma(mean, var);
    CHECK(rel(ig.mean(), mean) < 1e-10);
    // shape - 2 = mean^2 / var loses digits when the variance dominates
    CHECK(rel(ig.variance(), var) < 1e-13 * ig.shape / (ig.shape - 2.0));
  }
  CHECK_THROWS_AS(elicit_inverse_gamma(0.0, 1.0), Error);
  CHECK_THROWS_AS(elicit_inverse_gamma(1.0, -1.0), Error);
}

TEST_CASE("standard-deviation quantiles of the default priors") {
  const HyperParameters h;
  auto q = ig_sd_quantiles(h.measurement, 0.025, 0.975);
  CHECK(rel(q.first, 0.0466) < 0.01);
  CHECK(rel(q.second, 0.2235) < 0.01);
  q = ig_sd_quantiles(h.model, 0.025, 0.975);
  CHECK(rel(q.first, 0.212) < 0.01);
  CHECK(rel(q.second, 1.016) < 0.01);
  q = ig_sd_quantiles(h.flow, 0.025, 0.975);
  CHECK(rel(1000 * q.first, 42.4) < 0.01);
  CHECK(rel(1000 * q.second, 203.2) < 0.01);
  q = ig_sd_quantiles(h.history, 0.025, 0.975);
  CHECK(rel(q.first, 0.387) < 0.01);
  CHECK(rel(q.second, 1.801) < 0.01);
  CHECK_THROWS_AS(ig_sd_quantiles(h.flow, 0.9, 0.1), Error);
  CHECK_THROWS_AS(ig_sd_quantiles(h.flow, 0.0, 0.5), Error);
}

TEST_CASE("sd quantiles agree with a simulated inverse gamma") {
  const InverseGamma ig{3.5, 1.7};
  Rng rng(11);
  Eigen::VectorXd sd(200000);
  for (Eigen::Index i = 0; i < sd.size(); ++i) sd[i] = std::sqrt(rng.inverse_gamma(ig.shape, ig.scale));
  std::sort(sd.data(), sd.data() + sd.size());
  const auto q = ig_sd_quantiles(ig, 0.1, 0.9);
  CHECK(rel(sd[20000], q.first) < 0.01);
  CHECK(rel(sd[180000], q.second) < 0.01);
}

TEST_CASE("joint flow-mean prior") {
  HyperParameters h;
  auto nu = build_joint_nu_prior(h);
  CHECK(nu.mean[0] == h.nu0);
  CHECK(1000 * nu.sd(0) == doctest::Approx(22.36).epsilon(0.0005));
  CHECK(nu.correlation(0, 1) == doctest::Approx(0.80).epsilon(0.005));
  CHECK(nu.correlation(0, 1) == doctest::Approx(h.eta2_0 / std::sqrt((h.eta2_0 + h.eta2_D) * (h.eta2_0 + h.eta2_S))).epsilon(1e-15));

  struct Row {
    double eta2, eta2_0, sd, corr;
  };
  for (const Row& r : {Row{20 * 20, 20 * 20, 28.28, 0.50}, Row{30 * 30, 20 * 20, 36.06, 0.31},
                       Row{100 * 100, 0, 100.00, 0.00}, Row{100 * 100, 67 * 67, 120.37, 0.31}}) {
    h.eta2_D = h.eta2_S = r.eta2 * kMw2;
    h.eta2_0 = r.eta2_0 * kMw2;
    nu = build_joint_nu_prior(h);
    CHECK(std::round(100 * 1000 * nu.sd(0)) / 100 == doctest::Approx(r.sd));
    CHECK(std::round(100 * nu.correlation(0, 1)) / 100 == doctest::Approx(r.corr));
    CHECK(nu.cov(0, 1) == nu.cov(1, 0));
  }
}

TEST_CASE("joint history-mean prior") {
  HyperParameters h;
  const std::size_t K = 11;
  auto mu = build_joint_mu_prior(h, K);
  REQUIRE(mu.cov.rows() == 22);
  CHECK(mu.sd(0) == doctest::Approx(0.5477).epsilon(0.0002));
  CHECK(mu.correlation(3, 3 + 11) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(mu.cov(0, 1) == 0.0);
  CHECK(mu.cov(0, 12) == 0.0);
  CHECK(Eigen::LLT<Eigen::MatrixXd>(mu.cov).info() == Eigen::Success);

  struct Row {
    double s2, s2_0, sd, corr;
  };
  for (const Row& r : {Row{0.1, 0.1, 0.45, 0.50}, Row{0.2, 0.0, 0.45, 0.00}, Row{0.3, 0.15, 0.67, 0.33}}) {
    h.sigma2_D = h.sigma2_S = r.s2;
    h.sigma2_0 = r.s2_0;
    mu = build_joint_mu_prior(h, K);
    CHECK(std::round(100 * mu.sd(5)) / 100 == doctest::Approx(r.sd));
    CHECK(std::round(100 * mu.correlation(5, 16)) / 100 == doctest::Approx(r.corr));
  }
  CHECK_THROWS_AS(build_joint_mu_prior(h, 0), Error);
}

TEST_CASE("single-site marginal prior") {
  const HyperParameters h;
  for (Region r : {Region::Desert, Region::Swell}) {
    const auto p = marginalize_single_site(h, r, 11);
    CHECK(p.mu.isZero(0.0));
    CHECK((p.Gamma - 1.1 * Eigen::MatrixXd::Identity(11, 11)).cwiseAbs().maxCoeff() <= 4e-16);
    CHECK(p.q0_mean == 0.06);
    CHECK(std::abs(p.q0_var - 0.0105) <= 4e-18);
  }
  HyperParameters unit;
  unit.sigma2_0 = unit.sigma2_D = unit.sigma2_S = 0.0;
  unit.history = {3.0, 2.0};
  // all history-mean variances zero is rejected by validate(), but the
  // marginal itself is still defined
  const auto p = marginalize_single_site(unit, Region::Desert, 4);
  CHECK(p.Gamma.isApprox(Eigen::MatrixXd::Identity(4, 4)));

  HyperParameters bad;
  bad.history.shape = 0.5;
  CHECK_THROWS_AS(marginalize_single_site(bad, Region::Desert, 4), Error);
}

TEST_CASE("hyperparameter validation") {
  HyperParameters h;
  CHECK_NOTHROW(h.validate());
  h.phi = 1.0;
  CHECK_THROWS_AS(h.validate(), Error);
  h = {};
  h.sigma2_0 = -1;
  CHECK_THROWS_AS(h.validate(), Error);
  h = {};
  h.mu0 = Eigen::VectorXd::Constant(3, 0.5);
  CHECK_THROWS_AS(h.history_mean(4), Error);
  CHECK(h.history_mean(3).isApprox(Eigen::VectorXd::Constant(3, 0.5)));
}
