#include "gst/priors.hpp"

#include <cmath>

#include <boost/math/distributions/inverse_gamma.hpp>

#include "gst/error.hpp"

namespace gst {

double InverseGamma::mean() const {
  if (!(shape > 1.0)) throw Error(ErrorKind::InvalidArgument, "inverse gamma mean needs shape > 1");
  return scale / (shape - 1.0);
}

double InverseGamma::variance() const {
  if (!(shape > 2.0)) throw Error(ErrorKind::InvalidArgument, "inverse gamma variance needs shape > 2");
  return scale * scale / ((shape - 1.0) * (shape - 1.0) * (shape - 2.0));
}

Eigen::VectorXd HyperParameters::history_mean(std::size_t K) const {
  const auto k = static_cast<Eigen::Index>(K);
  if (mu0.size() == 0) return Eigen::VectorXd::Zero(k);
  if (mu0.size() == 1) return Eigen::VectorXd::Constant(k, mu0[0]);
  if (mu0.size() != k) {
    throw Error(ErrorKind::DimensionMismatch, "mu0 has length " + std::to_string(mu0.size()) +
                                                  ", expected " + std::to_string(K));
  }
  return mu0;
}

void HyperParameters::validate() const {
  const auto check = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::Config, std::string("invalid hyperparameter: ") + what);
  };
  check(sigma2_0 >= 0.0 && sigma2_D >= 0.0 && sigma2_S >= 0.0, "history-mean variances must be >= 0");
  check(sigma2_D + sigma2_0 > 0.0 && sigma2_S + sigma2_0 > 0.0, "region history-mean variances must be > 0");
  check(eta2_0 >= 0.0 && eta2_D >= 0.0 && eta2_S >= 0.0, "flow-mean variances must be >= 0");
  check(eta2_D + eta2_0 > 0.0 && eta2_S + eta2_0 > 0.0, "region flow-mean variances must be > 0");
  for (const auto* ig : {&measurement, &model, &history, &flow}) {
    check(ig->shape > 0.0 && ig->scale > 0.0, "inverse gamma shape and scale must be > 0");
  }
  check(phi >= 0.0 && phi < 1.0, "phi must lie in [0, 1)");
  check(std::isfinite(nu0), "nu0 must be finite");
}

InverseGamma elicit_inverse_gamma(double mean, double variance) {
  if (!(mean > 0.0) || !(variance > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "inverse gamma elicitation needs mean > 0 and variance > 0");
  }
  const double shape = 2.0 + mean * mean / variance;
  return {shape, mean * (shape - 1.0)};
}

std::pair<double, double> ig_sd_quantiles(const InverseGamma& ig, double p_low, double p_high) {
  if (!(ig.shape > 0.0) || !(ig.scale > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "inverse gamma shape and scale must be > 0");
  }
  if (!(p_low > 0.0 && p_low < p_high && p_high < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "quantile probabilities must satisfy 0 < p_low < p_high < 1");
  }
  const boost::math::inverse_gamma_distribution<double> dist(ig.shape, ig.scale);
  return {std::sqrt(boost::math::quantile(dist, p_low)), std::sqrt(boost::math::quantile(dist, p_high))};
}

double BivariateNormalSpec::sd(Eigen::Index i) const { return std::sqrt(cov(i, i)); }

double BivariateNormalSpec::correlation(Eigen::Index i, Eigen::Index j) const {
  const double denom = std::sqrt(cov(i, i) * cov(j, j));
  return denom > 0.0 ? cov(i, j) / denom : 0.0;
}

BivariateNormalSpec build_joint_nu_prior(const HyperParameters& hyper) {
  BivariateNormalSpec spec;
  spec.mean = Eigen::Vector2d(hyper.nu0, hyper.nu0);
  spec.cov.resize(2, 2);
  spec.cov << hyper.eta2_D + hyper.eta2_0, hyper.eta2_0,
              hyper.eta2_0, hyper.eta2_S + hyper.eta2_0;
  return spec;
}

BivariateNormalSpec build_joint_mu_prior(const HyperParameters& hyper, std::size_t K) {
  if (K < 1) throw Error(ErrorKind::InvalidArgument, "history length K must be >= 1");
  const auto k = static_cast<Eigen::Index>(K);
  const Eigen::VectorXd mu0 = hyper.history_mean(K);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);

  BivariateNormalSpec spec;
  spec.mean.resize(2 * k);
  spec.mean << mu0, mu0;
  spec.cov.resize(2 * k, 2 * k);
  spec.cov.topLeftCorner(k, k) = (hyper.sigma2_D + hyper.sigma2_0) * I;
  spec.cov.topRightCorner(k, k) = hyper.sigma2_0 * I;
  spec.cov.bottomLeftCorner(k, k) = hyper.sigma2_0 * I;
  spec.cov.bottomRightCorner(k, k) = (hyper.sigma2_S + hyper.sigma2_0) * I;
  return spec;
}

SingleSitePrior marginalize_single_site(const HyperParameters& hyper, Region region, std::size_t K) {
  if (!(hyper.history.shape > 1.0) || !(hyper.flow.shape > 1.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "single-site marginalization needs a_gamma > 1 and a_tau > 1 (finite prior means)");
  }
  const auto k = static_cast<Eigen::Index>(K);
  const double history_var = hyper.sigma2_region(region) + hyper.sigma2_0 + hyper.history.mean();
  SingleSitePrior prior;
  prior.mu = hyper.history_mean(K);
  prior.Gamma = history_var * Eigen::MatrixXd::Identity(k, k);
  prior.q0_mean = hyper.nu0;
  prior.q0_var = hyper.eta2_region(region) + hyper.eta2_0 + hyper.flow.mean();
  return prior;
}

}  // namespace gst
