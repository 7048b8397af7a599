#pragma once

#include <cstddef>
#include <utility>

#include <Eigen/Dense>

#include "gst/forward_model.hpp"

namespace gst {

/// Inverse gamma with density proportional to x^(-shape-1) exp(-scale/x).
struct InverseGamma {
  double shape = 0.0;
  double scale = 0.0;

  /// Requires shape > 1.
  double mean() const;
  /// Requires shape > 2.
  double variance() const;
};

/// Fixed constants of the hierarchical model. Internal units are SI:
/// degC for temperatures and W/m^2 for heat flow.
struct HyperParameters {
  Eigen::VectorXd mu0;       // prior mean of region histories; empty means zero
  double sigma2_0 = 0.1;     // shared component of the region-mean covariance
  double sigma2_D = 0.2;
  double sigma2_S = 0.2;
  double nu0 = 0.06;         // W/m^2
  double eta2_0 = 0.02 * 0.02;
  double eta2_D = 0.01 * 0.01;
  double eta2_S = 0.01 * 0.01;
  InverseGamma measurement{2.000146, 0.012102};  // (a_Y, b_Y)
  InverseGamma model{2.000625, 0.250156};        // (a, b)
  InverseGamma history{2.064, 0.8512};           // (a_gamma, b_gamma)
  InverseGamma flow{2.000100, 0.010001};         // (a_tau, b_tau)
  double phi = 0.0;                              // AR(1) correlation of model errors

  /// Default values, registered as the `sanrafael-default` profile.
  static HyperParameters sanrafael_default() { return {}; }

  /// Prior mean vector of length K (zeros when mu0 is empty, broadcast when scalar).
  Eigen::VectorXd history_mean(std::size_t K) const;
  double sigma2_region(Region r) const { return r == Region::Desert ? sigma2_D : sigma2_S; }
  double eta2_region(Region r) const { return r == Region::Desert ? eta2_D : eta2_S; }

  void validate() const;
};

InverseGamma elicit_inverse_gamma(double mean, double variance);

/// Quantiles of sqrt(X) for X ~ IG(a, b).
std::pair<double, double> ig_sd_quantiles(const InverseGamma& ig, double p_low, double p_high);

struct BivariateNormalSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  double sd(Eigen::Index i) const;
  double correlation(Eigen::Index i, Eigen::Index j) const;
};

/// Joint prior of (nu_D, nu_S) after integrating out the basin-wide mean.
BivariateNormalSpec build_joint_nu_prior(const HyperParameters& hyper);

/// Joint prior of (mu_D; mu_S), 2K-dimensional with I_K blocks.
BivariateNormalSpec build_joint_mu_prior(const HyperParameters& hyper, std::size_t K);

/// Fixed priors for a stand-alone borehole fit, matched to the marginal prior
/// moments the multi-site hierarchy implies for one site.
struct SingleSitePrior {
  Eigen::VectorXd mu;
  Eigen::MatrixXd Gamma;
  double q0_mean = 0.0;
  double q0_var = 0.0;
};

SingleSitePrior marginalize_single_site(const HyperParameters& hyper, Region region, std::size_t K);

}  // namespace gst
