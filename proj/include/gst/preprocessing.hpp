#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "gst/forward_model.hpp"

namespace gst {

/// Least-squares fit of temperature on thermal resistance over the deep
/// segment of a profile, where the climate signal is taken to be negligible.
struct DeepRegressionResult {
  double T0_hat = 0.0;  // degC
  double q0_hat = 0.0;  // W/m^2
  double se_T0 = 0.0;
  double se_q0 = 0.0;
  double cutoff_depth = 0.0;  // m
  std::size_t n_used = 0;
};

/// Default deep-segment cutoff per region: 150 m (Desert), 200 m (Swell).
double default_cutoff(Region region);

/// OLS of Y on R using only depths strictly deeper than `cutoff`.
DeepRegressionResult estimate_intercept_and_flow(const BoreholeProfile& profile, double cutoff);

/// Y - T0 - q0 * R, element-wise.
Eigen::VectorXd reduced_estimates(const BoreholeProfile& profile, double T0, double q0);

}  // namespace gst
