#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gst/forward_model.hpp"
#include "gst/random.hpp"

namespace gst {

struct SyntheticSite {
  std::string site_id;
  Region region = Region::Desert;
  double T0 = 0.0;
  double log_year = 0.0;
  double q0 = 0.0;  // W/m^2
  std::vector<Layer> layers;
  Eigen::VectorXd depths;
  Eigen::VectorXd history;  // true step history, one value per interval
};

/// Known generating values for a simulated dataset.
struct SyntheticTruth {
  std::vector<double> breakpoints;
  double kappa = kDefaultDiffusivity;
  double sigma_Y = 0.0;     // measurement-error sd
  double sigma = 0.0;       // model-error sd
  double noise_phi = 0.0;   // AR(1) correlation of model errors
  double depth_unit = 5.0;  // m
  std::array<Eigen::VectorXd, kRegionCount> region_means;  // informational
  std::vector<SyntheticSite> sites;

  void validate() const;
};

/// Y = A h + model noise + T0 + q0 R + measurement noise.
BoreholeProfile simulate_borehole(const SyntheticSite& site, const SyntheticTruth& truth, Rng& rng);
std::vector<BoreholeProfile> simulate_dataset(const SyntheticTruth& truth, Rng& rng);

/// Default analysis breakpoints 1600, 1650, ..., 1965.
std::vector<double> default_breakpoints();

/// Nine synthetic boreholes with the layering, surface intercepts, logging
/// years and heat flows of the San Rafael sites, 5 m depth spacing, and
/// warming histories scattered around two regional means.
SyntheticTruth sanrafael_synthetic_truth();

}  // namespace gst
