#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gst/forward_model.hpp"
#include "gst/gibbs.hpp"
#include "gst/priors.hpp"

namespace gst {

// Reference posteriors for small problems, computed without the Gibbs
// machinery. Every unknown is written as an affine function of independent
// standard normals following the generative model; given the variance
// components the posterior is exact Gaussian conditioning on Y, and up to
// three variance components are integrated numerically on log grids.

enum class VarianceComponent { Measurement, Model, History, Flow };

struct VarianceSlot {
  VarianceComponent kind = VarianceComponent::Measurement;
  std::size_t index = 0;  // site index (Measurement, Model) or region index (History, Flow)
};

struct VarianceValues {
  std::vector<double> sigma2_Y;  // per site
  std::vector<double> sigma2;    // per site
  std::array<double, kRegionCount> gamma2{1.0, 1.0};
  std::array<double, kRegionCount> tau2{1e-4, 1e-4};

  double get(const VarianceSlot& slot) const;
  void set(const VarianceSlot& slot, double value);
};

struct OracleProblem {
  std::vector<BoreholeProfile> profiles;
  ModelSetup setup;
  HyperParameters hyper;
  /// When set the single-site model with these fixed priors is used
  /// (exactly one profile); otherwise the two-region hierarchy.
  std::optional<SingleSitePrior> single_site;
  VarianceValues fixed;
  std::vector<VarianceSlot> free;  // at most 3
  std::size_t grid_points = 0;     // per free dimension; 0 picks a default
  double tail = 1e-6;              // prior tail mass excluded from each grid
};

struct OracleResult {
  std::vector<std::string> names;
  Eigen::VectorXd mean;
  Eigen::VectorXd var;

  std::size_t index_of(const std::string& name) const;
  double mean_of(const std::string& name) const { return mean[static_cast<Eigen::Index>(index_of(name))]; }
  double var_of(const std::string& name) const { return var[static_cast<Eigen::Index>(index_of(name))]; }
};

/// Exact Gaussian posterior of every latent quantity for fixed variances.
/// Names: "D.mu[k]", "S.nu", "<id>.T_h[k]", "<id>.T_r[i]", "<id>.q0".
struct GaussianPosterior {
  std::vector<std::string> names;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double log_evidence = 0.0;  // log p(Y | variances)
};

GaussianPosterior linear_gaussian_posterior(const OracleProblem& problem, const VarianceValues& variances);

/// Posterior means and variances of all latent quantities, plus the free
/// variance components ("<id>.sigma2_Y", "<id>.sigma2", "D.gamma2", "S.tau2").
OracleResult oracle_posterior_tiny(const OracleProblem& problem);

}  // namespace gst
