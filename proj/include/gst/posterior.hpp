#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gst/forward_model.hpp"
#include "gst/gibbs.hpp"

namespace gst {

/// Type-7 (linear interpolation between order statistics) sample quantile.
double quantile(const Eigen::VectorXd& samples, double p);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
};

/// Central interval holding probability `level` of the empirical distribution.
Interval credible_interval(const Eigen::VectorXd& samples, double level);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  std::vector<Interval> intervals;  // one per requested level
  std::size_t count = 0;
};

struct SummaryTable {
  std::vector<double> levels;
  std::vector<ParameterSummary> rows;

  const ParameterSummary& at(const std::string& name) const;
  std::string to_csv() const;
  std::string to_json() const;
};

ParameterSummary summarize_samples(const std::string& name, const Eigen::VectorXd& samples,
                                   const std::vector<double>& levels = {0.5, 0.9});

inline constexpr std::size_t kMinimumSummaryDraws = 100;

/// Every scalar parameter and every element of vector parameters, named
/// e.g. "SRD-1.T_h[3]", "SRD-1.q0", "D.mu[0]", "S.nu".
SummaryTable summarize(const Chain& chain, const std::vector<double>& levels = {0.5, 0.9});

/// "55.91 (55.51, 56.32)" for heat-flow draws in W/m^2, reported in mW/m^2.
std::string format_flow_mw(const Eigen::VectorXd& q0_draws, double level = 0.9);

/// Rule-of-thumb bandwidth 0.9 min(sd, IQR/1.34) n^(-1/5).
double silverman_bandwidth(const Eigen::VectorXd& samples);

/// Gaussian kernel density estimate on `grid`; bandwidth <= 0 selects the default.
Eigen::VectorXd kde_density(const Eigen::VectorXd& samples, const Eigen::VectorXd& grid, double bandwidth = 0.0);

/// Evenly spaced grid spanning the samples plus `pad` bandwidths either side.
Eigen::VectorXd density_grid(const Eigen::VectorXd& samples, std::size_t points = 256, double pad = 4.0);

/// Per-draw differences T_h(last) - T_h(interval containing `baseline`).
Eigen::VectorXd history_change(const Eigen::MatrixXd& draws, const std::vector<double>& breakpoints,
                               double baseline);

struct ChangeSummary {
  std::string label;   // site id or "D" / "S"
  double baseline = 0.0;
  ParameterSummary summary;
};

std::vector<ChangeSummary> temperature_change(const Chain& chain,
                                              const std::vector<double>& baselines = {1600, 1700, 1800, 1900});

struct ResidualSet {
  std::string site_id;
  Eigen::VectorXd point;     // Y - (E T_r + T0 + E q0 R)
  Eigen::MatrixXd ensemble;  // stored x N; empty unless the chain kept T_r draws
  double phi_hat = 0.0;      // lag-1 autocorrelation of `point`; 0 below 10 points or when constant
};

ResidualSet residuals(const SiteDraws& draws, const BoreholeProfile& profile);

/// Lag-1 sample autocorrelation.
double ar1_fit(const Eigen::VectorXd& residual);

/// Monte Carlo standard error of the mean by non-overlapping batch means.
double mc_standard_error(const Eigen::VectorXd& samples, std::size_t batches = 20);

/// Rows of `draws` at arbitrary stored indices (e.g. every 6000th iteration).
Eigen::MatrixXd extract_draws(const Eigen::MatrixXd& draws, const std::vector<std::size_t>& rows);

}  // namespace gst
