#include "gst/preprocessing.hpp"

#include <cmath>
#include <vector>

#include "gst/error.hpp"

namespace gst {

double default_cutoff(Region region) { return region == Region::Desert ? 150.0 : 200.0; }

DeepRegressionResult estimate_intercept_and_flow(const BoreholeProfile& profile, double cutoff) {
  const Eigen::VectorXd R = thermal_resistance(profile);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < profile.depths.size(); ++i) {
    if (profile.depths[i] > cutoff) rows.push_back(i);
  }
  const auto n = rows.size();
  if (n < 3) {
    throw Error(ErrorKind::InvalidArgument,
                "borehole '" + profile.site_id + "': fewer than 3 measurements below the " +
                    std::to_string(cutoff) + " m cutoff");
  }

  double mean_r = 0.0;
  double mean_y = 0.0;
  for (auto i : rows) {
    mean_r += R[i];
    mean_y += profile.temps[i];
  }
  mean_r /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);

  double sxx = 0.0;
  double sxy = 0.0;
  for (auto i : rows) {
    sxx += (R[i] - mean_r) * (R[i] - mean_r);
    sxy += (R[i] - mean_r) * (profile.temps[i] - mean_y);
  }
  if (!(sxx > 0.0)) {
    throw Error(ErrorKind::Numerical,
                "borehole '" + profile.site_id + "': degenerate design, thermal resistance is constant");
  }

  DeepRegressionResult out;
  out.q0_hat = sxy / sxx;
  out.T0_hat = mean_y - out.q0_hat * mean_r;
  out.cutoff_depth = cutoff;
  out.n_used = n;

  double rss = 0.0;
  for (auto i : rows) {
    const double e = profile.temps[i] - out.T0_hat - out.q0_hat * R[i];
    rss += e * e;
  }
  const double s2 = rss / static_cast<double>(n - 2);
  out.se_q0 = std::sqrt(s2 / sxx);
  out.se_T0 = std::sqrt(s2 * (1.0 / static_cast<double>(n) + mean_r * mean_r / sxx));
  return out;
}

Eigen::VectorXd reduced_estimates(const BoreholeProfile& profile, double T0, double q0) {
  const Eigen::VectorXd R = thermal_resistance(profile);
  return (profile.temps.array() - T0 - q0 * R.array()).matrix();
}

}  // namespace gst
