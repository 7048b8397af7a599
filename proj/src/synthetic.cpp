#include "gst/synthetic.hpp"

#include <cmath>

#include "gst/error.hpp"
#include "gst/gibbs.hpp"

namespace gst {

void SyntheticTruth::validate() const {
  if (!(sigma_Y >= 0.0) || !(sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise sds must be >= 0");
  if (!(noise_phi >= 0.0 && noise_phi < 1.0)) throw Error(ErrorKind::InvalidArgument, "noise_phi must lie in [0, 1)");
  if (sites.empty()) throw Error(ErrorKind::InvalidArgument, "synthetic truth has no sites");
  for (const auto& s : sites) {
    if (s.history.size() != static_cast<Eigen::Index>(breakpoints.size())) {
      throw Error(ErrorKind::DimensionMismatch,
                  "site '" + s.site_id + "': history length does not match the number of breakpoints");
    }
    if (s.depths.size() == 0) throw Error(ErrorKind::InvalidGrid, "site '" + s.site_id + "' has no depths");
  }
}

BoreholeProfile simulate_borehole(const SyntheticSite& site, const SyntheticTruth& truth, Rng& rng) {
  BoreholeProfile p;
  p.site_id = site.site_id;
  p.region = site.region;
  p.depths = site.depths;
  p.temps = Eigen::VectorXd::Zero(site.depths.size());
  p.layers = site.layers;
  p.T0 = site.T0;
  p.log_year = site.log_year;
  p.validate();

  const TimeGrid grid(truth.breakpoints, site.log_year);
  const auto op = build_forward_operator(site.depths, grid, truth.kappa);
  const auto n = site.depths.size();

  Eigen::VectorXd model_noise = rng.normal_vector(n);
  if (truth.noise_phi > 0.0) {
    const Eigen::MatrixXd C = ar1_correlation(site.depths, {truth.noise_phi, truth.depth_unit});
    model_noise = Eigen::LLT<Eigen::MatrixXd>(C).matrixL() * model_noise;
  }
  const Eigen::VectorXd meas_noise = rng.normal_vector(n);

  p.temps = forward_solve(op, site.history) + truth.sigma * model_noise +
            (site.T0 + site.q0 * thermal_resistance(p).array()).matrix() + truth.sigma_Y * meas_noise;
  return p;
}

std::vector<BoreholeProfile> simulate_dataset(const SyntheticTruth& truth, Rng& rng) {
  truth.validate();
  std::vector<BoreholeProfile> out;
  for (const auto& s : truth.sites) out.push_back(simulate_borehole(s, truth, rng));
  return out;
}

std::vector<double> default_breakpoints() {
  return {1600, 1650, 1700, 1750, 1800, 1850, 1875, 1900, 1925, 1950, 1965};
}

namespace {

struct SiteSpec {
  const char* id;
  Region region;
  std::vector<Layer> layers;
  double T0;
  double year;
  double q0_mw;
  double first_depth;
};

Eigen::VectorXd grid_from(double first, double last, double step) {
  const auto n = static_cast<Eigen::Index>(std::floor((last - first) / step + 1e-9)) + 1;
  return Eigen::VectorXd::LinSpaced(n, first, first + step * static_cast<double>(n - 1));
}

}  // namespace

SyntheticTruth sanrafael_synthetic_truth() {
  SyntheticTruth truth;
  truth.breakpoints = default_breakpoints();
  truth.sigma_Y = 0.04;
  truth.sigma = 0.1;
  truth.depth_unit = 5.0;

  Eigen::VectorXd mean_D(11);
  mean_D << -0.4, -0.5, -0.4, -0.3, -0.3, -0.2, -0.1, 0.0, 0.2, 0.4, 0.6;
  Eigen::VectorXd mean_S(11);
  mean_S << -0.2, -0.4, -0.5, -0.4, -0.3, -0.2, -0.2, 0.0, 0.1, 0.3, 0.5;
  truth.region_means = {mean_D, mean_S};
  const std::array<double, kRegionCount> spread{0.25, 0.6};

  const std::vector<SiteSpec> specs{
      {"SRD-1", Region::Desert, {{60, 2.91}, {225, 4.09}, {260, 3.96}, {395, 3.86}}, 13.72, 1979, 55.91, 30},
      {"SRD-2", Region::Desert, {{25, 2.91}, {215, 4.09}, {275, 3.96}, {365, 3.86}}, 15.12, 1976, 46.95, 25},
      {"SRD-3", Region::Desert, {{140, 4.09}, {200, 3.96}, {320, 3.86}}, 15.38, 1979, 45.19, 40},
      {"SRD-4", Region::Desert, {{145, 4.09}, {210, 3.96}, {320, 3.86}}, 15.51, 1979, 50.28, 40},
      {"SRD-7", Region::Desert, {{185, 4.09}, {260, 3.96}, {375, 3.86}}, 13.16, 1980, 45.16, 40},
      {"SRS-3", Region::Swell, {{250, 5.01}, {390, 4.35}, {400, 4.82}}, 10.76, 1979, 51.99, 15},
      {"SRS-4", Region::Swell, {{135, 2.91}, {375, 4.18}, {410, 3.86}, {510, 4.17}}, 11.82, 1979, 57.25, 25},
      {"SRS-5", Region::Swell, {{55, 2.91}, {350, 4.18}, {400, 3.86}, {480, 4.17}}, 11.82, 1979, 74.85, 25},
      {"WSR-1", Region::Swell,
       {{50, 4.10}, {105, 3.96}, {245, 3.43}, {320, 2.91}, {455, 4.18}, {515, 3.86}, {575, 4.17}}, 12.87, 1980,
       68.13, 60},
  };
  // SRD-2 is logged only to 200 m.
  const std::array<double, 9> last_depth{395, 200, 320, 320, 375, 400, 510, 480, 575};

  Rng scatter(20240601);
  for (std::size_t j = 0; j < specs.size(); ++j) {
    const auto& s = specs[j];
    SyntheticSite site;
    site.site_id = s.id;
    site.region = s.region;
    site.T0 = s.T0;
    site.log_year = s.year;
    site.q0 = s.q0_mw / 1000.0;
    site.layers = s.layers;
    site.depths = grid_from(s.first_depth, last_depth[j], 5.0);
    const auto r = region_index(s.region);
    site.history = truth.region_means[r] + spread[r] * scatter.normal_vector(11);
    truth.sites.push_back(std::move(site));
  }
  return truth;
}

}  // namespace gst
