#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gst {

/// Seconds per Julian year; used for every year-to-second conversion of the
/// diffusion time scale.
inline constexpr double kSecondsPerYear = 3.15576e7;

/// Default thermal diffusivity of rock [m^2/s].
inline constexpr double kDefaultDiffusivity = 1e-6;

enum class Region { Desert, Swell };

inline constexpr std::size_t kRegionCount = 2;

inline std::size_t region_index(Region r) { return r == Region::Desert ? 0 : 1; }
std::string to_string(Region r);
/// Accepts "desert"/"D" and "swell"/"S" (case-insensitive).
Region parse_region(const std::string& text);

/// One sedimentary formation: conductivity down to `bottom_depth` [m].
/// The deepest layer may have an infinite bottom.
struct Layer {
  double bottom_depth = 0.0;
  double conductivity = 0.0;  // W/(m K)
};

struct BoreholeProfile {
  std::string site_id;
  Region region = Region::Desert;
  Eigen::VectorXd depths;  // m, strictly increasing, > 0
  Eigen::VectorXd temps;   // degC
  std::vector<Layer> layers;
  double T0 = 0.0;         // fixed surface temperature intercept, degC
  double log_year = 0.0;   // calendar year the borehole was logged

  std::size_t size() const { return static_cast<std::size_t>(depths.size()); }

  /// Throws gst::Error when an invariant is violated.
  void validate() const;
};

/// Conductivity of the layer containing `depth`; a depth exactly on a
/// boundary belongs to the shallower layer.
double conductivity_at(const std::vector<Layer>& layers, double depth);

/// Step-boundary time grid: breakpoints t_1..t_K and terminal year t_{K+1}.
class TimeGrid {
 public:
  TimeGrid(std::vector<double> breakpoints, double terminal_year);

  std::size_t size() const { return breakpoints_.size(); }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  double terminal_year() const { return terminal_; }
  /// Index j with t_j <= year < t_{j+1}; throws when outside [t_1, t_{K+1}).
  std::size_t interval_of(double year) const;

 private:
  std::vector<double> breakpoints_;
  double terminal_;
};

struct ForwardOperator {
  Eigen::MatrixXd A;  // N x K, dimensionless
  double kappa = kDefaultDiffusivity;
  Eigen::VectorXd depths;
  TimeGrid time_grid;
};

double erfc(double x);

/// Cumulative thermal resistance R(z_i) [m^2 K / W] at each profile depth.
Eigen::VectorXd thermal_resistance(const BoreholeProfile& profile);

ForwardOperator build_forward_operator(const Eigen::VectorXd& depths, const TimeGrid& grid,
                                       double kappa = kDefaultDiffusivity);

/// Reduced temperatures at logging time for a step history: A * history.
Eigen::VectorXd forward_solve(const ForwardOperator& op, const Eigen::VectorXd& history);

}  // namespace gst
