#include "gst/forward_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "gst/error.hpp"

namespace gst {

std::string to_string(Region r) { return r == Region::Desert ? "desert" : "swell"; }

Region parse_region(const std::string& text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "desert" || lower == "d") return Region::Desert;
  if (lower == "swell" || lower == "s") return Region::Swell;
  throw Error(ErrorKind::InvalidArgument, "unknown region '" + text + "'");
}

void BoreholeProfile::validate() const {
  const auto fail = [this](ErrorKind kind, const std::string& what) {
    throw Error(kind, "borehole '" + site_id + "': " + what);
  };
  if (depths.size() != temps.size()) {
    fail(ErrorKind::DimensionMismatch, "depth and temperature vectors differ in length");
  }
  if (depths.size() < 2) fail(ErrorKind::InvalidArgument, "need at least 2 measurements");
  for (Eigen::Index i = 0; i < depths.size(); ++i) {
    if (!std::isfinite(depths[i]) || !std::isfinite(temps[i])) {
      fail(ErrorKind::InvalidArgument, "non-finite value at row " + std::to_string(i + 1));
    }
    if (depths[i] <= 0.0) {
      fail(ErrorKind::InvalidArgument, "depth must be > 0 at row " + std::to_string(i + 1));
    }
    if (i > 0 && depths[i] <= depths[i - 1]) {
      fail(ErrorKind::InvalidArgument,
           "depths not strictly increasing at row " + std::to_string(i + 1));
    }
  }
  if (layers.empty()) fail(ErrorKind::Layering, "no conductivity layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!(layers[l].conductivity > 0.0) || !std::isfinite(layers[l].conductivity)) {
      fail(ErrorKind::Layering, "conductivity must be positive in layer " + std::to_string(l + 1));
    }
    if (!(layers[l].bottom_depth > 0.0) || (l > 0 && layers[l].bottom_depth <= layers[l - 1].bottom_depth)) {
      fail(ErrorKind::Layering, "layer bottoms must be positive and strictly increasing");
    }
  }
  if (depths[depths.size() - 1] > layers.back().bottom_depth) {
    fail(ErrorKind::Layering, "deepest measurement lies below the last layer");
  }
}

double conductivity_at(const std::vector<Layer>& layers, double depth) {
  for (const auto& layer : layers) {
    if (depth <= layer.bottom_depth) return layer.conductivity;
  }
  std::ostringstream msg;
  msg << "depth " << depth << " m lies below the last layer";
  throw Error(ErrorKind::Layering, msg.str());
}

TimeGrid::TimeGrid(std::vector<double> breakpoints, double terminal_year)
    : breakpoints_(std::move(breakpoints)), terminal_(terminal_year) {
  if (breakpoints_.empty()) throw Error(ErrorKind::InvalidGrid, "time grid needs K >= 1 breakpoints");
  for (std::size_t j = 0; j < breakpoints_.size(); ++j) {
    if (!std::isfinite(breakpoints_[j])) throw Error(ErrorKind::InvalidGrid, "non-finite breakpoint");
    if (j > 0 && breakpoints_[j] <= breakpoints_[j - 1]) {
      throw Error(ErrorKind::InvalidGrid, "breakpoints must be strictly increasing");
    }
  }
  if (!(terminal_ > breakpoints_.back())) {
    std::ostringstream msg;
    msg << "terminal year " << terminal_ << " must follow the last breakpoint " << breakpoints_.back();
    throw Error(ErrorKind::InvalidGrid, msg.str());
  }
}

std::size_t TimeGrid::interval_of(double year) const {
  if (year < breakpoints_.front() || year >= terminal_) {
    std::ostringstream msg;
    msg << "year " << year << " outside time grid [" << breakpoints_.front() << ", " << terminal_ << ")";
    throw Error(ErrorKind::InvalidGrid, msg.str());
  }
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), year);
  return static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
}

double erfc(double x) { return std::erfc(x); }

Eigen::VectorXd thermal_resistance(const BoreholeProfile& profile) {
  const auto n = profile.depths.size();
  Eigen::VectorXd R(n);
  double previous = 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = profile.depths[i];
    sum += (z - previous) / conductivity_at(profile.layers, z);
    R[i] = sum;
    previous = z;
  }
  return R;
}

ForwardOperator build_forward_operator(const Eigen::VectorXd& depths, const TimeGrid& grid,
                                       double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw Error(ErrorKind::InvalidArgument, "diffusivity must be positive");
  }
  for (Eigen::Index i = 0; i < depths.size(); ++i) {
    if (!(depths[i] > 0.0) || (i > 0 && depths[i] <= depths[i - 1])) {
      throw Error(ErrorKind::InvalidArgument, "depths must be positive and strictly increasing");
    }
  }
  const auto& t = grid.breakpoints();
  const auto K = static_cast<Eigen::Index>(t.size());
  const double t_end = grid.terminal_year();

  // Step response for a boundary change at year t_j, observed at t_{K+1}.
  const auto response = [&](double z, double onset_year) {
    const double seconds = (t_end - onset_year) * kSecondsPerYear;
    return gst::erfc(z / std::sqrt(4.0 * kappa * seconds));
  };

  ForwardOperator op{Eigen::MatrixXd(depths.size(), K), kappa, depths, grid};
  for (Eigen::Index i = 0; i < depths.size(); ++i) {
    double later = response(depths[i], t[static_cast<std::size_t>(K - 1)]);
    op.A(i, K - 1) = later;
    for (Eigen::Index j = K - 2; j >= 0; --j) {
      const double earlier = response(depths[i], t[static_cast<std::size_t>(j)]);
      op.A(i, j) = earlier - later;
      later = earlier;
    }
  }
  return op;
}

Eigen::VectorXd forward_solve(const ForwardOperator& op, const Eigen::VectorXd& history) {
  if (history.size() != op.A.cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                "history length " + std::to_string(history.size()) + " does not match K = " +
                    std::to_string(op.A.cols()));
  }
  return op.A * history;
}

}  // namespace gst
