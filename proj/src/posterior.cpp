#include "gst/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "gst/error.hpp"

namespace gst {
namespace {

std::vector<double> sorted_copy(const Eigen::VectorXd& samples) {
  std::vector<double> v(samples.data(), samples.data() + samples.size());
  std::sort(v.begin(), v.end());
  return v;
}

double sorted_quantile(const std::vector<double>& v, double p) {
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::InvalidArgument, "credible level must lie in (0, 1)");
}

std::string fixed(double x, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

std::string full(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

double quantile(const Eigen::VectorXd& samples, double p) {
  if (samples.size() == 0) throw Error(ErrorKind::InvalidArgument, "quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "quantile probability must lie in [0, 1]");
  return sorted_quantile(sorted_copy(samples), p);
}

Interval credible_interval(const Eigen::VectorXd& samples, double level) {
  check_level(level);
  if (samples.size() == 0) throw Error(ErrorKind::InvalidArgument, "credible interval of an empty sample");
  const auto v = sorted_copy(samples);
  const double tail = 0.5 * (1.0 - level);
  return {sorted_quantile(v, tail), sorted_quantile(v, 1.0 - tail)};
}

ParameterSummary summarize_samples(const std::string& name, const Eigen::VectorXd& samples,
                                   const std::vector<double>& levels) {
  if (samples.size() == 0) throw Error(ErrorKind::InvalidArgument, "no draws for '" + name + "'");
  ParameterSummary s;
  s.name = name;
  s.count = static_cast<std::size_t>(samples.size());
  s.mean = samples.mean();
  s.sd = samples.size() > 1
             ? std::sqrt((samples.array() - s.mean).square().sum() / static_cast<double>(samples.size() - 1))
             : 0.0;
  const auto v = sorted_copy(samples);
  for (double level : levels) {
    check_level(level);
    const double tail = 0.5 * (1.0 - level);
    s.intervals.push_back({sorted_quantile(v, tail), sorted_quantile(v, 1.0 - tail)});
  }
  return s;
}

const ParameterSummary& SummaryTable::at(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw Error(ErrorKind::InvalidArgument, "no parameter named '" + name + "'");
}

std::string SummaryTable::to_csv() const {
  std::ostringstream os;
  os << "parameter,mean,sd";
  for (double level : levels) {
    const auto pct = fixed(100.0 * level, 0);
    os << ",lower" << pct << ",upper" << pct;
  }
  os << ",n\n";
  for (const auto& r : rows) {
    os << r.name << ',' << full(r.mean) << ',' << full(r.sd);
    for (const auto& ci : r.intervals) os << ',' << full(ci.lower) << ',' << full(ci.upper);
    os << ',' << r.count << '\n';
  }
  return os.str();
}

std::string SummaryTable::to_json() const {
  nlohmann::ordered_json out;
  out["levels"] = levels;
  auto& params = out["parameters"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["name"] = r.name;
    row["mean"] = r.mean;
    row["sd"] = r.sd;
    auto& cis = row["intervals"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.intervals.size(); ++i) {
      cis.push_back({{"level", levels[i]}, {"lower", r.intervals[i].lower}, {"upper", r.intervals[i].upper}});
    }
    row["n"] = r.count;
    params.push_back(std::move(row));
  }
  return out.dump(2) + "\n";
}

SummaryTable summarize(const Chain& chain, const std::vector<double>& levels) {
  if (chain.size() == 0) throw Error(ErrorKind::InvalidArgument, "chain holds no stored draws");
  if (chain.size() < kMinimumSummaryDraws) {
    throw Error(ErrorKind::InvalidArgument, "summaries need at least 100 stored draws, chain has " +
                                                std::to_string(chain.size()));
  }
  SummaryTable table;
  table.levels = levels;
  auto add = [&](const std::string& name, const Eigen::VectorXd& x) {
    table.rows.push_back(summarize_samples(name, x, levels));
  };
  for (const auto& s : chain.sites) {
    for (Eigen::Index k = 0; k < s.T_h.cols(); ++k) add(s.site_id + ".T_h[" + std::to_string(k) + "]", s.T_h.col(k));
    add(s.site_id + ".q0", s.q0);
    add(s.site_id + ".sigma2_Y", s.sigma2_Y);
    add(s.site_id + ".sigma2", s.sigma2);
  }
  for (const auto& r : chain.regions) {
    const std::string prefix = r.region == Region::Desert ? "D" : "S";
    for (Eigen::Index k = 0; k < r.mu.cols(); ++k) add(prefix + ".mu[" + std::to_string(k) + "]", r.mu.col(k));
    add(prefix + ".gamma2", r.gamma2);
    add(prefix + ".nu", r.nu);
    add(prefix + ".tau2", r.tau2);
  }
  return table;
}

std::string format_flow_mw(const Eigen::VectorXd& q0_draws, double level) {
  const auto s = summarize_samples("q0", q0_draws * 1000.0, {level});
  return fixed(s.mean, 2) + " (" + fixed(s.intervals[0].lower, 2) + ", " + fixed(s.intervals[0].upper, 2) + ")";
}

double silverman_bandwidth(const Eigen::VectorXd& samples) {
  const auto n = samples.size();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "density estimation needs at least 2 samples");
  const double mean = samples.mean();
  const double sd = std::sqrt((samples.array() - mean).square().sum() / static_cast<double>(n - 1));
  const auto v = sorted_copy(samples);
  const double iqr = sorted_quantile(v, 0.75) - sorted_quantile(v, 0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0.0)) throw Error(ErrorKind::InvalidArgument, "density estimation of constant samples");
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

Eigen::VectorXd kde_density(const Eigen::VectorXd& samples, const Eigen::VectorXd& grid, double bandwidth) {
  if (samples.size() < 2) throw Error(ErrorKind::InvalidArgument, "density estimation needs at least 2 samples");
  const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  Eigen::VectorXd out(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    out[g] = norm * ((samples.array() - grid[g]) / h).square().unaryExpr([](double u) { return std::exp(-0.5 * u); }).sum();
  }
  return out;
}

Eigen::VectorXd density_grid(const Eigen::VectorXd& samples, std::size_t points, double pad) {
  if (points < 2) throw Error(ErrorKind::InvalidArgument, "density grid needs at least 2 points");
  const double h = silverman_bandwidth(samples);
  return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(points), samples.minCoeff() - pad * h,
                                    samples.maxCoeff() + pad * h);
}

Eigen::VectorXd history_change(const Eigen::MatrixXd& draws, const std::vector<double>& breakpoints,
                               double baseline) {
  if (breakpoints.empty() || static_cast<Eigen::Index>(breakpoints.size()) != draws.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "history draws do not match the time grid");
  }
  if (baseline < breakpoints.front()) {
    throw Error(ErrorKind::InvalidArgument, "baseline year " + fixed(baseline, 0) + " precedes the time grid");
  }
  const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), baseline);
  const auto k = static_cast<Eigen::Index>(std::distance(breakpoints.begin(), it)) - 1;
  return draws.col(draws.cols() - 1) - draws.col(k);
}

std::vector<ChangeSummary> temperature_change(const Chain& chain, const std::vector<double>& baselines) {
  std::vector<ChangeSummary> out;
  auto add = [&](const std::string& label, const Eigen::MatrixXd& draws) {
    for (double b : baselines) {
      out.push_back({label, b, summarize_samples(label + ".change_" + fixed(b, 0), history_change(draws, chain.breakpoints, b))});
    }
  };
  for (const auto& s : chain.sites) add(s.site_id, s.T_h);
  for (const auto& r : chain.regions) add(r.region == Region::Desert ? "D" : "S", r.mu);
  return out;
}

ResidualSet residuals(const SiteDraws& draws, const BoreholeProfile& profile) {
  if (draws.T_r_mean.size() != static_cast<Eigen::Index>(profile.size())) {
    throw Error(ErrorKind::DimensionMismatch, "residuals: chain and profile '" + profile.site_id + "' differ in length");
  }
  const Eigen::VectorXd R = thermal_resistance(profile);
  ResidualSet out;
  out.site_id = profile.site_id;
  out.point = profile.temps - draws.T_r_mean - (profile.T0 + draws.q0.mean() * R.array()).matrix();
  if (draws.T_r.rows() > 0) {
    out.ensemble.resize(draws.T_r.rows(), draws.T_r.cols());
    for (Eigen::Index m = 0; m < draws.T_r.rows(); ++m) {
      out.ensemble.row(m) =
          (profile.temps - draws.T_r.row(m).transpose() - (profile.T0 + draws.q0[m] * R.array()).matrix()).transpose();
    }
  }
  const bool constant = (out.point.array() == out.point[0]).all();
  out.phi_hat = out.point.size() >= 10 && !constant ? ar1_fit(out.point) : 0.0;
  return out;
}

double ar1_fit(const Eigen::VectorXd& residual) {
  if (residual.size() < 10) throw Error(ErrorKind::InvalidArgument, "AR(1) fit needs at least 10 residuals");
  const Eigen::ArrayXd c = residual.array() - residual.mean();
  const double denom = c.square().sum();
  if (!(denom > 0.0)) throw Error(ErrorKind::InvalidArgument, "AR(1) fit of constant residuals");
  const auto n = c.size();
  return (c.head(n - 1) * c.tail(n - 1)).sum() / denom;
}

double mc_standard_error(const Eigen::VectorXd& samples, std::size_t batches) {
  const auto n = static_cast<std::size_t>(samples.size());
  if (batches < 2 || n < 2 * batches) throw Error(ErrorKind::InvalidArgument, "too few draws for batch means");
  const std::size_t len = n / batches;
  Eigen::VectorXd means(static_cast<Eigen::Index>(batches));
  for (std::size_t b = 0; b < batches; ++b) {
    means[static_cast<Eigen::Index>(b)] =
        samples.segment(static_cast<Eigen::Index>(b * len), static_cast<Eigen::Index>(len)).mean();
  }
  const double m = means.mean();
  const double var = (means.array() - m).square().sum() / static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

Eigen::MatrixXd extract_draws(const Eigen::MatrixXd& draws, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), draws.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= static_cast<std::size_t>(draws.rows())) {
      throw Error(ErrorKind::InvalidArgument, "draw index " + std::to_string(rows[i]) + " out of range");
    }
    out.row(static_cast<Eigen::Index>(i)) = draws.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace gst
