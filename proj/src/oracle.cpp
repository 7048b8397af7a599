#include "gst/oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/inverse_gamma.hpp>

#include "gst/error.hpp"

namespace gst {
namespace {

constexpr std::size_t kMaxLatent = 600;
constexpr std::size_t kMaxFree = 3;

std::string tag(std::size_t region) { return region == 0 ? "D" : "S"; }

std::string slot_name(const OracleProblem& p, const VarianceSlot& s) {
  switch (s.kind) {
    case VarianceComponent::Measurement: return p.profiles.at(s.index).site_id + ".sigma2_Y";
    case VarianceComponent::Model: return p.profiles.at(s.index).site_id + ".sigma2";
    case VarianceComponent::History: return tag(s.index) + ".gamma2";
    case VarianceComponent::Flow: return tag(s.index) + ".tau2";
  }
  return {};
}

const InverseGamma& slot_prior(const HyperParameters& h, const VarianceSlot& s) {
  switch (s.kind) {
    case VarianceComponent::Measurement: return h.measurement;
    case VarianceComponent::Model: return h.model;
    case VarianceComponent::History: return h.history;
    case VarianceComponent::Flow: return h.flow;
  }
  return h.measurement;
}

double log_ig_density(const InverseGamma& ig, double v) {
  return ig.shape * std::log(ig.scale) - std::lgamma(ig.shape) - (ig.shape + 1.0) * std::log(v) - ig.scale / v;
}

/// Lower Cholesky factor of the exponential-decay correlation on the grid.
Eigen::MatrixXd correlation_root(const Eigen::VectorXd& z, double phi, double unit) {
  const auto n = z.size();
  if (phi == 0.0) return Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd C(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) C(i, j) = std::pow(phi, std::abs(z[i] - z[j]) / unit);
  }
  return Eigen::LLT<Eigen::MatrixXd>(C).matrixL();
}

/// Cumulative sum of layer thickness over conductivity, evaluated independently.
Eigen::VectorXd resistance(const BoreholeProfile& p) {
  Eigen::VectorXd R(p.depths.size());
  for (Eigen::Index i = 0; i < p.depths.size(); ++i) {
    double r = 0.0;
    double top = 0.0;
    for (const auto& l : p.layers) {
      const double bottom = std::min(l.bottom_depth, p.depths[i]);
      if (bottom > top) r += (bottom - top) / l.conductivity;
      top = l.bottom_depth;
      if (top >= p.depths[i]) break;
    }
    R[i] = r;
  }
  return R;
}

}  // namespace

double VarianceValues::get(const VarianceSlot& s) const {
  switch (s.kind) {
    case VarianceComponent::Measurement: return sigma2_Y.at(s.index);
    case VarianceComponent::Model: return sigma2.at(s.index);
    case VarianceComponent::History: return gamma2.at(s.index);
    case VarianceComponent::Flow: return tau2.at(s.index);
  }
  return 0.0;
}

void VarianceValues::set(const VarianceSlot& s, double value) {
  switch (s.kind) {
    case VarianceComponent::Measurement: sigma2_Y.at(s.index) = value; break;
    case VarianceComponent::Model: sigma2.at(s.index) = value; break;
    case VarianceComponent::History: gamma2.at(s.index) = value; break;
    case VarianceComponent::Flow: tau2.at(s.index) = value; break;
  }
}

std::size_t OracleResult::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw Error(ErrorKind::InvalidArgument, "oracle has no quantity named '" + name + "'");
}

GaussianPosterior linear_gaussian_posterior(const OracleProblem& problem, const VarianceValues& v) {
  const auto& profiles = problem.profiles;
  const auto& h = problem.hyper;
  if (profiles.empty()) throw Error(ErrorKind::InvalidArgument, "oracle needs at least one profile");
  if (problem.single_site && profiles.size() != 1) {
    throw Error(ErrorKind::InvalidArgument, "single-site oracle takes exactly one profile");
  }
  if (v.sigma2_Y.size() != profiles.size() || v.sigma2.size() != profiles.size()) {
    throw Error(ErrorKind::DimensionMismatch, "oracle variance values do not match the number of sites");
  }
  const auto K = static_cast<Eigen::Index>(problem.setup.breakpoints.size());
  const bool single = problem.single_site.has_value();

  // Latent layout: [region block][site 0: T_h, T_r, q0][site 1: ...]
  const Eigen::Index region_dim = single ? 0 : 2 * K + 2;
  Eigen::Index latent = region_dim;
  Eigen::Index n_data = 0;
  for (const auto& p : profiles) {
    latent += K + p.depths.size() + 1;
    n_data += p.depths.size();
  }
  if (static_cast<std::size_t>(latent) > kMaxLatent) {
    throw Error(ErrorKind::InvalidArgument, "oracle problem too large (" + std::to_string(latent) + " unknowns)");
  }
  // Standard-normal sources: region (3K + 3), per site (K + N + 1).
  const Eigen::Index region_src = single ? 0 : 3 * K + 3;
  const Eigen::Index n_src = region_src + (latent - region_dim);

  Eigen::VectorXd m = Eigen::VectorXd::Zero(latent);
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(latent, n_src);
  GaussianPosterior out;
  out.names.reserve(static_cast<std::size_t>(latent));

  const Eigen::VectorXd mu0 = h.history_mean(static_cast<std::size_t>(K));
  if (!single) {
    const double s0 = std::sqrt(h.sigma2_0);
    const std::array<double, 2> sr{std::sqrt(h.sigma2_D), std::sqrt(h.sigma2_S)};
    for (std::size_t r = 0; r < 2; ++r) {
      for (Eigen::Index k = 0; k < K; ++k) {
        const Eigen::Index row = static_cast<Eigen::Index>(r) * K + k;
        m[row] = mu0[k];
        F(row, k) = s0;
        F(row, (1 + static_cast<Eigen::Index>(r)) * K + k) = sr[r];
        out.names.push_back(tag(r) + ".mu[" + std::to_string(k) + "]");
      }
    }
    const double e0 = std::sqrt(h.eta2_0);
    const std::array<double, 2> er{std::sqrt(h.eta2_D), std::sqrt(h.eta2_S)};
    for (std::size_t r = 0; r < 2; ++r) {
      const Eigen::Index row = 2 * K + static_cast<Eigen::Index>(r);
      m[row] = h.nu0;
      F(row, 3 * K) = e0;
      F(row, 3 * K + 1 + static_cast<Eigen::Index>(r)) = er[r];
      out.names.push_back(tag(r) + ".nu");
    }
  }

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n_data, latent);
  Eigen::VectorXd offset(n_data);
  Eigen::VectorXd Y(n_data);
  Eigen::VectorXd noise_var(n_data);

  Eigen::Index row = region_dim;
  Eigen::Index src = region_src;
  Eigen::Index obs = 0;
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    const auto& p = profiles[j];
    const auto N = p.depths.size();
    const TimeGrid grid(problem.setup.breakpoints, p.log_year);
    const Eigen::MatrixXd A = build_forward_operator(p.depths, grid, problem.setup.kappa).A;
    const Eigen::VectorXd R = resistance(p);
    const Eigen::MatrixXd Lc = correlation_root(p.depths, h.phi, problem.setup.depth_unit);
    const std::size_t r = region_index(p.region);
    const Eigen::Index th = row;
    const Eigen::Index tr = row + K;
    const Eigen::Index q = row + K + N;

    // T_h
    if (single) {
      const auto& prior = *problem.single_site;
      m.segment(th, K) = prior.mu;
      F.block(th, src, K, K) = Eigen::LLT<Eigen::MatrixXd>(prior.Gamma).matrixL();
    } else {
      m.segment(th, K) = m.segment(static_cast<Eigen::Index>(r) * K, K);
      F.middleRows(th, K) = F.middleRows(static_cast<Eigen::Index>(r) * K, K);
      F.block(th, src, K, K).diagonal().setConstant(std::sqrt(v.gamma2[r]));
    }
    // T_r = A T_h + sigma Lc delta
    m.segment(tr, N) = A * m.segment(th, K);
    F.middleRows(tr, N) = A * F.middleRows(th, K);
    F.block(tr, src + K, N, N) += std::sqrt(v.sigma2[j]) * Lc;
    // q0
    if (single) {
      m[q] = problem.single_site->q0_mean;
      F(q, src + K + N) = std::sqrt(problem.single_site->q0_var);
    } else {
      m[q] = m[2 * K + static_cast<Eigen::Index>(r)];
      F.row(q) = F.row(2 * K + static_cast<Eigen::Index>(r));
      F(q, src + K + N) = std::sqrt(v.tau2[r]);
    }
    // Y = T_r + T0 + q0 R + e
    M.block(obs, tr, N, N).setIdentity();
    M.block(obs, q, N, 1) = R;
    offset.segment(obs, N).setConstant(p.T0);
    Y.segment(obs, N) = p.temps;
    noise_var.segment(obs, N).setConstant(v.sigma2_Y[j]);

    for (Eigen::Index k = 0; k < K; ++k) out.names.push_back(p.site_id + ".T_h[" + std::to_string(k) + "]");
    for (Eigen::Index i = 0; i < N; ++i) out.names.push_back(p.site_id + ".T_r[" + std::to_string(i) + "]");
    out.names.push_back(p.site_id + ".q0");
    row += K + N + 1;
    src += K + N + 1;
    obs += N;
  }

  const Eigen::MatrixXd P = F * F.transpose();
  const Eigen::MatrixXd PMt = P * M.transpose();
  Eigen::MatrixXd S = M * PMt;
  S.diagonal() += noise_var;
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::Numerical, "oracle data covariance is not positive definite");
  const Eigen::VectorXd resid = Y - offset - M * m;
  const Eigen::VectorXd alpha = llt.solve(resid);
  out.mean = m + PMt * alpha;
  out.cov = P - PMt * llt.solve(PMt.transpose());
  const Eigen::MatrixXd L = llt.matrixL();
  out.log_evidence = -0.5 * resid.dot(alpha) - L.diagonal().array().log().sum() -
                     0.5 * static_cast<double>(n_data) * std::log(2.0 * std::numbers::pi);
  return out;
}

OracleResult oracle_posterior_tiny(const OracleProblem& problem) {
  const auto& free = problem.free;
  if (free.size() > kMaxFree) {
    throw Error(ErrorKind::InvalidArgument, "oracle integrates at most 3 variance components, got " +
                                                std::to_string(free.size()));
  }
  if (problem.single_site) {
    for (const auto& s : free) {
      if (s.kind == VarianceComponent::History || s.kind == VarianceComponent::Flow) {
        throw Error(ErrorKind::InvalidArgument, "single-site model has no region variance components");
      }
    }
  }
  const std::size_t d = free.size();
  const std::size_t pts = problem.grid_points ? problem.grid_points : (d <= 1 ? 241 : d == 2 ? 81 : 31);

  // Log-spaced grids between prior tail quantiles.
  std::vector<Eigen::VectorXd> grids;
  std::vector<double> steps;
  for (const auto& s : free) {
    const auto& ig = slot_prior(problem.hyper, s);
    boost::math::inverse_gamma_distribution<double> dist(ig.shape, ig.scale);
    const double lo = std::log(boost::math::quantile(dist, problem.tail));
    const double hi = std::log(boost::math::quantile(dist, 1.0 - problem.tail));
    grids.push_back(Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(pts), lo, hi));
    steps.push_back((hi - lo) / static_cast<double>(pts - 1));
  }

  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= pts;

  std::vector<GaussianPosterior> posts;
  std::vector<double> logw;
  std::vector<std::vector<double>> values;
  posts.reserve(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    VarianceValues v = problem.fixed;
    double lw = 0.0;
    std::vector<double> vals;
    std::size_t rem = flat;
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t idx = rem % pts;
      rem /= pts;
      const double u = grids[i][static_cast<Eigen::Index>(idx)];
      const double x = std::exp(u);
      v.set(free[i], x);
      vals.push_back(x);
      // trapezoid end weights; Jacobian of the log transform is x
      const double trap = (idx == 0 || idx == pts - 1) ? 0.5 : 1.0;
      lw += std::log(trap * steps[i]) + u + log_ig_density(slot_prior(problem.hyper, free[i]), x);
    }
    auto post = linear_gaussian_posterior(problem, v);
    lw += post.log_evidence;
    logw.push_back(lw);
    values.push_back(std::move(vals));
    posts.push_back(std::move(post));
  }

  double mx = -std::numeric_limits<double>::infinity();
  for (double w : logw) mx = std::max(mx, w);
  double norm = 0.0;
  for (double& w : logw) norm += (w = std::exp(w - mx));

  OracleResult out;
  out.names = posts.front().names;
  const auto n = static_cast<Eigen::Index>(out.names.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd second = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd vmean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  Eigen::VectorXd vsecond = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t g = 0; g < posts.size(); ++g) {
    const double w = logw[g] / norm;
    mean += w * posts[g].mean;
    second += w * (posts[g].cov.diagonal().array() + posts[g].mean.array().square()).matrix();
    for (std::size_t i = 0; i < d; ++i) {
      vmean[static_cast<Eigen::Index>(i)] += w * values[g][i];
      vsecond[static_cast<Eigen::Index>(i)] += w * values[g][i] * values[g][i];
    }
  }
  out.mean.resize(n + static_cast<Eigen::Index>(d));
  out.var.resize(n + static_cast<Eigen::Index>(d));
  out.mean.head(n) = mean;
  out.var.head(n) = (second.array() - mean.array().square()).matrix();
  for (std::size_t i = 0; i < d; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out.names.push_back(slot_name(problem, free[i]));
    out.mean[n + ii] = vmean[ii];
    out.var[n + ii] = vsecond[ii] - vmean[ii] * vmean[ii];
  }
  return out;
}

}  // namespace gst
