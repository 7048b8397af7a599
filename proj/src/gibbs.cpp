#include "gst/gibbs.hpp"

#include <cmath>
#include <sstream>

#include "gst/error.hpp"
#include "gst/linalg.hpp"
#include "gst/preprocessing.hpp"

namespace gst {
namespace {

constexpr std::size_t kDesert = 0;
constexpr std::size_t kSwell = 1;

double prior_mean_or_scale(const InverseGamma& ig) {
  return ig.shape > 1.0 ? ig.mean() : ig.scale;
}

/// Posterior of a pair (x_D, x_S) with prior N(m0 (1,1), Sigma0) and
/// independent Gaussian evidence of precision `data_prec` and
/// precision-weighted sums `data_lin`.
struct PairPosterior {
  Eigen::Matrix2d cov;
  Eigen::Matrix2d prior_prec;
};

PairPosterior pair_posterior(double var_D, double var_S, double shared, const Eigen::Vector2d& data_prec) {
  Eigen::Matrix2d prior_cov;
  prior_cov << var_D + shared, shared, shared, var_S + shared;
  const double det = prior_cov.determinant();
  if (!(det > 0.0)) throw Error(ErrorKind::Numerical, "region prior covariance is singular");
  Eigen::Matrix2d prior_prec;
  prior_prec << prior_cov(1, 1), -shared, -shared, prior_cov(0, 0);
  prior_prec /= det;
  Eigen::Matrix2d prec = prior_prec;
  prec(0, 0) += data_prec[0];
  prec(1, 1) += data_prec[1];
  return {prec.inverse(), prior_prec};
}

Eigen::Matrix2d lower_factor(const Eigen::Matrix2d& cov) {
  Eigen::Matrix2d L = Eigen::Matrix2d::Zero();
  L(0, 0) = std::sqrt(cov(0, 0));
  L(1, 0) = cov(1, 0) / L(0, 0);
  L(1, 1) = std::sqrt(std::max(cov(1, 1) - L(1, 0) * L(1, 0), 0.0));
  return L;
}

std::array<std::size_t, kRegionCount> region_counts(const std::vector<SiteModel>& sites) {
  std::array<std::size_t, kRegionCount> counts{0, 0};
  for (const auto& s : sites) ++counts[region_index(s.region())];
  return counts;
}

BlockInputs block_inputs(const ChainState& state, std::size_t j, const SiteModel& site) {
  const auto& s = state.sites[j];
  const auto& r = state.regions[region_index(site.region())];
  return {r.mu, r.gamma2, s.q0, s.sigma2_Y, s.sigma2};
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::SingleSite ? "single" : "multi"; }

Eigen::MatrixXd ar1_correlation(const Eigen::VectorXd& depths, const CorrelationSpec& spec) {
  if (!(spec.phi >= 0.0 && spec.phi < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "phi must lie in [0, 1)");
  }
  if (!(spec.depth_unit > 0.0)) throw Error(ErrorKind::InvalidArgument, "depth unit must be > 0");
  const auto n = depths.size();
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
  if (spec.phi == 0.0) return C;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double lag = std::abs(depths[i] - depths[j]) / spec.depth_unit;
      C(i, j) = C(j, i) = std::pow(spec.phi, lag);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "AR(1) correlation with phi=" << spec.phi << " is not positive definite on the " << n
        << "-point depth grid (repeated depths?)";
    throw Error(ErrorKind::Numerical, msg.str());
  }
  return C;
}

SiteModel::SiteModel(BoreholeProfile profile, ForwardOperator op, const CorrelationSpec& correlation,
                     const std::optional<Eigen::MatrixXd>& history_cov)
    : profile_(std::move(profile)), op_(std::move(op)), correlation_(correlation) {
  profile_.validate();
  if (op_.A.rows() != static_cast<Eigen::Index>(profile_.size())) {
    throw Error(ErrorKind::DimensionMismatch, "forward operator rows do not match profile '" +
                                                  profile_.site_id + "'");
  }
  R_ = thermal_resistance(profile_);
  RtR_ = R_.squaredNorm();

  Eigen::MatrixXd B = op_.A;
  if (history_cov) {
    if (history_cov->rows() != k() || history_cov->cols() != k()) {
      throw Error(ErrorKind::DimensionMismatch, "history covariance must be K x K");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(*history_cov);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorKind::Numerical, "history prior covariance is not positive definite");
    }
    G_ = llt.matrixL();
    has_history_factor_ = true;
    B = B * G_;
  }

  const Eigen::MatrixXd C = ar1_correlation(profile_.depths, correlation_);
  correlated_ = correlation_.phi > 0.0;
  if (correlated_) {
    L_ = Eigen::LLT<Eigen::MatrixXd>(C).matrixL();
    B = L_.triangularView<Eigen::Lower>().solve(B);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
  U_ = svd.matrixU();
  V_ = svd.matrixV();
  s_ = svd.singularValues();
  lambda_ = Eigen::VectorXd::Zero(n());
  lambda_.head(s_.size()) = s_.array().square().matrix();
  if (correlated_) H_ = L_.transpose().triangularView<Eigen::Upper>().solve(U_);
}

Eigen::VectorXd SiteModel::whiten(const Eigen::VectorXd& x) const {
  if (!correlated_) return x;
  return L_.triangularView<Eigen::Lower>().solve(x);
}

GaussianMoments reduced_conditional(const SiteModel& site, const BlockInputs& in) {
  const auto& p = site.profile();
  const Eigen::VectorXd y = (p.temps.array() - p.T0 - in.q0 * site.resistance().array()).matrix();
  const Eigen::VectorXd m = site.A() * in.history_mean;
  const Eigen::ArrayXd w = (in.sigma2 + in.history_scale * site.spectrum().array()).inverse();

  GaussianMoments out;
  if (!site.correlated()) {
    const auto& U = site.U();
    const Eigen::ArrayXd prec = w + 1.0 / in.sigma2_Y;
    const Eigen::VectorXd c = (U.transpose() * y).array() / in.sigma2_Y + w * (U.transpose() * m).array();
    out.mean = U * (c.array() / prec).matrix();
    out.cov = U * prec.inverse().matrix().asDiagonal() * U.transpose();
    return out;
  }
  const auto& H = site.whitened_basis();
  const Eigen::MatrixXd sigma_inv = H * w.matrix().asDiagonal() * H.transpose();
  Eigen::MatrixXd prec = sigma_inv;
  prec.diagonal().array() += 1.0 / in.sigma2_Y;
  const Eigen::VectorXd d = y / in.sigma2_Y + sigma_inv * m;
  const Eigen::MatrixXd L = cholesky_with_jitter(prec, "reduced-temperature precision");
  out.cov = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(site.n(), site.n()));
  out.cov = out.cov.transpose() * out.cov;
  out.mean = out.cov * d;
  return out;
}

GaussianMoments history_conditional(const SiteModel& site, const BlockInputs& in, const Eigen::VectorXd& T_r) {
  const auto r = site.singular_values().size();
  const double g = in.history_scale;
  const Eigen::VectorXd e = site.whiten(T_r - site.A() * in.history_mean);
  const Eigen::ArrayXd s = site.singular_values().array();
  const Eigen::ArrayXd denom = in.sigma2 + g * s.square();

  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(site.k());
  coeff.head(r) = (g * s / denom * (site.U().leftCols(r).transpose() * e).array()).matrix();
  Eigen::VectorXd var = Eigen::VectorXd::Constant(site.k(), g);
  var.head(r) = (g * in.sigma2 / denom).matrix();

  GaussianMoments out;
  out.mean = site.V() * coeff;
  out.cov = site.V() * var.asDiagonal() * site.V().transpose();
  if (site.has_history_factor()) {
    out.mean = site.history_factor() * out.mean;
    out.cov = site.history_factor() * out.cov * site.history_factor().transpose();
  }
  out.mean += in.history_mean;
  return out;
}

BlockDraw sample_block(const SiteModel& site, const BlockInputs& in, Rng& rng) {
  const auto& p = site.profile();
  const auto& U = site.U();
  const Eigen::VectorXd y = (p.temps.array() - p.T0 - in.q0 * site.resistance().array()).matrix();
  const Eigen::VectorXd m = site.A() * in.history_mean;
  const Eigen::ArrayXd w = (in.sigma2 + in.history_scale * site.spectrum().array()).inverse();

  BlockDraw out;
  const Eigen::VectorXd z_r = rng.normal_vector(site.n());
  if (!site.correlated()) {
    const Eigen::ArrayXd prec = w + 1.0 / in.sigma2_Y;
    const Eigen::ArrayXd c = (U.transpose() * y).array() / in.sigma2_Y + w * (U.transpose() * m).array();
    out.T_r = U * (c / prec + z_r.array() / prec.sqrt()).matrix();
  } else {
    const auto& H = site.whitened_basis();
    const Eigen::MatrixXd sigma_inv = H * w.matrix().asDiagonal() * H.transpose();
    Eigen::MatrixXd prec = sigma_inv;
    prec.diagonal().array() += 1.0 / in.sigma2_Y;
    const Eigen::VectorXd d = y / in.sigma2_Y + sigma_inv * m;
    const Eigen::MatrixXd L = cholesky_with_jitter(prec, "reduced-temperature precision");
    const auto Lt = L.transpose().triangularView<Eigen::Upper>();
    out.T_r = Lt.solve(L.triangularView<Eigen::Lower>().solve(d) + z_r);
  }

  const auto r = site.singular_values().size();
  const double g = in.history_scale;
  const Eigen::VectorXd e = site.whiten(out.T_r - m);
  const Eigen::ArrayXd s = site.singular_values().array();
  const Eigen::ArrayXd denom = in.sigma2 + g * s.square();
  const Eigen::VectorXd z_h = rng.normal_vector(site.k());

  Eigen::VectorXd coeff = z_h * std::sqrt(g);
  coeff.head(r) = (g * s / denom * (U.leftCols(r).transpose() * e).array() +
                   (g * in.sigma2 / denom).sqrt() * z_h.head(r).array())
                      .matrix();
  Eigen::VectorXd u = site.V() * coeff;
  if (site.has_history_factor()) u = site.history_factor() * u;
  out.T_h = in.history_mean + u;
  return out;
}

std::pair<InverseGamma, InverseGamma> error_variance_conditionals(const SiteModel& site, const SiteState& s,
                                                                  const HyperParameters& hyper) {
  const auto& p = site.profile();
  const double half_n = 0.5 * static_cast<double>(site.n());
  const Eigen::VectorXd meas = p.temps - s.T_r - (p.T0 + s.q0 * site.resistance().array()).matrix();
  const Eigen::VectorXd model = site.whiten(s.T_r - site.A() * s.T_h);
  return {{half_n + hyper.measurement.shape, hyper.measurement.scale + 0.5 * meas.squaredNorm()},
          {half_n + hyper.model.shape, hyper.model.scale + 0.5 * model.squaredNorm()}};
}

NormalMoments heat_flow_conditional(const SiteModel& site, const SiteState& s, double nu, double tau2) {
  const auto& p = site.profile();
  const double rty = site.resistance().dot(p.temps - s.T_r - Eigen::VectorXd::Constant(site.n(), p.T0));
  const double denom = tau2 * site.resistance_norm2() + s.sigma2_Y;
  return {(tau2 * rty + s.sigma2_Y * nu) / denom, tau2 * s.sigma2_Y / denom};
}

GaussianMoments region_history_mean_conditional(const ChainState& state, const std::vector<SiteModel>& sites,
                                                const HyperParameters& hyper) {
  if (sites.empty()) throw Error(ErrorKind::InvalidArgument, "no sites");
  const auto K = sites.front().k();
  const auto counts = region_counts(sites);
  const auto& rD = state.regions[kDesert];
  const auto& rS = state.regions[kSwell];

  std::array<Eigen::VectorXd, kRegionCount> sums{Eigen::VectorXd::Zero(K), Eigen::VectorXd::Zero(K)};
  for (std::size_t j = 0; j < sites.size(); ++j) sums[region_index(sites[j].region())] += state.sites[j].T_h;

  const Eigen::Vector2d data_prec(static_cast<double>(counts[kDesert]) / rD.gamma2,
                                  static_cast<double>(counts[kSwell]) / rS.gamma2);
  const auto post = pair_posterior(hyper.sigma2_D, hyper.sigma2_S, hyper.sigma2_0, data_prec);
  const Eigen::VectorXd mu0 = hyper.history_mean(static_cast<std::size_t>(K));

  GaussianMoments out;
  out.mean.resize(2 * K);
  out.cov = Eigen::MatrixXd::Zero(2 * K, 2 * K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const Eigen::Vector2d d = Eigen::Vector2d(sums[kDesert][k] / rD.gamma2, sums[kSwell][k] / rS.gamma2) +
                              post.prior_prec * Eigen::Vector2d::Constant(mu0[k]);
    const Eigen::Vector2d mean = post.cov * d;
    out.mean[k] = mean[0];
    out.mean[K + k] = mean[1];
    out.cov(k, k) = post.cov(0, 0);
    out.cov(K + k, K + k) = post.cov(1, 1);
    out.cov(k, K + k) = out.cov(K + k, k) = post.cov(0, 1);
  }
  return out;
}

std::pair<InverseGamma, InverseGamma> history_variance_conditionals(const ChainState& state,
                                                                    const std::vector<SiteModel>& sites,
                                                                    const HyperParameters& hyper) {
  std::array<double, kRegionCount> ss{0.0, 0.0};
  std::array<double, kRegionCount> dims{0.0, 0.0};
  for (std::size_t j = 0; j < sites.size(); ++j) {
    const auto r = region_index(sites[j].region());
    ss[r] += (state.sites[j].T_h - state.regions[r].mu).squaredNorm();
    dims[r] += static_cast<double>(sites[j].k());
  }
  return {{0.5 * dims[kDesert] + hyper.history.shape, hyper.history.scale + 0.5 * ss[kDesert]},
          {0.5 * dims[kSwell] + hyper.history.shape, hyper.history.scale + 0.5 * ss[kSwell]}};
}

GaussianMoments flow_mean_conditional(const ChainState& state, const std::vector<SiteModel>& sites,
                                      const HyperParameters& hyper) {
  const auto counts = region_counts(sites);
  const auto& rD = state.regions[kDesert];
  const auto& rS = state.regions[kSwell];
  Eigen::Vector2d sums = Eigen::Vector2d::Zero();
  for (std::size_t j = 0; j < sites.size(); ++j) sums[region_index(sites[j].region())] += state.sites[j].q0;

  const Eigen::Vector2d data_prec(static_cast<double>(counts[kDesert]) / rD.tau2,
                                  static_cast<double>(counts[kSwell]) / rS.tau2);
  const auto post = pair_posterior(hyper.eta2_D, hyper.eta2_S, hyper.eta2_0, data_prec);
  const Eigen::Vector2d d =
      Eigen::Vector2d(sums[0] / rD.tau2, sums[1] / rS.tau2) + post.prior_prec * Eigen::Vector2d::Constant(hyper.nu0);
  return {post.cov * d, post.cov};
}

std::pair<InverseGamma, InverseGamma> flow_variance_conditionals(const ChainState& state,
                                                                 const std::vector<SiteModel>& sites,
                                                                 const HyperParameters& hyper) {
  std::array<double, kRegionCount> ss{0.0, 0.0};
  std::array<double, kRegionCount> counts{0.0, 0.0};
  for (std::size_t j = 0; j < sites.size(); ++j) {
    const auto r = region_index(sites[j].region());
    const double dev = state.sites[j].q0 - state.regions[r].nu;
    ss[r] += dev * dev;
    counts[r] += 1.0;
  }
  return {{0.5 * counts[kDesert] + hyper.flow.shape, hyper.flow.scale + 0.5 * ss[kDesert]},
          {0.5 * counts[kSwell] + hyper.flow.shape, hyper.flow.scale + 0.5 * ss[kSwell]}};
}

BlockDraw sample_block_tr_th(const ChainState& state, std::size_t j, const std::vector<SiteModel>& sites,
                             Rng& rng) {
  return sample_block(sites[j], block_inputs(state, j, sites[j]), rng);
}

std::pair<double, double> sample_error_variances(const ChainState& state, std::size_t j,
                                                 const std::vector<SiteModel>& sites,
                                                 const HyperParameters& hyper, Rng& rng) {
  const auto [meas, model] = error_variance_conditionals(sites[j], state.sites[j], hyper);
  const double sigma2_Y = rng.inverse_gamma(meas.shape, meas.scale);
  const double sigma2 = rng.inverse_gamma(model.shape, model.scale);
  return {sigma2_Y, sigma2};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_region_history_means(const ChainState& state,
                                                                         const std::vector<SiteModel>& sites,
                                                                         const HyperParameters& hyper,
                                                                         Rng& rng) {
  const auto K = sites.front().k();
  const auto counts = region_counts(sites);
  const auto& rD = state.regions[kDesert];
  const auto& rS = state.regions[kSwell];

  std::array<Eigen::VectorXd, kRegionCount> sums{Eigen::VectorXd::Zero(K), Eigen::VectorXd::Zero(K)};
  for (std::size_t j = 0; j < sites.size(); ++j) sums[region_index(sites[j].region())] += state.sites[j].T_h;

  const Eigen::Vector2d data_prec(static_cast<double>(counts[kDesert]) / rD.gamma2,
                                  static_cast<double>(counts[kSwell]) / rS.gamma2);
  const auto post = pair_posterior(hyper.sigma2_D, hyper.sigma2_S, hyper.sigma2_0, data_prec);
  const Eigen::Matrix2d L = lower_factor(post.cov);
  const Eigen::VectorXd mu0 = hyper.history_mean(static_cast<std::size_t>(K));

  Eigen::VectorXd mu_D(K);
  Eigen::VectorXd mu_S(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const Eigen::Vector2d d = Eigen::Vector2d(sums[kDesert][k] / rD.gamma2, sums[kSwell][k] / rS.gamma2) +
                              post.prior_prec * Eigen::Vector2d::Constant(mu0[k]);
    const Eigen::Vector2d z(rng.normal(), rng.normal());
    const Eigen::Vector2d draw = post.cov * d + L * z;
    mu_D[k] = draw[0];
    mu_S[k] = draw[1];
  }
  return {std::move(mu_D), std::move(mu_S)};
}

std::pair<double, double> sample_history_variances(const ChainState& state, const std::vector<SiteModel>& sites,
                                                   const HyperParameters& hyper, Rng& rng) {
  const auto [d, s] = history_variance_conditionals(state, sites, hyper);
  const double gamma2_D = rng.inverse_gamma(d.shape, d.scale);
  const double gamma2_S = rng.inverse_gamma(s.shape, s.scale);
  return {gamma2_D, gamma2_S};
}

double sample_heat_flow(const ChainState& state, std::size_t j, const std::vector<SiteModel>& sites, Rng& rng) {
  const auto& r = state.regions[region_index(sites[j].region())];
  const auto post = heat_flow_conditional(sites[j], state.sites[j], r.nu, r.tau2);
  return rng.normal(post.mean, std::sqrt(post.var));
}

std::pair<double, double> sample_flow_means(const ChainState& state, const std::vector<SiteModel>& sites,
                                            const HyperParameters& hyper, Rng& rng) {
  const auto post = flow_mean_conditional(state, sites, hyper);
  const Eigen::Matrix2d L = lower_factor(post.cov);
  const Eigen::Vector2d z(rng.normal(), rng.normal());
  const Eigen::Vector2d draw = Eigen::Vector2d(post.mean) + L * z;
  return {draw[0], draw[1]};
}

std::pair<double, double> sample_flow_variances(const ChainState& state, const std::vector<SiteModel>& sites,
                                                const HyperParameters& hyper, Rng& rng) {
  const auto [d, s] = flow_variance_conditionals(state, sites, hyper);
  const double tau2_D = rng.inverse_gamma(d.shape, d.scale);
  const double tau2_S = rng.inverse_gamma(s.shape, s.scale);
  return {tau2_D, tau2_S};
}

void SamplerConfig::validate() const {
  if (thin < 1) throw Error(ErrorKind::Config, "thin must be >= 1");
  if (n_burn >= n_iter) throw Error(ErrorKind::Config, "n_burn must be smaller than n_iter");
  if ((n_iter - n_burn) % thin != 0) {
    throw Error(ErrorKind::Config, "n_iter - n_burn must be a multiple of thin");
  }
}

std::size_t Chain::size() const {
  if (!sites.empty()) return static_cast<std::size_t>(sites.front().q0.size());
  return 0;
}

std::vector<SiteModel> build_site_models(const std::vector<BoreholeProfile>& profiles, const ModelSetup& setup,
                                         const CorrelationSpec& correlation) {
  std::vector<SiteModel> models;
  models.reserve(profiles.size());
  for (const auto& p : profiles) {
    p.validate();
    const TimeGrid grid(setup.breakpoints, p.log_year);
    models.emplace_back(p, build_forward_operator(p.depths, grid, setup.kappa), correlation);
  }
  return models;
}

namespace {

double initial_flow(const BoreholeProfile& p, double fallback) {
  const double cutoff = default_cutoff(p.region);
  std::size_t deep = 0;
  for (Eigen::Index i = 0; i < p.depths.size(); ++i) deep += p.depths[i] > cutoff ? 1 : 0;
  if (deep < 3) return fallback;
  try {
    return estimate_intercept_and_flow(p, cutoff).q0_hat;
  } catch (const Error&) {
    return fallback;
  }
}

SiteState initial_site(const SiteModel& site, const Eigen::VectorXd& history_mean, const HyperParameters& hyper) {
  SiteState s;
  s.T_h = history_mean;
  s.q0 = initial_flow(site.profile(), hyper.nu0);
  s.T_r = reduced_estimates(site.profile(), site.profile().T0, s.q0);
  s.sigma2_Y = prior_mean_or_scale(hyper.measurement);
  s.sigma2 = prior_mean_or_scale(hyper.model);
  return s;
}

void check_shapes(const std::vector<SiteModel>& sites) {
  if (sites.empty()) throw Error(ErrorKind::InvalidArgument, "no sites to sample");
  const auto K = sites.front().k();
  for (const auto& s : sites) {
    if (s.k() != K) throw Error(ErrorKind::InvalidGrid, "all sites must share the same number of history intervals");
  }
}

Chain make_chain(Variant variant, const SamplerConfig& config, const std::vector<SiteModel>& sites,
                 const std::vector<double>& breakpoints, bool with_regions) {
  Chain chain;
  chain.variant = variant;
  chain.phi = sites.front().correlation().phi;
  chain.seed = config.seed;
  chain.n_iter = config.n_iter;
  chain.n_burn = config.n_burn;
  chain.thin = config.thin;
  chain.breakpoints = breakpoints;
  const auto n = static_cast<Eigen::Index>(config.stored_count());
  for (const auto& site : sites) {
    SiteDraws d;
    d.site_id = site.profile().site_id;
    d.region = site.region();
    d.T_h.resize(n, site.k());
    if (config.store_reduced) d.T_r.resize(n, site.n());
    d.T_r_mean = Eigen::VectorXd::Zero(site.n());
    d.q0.resize(n);
    d.sigma2_Y.resize(n);
    d.sigma2.resize(n);
    chain.sites.push_back(std::move(d));
  }
  if (with_regions) {
    for (Region r : {Region::Desert, Region::Swell}) {
      RegionDraws d;
      d.region = r;
      d.mu.resize(n, sites.front().k());
      d.gamma2.resize(n);
      d.nu.resize(n);
      d.tau2.resize(n);
      chain.regions.push_back(std::move(d));
    }
  }
  return chain;
}

void store_sites(Chain& chain, const ChainState& state, Eigen::Index row, bool store_reduced) {
  for (std::size_t j = 0; j < chain.sites.size(); ++j) {
    auto& d = chain.sites[j];
    const auto& s = state.sites[j];
    d.T_h.row(row) = s.T_h.transpose();
    if (store_reduced) d.T_r.row(row) = s.T_r.transpose();
    d.T_r_mean += s.T_r;
    d.q0[row] = s.q0;
    d.sigma2_Y[row] = s.sigma2_Y;
    d.sigma2[row] = s.sigma2;
  }
}

void finish_means(Chain& chain) {
  const double n = static_cast<double>(chain.size());
  if (n > 0) {
    for (auto& d : chain.sites) d.T_r_mean /= n;
  }
}

[[noreturn]] void rethrow_with_context(const Error& e, std::size_t iter, const std::string& where) {
  std::ostringstream msg;
  msg << "iteration " << iter << ", " << where << ": " << e.what();
  throw Error(e.kind(), msg.str());
}

}  // namespace

ChainState initial_state(const std::vector<SiteModel>& sites, const HyperParameters& hyper) {
  check_shapes(sites);
  const auto K = static_cast<std::size_t>(sites.front().k());
  const Eigen::VectorXd mu0 = hyper.history_mean(K);
  ChainState state;
  for (const auto& site : sites) state.sites.push_back(initial_site(site, mu0, hyper));
  for (auto& r : state.regions) {
    r.mu = mu0;
    r.gamma2 = prior_mean_or_scale(hyper.history);
    r.nu = hyper.nu0;
    r.tau2 = prior_mean_or_scale(hyper.flow);
  }
  return state;
}

Chain run_chain(const std::vector<SiteModel>& sites, const HyperParameters& hyper, const SamplerConfig& config,
                std::optional<ChainState> init) {
  config.validate();
  hyper.validate();
  check_shapes(sites);
  ChainState state = init ? std::move(*init) : initial_state(sites, hyper);
  if (state.sites.size() != sites.size()) {
    throw Error(ErrorKind::DimensionMismatch, "initial state does not match the number of sites");
  }

  const auto& bp = sites.front().forward_operator().time_grid.breakpoints();
  Chain chain = make_chain(Variant::MultiSite, config, sites, bp, true);
  Rng rng(config.seed);

  for (std::size_t it = 0; it < config.n_iter; ++it) {
    for (std::size_t j = 0; j < sites.size(); ++j) {
      try {
        auto draw = sample_block_tr_th(state, j, sites, rng);
        state.sites[j].T_r = std::move(draw.T_r);
        state.sites[j].T_h = std::move(draw.T_h);
        if (!config.frozen.error_variances) {
          std::tie(state.sites[j].sigma2_Y, state.sites[j].sigma2) =
              sample_error_variances(state, j, sites, hyper, rng);
        }
      } catch (const Error& e) {
        rethrow_with_context(e, it, "site '" + sites[j].profile().site_id + "'");
      }
    }
    try {
      std::tie(state.regions[kDesert].mu, state.regions[kSwell].mu) =
          sample_region_history_means(state, sites, hyper, rng);
      if (!config.frozen.history_variances) {
        std::tie(state.regions[kDesert].gamma2, state.regions[kSwell].gamma2) =
            sample_history_variances(state, sites, hyper, rng);
      }
      for (std::size_t j = 0; j < sites.size(); ++j) state.sites[j].q0 = sample_heat_flow(state, j, sites, rng);
      std::tie(state.regions[kDesert].nu, state.regions[kSwell].nu) = sample_flow_means(state, sites, hyper, rng);
      if (!config.frozen.flow_variances) {
        std::tie(state.regions[kDesert].tau2, state.regions[kSwell].tau2) =
            sample_flow_variances(state, sites, hyper, rng);
      }
    } catch (const Error& e) {
      rethrow_with_context(e, it, "region parameters");
    }

    if (it >= config.n_burn && (it - config.n_burn) % config.thin == 0) {
      const auto row = static_cast<Eigen::Index>((it - config.n_burn) / config.thin);
      store_sites(chain, state, row, config.store_reduced);
      for (std::size_t r = 0; r < kRegionCount; ++r) {
        auto& d = chain.regions[r];
        const auto& s = state.regions[r];
        d.mu.row(row) = s.mu.transpose();
        d.gamma2[row] = s.gamma2;
        d.nu[row] = s.nu;
        d.tau2[row] = s.tau2;
      }
    }
  }
  finish_means(chain);
  return chain;
}

Chain run_chain(const std::vector<BoreholeProfile>& profiles, const ModelSetup& setup,
                const HyperParameters& hyper, const SamplerConfig& config) {
  const auto sites = build_site_models(profiles, setup, {hyper.phi, setup.depth_unit});
  return run_chain(sites, hyper, config);
}

Chain run_single_site(const BoreholeProfile& profile, const SingleSitePrior& prior, const ModelSetup& setup,
                      const HyperParameters& hyper, const SamplerConfig& config) {
  config.validate();
  hyper.validate();
  profile.validate();
  if (!(prior.q0_var > 0.0)) throw Error(ErrorKind::InvalidArgument, "q0 prior variance must be > 0");
  const TimeGrid grid(setup.breakpoints, profile.log_year);
  if (prior.mu.size() != static_cast<Eigen::Index>(grid.size())) {
    throw Error(ErrorKind::DimensionMismatch, "single-site prior mean length does not match K");
  }
  const std::vector<SiteModel> sites{SiteModel(profile, build_forward_operator(profile.depths, grid, setup.kappa),
                                               {hyper.phi, setup.depth_unit}, prior.Gamma)};
  const auto& site = sites.front();

  SiteState s = initial_site(site, prior.mu, hyper);
  if (s.q0 == hyper.nu0) s.q0 = prior.q0_mean;
  Chain chain = make_chain(Variant::SingleSite, config, sites, setup.breakpoints, false);
  Rng rng(config.seed);
  ChainState state;
  state.sites.push_back(s);

  for (std::size_t it = 0; it < config.n_iter; ++it) {
    auto& cur = state.sites.front();
    try {
      auto draw = sample_block(site, {prior.mu, 1.0, cur.q0, cur.sigma2_Y, cur.sigma2}, rng);
      cur.T_r = std::move(draw.T_r);
      cur.T_h = std::move(draw.T_h);
      if (!config.frozen.error_variances) {
        std::tie(cur.sigma2_Y, cur.sigma2) = sample_error_variances(state, 0, sites, hyper, rng);
      }
      const auto post = heat_flow_conditional(site, cur, prior.q0_mean, prior.q0_var);
      cur.q0 = rng.normal(post.mean, std::sqrt(post.var));
    } catch (const Error& e) {
      rethrow_with_context(e, it, "site '" + profile.site_id + "'");
    }
    if (it >= config.n_burn && (it - config.n_burn) % config.thin == 0) {
      store_sites(chain, state, static_cast<Eigen::Index>((it - config.n_burn) / config.thin),
                  config.store_reduced);
    }
  }
  finish_means(chain);
  return chain;
}

}  // namespace gst
