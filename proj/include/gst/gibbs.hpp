#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gst/forward_model.hpp"
#include "gst/priors.hpp"
#include "gst/random.hpp"

namespace gst {

/// AR(1)-type correlation of model errors along depth: C[i][j] = phi^k with
/// k = |z_i - z_j| / depth_unit (a real exponent on irregular grids).
struct CorrelationSpec {
  double phi = 0.0;
  double depth_unit = 5.0;  // m
};

Eigen::MatrixXd ar1_correlation(const Eigen::VectorXd& depths, const CorrelationSpec& spec);

struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct NormalMoments {
  double mean = 0.0;
  double var = 0.0;
};

/**
 * Everything about one borehole that stays fixed during a run: data, thermal
 * resistance, forward operator and the spectral factors used by the joint
 * (T_r, T_h) update.
 *
 * With model-error correlation C = L L' and history covariance factor G
 * (identity in the hierarchical model), the whitened operator
 * B = L^{-1} A G is decomposed once as B = U S V'. Then
 *   Sigma~ = L U diag(sigma2 + g s^2) U' L'
 * for every (sigma2, g), so per-iteration work is matrix-vector products.
 * When C is the identity the T_r precision is diagonal in U as well.
 */
class SiteModel {
 public:
  SiteModel(BoreholeProfile profile, ForwardOperator op, const CorrelationSpec& correlation = {},
            const std::optional<Eigen::MatrixXd>& history_cov = std::nullopt);

  const BoreholeProfile& profile() const { return profile_; }
  const ForwardOperator& forward_operator() const { return op_; }
  const Eigen::MatrixXd& A() const { return op_.A; }
  const Eigen::VectorXd& resistance() const { return R_; }
  double resistance_norm2() const { return RtR_; }
  const CorrelationSpec& correlation() const { return correlation_; }
  Region region() const { return profile_.region; }
  Eigen::Index n() const { return op_.A.rows(); }
  Eigen::Index k() const { return op_.A.cols(); }

  /// True when C(phi) differs from the identity.
  bool correlated() const { return correlated_; }
  /// True when a fixed history covariance (single-site prior) was supplied.
  bool has_history_factor() const { return has_history_factor_; }

  /// L^{-1} x, or x when uncorrelated.
  Eigen::VectorXd whiten(const Eigen::VectorXd& x) const;

  const Eigen::MatrixXd& U() const { return U_; }
  const Eigen::MatrixXd& V() const { return V_; }
  const Eigen::VectorXd& singular_values() const { return s_; }
  /// Squared singular values padded with zeros to length N.
  const Eigen::VectorXd& spectrum() const { return lambda_; }
  const Eigen::MatrixXd& correlation_factor() const { return L_; }
  const Eigen::MatrixXd& whitened_basis() const { return H_; }
  const Eigen::MatrixXd& history_factor() const { return G_; }

 private:
  BoreholeProfile profile_;
  ForwardOperator op_;
  CorrelationSpec correlation_;
  Eigen::VectorXd R_;
  double RtR_ = 0.0;
  bool correlated_ = false;
  bool has_history_factor_ = false;
  Eigen::MatrixXd L_;  // chol C, empty when uncorrelated
  Eigen::MatrixXd G_;  // chol Gamma, empty when absent
  Eigen::MatrixXd U_;  // N x N
  Eigen::MatrixXd V_;  // K x K
  Eigen::VectorXd s_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd H_;  // L^{-T} U, correlated only
};

/// Parameters the joint (T_r, T_h) update conditions on. The history prior is
/// N(history_mean, history_scale * G G').
struct BlockInputs {
  Eigen::VectorXd history_mean;
  double history_scale = 1.0;
  double q0 = 0.0;
  double sigma2_Y = 1.0;
  double sigma2 = 1.0;
};

struct BlockDraw {
  Eigen::VectorXd T_r;
  Eigen::VectorXd T_h;
};

/// Moments of [T_r | Y, theta] (T_h integrated out).
GaussianMoments reduced_conditional(const SiteModel& site, const BlockInputs& in);
/// Moments of [T_h | T_r, theta].
GaussianMoments history_conditional(const SiteModel& site, const BlockInputs& in,
                                    const Eigen::VectorXd& T_r);
/// Joint draw: T_r from its marginal conditional, then T_h given T_r.
BlockDraw sample_block(const SiteModel& site, const BlockInputs& in, Rng& rng);

struct SiteState {
  Eigen::VectorXd T_h;
  Eigen::VectorXd T_r;
  double q0 = 0.0;
  double sigma2_Y = 0.0;
  double sigma2 = 0.0;
};

struct RegionState {
  Eigen::VectorXd mu;
  double gamma2 = 0.0;
  double nu = 0.0;
  double tau2 = 0.0;
};

/// One value of every unknown. Regions are indexed by region_index().
struct ChainState {
  std::vector<SiteState> sites;
  std::array<RegionState, kRegionCount> regions;
};

// Full conditionals of the hierarchical model. Distribution-returning forms
// expose the closed-form parameters; sample_* forms draw from them.

std::pair<InverseGamma, InverseGamma> error_variance_conditionals(const SiteModel& site,
                                                                  const SiteState& s,
                                                                  const HyperParameters& hyper);
NormalMoments heat_flow_conditional(const SiteModel& site, const SiteState& s, double nu, double tau2);
/// Joint (mu_D; mu_S), 2K-dimensional.
GaussianMoments region_history_mean_conditional(const ChainState& state,
                                                const std::vector<SiteModel>& sites,
                                                const HyperParameters& hyper);
std::pair<InverseGamma, InverseGamma> history_variance_conditionals(const ChainState& state,
                                                                    const std::vector<SiteModel>& sites,
                                                                    const HyperParameters& hyper);
/// Joint (nu_D, nu_S).
GaussianMoments flow_mean_conditional(const ChainState& state, const std::vector<SiteModel>& sites,
                                      const HyperParameters& hyper);
std::pair<InverseGamma, InverseGamma> flow_variance_conditionals(const ChainState& state,
                                                                 const std::vector<SiteModel>& sites,
                                                                 const HyperParameters& hyper);

BlockDraw sample_block_tr_th(const ChainState& state, std::size_t j, const std::vector<SiteModel>& sites,
                             Rng& rng);
std::pair<double, double> sample_error_variances(const ChainState& state, std::size_t j,
                                                 const std::vector<SiteModel>& sites,
                                                 const HyperParameters& hyper, Rng& rng);
std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_region_history_means(const ChainState& state,
                                                                         const std::vector<SiteModel>& sites,
                                                                         const HyperParameters& hyper,
                                                                         Rng& rng);
std::pair<double, double> sample_history_variances(const ChainState& state, const std::vector<SiteModel>& sites,
                                                   const HyperParameters& hyper, Rng& rng);
double sample_heat_flow(const ChainState& state, std::size_t j, const std::vector<SiteModel>& sites, Rng& rng);
std::pair<double, double> sample_flow_means(const ChainState& state, const std::vector<SiteModel>& sites,
                                            const HyperParameters& hyper, Rng& rng);
std::pair<double, double> sample_flow_variances(const ChainState& state, const std::vector<SiteModel>& sites,
                                                const HyperParameters& hyper, Rng& rng);

enum class Variant { SingleSite, MultiSite };
std::string to_string(Variant v);

/// Blocks held at their initial values (used by verification runs).
struct FrozenBlocks {
  bool error_variances = false;
  bool history_variances = false;
  bool flow_variances = false;
};

struct SamplerConfig {
  std::size_t n_iter = 30000;
  std::size_t n_burn = 2000;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  bool store_reduced = false;  // keep every T_r draw (memory heavy)
  FrozenBlocks frozen;

  void validate() const;
  std::size_t stored_count() const { return (n_iter - n_burn) / thin; }
};

/// Time grid and physics shared by all sites of a run.
struct ModelSetup {
  std::vector<double> breakpoints;  // t_1..t_K, calendar years
  double kappa = kDefaultDiffusivity;
  double depth_unit = 5.0;
};

struct SiteDraws {
  std::string site_id;
  Region region = Region::Desert;
  Eigen::MatrixXd T_h;       // stored x K
  Eigen::MatrixXd T_r;       // stored x N, empty unless store_reduced
  Eigen::VectorXd T_r_mean;  // posterior mean of T_r over stored draws
  Eigen::VectorXd q0;
  Eigen::VectorXd sigma2_Y;
  Eigen::VectorXd sigma2;
};

struct RegionDraws {
  Region region = Region::Desert;
  Eigen::MatrixXd mu;  // stored x K
  Eigen::VectorXd gamma2;
  Eigen::VectorXd nu;
  Eigen::VectorXd tau2;
};

struct Chain {
  Variant variant = Variant::MultiSite;
  double phi = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_iter = 0;
  std::size_t n_burn = 0;
  std::size_t thin = 1;
  std::vector<double> breakpoints;
  std::vector<SiteDraws> sites;
  std::vector<RegionDraws> regions;  // empty for single-site chains

  std::size_t size() const;
};

std::vector<SiteModel> build_site_models(const std::vector<BoreholeProfile>& profiles, const ModelSetup& setup,
                                         const CorrelationSpec& correlation);

/// Documented starting point: T_h at the prior mean, q0 from the deep-segment
/// regression (prior mean when the profile is too shallow), T_r as the
/// resulting reduced estimates, variances and region parameters at prior means.
ChainState initial_state(const std::vector<SiteModel>& sites, const HyperParameters& hyper);

/// Multi-site Gibbs sampler. Sweep order per iteration: for each site the
/// (T_r, T_h) block then (sigma2_Y, sigma2); region history means; history
/// variances; each site's q0; flow means; flow variances.
Chain run_chain(const std::vector<SiteModel>& sites, const HyperParameters& hyper, const SamplerConfig& config,
                std::optional<ChainState> init = std::nullopt);
Chain run_chain(const std::vector<BoreholeProfile>& profiles, const ModelSetup& setup,
                const HyperParameters& hyper, const SamplerConfig& config);

/// Single-site sampler with fixed history prior N(mu, Gamma) and q0 prior.
/// Sweep: (T_r, T_h) block, (sigma2_Y, sigma2), q0.
Chain run_single_site(const BoreholeProfile& profile, const SingleSitePrior& prior, const ModelSetup& setup,
                      const HyperParameters& hyper, const SamplerConfig& config);

}  // namespace gst
