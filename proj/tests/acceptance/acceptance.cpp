// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "gst/cli.hpp"
#include "gst/config.hpp"
#include "gst/error.hpp"
#include "gst/forward_model.hpp"
#include "gst/gibbs.hpp"
#include "gst/io.hpp"
#include "gst/oracle.hpp"
#include "gst/pipeline.hpp"
#include "gst/posterior.hpp"
#include "gst/priors.hpp"
#include "gst/sensitivity.hpp"
#include "gst/synthetic.hpp"
#include "json.hpp"

using namespace gst;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << x;
  return os.str();
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Collects individual checks; the first few failures go into the report line.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok) failed_.push_back(what);
  }
  bool ok() const { return failed_.empty(); }
  std::size_t count() const { return count_; }
  std::string failures() const {
    std::string out;
    for (std::size_t i = 0; i < failed_.size() && i < 3; ++i) out += (i ? "; " : "") + failed_[i];
    if (failed_.size() > 3) out += "; +" + std::to_string(failed_.size() - 3) + " more";
    return out;
  }

 private:
  std::size_t count_ = 0;
  std::vector<std::string> failed_;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome from_checks(const Checks& c, const std::string& extra) {
  std::string d = std::to_string(c.count()) + " checks" + (extra.empty() ? "" : ", " + extra);
  if (!c.ok()) d += "; failed: " + c.failures();
  return {c.ok(), d};
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / "gst_acceptance" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// ---------------------------------------------------------------- priors

Outcome prior_elicitation() {
  const auto t0 = Clock::now();
  Checks c;
  const auto y = elicit_inverse_gamma(0.11 * 0.11, 1.0);
  const auto m = elicit_inverse_gamma(0.5 * 0.5, 100.0);
  double worst = 0.0;
  for (auto [got, want] : {std::pair{y.shape, 2.000146}, {y.scale, 0.012102}, {m.shape, 2.000625}, {m.scale, 0.250156}}) {
    worst = std::max(worst, rel(got, want));
    c.expect(rel(got, want) < 1e-4, "pair value " + fmt(got, 8) + " vs " + fmt(want, 8));
  }
  const HyperParameters h;
  struct Row {
    InverseGamma ig;
    double scale, lo, hi;
  };
  double worst_q = 0.0;
  for (const Row& r : {Row{h.measurement, 1.0, 0.0466, 0.2235}, Row{h.model, 1.0, 0.212, 1.016},
                       Row{h.flow, 1000.0, 42.4, 203.2}, Row{h.history, 1.0, 0.387, 1.801}}) {
    const auto q = ig_sd_quantiles(r.ig, 0.025, 0.975);
    const double e = std::max(rel(r.scale * q.first, r.lo), rel(r.scale * q.second, r.hi));
    worst_q = std::max(worst_q, e);
    c.expect(e < 0.01, "sd quantiles (" + fmt(r.scale * q.first) + ", " + fmt(r.scale * q.second) + ")");
  }
  const double t = seconds_since(t0);
  c.expect(t < 1.0, "runtime " + fmt(t) + " s");
  return from_checks(c, "max rel err " + fmt(worst, 2) + " (pairs), " + fmt(worst_q, 2) + " (quantiles), " +
                            fmt(t, 2) + " s");
}

double round2(double x) { return std::round(100.0 * x) / 100.0; }

Outcome joint_priors() {
  const auto t0 = Clock::now();
  Checks c;
  HyperParameters h;
  const auto nu = build_joint_nu_prior(h);
  c.expect(std::abs(1000 * nu.sd(0) - 22.36) < 0.005, "nu sd " + fmt(1000 * nu.sd(0)));
  c.expect(round2(nu.correlation(0, 1)) == 0.80, "nu corr " + fmt(nu.correlation(0, 1)));
  const auto mu = build_joint_mu_prior(h, 11);
  c.expect(std::abs(mu.sd(0) - 0.5477) < 5e-5, "mu sd " + fmt(mu.sd(0)));
  c.expect(std::abs(mu.correlation(4, 15) - 0.333) < 5e-4, "mu corr " + fmt(mu.correlation(4, 15)));

  const std::vector<std::pair<double, double>> table4{{22.36, 0.80}, {28.28, 0.50}, {36.06, 0.31},
                                                      {100.00, 0.00}, {120.37, 0.31}};
  const auto& flows = flow_prior_settings();
  c.expect(flows.size() == table4.size(), "flow settings count");
  for (std::size_t i = 0; i < flows.size() && i < table4.size(); ++i) {
    h = {};
    h.eta2_D = h.eta2_S = flows[i].eta2_region * 1e-6;
    h.eta2_0 = flows[i].eta2_shared * 1e-6;
    const auto p = build_joint_nu_prior(h);
    c.expect(round2(1000 * p.sd(0)) == table4[i].first && round2(1000 * p.sd(1)) == table4[i].first,
             std::string(flows[i].label) + " sd " + fmt(1000 * p.sd(0)));
    c.expect(round2(p.correlation(0, 1)) == table4[i].second, std::string(flows[i].label) + " corr");
  }
  const std::vector<std::pair<double, double>> table5{{0.55, 0.33}, {0.45, 0.50}, {0.45, 0.00}, {0.67, 0.33}};
  const auto& hist = history_prior_settings();
  c.expect(hist.size() == table5.size(), "history settings count");
  for (std::size_t i = 0; i < hist.size() && i < table5.size(); ++i) {
    h = {};
    h.sigma2_D = h.sigma2_S = hist[i].sigma2_region;
    h.sigma2_0 = hist[i].sigma2_shared;
    const auto p = build_joint_mu_prior(h, 11);
    for (Eigen::Index k = 0; k < 11; ++k) {
      c.expect(round2(p.sd(k)) == table5[i].first && round2(p.sd(k + 11)) == table5[i].first,
               std::string(hist[i].label) + " sd");
      c.expect(round2(p.correlation(k, k + 11)) == table5[i].second, std::string(hist[i].label) + " corr");
    }
  }
  const double t = seconds_since(t0);
  c.expect(t < 1.0, "runtime " + fmt(t) + " s");
  return from_checks(c, "nu sd " + fmt(1000 * nu.sd(0), 5) + " corr " + fmt(nu.correlation(0, 1), 3) + ", mu sd " +
                            fmt(mu.sd(0), 5) + " corr " + fmt(mu.correlation(0, 11), 4) + ", " + fmt(t, 2) + " s");
}

// Inputs are decimal fractions, so "exact" means equal to the nearest double
// of the target up to the rounding of the three summands.
Outcome single_site_marginal() {
  Checks c;
  const HyperParameters h;
  const double ulp_g = std::nextafter(1.1, 2.0) - 1.1;
  const double ulp_q = std::nextafter(0.0105, 1.0) - 0.0105;
  double dev_g = 0.0, dev_q = 0.0;
  for (Region r : {Region::Desert, Region::Swell}) {
    const auto p = marginalize_single_site(h, r, 11);
    const Eigen::MatrixXd target = 1.1 * Eigen::MatrixXd::Identity(11, 11);
    const double dg = (p.Gamma - target).cwiseAbs().maxCoeff();
    dev_g = std::max(dev_g, dg);
    c.expect(dg <= 2 * ulp_g, "Gamma off by " + fmt(dg, 3));
    c.expect(p.mu.isZero(0.0), "prior mean not zero");
    c.expect(p.q0_mean == 0.06, "q0 mean " + fmt(p.q0_mean, 17));
    dev_q = std::max(dev_q, std::abs(p.q0_var - 0.0105));
    c.expect(std::abs(p.q0_var - 0.0105) <= 2 * ulp_q, "q0 var " + fmt(p.q0_var, 17));
  }
  return from_checks(c, "Gamma = 1.1 I within " + fmt(dev_g / ulp_g, 2) + " ulp, q0 ~ N(0.06, 0.0105) within " +
                            fmt(dev_q / ulp_q, 2) + " ulp");
}

// ---------------------------------------------------------------- forward operator

double step_response(double z, double years) {
  return std::erfc(z / std::sqrt(4.0 * kDefaultDiffusivity * years * kSecondsPerYear));
}

Outcome forward_properties() {
  const auto t0 = Clock::now();
  Checks c;
  std::mt19937_64 gen(20240611);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_sum = 0.0, worst_lin = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int K = 1 + static_cast<int>(u(gen) * 15);
    const int N = 2 + static_cast<int>(u(gen) * 60);
    std::vector<double> t{1400 + 300 * u(gen)};
    for (int k = 1; k < K; ++k) t.push_back(t.back() + 0.5 + 80 * u(gen));
    const double end = t.back() + 0.5 + 40 * u(gen);
    Eigen::VectorXd z(N);
    z[0] = 0.5 + 30 * u(gen);
    for (int i = 1; i < N; ++i) z[i] = z[i - 1] + 0.1 + 20 * u(gen);
    const auto op = build_forward_operator(z, TimeGrid(t, end));
    for (int i = 0; i < N; ++i) {
      worst_sum = std::max(worst_sum, std::abs(op.A.row(i).sum() - step_response(z[i], end - t[0])));
    }
    Eigen::VectorXd a(K), b(K);
    for (int k = 0; k < K; ++k) {
      a[k] = 4 * u(gen) - 2;
      b[k] = 4 * u(gen) - 2;
    }
    const double alpha = 6 * u(gen) - 3;
    const double beta = 6 * u(gen) - 3;
    const Eigen::VectorXd lhs = forward_solve(op, alpha * a + beta * b);
    const Eigen::VectorXd rhs = alpha * forward_solve(op, a) + beta * forward_solve(op, b);
    worst_lin = std::max(worst_lin, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  c.expect(worst_sum < 1e-12, "row sum error " + fmt(worst_sum, 3));
  c.expect(worst_lin < 1e-12, "linearity error " + fmt(worst_lin, 3));
  const double t = seconds_since(t0);
  c.expect(t < 10.0, "runtime " + fmt(t) + " s");
  return from_checks(c, "1000 grids, max row-sum err " + fmt(worst_sum, 3) + ", max linearity err " +
                            fmt(worst_lin, 3) + ", " + fmt(t, 2) + " s");
}

// ---------------------------------------------------------------- conditionals

constexpr int kDraws = 100000;

BoreholeProfile small_profile(const std::string& id, Region region, int n, double dz, std::uint64_t seed,
                              double q0 = 0.06) {
  BoreholeProfile p;
  p.site_id = id;
  p.region = region;
  p.depths = Eigen::VectorXd::LinSpaced(n, dz, dz * n);
  p.layers = {{0.5 * dz * n, 2.6}, {std::numeric_limits<double>::infinity(), 3.4}};
  p.T0 = 11.0;
  p.log_year = 1990;
  Rng rng(seed);
  const auto op = build_forward_operator(p.depths, TimeGrid({1900, 1950}, p.log_year));
  const Eigen::Vector2d hist(-0.3 + 0.2 * rng.normal(), 0.5 + 0.2 * rng.normal());
  p.temps = (p.T0 + q0 * thermal_resistance(p).array()).matrix() + op.A * hist + 0.05 * rng.normal_vector(n);
  return p;
}

ModelSetup small_setup() {
  ModelSetup s;
  s.breakpoints = {1900, 1950};
  return s;
}

Eigen::MatrixXd dense_corr(const Eigen::VectorXd& z, double phi) {
  const auto n = z.size();
  Eigen::MatrixXd C(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) C(i, j) = i == j ? 1.0 : std::pow(phi, std::abs(z[i] - z[j]) / 5.0);
  }
  return C;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// Mean (and optionally second central moment) of iid draws against exact
// values, each within 4 Monte Carlo standard errors.
void moment_test(Checks& c, const std::string& what, const Eigen::MatrixXd& draws, const Eigen::VectorXd& mean,
                 const Eigen::VectorXd& var, bool spread = true) {
  const double n = static_cast<double>(draws.rows());
  for (Eigen::Index k = 0; k < draws.cols(); ++k) {
    const Eigen::ArrayXd x = draws.col(k).array();
    const double z = std::abs(x.mean() - mean[k]) / std::sqrt(var[k] / n);
    c.expect(z <= 4.0, what + "[" + std::to_string(k) + "] mean off by " + fmt(z, 3) + " se");
    if (!spread) continue;
    const Eigen::ArrayXd dev2 = (x - mean[k]).square();
    const double sd2 = std::sqrt((dev2 - dev2.mean()).square().mean());
    const double zv = std::abs(dev2.mean() - var[k]) / (sd2 / std::sqrt(n));
    c.expect(zv <= 4.0, what + "[" + std::to_string(k) + "] variance off by " + fmt(zv, 3) + " se");
  }
}

GaussianMoments dense_conjugate(const Eigen::VectorXd& m0, const Eigen::MatrixXd& S0,
                                const std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>>& obs,
                                const std::vector<double>& vars) {
  Eigen::MatrixXd prec = S0.inverse();
  Eigen::VectorXd lin = prec * m0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    prec += obs[i].first.transpose() * obs[i].first / vars[i];
    lin += obs[i].first.transpose() * obs[i].second / vars[i];
  }
  GaussianMoments out;
  out.cov = prec.inverse();
  out.mean = out.cov * lin;
  return out;
}

void check_block(Checks& c) {
  const auto p = small_profile("a", Region::Desert, 8, 15.0, 2);
  BlockInputs in;
  in.history_mean = Eigen::Vector2d(-0.2, 0.3);
  in.history_scale = 0.7;
  in.q0 = 0.058;
  in.sigma2_Y = 0.01;
  in.sigma2 = 0.04;
  for (double phi : {0.0, 0.65}) {
    const std::string tag = "block(phi=" + fmt(phi) + ")";
    const SiteModel site(p, build_forward_operator(p.depths, TimeGrid({1900, 1950}, p.log_year)), {phi, 5.0});
    const auto& A = site.A();
    const auto N = A.rows();
    const auto K = A.cols();
    const Eigen::MatrixXd C = dense_corr(p.depths, phi);
    const Eigen::VectorXd y = p.temps - (p.T0 + in.q0 * thermal_resistance(p).array()).matrix();
    const Eigen::MatrixXd prior_inv = (in.sigma2 * C + in.history_scale * A * A.transpose()).inverse();
    const Eigen::MatrixXd red_cov = (prior_inv + Eigen::MatrixXd::Identity(N, N) / in.sigma2_Y).inverse();
    const Eigen::VectorXd red_mean = red_cov * (prior_inv * A * in.history_mean + y / in.sigma2_Y);
    const Eigen::MatrixXd Cinv = C.inverse();
    const Eigen::MatrixXd h_cov =
        (Eigen::MatrixXd::Identity(K, K) / in.history_scale + A.transpose() * Cinv * A / in.sigma2).inverse();
    const Eigen::MatrixXd gain = h_cov * A.transpose() * Cinv / in.sigma2;

    const auto red = reduced_conditional(site, in);
    c.expect(max_abs(red.mean - red_mean) < 1e-9 && max_abs(red.cov - red_cov) < 1e-10, tag + " T_r moments");
    const auto hist = history_conditional(site, in, red_mean);
    c.expect(max_abs(hist.mean - (in.history_mean + gain * (red_mean - A * in.history_mean))) < 1e-9,
             tag + " T_h mean");
    c.expect(max_abs(hist.cov - h_cov) < 1e-10, tag + " T_h covariance");

    Eigen::VectorXd mean(N + K), var(N + K);
    mean.head(N) = red_mean;
    mean.tail(K) = in.history_mean + gain * (red_mean - A * in.history_mean);
    var.head(N) = red_cov.diagonal();
    var.tail(K) = (h_cov + gain * red_cov * gain.transpose()).diagonal();
    Rng rng(77);
    Eigen::MatrixXd draws(kDraws, N + K);
    for (int d = 0; d < kDraws; ++d) {
      const auto b = sample_block(site, in, rng);
      draws.row(d).head(N) = b.T_r.transpose();
      draws.row(d).tail(K) = b.T_h.transpose();
    }
    moment_test(c, tag, draws, mean, var);
  }
}

struct Hierarchy {
  std::vector<SiteModel> sites;
  ChainState state;
  HyperParameters hyper;
};

Hierarchy hierarchy() {
  Hierarchy h;
  const std::vector<BoreholeProfile> profiles{small_profile("a", Region::Desert, 10, 15.0, 11, 0.055),
                                              small_profile("b", Region::Desert, 10, 15.0, 12, 0.065),
                                              small_profile("c", Region::Swell, 10, 15.0, 13, 0.07)};
  h.sites = build_site_models(profiles, small_setup(), {});
  h.state = initial_state(h.sites, h.hyper);
  Rng rng(21);
  for (std::size_t j = 0; j < h.sites.size(); ++j) {
    auto& s = h.state.sites[j];
    s.T_h = rng.normal_vector(2);
    s.q0 = 0.06 + 0.01 * rng.normal();
    s.T_r = h.sites[j].A() * s.T_h + 0.2 * rng.normal_vector(h.sites[j].n());
  }
  h.state.regions[0] = {Eigen::Vector2d(0.1, -0.2), 0.5, 0.058, 2e-4};
  h.state.regions[1] = {Eigen::Vector2d(0.4, 0.0), 1.3, 0.066, 5e-5};
  return h;
}

void check_error_variances(Checks& c) {
  auto h = hierarchy();
  const auto& site = h.sites[0];
  const auto& s = h.state.sites[0];
  const auto& p = site.profile();
  const double N = static_cast<double>(site.n());
  const Eigen::VectorXd e_meas = p.temps - (p.T0 + s.q0 * site.resistance().array()).matrix() - s.T_r;
  const Eigen::VectorXd e_model = s.T_r - site.A() * s.T_h;
  const auto [meas, model] = error_variance_conditionals(site, s, h.hyper);
  c.expect(rel(meas.shape, h.hyper.measurement.shape + N / 2) < 1e-14 &&
               rel(meas.scale, h.hyper.measurement.scale + 0.5 * e_meas.squaredNorm()) < 1e-12,
           "sigma2_Y parameters");
  c.expect(rel(model.shape, h.hyper.model.shape + N / 2) < 1e-14 &&
               rel(model.scale, h.hyper.model.scale + 0.5 * e_model.squaredNorm()) < 1e-12,
           "sigma2 parameters");
  Rng rng(8);
  Eigen::MatrixXd draws(kDraws, 2);
  for (int d = 0; d < kDraws; ++d) {
    const auto [a, b] = sample_error_variances(h.state, 0, h.sites, h.hyper, rng);
    draws.row(d) << a, b;
  }
  moment_test(c, "error variances", draws, Eigen::Vector2d(meas.mean(), model.mean()),
              Eigen::Vector2d(meas.variance(), model.variance()));

  // correlated model errors use the C^{-1} quadratic form
  const auto pc = small_profile("r", Region::Desert, 12, 5.0, 6);
  const SiteModel corr(pc, build_forward_operator(pc.depths, TimeGrid({1900, 1950}, pc.log_year)), {0.7, 5.0});
  SiteState sc;
  sc.q0 = 0.055;
  sc.T_h = Eigen::Vector2d(-0.5, 0.2);
  sc.T_r = corr.A() * sc.T_h + 0.3 * rng.normal_vector(12);
  const Eigen::VectorXd r = sc.T_r - corr.A() * sc.T_h;
  const double quad = r.dot(dense_corr(pc.depths, 0.7).ldlt().solve(r));
  const auto cm = error_variance_conditionals(corr, sc, h.hyper).second;
  c.expect(rel(cm.scale, h.hyper.model.scale + 0.5 * quad) < 1e-10, "correlated sigma2 scale");
}

void check_region_means(Checks& c) {
  auto h = hierarchy();
  h.hyper.mu0 = Eigen::Vector2d(0.2, -0.1);
  const auto prior = build_joint_mu_prior(h.hyper, 2);
  std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> obs;
  std::vector<double> vars;
  for (std::size_t j = 0; j < h.sites.size(); ++j) {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(2, 4);
    const auto r = region_index(h.sites[j].region());
    E.block(0, 2 * static_cast<Eigen::Index>(r), 2, 2).setIdentity();
    obs.emplace_back(E, h.state.sites[j].T_h);
    vars.push_back(h.state.regions[r].gamma2);
  }
  const auto ref = dense_conjugate(prior.mean, prior.cov, obs, vars);
  const auto got = region_history_mean_conditional(h.state, h.sites, h.hyper);
  c.expect(max_abs(got.mean - ref.mean) < 1e-10 && max_abs(got.cov - ref.cov) < 1e-10, "mu moments");
  Rng rng(31);
  Eigen::MatrixXd draws(kDraws, 4);
  for (int d = 0; d < kDraws; ++d) {
    const auto [D, S] = sample_region_history_means(h.state, h.sites, h.hyper, rng);
    draws.row(d) << D.transpose(), S.transpose();
  }
  moment_test(c, "mu", draws, ref.mean, ref.cov.diagonal());
  const Eigen::ArrayXd a = draws.col(0).array() - ref.mean[0];
  const Eigen::ArrayXd b = draws.col(2).array() - ref.mean[2];
  const double cov = ref.cov(0, 2);
  const double se = std::sqrt((ref.cov(0, 0) * ref.cov(2, 2) + cov * cov) / kDraws);
  c.expect(std::abs((a * b).mean() - cov) <= 4 * se, "mu cross-region covariance");
}

void check_flow_means(Checks& c) {
  auto h = hierarchy();
  const auto prior = build_joint_nu_prior(h.hyper);
  std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> obs;
  std::vector<double> vars;
  for (std::size_t j = 0; j < h.sites.size(); ++j) {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(1, 2);
    const auto r = region_index(h.sites[j].region());
    E(0, static_cast<Eigen::Index>(r)) = 1.0;
    obs.emplace_back(E, Eigen::VectorXd::Constant(1, h.state.sites[j].q0));
    vars.push_back(h.state.regions[r].tau2);
  }
  const auto ref = dense_conjugate(prior.mean, prior.cov, obs, vars);
  const auto got = flow_mean_conditional(h.state, h.sites, h.hyper);
  c.expect(max_abs(got.mean - ref.mean) < 1e-12 && max_abs(got.cov - ref.cov) < 1e-14, "nu moments");
  Rng rng(32);
  Eigen::MatrixXd draws(kDraws, 2);
  for (int d = 0; d < kDraws; ++d) {
    const auto [D, S] = sample_flow_means(h.state, h.sites, h.hyper, rng);
    draws.row(d) << D, S;
  }
  moment_test(c, "nu", draws, ref.mean, ref.cov.diagonal());
}

// IG shapes here sit between 2.5 and 4.1: the variance is finite but the
// fourth moment may not be, so means and medians are tested, not spreads.
void check_scale_variances(Checks& c) {
  auto h = hierarchy();
  const auto& st = h.state;
  const auto [gD, gS] = history_variance_conditionals(st, h.sites, h.hyper);
  const double ssD = (st.sites[0].T_h - st.regions[0].mu).squaredNorm() + (st.sites[1].T_h - st.regions[0].mu).squaredNorm();
  const double ssS = (st.sites[2].T_h - st.regions[1].mu).squaredNorm();
  c.expect(rel(gD.shape, h.hyper.history.shape + 2.0) < 1e-14 && rel(gS.shape, h.hyper.history.shape + 1.0) < 1e-14,
           "gamma2 shapes");
  c.expect(rel(gD.scale, h.hyper.history.scale + 0.5 * ssD) < 1e-12 &&
               rel(gS.scale, h.hyper.history.scale + 0.5 * ssS) < 1e-12,
           "gamma2 scales");
  const auto [tD, tS] = flow_variance_conditionals(st, h.sites, h.hyper);
  const double d0 = st.sites[0].q0 - st.regions[0].nu;
  const double d1 = st.sites[1].q0 - st.regions[0].nu;
  const double d2 = st.sites[2].q0 - st.regions[1].nu;
  c.expect(rel(tD.shape, h.hyper.flow.shape + 1.0) < 1e-14 && rel(tS.shape, h.hyper.flow.shape + 0.5) < 1e-14,
           "tau2 shapes");
  c.expect(rel(tD.scale, h.hyper.flow.scale + 0.5 * (d0 * d0 + d1 * d1)) < 1e-12 &&
               rel(tS.scale, h.hyper.flow.scale + 0.5 * d2 * d2) < 1e-12,
           "tau2 scales");

  Rng rng(33);
  Eigen::MatrixXd g(kDraws, 2), t(kDraws, 2);
  for (int d = 0; d < kDraws; ++d) {
    const auto [a, b] = sample_history_variances(st, h.sites, h.hyper, rng);
    g.row(d) << a, b;
    const auto [x, y] = sample_flow_variances(st, h.sites, h.hyper, rng);
    t.row(d) << x, y;
  }
  moment_test(c, "gamma2", g, Eigen::Vector2d(gD.mean(), gS.mean()), Eigen::Vector2d(gD.variance(), gS.variance()),
              false);
  moment_test(c, "tau2", t, Eigen::Vector2d(tD.mean(), tS.mean()), Eigen::Vector2d(tD.variance(), tS.variance()),
              false);
  // the exact median, X <= m iff Gamma(a) >= b / m
  const auto median_test = [&](const std::string& what, const Eigen::MatrixXd& draws, const InverseGamma& ig,
                               Eigen::Index k) {
    const double m = ig.scale / boost::math::gamma_q_inv(ig.shape, 0.5);
    const double frac = (draws.col(k).array() <= m).cast<double>().mean();
    const double z = std::abs(frac - 0.5) / std::sqrt(0.25 / kDraws);
    c.expect(z <= 4.0, what + "[" + std::to_string(k) + "] median off by " + fmt(z, 3) + " se");
  };
  median_test("gamma2", g, gD, 0);
  median_test("gamma2", g, gS, 1);
  median_test("tau2", t, tD, 0);
  median_test("tau2", t, tS, 1);
}

void check_heat_flow(Checks& c) {
  auto h = hierarchy();
  const auto& site = h.sites[0];
  const auto& s = h.state.sites[0];
  const auto& p = site.profile();
  const auto& r = h.state.regions[0];
  const Eigen::VectorXd y = p.temps - s.T_r - Eigen::VectorXd::Constant(site.n(), p.T0);
  const double prec = site.resistance().squaredNorm() / s.sigma2_Y + 1.0 / r.tau2;
  const double mean = (site.resistance().dot(y) / s.sigma2_Y + r.nu / r.tau2) / prec;
  const auto got = heat_flow_conditional(site, s, r.nu, r.tau2);
  c.expect(rel(got.mean, mean) < 1e-12 && rel(got.var, 1.0 / prec) < 1e-12, "q0 moments");
  Rng rng(34);
  Eigen::MatrixXd draws(kDraws, 1);
  for (int d = 0; d < kDraws; ++d) draws(d, 0) = sample_heat_flow(h.state, 0, h.sites, rng);
  moment_test(c, "q0", draws, Eigen::VectorXd::Constant(1, mean), Eigen::VectorXd::Constant(1, 1.0 / prec));
}

std::map<std::string, Eigen::VectorXd> series(const Chain& chain) {
  std::map<std::string, Eigen::VectorXd> out;
  for (const auto& s : chain.sites) {
    for (Eigen::Index k = 0; k < s.T_h.cols(); ++k) out[s.site_id + ".T_h[" + std::to_string(k) + "]"] = s.T_h.col(k);
    out[s.site_id + ".q0"] = s.q0;
    out[s.site_id + ".sigma2_Y"] = s.sigma2_Y;
    out[s.site_id + ".sigma2"] = s.sigma2;
  }
  for (const auto& r : chain.regions) {
    const std::string tag = r.region == Region::Desert ? "D" : "S";
    for (Eigen::Index k = 0; k < r.mu.cols(); ++k) out[tag + ".mu[" + std::to_string(k) + "]"] = r.mu.col(k);
    out[tag + ".gamma2"] = r.gamma2;
    out[tag + ".nu"] = r.nu;
    out[tag + ".tau2"] = r.tau2;
  }
  return out;
}

// Posterior means within 4 batch-means se; spreads too for Gaussian latents.
std::size_t oracle_compare(Checks& c, const std::string& tag, const Chain& chain, const OracleResult& oracle,
                           bool spread) {
  const auto draws = series(chain);
  std::size_t compared = 0;
  for (std::size_t i = 0; i < oracle.names.size(); ++i) {
    const auto it = draws.find(oracle.names[i]);
    if (it == draws.end()) continue;
    const auto& name = oracle.names[i];
    const Eigen::VectorXd& x = it->second;
    const double m = oracle.mean[static_cast<Eigen::Index>(i)];
    const double z = std::abs(x.mean() - m) / mc_standard_error(x, 50);
    c.expect(z <= 4.0, tag + " " + name + " mean off by " + fmt(z, 3) + " se");
    const bool scale = name.find("sigma2") != std::string::npos || name.find("gamma2") != std::string::npos ||
                       name.find("tau2") != std::string::npos;
    if (spread && !scale) {
      const Eigen::VectorXd dev2 = (x.array() - m).square().matrix();
      const double zv = std::abs(dev2.mean() - oracle.var[static_cast<Eigen::Index>(i)]) / mc_standard_error(dev2, 50);
      c.expect(zv <= 4.0, tag + " " + name + " variance off by " + fmt(zv, 3) + " se");
    }
    ++compared;
  }
  c.expect(compared >= 5, tag + " compared only " + std::to_string(compared));
  return compared;
}

VarianceValues prior_mean_variances(const HyperParameters& h, std::size_t n) {
  VarianceValues v;
  v.sigma2_Y.assign(n, h.measurement.mean());
  v.sigma2.assign(n, h.model.mean());
  v.gamma2 = {h.history.mean(), h.history.mean()};
  v.tau2 = {h.flow.mean(), h.flow.mean()};
  return v;
}

std::size_t check_oracles(Checks& c) {
  const std::vector<BoreholeProfile> tiny{small_profile("a", Region::Desert, 6, 20.0, 91, 0.055),
                                          small_profile("b", Region::Desert, 6, 20.0, 92, 0.065),
                                          small_profile("c", Region::Swell, 6, 20.0, 93, 0.07)};
  std::size_t compared = 0;
  struct Case {
    const char* tag;
    std::vector<VarianceSlot> free;
    FrozenBlocks frozen;
    bool spread;
  };
  const std::vector<Case> cases{
      {"fixed-variances", {}, {true, true, true}, true},
      {"gamma2-free", {{VarianceComponent::History, 0}, {VarianceComponent::History, 1}}, {true, false, true}, true},
      {"tau2-free", {{VarianceComponent::Flow, 0}, {VarianceComponent::Flow, 1}}, {true, true, false}, false},
  };
  std::uint64_t seed = 2024;
  for (const auto& k : cases) {
    OracleProblem problem;
    problem.profiles = tiny;
    problem.setup = small_setup();
    problem.fixed = prior_mean_variances(problem.hyper, 3);
    problem.free = k.free;
    const auto oracle = oracle_posterior_tiny(problem);
    SamplerConfig cfg{202000, 2000, 1, seed++};
    cfg.frozen = k.frozen;
    compared += oracle_compare(c, k.tag, run_chain(problem.profiles, problem.setup, problem.hyper, cfg), oracle, k.spread);
  }
  OracleProblem single;
  single.profiles = {small_profile("s", Region::Desert, 12, 10.0, 94, 0.06)};
  single.setup = small_setup();
  single.single_site = marginalize_single_site(single.hyper, Region::Desert, 2);
  single.fixed = prior_mean_variances(single.hyper, 1);
  single.free = {{VarianceComponent::Measurement, 0}, {VarianceComponent::Model, 0}};
  const auto oracle = oracle_posterior_tiny(single);
  const SamplerConfig cfg{202000, 2000, 1, seed};
  compared += oracle_compare(c, "single-site",
                             run_single_site(single.profiles[0], *single.single_site, single.setup, single.hyper, cfg),
                             oracle, false);
  return compared;
}

Outcome conditionals() {
  const auto t0 = Clock::now();
  Checks c;
  check_block(c);
  check_error_variances(c);
  check_region_means(c);
  check_scale_variances(c);
  check_heat_flow(c);
  check_flow_means(c);
  const auto compared = check_oracles(c);
  const double t = seconds_since(t0);
  c.expect(t < 300.0, "runtime " + fmt(t) + " s");
  return from_checks(c, "8 conditionals at 1e5 draws, " + std::to_string(compared) +
                            " oracle comparisons over 4 chains, " + fmt(t, 3) + " s");
}

// ---------------------------------------------------------------- chains

ModelSetup setup_for(const SyntheticTruth& truth) {
  ModelSetup s;
  s.breakpoints = truth.breakpoints;
  s.kappa = truth.kappa;
  s.depth_unit = truth.depth_unit;
  return s;
}

Outcome phi_zero_identity() {
  const auto truth = sanrafael_synthetic_truth();
  Rng rng(606);
  const auto profiles = simulate_dataset(truth, rng);
  const auto setup = setup_for(truth);
  const SamplerConfig cfg{1000, 0, 1, 606, true};
  const HyperParameters base;
  const auto baseline = run_chain(build_site_models(profiles, setup, {}), base, cfg);
  HyperParameters ar = base;
  ar.phi = 0.0;
  const auto with_ar = run_chain(profiles, setup, ar, cfg);
  Checks c;
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    const auto& a = baseline.sites[j];
    const auto& b = with_ar.sites[j];
    c.expect(a.T_h == b.T_h && a.T_r == b.T_r && a.q0 == b.q0 && a.sigma2_Y == b.sigma2_Y && a.sigma2 == b.sigma2,
             a.site_id + " draws differ");
  }
  for (std::size_t r = 0; r < baseline.regions.size(); ++r) {
    const auto& a = baseline.regions[r];
    const auto& b = with_ar.regions[r];
    c.expect(a.mu == b.mu && a.gamma2 == b.gamma2 && a.nu == b.nu && a.tau2 == b.tau2, "region draws differ");
  }
  return from_checks(c, "9 sites x 1000 iterations, every stored draw including T_r");
}

Outcome synthetic_recovery() {
  Checks c;
  const auto truth = sanrafael_synthetic_truth();
  const auto setup = setup_for(truth);
  const HyperParameters hyper;

  Rng rng(7001);
  auto t0 = Clock::now();
  const auto full = fit(Variant::MultiSite, simulate_dataset(truth, rng), setup, hyper, {30000, 2000, 1, 7001});
  const double t_full = seconds_since(t0);
  c.expect(full.size() == 28000, "stored draws");
  c.expect(t_full < 1800.0, "full run " + fmt(t_full) + " s");

  const std::size_t reps = 30;
  const auto K = static_cast<Eigen::Index>(truth.breakpoints.size());
  std::size_t covered = 0, total = 0;
  std::vector<std::size_t> per_element(truth.sites.size() * static_cast<std::size_t>(K), 0);
  std::size_t smear_ok = 0, smear_total = 0;
  Rng base(7100);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng data = base.split(r);
    const auto chain = fit(Variant::MultiSite, simulate_dataset(truth, data), setup, hyper, {5000, 1000, 1, 7200 + r});
    for (std::size_t j = 0; j < truth.sites.size(); ++j) {
      const auto& s = chain.sites[j];
      for (Eigen::Index k = 0; k < K; ++k) {
        const auto ci = credible_interval(s.T_h.col(k), 0.9);
        const double v = truth.sites[j].history[k];
        const bool in = ci.lower <= v && v <= ci.upper;
        covered += in;
        per_element[j * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)] += in;
        ++total;
      }
      const auto sd = [&](Eigen::Index k) {
        const Eigen::ArrayXd x = s.T_h.col(k).array();
        return std::sqrt((x - x.mean()).square().sum() / static_cast<double>(x.size() - 1));
      };
      const bool ok = sd(K - 1) < sd(0);
      smear_ok += ok;
      ++smear_total;
      c.expect(ok, "replicate " + std::to_string(r) + " " + s.site_id + " sd latest " + fmt(sd(K - 1)) +
                       " >= earliest " + fmt(sd(0)));
    }
  }
  const double coverage = static_cast<double>(covered) / static_cast<double>(total);
  const auto worst = *std::min_element(per_element.begin(), per_element.end());
  c.expect(coverage >= 0.80, "pooled coverage " + fmt(coverage));
  return from_checks(c, "30k-iteration run " + fmt(t_full, 3) + " s; 90% CI coverage " + fmt(coverage, 4) + " over " +
                            std::to_string(total) + " (replicate, site, interval) cells, lowest single element " +
                            std::to_string(worst) + "/" + std::to_string(reps) + "; smearing holds in " +
                            std::to_string(smear_ok) + "/" + std::to_string(smear_total) + " site-replicates");
}

Outcome borrowing_strength() {
  auto truth = sanrafael_synthetic_truth();
  // Desert sites share nearly the same history.
  Rng scatter(8001);
  for (auto& s : truth.sites) {
    if (s.region == Region::Desert) s.history = truth.region_means[0] + 0.05 * scatter.normal_vector(s.history.size());
  }
  Rng rng(8002);
  const auto profiles = simulate_dataset(truth, rng);
  const auto setup = setup_for(truth);
  const SamplerConfig cfg{20000, 2000, 1, 8003};
  const auto multi = fit(Variant::MultiSite, profiles, setup, {}, cfg);
  const auto single = fit(Variant::SingleSite, profiles, setup, {}, cfg);
  double w_multi = 0.0, w_single = 0.0;
  std::string per_site;
  Checks c;
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    if (profiles[j].region != Region::Desert) continue;
    double m = 0.0, s = 0.0;
    for (Eigen::Index k = 0; k < multi.sites[j].T_h.cols(); ++k) {
      m += credible_interval(multi.sites[j].T_h.col(k), 0.9).width();
      s += credible_interval(single.sites[j].T_h.col(k), 0.9).width();
    }
    w_multi += m;
    w_single += s;
    per_site += (per_site.empty() ? "" : " ") + profiles[j].site_id + "=" + fmt(m / s, 3);
  }
  const double ratio = w_multi / w_single;
  c.expect(ratio < 1.0, "width ratio " + fmt(ratio));
  return from_checks(c, "Desert multi/single 90% CI width ratio " + fmt(ratio, 4) + " (" + per_site + ")");
}

RunConfig materialize(const fs::path& dir, const SyntheticTruth& truth, std::uint64_t seed) {
  Rng rng(seed);
  const auto profiles = simulate_dataset(truth, rng);
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    write_profile_csv(dir / (truth.sites[j].site_id + "_profile.csv"), profiles[j]);
    write_layers_csv(dir / (truth.sites[j].site_id + "_layers.csv"), truth.sites[j].layers);
  }
  write_text(dir / "run.toml", run_config_for(truth, seed));
  return load_run_config(dir / "run.toml");
}

Outcome sensitivity_machinery() {
  Checks c;
  auto cfg = materialize(scratch("sweep"), sanrafael_synthetic_truth(), 9001);
  cfg.sampler = {30000, 2000, 1, 9001};
  const auto profiles = load_profiles(cfg);

  const auto t4 = sensitivity_sweep(cfg, profiles, SweepPlan::Table4);
  std::string sds;
  for (const char* name : {"D.nu", "S.nu"}) {
    double prev = -1.0;
    sds += std::string(sds.empty() ? "" : "; ") + name + " sd";
    for (const auto& v : t4.variants) {
      c.expect(v.ok, v.label + " failed: " + v.message);
      if (!v.ok) continue;
      const double sd = 1000 * v.summary.at(name).sd;
      sds += " " + fmt(sd, 4);
      c.expect(sd > prev, std::string(name) + " sd not increasing at " + v.label);
      prev = sd;
    }
  }

  const auto t0 = sensitivity_sweep(cfg, profiles, SweepPlan::T0);
  c.expect(t0.variants.size() == 3 && t0.variants[0].ok && t0.variants[1].ok && t0.variants[2].ok, "T0 sweep failed");
  std::size_t opposite = 0;
  if (c.ok()) {
    for (const auto& p : profiles) {
      const std::string name = p.site_id + ".q0";
      const double lo = t0.variants[0].summary.at(name).mean;
      const double mid = t0.variants[1].summary.at(name).mean;
      const double hi = t0.variants[2].summary.at(name).mean;
      const bool ok = lo > mid && mid > hi;
      opposite += ok;
      c.expect(ok, p.site_id + " q0 " + fmt(1000 * lo) + "/" + fmt(1000 * mid) + "/" + fmt(1000 * hi));
    }
  }
  return from_checks(c, sds + " (mW/m^2); q0 moves against T0 at " + std::to_string(opposite) + "/" +
                            std::to_string(profiles.size()) + " sites");
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_text(e.path());
  }
  return files;
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

// Two consecutive runs into the same directory; the manifest's wall-clock
// field is the only content allowed to differ.
Outcome determinism() {
  Checks c;
  const auto dir = scratch("determinism");
  write_text(dir / "truth.toml", "[simulate]\npreset = \"sanrafael\"\n");
  const auto out = dir / "out";
  const auto run = [&] {
    fs::remove_all(out);
    c.expect(cli({"simulate", "--config", (dir / "truth.toml").string(), "--seed", "31", "--out", (out / "data").string()}) == 0,
             "simulate");
    const auto config = (out / "data" / "run.toml").string();
    c.expect(cli({"fit-multi", "--config", config, "--n-iter", "4000", "--n-burn", "1000", "--out",
                  (out / "multi").string()}) == 0,
             "fit-multi");
    c.expect(cli({"fit-single", "--config", config, "--n-iter", "3000", "--n-burn", "500", "--out",
                  (out / "single").string()}) == 0,
             "fit-single");
    c.expect(cli({"sensitivity", "--plan", "t0", "--config", config, "--n-iter", "2000", "--n-burn", "500", "--out",
                  (out / "t0").string()}) == 0,
             "sensitivity");
    return tree(out);
  };
  auto a = run();
  auto b = run();
  c.expect(a.size() == b.size() && !a.empty(), "file sets differ");
  std::size_t identical = 0, manifests = 0;
  for (const auto& [name, text] : a) {
    const auto it = b.find(name);
    if (it == b.end()) {
      c.expect(false, name + " missing in second run");
      continue;
    }
    if (fs::path(name).filename() == "manifest.json") {
      auto ma = nlohmann::json::parse(text);
      auto mb = nlohmann::json::parse(it->second);
      c.expect(ma.contains("wall_time_s") && mb.contains("wall_time_s"), name + " lacks wall_time_s");
      ma.erase("wall_time_s");
      mb.erase("wall_time_s");
      c.expect(ma == mb, name + " differs beyond wall time");
      ++manifests;
      continue;
    }
    identical += text == it->second;
    c.expect(text == it->second, name + " differs");
  }
  return from_checks(c, std::to_string(identical) + " output files byte-identical across two runs; " +
                            std::to_string(manifests) + " manifests equal apart from wall time");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"prior elicitation and sd quantiles", prior_elicitation},
      {"joint prior constructors", joint_priors},
      {"single-site marginal prior", single_site_marginal},
      {"forward operator row sums and linearity", forward_properties},
      {"full conditionals and oracle agreement", conditionals},
      {"phi = 0 equivalence", phi_zero_identity},
      {"synthetic recovery", synthetic_recovery},
      {"borrowing strength", borrowing_strength},
      {"sensitivity sweeps", sensitivity_machinery},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " ("
              << o.detail << ")" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
