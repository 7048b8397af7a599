#include "gst/cli.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "gst/config.hpp"
#include "gst/error.hpp"
#include "gst/io.hpp"
#include "gst/pipeline.hpp"
#include "gst/preprocessing.hpp"
#include "gst/sensitivity.hpp"
#include "gst/synthetic.hpp"

namespace gst {
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string chain;
  std::string plan;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_iter;
  std::optional<std::size_t> n_burn;
  std::optional<std::size_t> thin;
  std::size_t threads = 0;
};

void error_record(std::ostream& err, std::string_view kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  err << j.dump() << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

constexpr std::size_t kSingleSiteIterations = 10000;

RunConfig load_with_overrides(const Options& o, std::optional<Variant> variant = std::nullopt) {
  if (o.config.empty()) throw Error(ErrorKind::Config, "--config is required");
  RunConfig cfg = load_run_config(o.config);
  if (variant) cfg.variant = *variant;
  if (cfg.variant == Variant::SingleSite && !cfg.has_n_iter) cfg.sampler.n_iter = kSingleSiteIterations;
  if (o.seed) {
    cfg.sampler.seed = *o.seed;
    cfg.has_seed = true;
  }
  if (!cfg.has_seed) throw Error(ErrorKind::Config, "no seed: set [run].seed or pass --seed");
  if (o.n_iter) cfg.sampler.n_iter = *o.n_iter;
  if (o.n_burn) cfg.sampler.n_burn = *o.n_burn;
  if (o.thin) cfg.sampler.thin = *o.thin;
  if (o.threads) cfg.sensitivity.threads = o.threads;
  cfg.sampler.validate();
  return cfg;
}

RunManifest manifest_for(const std::string& command, const RunConfig& cfg, Variant variant, double phi) {
  RunManifest m;
  m.command = command;
  m.config_path = cfg.source.string();
  m.config_hash = cfg.hash;
  m.seed = cfg.sampler.seed;
  m.variant = to_string(variant);
  m.phi = phi;
  m.n_iter = cfg.sampler.n_iter;
  m.n_burn = cfg.sampler.n_burn;
  m.thin = cfg.sampler.thin;
  m.kappa = cfg.setup.kappa;
  return m;
}

int cmd_preprocess(const Options& o, std::ostream& out) {
  if (o.config.empty()) throw Error(ErrorKind::Config, "--config is required");
  const auto cfg = load_run_config(o.config);
  const auto profiles = load_profiles(cfg);
  const fs::path dir = o.out.empty() ? "preprocess" : o.out;
  std::string table = "site,region,cutoff_m,n_used,T0_hat,se_T0,q0_hat_mW,se_q0_mW,T0_configured\n";
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    const auto& p = profiles[j];
    const double cutoff = cfg.sites[j].cutoff ? *cfg.sites[j].cutoff : default_cutoff(p.region);
    const auto fit = estimate_intercept_and_flow(p, cutoff);
    table += p.site_id + "," + to_string(p.region) + "," + format_double(cutoff) + "," + std::to_string(fit.n_used) +
             "," + format_double(fit.T0_hat) + "," + format_double(fit.se_T0) + "," +
             format_double(1000.0 * fit.q0_hat) + "," + format_double(1000.0 * fit.se_q0) + "," +
             format_double(p.T0) + "\n";
    const auto reduced = reduced_estimates(p, p.T0, fit.q0_hat);
    std::string red = "depth_m,reduced_C\n";
    for (Eigen::Index i = 0; i < reduced.size(); ++i) {
      red += format_double(p.depths[i]) + "," + format_double(reduced[i]) + "\n";
    }
    write_text(dir / ("reduced_" + p.site_id + ".csv"), red);
  }
  write_text(dir / "deep_regression.csv", table);
  out << "wrote " << (dir / "deep_regression.csv").string() << '\n';
  return 0;
}

int cmd_fit(const Options& o, Variant variant, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto cfg = load_with_overrides(o, variant);
  const auto profiles = load_profiles(cfg);
  const fs::path dir = o.out.empty() ? "results" : o.out;
  const Chain chain = fit(variant, profiles, cfg.setup, cfg.hyper, cfg.sampler);
  write_chain(dir, chain);
  write_reports(dir, chain, profiles);
  auto m = manifest_for(variant == Variant::SingleSite ? "fit-single" : "fit-multi", cfg, variant, cfg.hyper.phi);
  m.wall_time_s = seconds_since(start);
  write_manifest(dir / "manifest.json", m);
  out << "stored " << chain.size() << " draws for " << chain.sites.size() << " sites in " << dir.string() << '\n';
  return 0;
}

int cmd_sensitivity(const Options& o, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  if (o.plan.empty()) throw Error(ErrorKind::Config, "--plan is required (t0, table4, table5, phi)");
  const auto plan = parse_plan(o.plan);
  const auto cfg = load_with_overrides(o);
  const auto profiles = load_profiles(cfg);
  const fs::path dir = o.out.empty() ? fs::path("sensitivity") / o.plan : fs::path(o.out);
  const auto report = sensitivity_sweep(cfg, profiles, plan, dir, cfg.sensitivity.threads);
  auto m = manifest_for("sensitivity " + o.plan, cfg, cfg.variant, cfg.hyper.phi);
  m.wall_time_s = seconds_since(start);
  write_manifest(dir / "manifest.json", m);

  std::size_t failed = 0;
  for (const auto& v : report.variants) {
    out << v.label << ": " << (v.ok ? "ok" : "failed (" + v.error_kind + ")") << '\n';
    failed += v.ok ? 0 : 1;
  }
  if (failed) {
    error_record(err, "sweep", std::to_string(failed) + " of " + std::to_string(report.variants.size()) +
                                   " variants failed; see status.csv");
    return 1;
  }
  return 0;
}

int cmd_summarize(const Options& o, std::ostream& out) {
  if (o.chain.empty()) throw Error(ErrorKind::Config, "--chain is required");
  const Chain chain = read_chain(o.chain);
  std::vector<BoreholeProfile> profiles;
  if (!o.config.empty()) profiles = load_profiles(load_run_config(o.config));
  const fs::path dir = o.out.empty() ? fs::path(o.chain) : fs::path(o.out);
  write_reports(dir, chain, profiles);
  out << "wrote summaries for " << chain.size() << " draws to " << dir.string() << '\n';
  return 0;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  if (o.config.empty()) throw Error(ErrorKind::Config, "--config is required");
  auto cfg = load_simulate_config(o.config);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.has_seed = true;
  }
  if (!cfg.has_seed) throw Error(ErrorKind::Config, "no seed: set [simulate].seed or pass --seed");
  const fs::path dir = o.out.empty() ? "simulated" : o.out;
  Rng rng(cfg.seed);
  const auto profiles = simulate_dataset(cfg.truth, rng);

  std::string truth = "site,region,q0_mW,T0,log_year";
  for (double t : cfg.truth.breakpoints) truth += ",h_" + format_double(t);
  truth += "\n";
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    const auto& s = cfg.truth.sites[j];
    write_profile_csv(dir / (s.site_id + "_profile.csv"), profiles[j]);
    write_layers_csv(dir / (s.site_id + "_layers.csv"), s.layers);
    truth += s.site_id + "," + to_string(s.region) + "," + format_double(1000.0 * s.q0) + "," + format_double(s.T0) +
             "," + format_double(s.log_year);
    for (Eigen::Index k = 0; k < s.history.size(); ++k) truth += "," + format_double(s.history[k]);
    truth += "\n";
  }
  write_text(dir / "truth.csv", truth);
  write_text(dir / "run.toml", run_config_for(cfg.truth, cfg.seed));
  out << "simulated " << profiles.size() << " boreholes into " << dir.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ground-surface temperature histories from borehole profiles", "gst"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(GST_VERSION));
  Options o;

  auto common = [&](CLI::App* sub, bool sampler) {
    sub->add_option("--config", o.config, "TOML configuration file");
    sub->add_option("--out", o.out, "output directory");
    if (sampler) {
      sub->add_option("--seed", o.seed, "random seed (overrides the config)");
      sub->add_option("--n-iter", o.n_iter, "total iterations");
      sub->add_option("--n-burn", o.n_burn, "burn-in iterations");
      sub->add_option("--thin", o.thin, "keep every thin-th draw after burn-in");
    }
  };
  auto* pre = app.add_subcommand("preprocess", "deep-segment regression and reduced temperatures");
  common(pre, false);
  auto* single = app.add_subcommand("fit-single", "independent single-borehole fits");
  common(single, true);
  auto* multi = app.add_subcommand("fit-multi", "joint hierarchical fit of all boreholes");
  common(multi, true);
  auto* sens = app.add_subcommand("sensitivity", "refit under alternative settings");
  common(sens, true);
  sens->add_option("--plan", o.plan, "t0 | table4 | table5 | phi");
  sens->add_option("--threads", o.threads, "concurrent chains");
  auto* summ = app.add_subcommand("summarize", "posterior summaries of a stored chain");
  summ->add_option("--chain", o.chain, "directory written by fit-single/fit-multi");
  summ->add_option("--config", o.config, "run configuration (enables residuals)");
  summ->add_option("--out", o.out, "output directory (default: the chain directory)");
  auto* sim = app.add_subcommand("simulate", "synthetic borehole profiles from a known truth");
  sim->add_option("--config", o.config, "TOML truth file");
  sim->add_option("--seed", o.seed, "random seed (overrides the config)");
  sim->add_option("--out", o.out, "output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << GST_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    error_record(err, "usage", e.what());
    return 2;
  }

  try {
    if (*pre) return cmd_preprocess(o, out);
    if (*single) return cmd_fit(o, Variant::SingleSite, out);
    if (*multi) return cmd_fit(o, Variant::MultiSite, out);
    if (*sens) return cmd_sensitivity(o, out, err);
    if (*summ) return cmd_summarize(o, out);
    if (*sim) return cmd_simulate(o, out);
  } catch (const Error& e) {
    error_record(err, to_string(e.kind()), e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    error_record(err, "io", e.what());
    return 1;
  } catch (const std::exception& e) {
    error_record(err, "internal", e.what());
    return 1;
  }
  return 2;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace gst
