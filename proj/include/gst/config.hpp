#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gst/forward_model.hpp"
#include "gst/gibbs.hpp"
#include "gst/io.hpp"
#include "gst/priors.hpp"
#include "gst/synthetic.hpp"

namespace gst {

struct SiteConfig {
  BoreholeMetadata metadata;
  std::filesystem::path profile;          // resolved against the config directory
  std::filesystem::path layers_file;      // empty when layers are inline
  std::vector<Layer> layers;              // inline layers
  std::optional<double> cutoff;           // deep-segment cutoff override [m]
};

struct SensitivitySettings {
  std::vector<double> t0_offsets_se{-3.0, 0.0, 3.0};
  std::vector<double> phi{0.0, 0.65, 0.85};
  std::size_t threads = 1;
};

/// Parsed and validated run configuration.
///
///   [run]      variant, n_iter, n_burn, thin, seed, store_reduced
///   [model]    breakpoints, kappa, depth_unit, phi, hyper_profile
///   [hyper]    overrides of individual hyperparameters
///   [[site]]   id, region, profile, layers (path or [[bottom, k], ...]), T0, log_year, cutoff
///   [sensitivity] t0_offsets_se, phi, threads
struct RunConfig {
  std::filesystem::path source;
  std::string hash;  // hex digest of the config text
  Variant variant = Variant::MultiSite;
  SamplerConfig sampler;
  bool has_seed = false;
  bool has_n_iter = false;  // n_iter given explicitly
  ModelSetup setup;
  HyperParameters hyper;
  std::vector<SiteConfig> sites;
  SensitivitySettings sensitivity;

  void validate() const;
};

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir,
                           const std::string& source_name = "<string>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Loads every site listed in the configuration.
std::vector<BoreholeProfile> load_profiles(const RunConfig& config);

/// Looks up a named hyperparameter profile ("sanrafael-default").
HyperParameters hyper_profile(const std::string& name);

/// 64-bit FNV-1a digest as 16 hex characters.
std::string content_hash(const std::string& text);

/// Synthetic-data configuration:
///   [simulate] seed, sigma_Y, sigma, noise_phi, depth_unit, kappa, breakpoints, preset
///   [[site]]   id, region, T0, log_year, q0 (mW/m^2), layers, depth_start, depth_step, depth_end, history
/// With preset = "sanrafael" the built-in nine-site truth is used and [[site]] is optional.
struct SimulateConfig {
  SyntheticTruth truth;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

SimulateConfig parse_simulate_config(const std::string& text, const std::string& source_name = "<string>");
SimulateConfig load_simulate_config(const std::filesystem::path& path);

/// TOML text of a run configuration fitting the given simulated sites, whose
/// profile and layer files are expected next to it.
std::string run_config_for(const SyntheticTruth& truth, std::uint64_t seed);

}  // namespace gst
