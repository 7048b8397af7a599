#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gst/forward_model.hpp"
#include "gst/gibbs.hpp"

namespace gst {

/// Site facts that do not live in the profile or layer files.
struct BoreholeMetadata {
  std::string site_id;
  Region region = Region::Desert;
  double T0 = 0.0;
  double log_year = 0.0;
};

/// Columns `depth_m,temp_C`. Errors carry the 1-based line number.
void read_profile_csv(const std::filesystem::path& path, Eigen::VectorXd& depths, Eigen::VectorXd& temps);
/// Columns `bottom_depth_m,conductivity_W_mK`; the last bottom may be `inf`.
std::vector<Layer> read_layers_csv(const std::filesystem::path& path);

BoreholeProfile load_borehole(const std::filesystem::path& profile_csv, const std::filesystem::path& layers_csv,
                              const BoreholeMetadata& metadata);

void write_profile_csv(const std::filesystem::path& path, const BoreholeProfile& profile);
void write_layers_csv(const std::filesystem::path& path, const std::vector<Layer>& layers);

/// Shortest text that parses back to the same double.
std::string format_double(double x);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// One CSV per parameter group plus chain.json describing the run:
///   site_<id>_history.csv, site_<id>_scalars.csv, site_<id>_reduced_mean.csv,
///   site_<id>_reduced.csv (when every T_r draw was kept), region_<D|S>.csv.
void write_chain(const std::filesystem::path& dir, const Chain& chain);
Chain read_chain(const std::filesystem::path& dir);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string variant;
  double phi = 0.0;
  std::size_t n_iter = 0;
  std::size_t n_burn = 0;
  std::size_t thin = 1;
  double kappa = kDefaultDiffusivity;
  double wall_time_s = 0.0;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

}  // namespace gst
