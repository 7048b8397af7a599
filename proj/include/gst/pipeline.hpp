#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gst/forward_model.hpp"
#include "gst/gibbs.hpp"
#include "gst/priors.hpp"

namespace gst {

/// Per-site seed for independent single-site chains.
std::uint64_t site_seed(std::uint64_t seed, std::size_t site);

/// Fits either variant. Single-site fits run one chain per borehole with the
/// marginal prior of its region, each with its own seed, and are merged.
Chain fit(Variant variant, const std::vector<BoreholeProfile>& profiles, const ModelSetup& setup,
          const HyperParameters& hyper, const SamplerConfig& sampler);

/// Writes summary.csv/json, q0_table.csv, temperature_change.csv,
/// residuals.csv, residual_ar1.csv and density_*.csv for a fitted chain.
/// Residual files are skipped when `profiles` is empty.
void write_reports(const std::filesystem::path& dir, const Chain& chain,
                   const std::vector<BoreholeProfile>& profiles);

}  // namespace gst
