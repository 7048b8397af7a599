#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gst/config.hpp"
#include "gst/gibbs.hpp"
#include "gst/posterior.hpp"

namespace gst {

enum class SweepPlan { T0, Table4, Table5, Phi };

/// "t0", "table4", "table5" or "phi".
SweepPlan parse_plan(const std::string& name);
std::string to_string(SweepPlan plan);

/// One setting of a sweep: hyperparameters plus per-site surface-intercept shifts.
struct SweepVariant {
  std::string label;
  HyperParameters hyper;
  std::vector<double> T0_shift;  // degC, one per site; empty means none
};

/// Flow-mean prior variances (eta2_D = eta2_S, eta2_0) in (mW/m^2)^2.
struct FlowPriorSetting {
  const char* label;
  double eta2_region;
  double eta2_shared;
};
/// History-mean prior variances (sigma2_D = sigma2_S, sigma2_0).
struct HistoryPriorSetting {
  const char* label;
  double sigma2_region;
  double sigma2_shared;
};

const std::vector<FlowPriorSetting>& flow_prior_settings();
const std::vector<HistoryPriorSetting>& history_prior_settings();

std::vector<SweepVariant> build_plan(SweepPlan plan, const RunConfig& base,
                                     const std::vector<BoreholeProfile>& profiles);

struct VariantOutcome {
  std::string label;
  bool ok = false;
  std::string error_kind;
  std::string message;
  std::optional<Chain> chain;
  SummaryTable summary;
};

struct SweepReport {
  SweepPlan plan = SweepPlan::T0;
  std::vector<VariantOutcome> variants;

  /// variant,parameter,mean,sd,lower50,upper50,lower90,upper90 for every
  /// successful variant.
  std::string comparison_csv() const;
  std::string status_csv() const;
};

/// Runs one chain per variant (up to `threads` at a time, same seed for all).
/// A failing variant is recorded and does not stop the others. When `out_dir`
/// is set each variant writes its chain and reports to out_dir/<label>/.
SweepReport sensitivity_sweep(const RunConfig& base, const std::vector<BoreholeProfile>& profiles, SweepPlan plan,
                              const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                              std::size_t threads = 1, bool keep_chains = false);

}  // namespace gst
