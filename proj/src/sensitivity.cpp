#include "gst/sensitivity.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "gst/error.hpp"
#include "gst/io.hpp"
#include "gst/pipeline.hpp"
#include "gst/preprocessing.hpp"

namespace gst {
namespace fs = std::filesystem;

namespace {

constexpr double kMilli2 = 1e-6;  // (mW/m^2)^2 -> (W/m^2)^2

std::string signed_label(const std::string& stem, double x) {
  std::ostringstream os;
  os << stem << (x < 0 ? "-" : "+") << std::abs(x);
  return os.str();
}

std::string phi_label(double phi) {
  std::ostringstream os;
  os << "phi=" << phi;
  return os.str();
}

}  // namespace

SweepPlan parse_plan(const std::string& name) {
  if (name == "t0") return SweepPlan::T0;
  if (name == "table4") return SweepPlan::Table4;
  if (name == "table5") return SweepPlan::Table5;
  if (name == "phi") return SweepPlan::Phi;
  throw Error(ErrorKind::InvalidArgument, "unknown sensitivity plan '" + name + "' (t0, table4, table5, phi)");
}

std::string to_string(SweepPlan plan) {
  switch (plan) {
    case SweepPlan::T0: return "t0";
    case SweepPlan::Table4: return "table4";
    case SweepPlan::Table5: return "table5";
    case SweepPlan::Phi: return "phi";
  }
  return {};
}

const std::vector<FlowPriorSetting>& flow_prior_settings() {
  static const std::vector<FlowPriorSetting> rows{
      {"original", 10.0 * 10.0, 20.0 * 20.0}, {"setting1", 20.0 * 20.0, 20.0 * 20.0},
      {"setting2", 30.0 * 30.0, 20.0 * 20.0}, {"setting3", 100.0 * 100.0, 0.0},
      {"setting4", 100.0 * 100.0, 67.0 * 67.0},
  };
  return rows;
}

const std::vector<HistoryPriorSetting>& history_prior_settings() {
  static const std::vector<HistoryPriorSetting> rows{
      {"original", 0.2, 0.1}, {"setting1", 0.1, 0.1}, {"setting2", 0.2, 0.0}, {"setting3", 0.3, 0.15}};
  return rows;
}

std::vector<SweepVariant> build_plan(SweepPlan plan, const RunConfig& base,
                                     const std::vector<BoreholeProfile>& profiles) {
  std::vector<SweepVariant> out;
  switch (plan) {
    case SweepPlan::T0: {
      std::vector<double> se;
      for (std::size_t j = 0; j < profiles.size(); ++j) {
        const auto& p = profiles[j];
        const auto cutoff =
            j < base.sites.size() && base.sites[j].cutoff ? *base.sites[j].cutoff : default_cutoff(p.region);
        se.push_back(estimate_intercept_and_flow(p, cutoff).se_T0);
      }
      for (double k : base.sensitivity.t0_offsets_se) {
        SweepVariant v{signed_label("T0", k) + "SE", base.hyper, {}};
        for (double s : se) v.T0_shift.push_back(k * s);
        out.push_back(std::move(v));
      }
      break;
    }
    case SweepPlan::Table4:
      for (const auto& row : flow_prior_settings()) {
        SweepVariant v{row.label, base.hyper, {}};
        v.hyper.eta2_D = v.hyper.eta2_S = row.eta2_region * kMilli2;
        v.hyper.eta2_0 = row.eta2_shared * kMilli2;
        out.push_back(std::move(v));
      }
      break;
    case SweepPlan::Table5:
      for (const auto& row : history_prior_settings()) {
        SweepVariant v{row.label, base.hyper, {}};
        v.hyper.sigma2_D = v.hyper.sigma2_S = row.sigma2_region;
        v.hyper.sigma2_0 = row.sigma2_shared;
        out.push_back(std::move(v));
      }
      break;
    case SweepPlan::Phi:
      for (double phi : base.sensitivity.phi) {
        SweepVariant v{phi_label(phi), base.hyper, {}};
        v.hyper.phi = phi;
        out.push_back(std::move(v));
      }
      break;
  }
  return out;
}

std::string SweepReport::comparison_csv() const {
  std::string text = "variant,parameter,mean,sd,lower50,upper50,lower90,upper90\n";
  for (const auto& v : variants) {
    if (!v.ok) continue;
    for (const auto& r : v.summary.rows) {
      text += v.label + "," + r.name + "," + format_double(r.mean) + "," + format_double(r.sd);
      for (const auto& ci : r.intervals) text += "," + format_double(ci.lower) + "," + format_double(ci.upper);
      text += "\n";
    }
  }
  return text;
}

std::string SweepReport::status_csv() const {
  std::string text = "variant,status,error,message\n";
  for (const auto& v : variants) {
    std::string msg = v.message;
    for (char& c : msg) {
      if (c == '"') c = '\'';
    }
    text += v.label + "," + (v.ok ? "ok" : "failed") + "," + v.error_kind + ",\"" + msg + "\"\n";
  }
  return text;
}

SweepReport sensitivity_sweep(const RunConfig& base, const std::vector<BoreholeProfile>& profiles, SweepPlan plan,
                              const std::optional<fs::path>& out_dir, std::size_t threads, bool keep_chains) {
  const auto variants = build_plan(plan, base, profiles);
  SweepReport report;
  report.plan = plan;
  report.variants.resize(variants.size());

  auto run_one = [&](std::size_t i) {
    const auto& v = variants[i];
    auto& outcome = report.variants[i];
    outcome.label = v.label;
    try {
      auto shifted = profiles;
      for (std::size_t j = 0; j < v.T0_shift.size() && j < shifted.size(); ++j) shifted[j].T0 += v.T0_shift[j];
      Chain chain = fit(base.variant, shifted, base.setup, v.hyper, base.sampler);
      outcome.summary = summarize(chain);
      if (out_dir) {
        const auto dir = *out_dir / v.label;
        write_chain(dir, chain);
        write_reports(dir, chain, shifted);
      }
      if (keep_chains) outcome.chain = std::move(chain);
      outcome.ok = true;
    } catch (const Error& e) {
      outcome.error_kind = std::string(to_string(e.kind()));
      outcome.message = e.what();
    } catch (const std::exception& e) {
      outcome.error_kind = "internal";
      outcome.message = e.what();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, variants.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < variants.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < variants.size(); i = next++) run_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  if (out_dir) {
    write_text(*out_dir / "comparison.csv", report.comparison_csv());
    write_text(*out_dir / "status.csv", report.status_csv());
  }
  return report;
}

}  // namespace gst
