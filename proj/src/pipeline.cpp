#include "gst/pipeline.hpp"

#include <sstream>

#include "gst/error.hpp"
#include "gst/io.hpp"
#include "gst/posterior.hpp"

namespace gst {
namespace fs = std::filesystem;

std::uint64_t site_seed(std::uint64_t seed, std::size_t site) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(site) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Chain fit(Variant variant, const std::vector<BoreholeProfile>& profiles, const ModelSetup& setup,
          const HyperParameters& hyper, const SamplerConfig& sampler) {
  if (variant == Variant::MultiSite) return run_chain(profiles, setup, hyper, sampler);
  if (profiles.empty()) throw Error(ErrorKind::InvalidArgument, "no sites to fit");

  Chain merged;
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    const auto& p = profiles[j];
    const auto prior = marginalize_single_site(hyper, p.region, setup.breakpoints.size());
    SamplerConfig cfg = sampler;
    cfg.seed = site_seed(sampler.seed, j);
    Chain c = run_single_site(p, prior, setup, hyper, cfg);
    if (j == 0) {
      merged = std::move(c);
      merged.seed = sampler.seed;
    } else {
      merged.sites.push_back(std::move(c.sites.front()));
    }
  }
  return merged;
}

namespace {

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string out;
  for (const auto& c : cells) out += (out.empty() ? "" : ",") + c;
  return out + "\n";
}

void write_density(const fs::path& path, const Eigen::VectorXd& samples, double scale) {
  const Eigen::VectorXd x = samples * scale;
  std::string text = "x,density\n";
  try {
    const auto grid = density_grid(x);
    const auto dens = kde_density(x, grid);
    for (Eigen::Index i = 0; i < grid.size(); ++i) text += format_double(grid[i]) + "," + format_double(dens[i]) + "\n";
  } catch (const Error&) {
    // constant draws (e.g. frozen components) have no density
    return;
  }
  write_text(path, text);
}

}  // namespace

void write_reports(const fs::path& dir, const Chain& chain, const std::vector<BoreholeProfile>& profiles) {
  const auto table = summarize(chain);
  write_text(dir / "summary.csv", table.to_csv());
  write_text(dir / "summary.json", table.to_json());

  std::string q0 = "site,region,q0_mW,mean_mW,lower90_mW,upper90_mW\n";
  for (const auto& s : chain.sites) {
    const auto sum = summarize_samples("q0", s.q0 * 1000.0, {0.9});
    q0 += csv_row({s.site_id, to_string(s.region), "\"" + format_flow_mw(s.q0) + "\"", format_double(sum.mean),
                   format_double(sum.intervals[0].lower), format_double(sum.intervals[0].upper)});
    write_density(dir / ("density_q0_" + s.site_id + ".csv"), s.q0, 1000.0);
  }
  for (const auto& r : chain.regions) {
    const std::string tag = r.region == Region::Desert ? "D" : "S";
    const auto sum = summarize_samples("nu", r.nu * 1000.0, {0.9});
    q0 += csv_row({"nu_" + tag, to_string(r.region), "\"" + format_flow_mw(r.nu) + "\"", format_double(sum.mean),
                   format_double(sum.intervals[0].lower), format_double(sum.intervals[0].upper)});
    write_density(dir / ("density_nu_" + tag + ".csv"), r.nu, 1000.0);
  }
  write_text(dir / "q0_table.csv", q0);

  std::string change = "label,baseline,mean,sd,lower50,upper50,lower90,upper90\n";
  // Century baselines that fall inside the time grid.
  std::vector<double> baselines;
  for (double b : {1600.0, 1700.0, 1800.0, 1900.0}) {
    if (!chain.breakpoints.empty() && b >= chain.breakpoints.front()) baselines.push_back(b);
  }
  for (const auto& c : temperature_change(chain, baselines)) {
    const auto& s = c.summary;
    change += csv_row({c.label, format_double(c.baseline), format_double(s.mean), format_double(s.sd),
                       format_double(s.intervals[0].lower), format_double(s.intervals[0].upper),
                       format_double(s.intervals[1].lower), format_double(s.intervals[1].upper)});
  }
  write_text(dir / "temperature_change.csv", change);

  if (profiles.empty()) return;
  std::string res = "site,depth_m,residual\n";
  std::string ar1 = "site,phi_hat\n";
  for (const auto& s : chain.sites) {
    const BoreholeProfile* p = nullptr;
    for (const auto& candidate : profiles) {
      if (candidate.site_id == s.site_id) p = &candidate;
    }
    if (!p) throw Error(ErrorKind::InvalidArgument, "no profile for chain site '" + s.site_id + "'");
    const auto r = residuals(s, *p);
    for (Eigen::Index i = 0; i < r.point.size(); ++i) {
      res += csv_row({s.site_id, format_double(p->depths[i]), format_double(r.point[i])});
    }
    ar1 += csv_row({s.site_id, format_double(r.phi_hat)});
  }
  write_text(dir / "residuals.csv", res);
  write_text(dir / "residual_ar1.csv", ar1);
}

}  // namespace gst
