#include "gst/config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "toml.hpp"

#include "gst/error.hpp"

namespace gst {
namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::Config, msg); }

void reject_unknown(const toml::table& t, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, node] : t) {
    if (!allowed.count(std::string(key.str()))) fail(where + ": unknown key '" + std::string(key.str()) + "'");
  }
}

const toml::table* sub_table(const toml::table& root, const char* name) {
  const auto* node = root.get(name);
  if (!node) return nullptr;
  if (!node->is_table()) fail(std::string("'") + name + "' must be a table");
  return node->as_table();
}

std::optional<double> number(const toml::table& t, const char* key, const std::string& where) {
  const auto* node = t.get(key);
  if (!node) return std::nullopt;
  if (auto v = node->value<double>()) return *v;
  fail(where + "." + key + " must be a number");
}

double required_number(const toml::table& t, const char* key, const std::string& where) {
  auto v = number(t, key, where);
  if (!v) fail(where + ": missing '" + key + "'");
  return *v;
}

std::optional<std::int64_t> integer(const toml::table& t, const char* key, const std::string& where) {
  const auto* node = t.get(key);
  if (!node) return std::nullopt;
  if (!node->is_integer()) fail(where + "." + key + " must be an integer");
  return node->value<std::int64_t>();
}

std::size_t count(const toml::table& t, const char* key, const std::string& where, std::size_t fallback) {
  auto v = integer(t, key, where);
  if (!v) return fallback;
  if (*v < 0) fail(where + "." + key + " must be >= 0");
  return static_cast<std::size_t>(*v);
}

std::optional<std::string> string(const toml::table& t, const char* key, const std::string& where) {
  const auto* node = t.get(key);
  if (!node) return std::nullopt;
  if (!node->is_string()) fail(where + "." + key + " must be a string");
  return node->value<std::string>();
}

std::optional<bool> boolean(const toml::table& t, const char* key, const std::string& where) {
  const auto* node = t.get(key);
  if (!node) return std::nullopt;
  if (!node->is_boolean()) fail(where + "." + key + " must be true or false");
  return node->value<bool>();
}

std::vector<double> numbers(const toml::node& node, const std::string& where) {
  const auto* arr = node.as_array();
  if (!arr) fail(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& el : *arr) {
    auto v = el.value<double>();
    if (!v) fail(where + " must contain only numbers");
    out.push_back(*v);
  }
  return out;
}

std::optional<std::vector<double>> number_list(const toml::table& t, const char* key, const std::string& where) {
  const auto* node = t.get(key);
  if (!node) return std::nullopt;
  return numbers(*node, where + "." + key);
}

std::vector<Layer> inline_layers(const toml::array& arr, const std::string& where) {
  std::vector<Layer> layers;
  for (const auto& el : arr) {
    const auto pair = numbers(el, where);
    if (pair.size() != 2) fail(where + ": each layer is [bottom_depth_m, conductivity_W_mK]");
    layers.push_back({pair[0], pair[1]});
  }
  return layers;
}

InverseGamma ig_pair(const toml::table& t, const char* key, const InverseGamma& fallback, const std::string& where) {
  const auto* node = t.get(key);
  if (!node) return fallback;
  const auto v = numbers(*node, where + "." + key);
  if (v.size() != 2) fail(where + "." + key + " must be [shape, scale]");
  return {v[0], v[1]};
}

void apply_hyper(const toml::table& h, HyperParameters& hyper) {
  const std::string where = "[hyper]";
  reject_unknown(h, {"mu0", "sigma2_0", "sigma2_D", "sigma2_S", "nu0", "eta2_0", "eta2_D", "eta2_S", "measurement",
                     "model", "history", "flow"},
                 where);
  if (const auto* node = h.get("mu0")) {
    if (auto v = node->value<double>()) {
      hyper.mu0 = Eigen::VectorXd::Constant(1, *v);
    } else {
      const auto v2 = numbers(*node, where + ".mu0");
      hyper.mu0 = Eigen::Map<const Eigen::VectorXd>(v2.data(), static_cast<Eigen::Index>(v2.size()));
    }
  }
  auto set = [&](const char* key, double& field) {
    if (auto v = number(h, key, where)) field = *v;
  };
  set("sigma2_0", hyper.sigma2_0);
  set("sigma2_D", hyper.sigma2_D);
  set("sigma2_S", hyper.sigma2_S);
  set("nu0", hyper.nu0);
  set("eta2_0", hyper.eta2_0);
  set("eta2_D", hyper.eta2_D);
  set("eta2_S", hyper.eta2_S);
  hyper.measurement = ig_pair(h, "measurement", hyper.measurement, where);
  hyper.model = ig_pair(h, "model", hyper.model, where);
  hyper.history = ig_pair(h, "history", hyper.history, where);
  hyper.flow = ig_pair(h, "flow", hyper.flow, where);
}

toml::table parse_toml(const std::string& text, const std::string& source_name) {
  try {
    return toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source_name << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw Error(ErrorKind::Parse, os.str());
  }
}

void check_site_id(const std::string& id) {
  if (id.empty()) fail("site id must not be empty");
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) {
      fail("site id '" + id + "' may only contain letters, digits, '-', '_' and '.'");
    }
  }
}

}  // namespace

std::string content_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

HyperParameters hyper_profile(const std::string& name) {
  if (name == "sanrafael-default") return HyperParameters::sanrafael_default();
  fail("unknown hyperparameter profile '" + name + "'");
}

void RunConfig::validate() const {
  sampler.validate();
  hyper.validate();
  if (sites.empty()) fail("configuration lists no [[site]] entries");
  if (setup.breakpoints.empty()) fail("[model].breakpoints must not be empty");
  if (!(setup.kappa > 0.0)) fail("[model].kappa must be > 0");
  if (!(setup.depth_unit > 0.0)) fail("[model].depth_unit must be > 0");
  std::set<std::string> ids;
  for (const auto& s : sites) {
    if (!ids.insert(s.metadata.site_id).second) fail("duplicate site id '" + s.metadata.site_id + "'");
    const TimeGrid grid(setup.breakpoints, s.metadata.log_year);
    (void)grid;
    if (!s.layers_file.empty() && !fs::exists(s.layers_file)) {
      fail("site '" + s.metadata.site_id + "': layers file '" + s.layers_file.string() + "' does not exist");
    }
    if (!fs::exists(s.profile)) {
      fail("site '" + s.metadata.site_id + "': profile '" + s.profile.string() + "' does not exist");
    }
  }
  if (sensitivity.threads == 0) fail("[sensitivity].threads must be >= 1");
}

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir, const std::string& source_name) {
  const auto root = parse_toml(text, source_name);
  reject_unknown(root, {"run", "model", "hyper", "site", "sensitivity"}, source_name);

  RunConfig cfg;
  cfg.source = source_name;
  cfg.hash = content_hash(text);
  cfg.setup.breakpoints = default_breakpoints();

  if (const auto* run = sub_table(root, "run")) {
    const std::string where = "[run]";
    reject_unknown(*run, {"variant", "n_iter", "n_burn", "thin", "seed", "store_reduced"}, where);
    if (auto v = string(*run, "variant", where)) {
      if (*v == "single") {
        cfg.variant = Variant::SingleSite;
      } else if (*v == "multi") {
        cfg.variant = Variant::MultiSite;
      } else {
        fail("[run].variant must be \"single\" or \"multi\"");
      }
    }
    cfg.has_n_iter = run->contains("n_iter");
    cfg.sampler.n_iter = count(*run, "n_iter", where, cfg.sampler.n_iter);
    cfg.sampler.n_burn = count(*run, "n_burn", where, cfg.sampler.n_burn);
    cfg.sampler.thin = count(*run, "thin", where, cfg.sampler.thin);
    if (auto s = integer(*run, "seed", where)) {
      if (*s < 0) fail("[run].seed must be >= 0");
      cfg.sampler.seed = static_cast<std::uint64_t>(*s);
      cfg.has_seed = true;
    }
    if (auto b = boolean(*run, "store_reduced", where)) cfg.sampler.store_reduced = *b;
  }

  double phi = 0.0;
  if (const auto* model = sub_table(root, "model")) {
    const std::string where = "[model]";
    reject_unknown(*model, {"breakpoints", "kappa", "depth_unit", "phi", "hyper_profile"}, where);
    if (auto bp = number_list(*model, "breakpoints", where)) cfg.setup.breakpoints = *bp;
    if (auto k = number(*model, "kappa", where)) cfg.setup.kappa = *k;
    if (auto d = number(*model, "depth_unit", where)) cfg.setup.depth_unit = *d;
    if (auto p = number(*model, "phi", where)) phi = *p;
    if (auto name = string(*model, "hyper_profile", where)) cfg.hyper = hyper_profile(*name);
  }
  if (const auto* hyper = sub_table(root, "hyper")) apply_hyper(*hyper, cfg.hyper);
  cfg.hyper.phi = phi;

  if (const auto* sens = sub_table(root, "sensitivity")) {
    const std::string where = "[sensitivity]";
    reject_unknown(*sens, {"t0_offsets_se", "phi", "threads"}, where);
    if (auto v = number_list(*sens, "t0_offsets_se", where)) cfg.sensitivity.t0_offsets_se = *v;
    if (auto v = number_list(*sens, "phi", where)) cfg.sensitivity.phi = *v;
    cfg.sensitivity.threads = count(*sens, "threads", where, cfg.sensitivity.threads);
  }

  if (const auto* node = root.get("site")) {
    const auto* arr = node->as_array();
    if (!arr) fail("'site' must be an array of tables ([[site]])");
    std::size_t i = 0;
    for (const auto& el : *arr) {
      const auto* t = el.as_table();
      const std::string where = "[[site]] #" + std::to_string(++i);
      if (!t) fail(where + " must be a table");
      reject_unknown(*t, {"id", "region", "profile", "layers", "T0", "log_year", "cutoff"}, where);
      SiteConfig site;
      auto id = string(*t, "id", where);
      if (!id) fail(where + ": missing 'id'");
      check_site_id(*id);
      site.metadata.site_id = *id;
      auto region = string(*t, "region", where);
      if (!region) fail(where + ": missing 'region'");
      try {
        site.metadata.region = parse_region(*region);
      } catch (const Error& e) {
        fail(where + ": " + e.what());
      }
      site.metadata.T0 = required_number(*t, "T0", where);
      site.metadata.log_year = required_number(*t, "log_year", where);
      auto profile = string(*t, "profile", where);
      if (!profile) fail(where + ": missing 'profile'");
      site.profile = base_dir / *profile;
      const auto* layers = t->get("layers");
      if (!layers) fail(where + ": missing 'layers'");
      if (layers->is_string()) {
        site.layers_file = base_dir / *layers->value<std::string>();
      } else if (const auto* la = layers->as_array()) {
        site.layers = inline_layers(*la, where + ".layers");
      } else {
        fail(where + ".layers must be a file name or an array of [bottom, conductivity]");
      }
      site.cutoff = number(*t, "cutoff", where);
      cfg.sites.push_back(std::move(site));
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  const auto text = read_text(path);
  auto cfg = parse_run_config(text, path.parent_path(), path.string());
  cfg.source = path;
  return cfg;
}

std::vector<BoreholeProfile> load_profiles(const RunConfig& config) {
  std::vector<BoreholeProfile> out;
  for (const auto& s : config.sites) {
    BoreholeProfile p;
    p.site_id = s.metadata.site_id;
    p.region = s.metadata.region;
    p.T0 = s.metadata.T0;
    p.log_year = s.metadata.log_year;
    read_profile_csv(s.profile, p.depths, p.temps);
    p.layers = s.layers_file.empty() ? s.layers : read_layers_csv(s.layers_file);
    try {
      p.validate();
    } catch (const Error& e) {
      throw Error(e.kind(), "site '" + p.site_id + "': " + e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

SimulateConfig parse_simulate_config(const std::string& text, const std::string& source_name) {
  const auto root = parse_toml(text, source_name);
  reject_unknown(root, {"simulate", "site"}, source_name);
  SimulateConfig cfg;
  auto& truth = cfg.truth;
  truth.breakpoints = default_breakpoints();
  std::string preset;

  const auto* sim = sub_table(root, "simulate");
  if (sim) {
    const std::string where = "[simulate]";
    reject_unknown(*sim, {"seed", "sigma_Y", "sigma", "noise_phi", "depth_unit", "kappa", "breakpoints", "preset"},
                   where);
    if (auto p = string(*sim, "preset", where)) preset = *p;
  }
  if (!preset.empty()) {
    if (preset != "sanrafael") fail("unknown [simulate].preset '" + preset + "'");
    truth = sanrafael_synthetic_truth();
  }
  if (sim) {
    const std::string where = "[simulate]";
    if (auto s = integer(*sim, "seed", where)) {
      if (*s < 0) fail("[simulate].seed must be >= 0");
      cfg.seed = static_cast<std::uint64_t>(*s);
      cfg.has_seed = true;
    }
    if (auto v = number(*sim, "sigma_Y", where)) truth.sigma_Y = *v;
    if (auto v = number(*sim, "sigma", where)) truth.sigma = *v;
    if (auto v = number(*sim, "noise_phi", where)) truth.noise_phi = *v;
    if (auto v = number(*sim, "depth_unit", where)) truth.depth_unit = *v;
    if (auto v = number(*sim, "kappa", where)) truth.kappa = *v;
    if (auto v = number_list(*sim, "breakpoints", where)) {
      if (!preset.empty()) fail("[simulate].breakpoints cannot be combined with a preset");
      truth.breakpoints = *v;
    }
  }

  if (const auto* node = root.get("site")) {
    if (!preset.empty()) fail("[[site]] entries cannot be combined with a preset");
    const auto* arr = node->as_array();
    if (!arr) fail("'site' must be an array of tables ([[site]])");
    std::size_t i = 0;
    for (const auto& el : *arr) {
      const auto* t = el.as_table();
      const std::string where = "[[site]] #" + std::to_string(++i);
      if (!t) fail(where + " must be a table");
      reject_unknown(*t, {"id", "region", "T0", "log_year", "q0", "layers", "depth_start", "depth_step", "depth_end",
                          "history"},
                     where);
      SyntheticSite s;
      auto id = string(*t, "id", where);
      if (!id) fail(where + ": missing 'id'");
      check_site_id(*id);
      s.site_id = *id;
      auto region = string(*t, "region", where);
      if (!region) fail(where + ": missing 'region'");
      s.region = parse_region(*region);
      s.T0 = required_number(*t, "T0", where);
      s.log_year = required_number(*t, "log_year", where);
      s.q0 = required_number(*t, "q0", where) / 1000.0;
      const auto* layers = t->get("layers");
      if (!layers || !layers->is_array()) fail(where + ": 'layers' must be an array of [bottom, conductivity]");
      s.layers = inline_layers(*layers->as_array(), where + ".layers");
      const double start = required_number(*t, "depth_start", where);
      const double step = required_number(*t, "depth_step", where);
      const double end = required_number(*t, "depth_end", where);
      if (!(step > 0.0) || !(end >= start) || !(start > 0.0)) fail(where + ": invalid depth range");
      const auto n = static_cast<Eigen::Index>(std::floor((end - start) / step + 1e-9)) + 1;
      s.depths = Eigen::VectorXd::LinSpaced(n, start, start + step * static_cast<double>(n - 1));
      const auto* hist = t->get("history");
      if (!hist) fail(where + ": missing 'history'");
      const auto h = numbers(*hist, where + ".history");
      s.history = Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
      truth.sites.push_back(std::move(s));
    }
  }
  try {
    truth.validate();
    for (const auto& s : truth.sites) (void)TimeGrid(truth.breakpoints, s.log_year);
  } catch (const Error& e) {
    fail(e.what());
  }
  return cfg;
}

SimulateConfig load_simulate_config(const fs::path& path) {
  return parse_simulate_config(read_text(path), path.string());
}

std::string run_config_for(const SyntheticTruth& truth, std::uint64_t seed) {
  std::ostringstream os;
  os << "# Synthetic San Rafael-style dataset; generated by `gst simulate`.\n\n";
  os << "[run]\nvariant = \"multi\"\nn_iter = 30000\nn_burn = 2000\nthin = 1\nseed = " << seed << "\n\n";
  os << "[model]\nhyper_profile = \"sanrafael-default\"\nkappa = " << format_double(truth.kappa)
     << "\ndepth_unit = " << format_double(truth.depth_unit) << "\nphi = 0.0\nbreakpoints = [";
  for (std::size_t i = 0; i < truth.breakpoints.size(); ++i) {
    os << (i ? ", " : "") << format_double(truth.breakpoints[i]);
  }
  os << "]\n";
  for (const auto& s : truth.sites) {
    os << "\n[[site]]\nid = \"" << s.site_id << "\"\nregion = \"" << to_string(s.region) << "\"\nprofile = \""
       << s.site_id << "_profile.csv\"\nlayers = \"" << s.site_id << "_layers.csv\"\nT0 = " << format_double(s.T0)
       << "\nlog_year = " << format_double(s.log_year) << "\n";
  }
  return os.str();
}

}  // namespace gst
