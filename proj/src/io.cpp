#include "gst/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gst/error.hpp"

namespace gst {
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

double parse_number(const std::string& text, const fs::path& path, std::size_t line) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) {
    throw Error(ErrorKind::Parse, where(path, line) + ": '" + text + "' is not a number");
  }
  return value;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;
};

/// Comma-separated table; blank lines and '#' comments are skipped.
Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  Table t;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto text = trim(raw);
    if (text.empty() || text.front() == '#') continue;
    if (t.header.empty()) {
      t.header = split(text);
      continue;
    }
    auto cells = split(text);
    if (cells.size() != t.header.size()) {
      throw Error(ErrorKind::Parse, where(path, line) + ": expected " + std::to_string(t.header.size()) +
                                        " columns, found " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.lines.push_back(line);
  }
  if (t.header.empty()) throw Error(ErrorKind::Parse, "'" + path.string() + "' is empty");
  return t;
}

void expect_header(const Table& t, const std::vector<std::string>& names, const fs::path& path) {
  if (t.header != names) {
    std::string want;
    for (const auto& n : names) want += (want.empty() ? "" : ",") + n;
    throw Error(ErrorKind::Parse, "'" + path.string() + "': header must be '" + want + "'");
  }
}

Eigen::MatrixXd numeric_block(const Table& t, std::size_t first_col, const fs::path& path) {
  const auto cols = t.header.size() - first_col;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_number(t.rows[r][first_col + c], path, t.lines[r]);
    }
  }
  return m;
}

std::string indexed(const std::string& name, Eigen::Index k) { return name + "[" + std::to_string(k) + "]"; }

std::string region_tag(Region r) { return r == Region::Desert ? "D" : "S"; }

std::size_t iteration_of(const Chain& chain, Eigen::Index row) {
  return chain.n_burn + static_cast<std::size_t>(row) * chain.thin;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw Error(ErrorKind::Io, "number formatting failed");
  return std::string(buf, ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void read_profile_csv(const fs::path& path, Eigen::VectorXd& depths, Eigen::VectorXd& temps) {
  const auto t = read_table(path);
  expect_header(t, {"depth_m", "temp_C"}, path);
  if (t.rows.empty()) throw Error(ErrorKind::Parse, "'" + path.string() + "' has no data rows");
  const auto m = numeric_block(t, 0, path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto line = t.lines[static_cast<std::size_t>(i)];
    if (!std::isfinite(m(i, 0)) || !std::isfinite(m(i, 1))) {
      throw Error(ErrorKind::Parse, where(path, line) + ": non-finite value");
    }
    if (m(i, 0) <= 0.0) throw Error(ErrorKind::InvalidGrid, where(path, line) + ": depth must be > 0");
    if (i > 0 && m(i, 0) <= m(i - 1, 0)) {
      throw Error(ErrorKind::InvalidGrid, where(path, line) + ": depths must be strictly increasing");
    }
  }
  depths = m.col(0);
  temps = m.col(1);
}

std::vector<Layer> read_layers_csv(const fs::path& path) {
  const auto t = read_table(path);
  expect_header(t, {"bottom_depth_m", "conductivity_W_mK"}, path);
  if (t.rows.empty()) throw Error(ErrorKind::Parse, "'" + path.string() + "' has no layers");
  std::vector<Layer> layers;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double bottom = parse_number(t.rows[r][0], path, t.lines[r]);
    const double k = parse_number(t.rows[r][1], path, t.lines[r]);
    if (!(k > 0.0) || !std::isfinite(k)) {
      throw Error(ErrorKind::Layering, where(path, t.lines[r]) + ": conductivity must be positive");
    }
    if (!(bottom > (layers.empty() ? 0.0 : layers.back().bottom_depth))) {
      throw Error(ErrorKind::Layering, where(path, t.lines[r]) + ": layer bottoms must increase");
    }
    layers.push_back({bottom, k});
  }
  return layers;
}

BoreholeProfile load_borehole(const fs::path& profile_csv, const fs::path& layers_csv,
                              const BoreholeMetadata& metadata) {
  BoreholeProfile p;
  p.site_id = metadata.site_id;
  p.region = metadata.region;
  p.T0 = metadata.T0;
  p.log_year = metadata.log_year;
  read_profile_csv(profile_csv, p.depths, p.temps);
  p.layers = read_layers_csv(layers_csv);
  p.validate();
  return p;
}

void write_profile_csv(const fs::path& path, const BoreholeProfile& profile) {
  std::string text = "depth_m,temp_C\n";
  for (Eigen::Index i = 0; i < profile.depths.size(); ++i) {
    text += format_double(profile.depths[i]) + "," + format_double(profile.temps[i]) + "\n";
  }
  write_text(path, text);
}

void write_layers_csv(const fs::path& path, const std::vector<Layer>& layers) {
  std::string text = "bottom_depth_m,conductivity_W_mK\n";
  for (const auto& l : layers) text += format_double(l.bottom_depth) + "," + format_double(l.conductivity) + "\n";
  write_text(path, text);
}

void write_chain(const fs::path& dir, const Chain& chain) {
  nlohmann::ordered_json meta;
  meta["variant"] = to_string(chain.variant);
  meta["phi"] = chain.phi;
  meta["seed"] = chain.seed;
  meta["n_iter"] = chain.n_iter;
  meta["n_burn"] = chain.n_burn;
  meta["thin"] = chain.thin;
  meta["stored"] = chain.size();
  meta["breakpoints"] = chain.breakpoints;
  auto& sites = meta["sites"] = nlohmann::ordered_json::array();

  for (const auto& s : chain.sites) {
    sites.push_back({{"id", s.site_id}, {"region", to_string(s.region)}, {"n_depths", s.T_r_mean.size()},
                     {"reduced_draws", s.T_r.rows() > 0}});

    std::string hist = "iteration";
    for (Eigen::Index k = 0; k < s.T_h.cols(); ++k) hist += "," + indexed("T_h", k);
    hist += "\n";
    std::string scalars = "iteration,q0,sigma2_Y,sigma2\n";
    for (Eigen::Index m = 0; m < s.q0.size(); ++m) {
      const auto it = std::to_string(iteration_of(chain, m));
      hist += it;
      for (Eigen::Index k = 0; k < s.T_h.cols(); ++k) hist += "," + format_double(s.T_h(m, k));
      hist += "\n";
      scalars += it + "," + format_double(s.q0[m]) + "," + format_double(s.sigma2_Y[m]) + "," +
                 format_double(s.sigma2[m]) + "\n";
    }
    write_text(dir / ("site_" + s.site_id + "_history.csv"), hist);
    write_text(dir / ("site_" + s.site_id + "_scalars.csv"), scalars);

    std::string mean = "index,T_r_mean\n";
    for (Eigen::Index i = 0; i < s.T_r_mean.size(); ++i) {
      mean += std::to_string(i) + "," + format_double(s.T_r_mean[i]) + "\n";
    }
    write_text(dir / ("site_" + s.site_id + "_reduced_mean.csv"), mean);

    if (s.T_r.rows() > 0) {
      std::string red = "iteration";
      for (Eigen::Index i = 0; i < s.T_r.cols(); ++i) red += "," + indexed("T_r", i);
      red += "\n";
      for (Eigen::Index m = 0; m < s.T_r.rows(); ++m) {
        red += std::to_string(iteration_of(chain, m));
        for (Eigen::Index i = 0; i < s.T_r.cols(); ++i) red += "," + format_double(s.T_r(m, i));
        red += "\n";
      }
      write_text(dir / ("site_" + s.site_id + "_reduced.csv"), red);
    }
  }

  auto& regions = meta["regions"] = nlohmann::ordered_json::array();
  for (const auto& r : chain.regions) {
    regions.push_back(region_tag(r.region));
    std::string text = "iteration";
    for (Eigen::Index k = 0; k < r.mu.cols(); ++k) text += "," + indexed("mu", k);
    text += ",gamma2,nu,tau2\n";
    for (Eigen::Index m = 0; m < r.nu.size(); ++m) {
      text += std::to_string(iteration_of(chain, m));
      for (Eigen::Index k = 0; k < r.mu.cols(); ++k) text += "," + format_double(r.mu(m, k));
      text += "," + format_double(r.gamma2[m]) + "," + format_double(r.nu[m]) + "," + format_double(r.tau2[m]) + "\n";
    }
    write_text(dir / ("region_" + region_tag(r.region) + ".csv"), text);
  }
  write_text(dir / "chain.json", meta.dump(2) + "\n");
}

Chain read_chain(const fs::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text(dir / "chain.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, "chain.json: " + std::string(e.what()));
  }
  Chain chain;
  try {
    chain.variant = meta.at("variant").get<std::string>() == "single" ? Variant::SingleSite : Variant::MultiSite;
    chain.phi = meta.at("phi").get<double>();
    chain.seed = meta.at("seed").get<std::uint64_t>();
    chain.n_iter = meta.at("n_iter").get<std::size_t>();
    chain.n_burn = meta.at("n_burn").get<std::size_t>();
    chain.thin = meta.at("thin").get<std::size_t>();
    chain.breakpoints = meta.at("breakpoints").get<std::vector<double>>();
    for (const auto& s : meta.at("sites")) {
      SiteDraws d;
      d.site_id = s.at("id").get<std::string>();
      d.region = parse_region(s.at("region").get<std::string>());
      const auto hist_path = dir / ("site_" + d.site_id + "_history.csv");
      d.T_h = numeric_block(read_table(hist_path), 1, hist_path);
      const auto sc_path = dir / ("site_" + d.site_id + "_scalars.csv");
      const auto sc = numeric_block(read_table(sc_path), 1, sc_path);
      d.q0 = sc.col(0);
      d.sigma2_Y = sc.col(1);
      d.sigma2 = sc.col(2);
      const auto mean_path = dir / ("site_" + d.site_id + "_reduced_mean.csv");
      d.T_r_mean = numeric_block(read_table(mean_path), 1, mean_path).col(0);
      if (s.at("reduced_draws").get<bool>()) {
        const auto red_path = dir / ("site_" + d.site_id + "_reduced.csv");
        d.T_r = numeric_block(read_table(red_path), 1, red_path);
      }
      chain.sites.push_back(std::move(d));
    }
    for (const auto& tag : meta.at("regions")) {
      RegionDraws r;
      r.region = parse_region(tag.get<std::string>());
      const auto path = dir / ("region_" + tag.get<std::string>() + ".csv");
      const auto m = numeric_block(read_table(path), 1, path);
      const auto K = m.cols() - 3;
      r.mu = m.leftCols(K);
      r.gamma2 = m.col(K);
      r.nu = m.col(K + 1);
      r.tau2 = m.col(K + 2);
      chain.regions.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, "chain.json: " + std::string(e.what()));
  }
  return chain;
}

void write_manifest(const fs::path& path, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["software"] = "gst";
  j["version"] = GST_VERSION;
  j["command"] = m.command;
  j["config"] = m.config_path;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["variant"] = m.variant;
  j["phi"] = m.phi;
  j["n_iter"] = m.n_iter;
  j["n_burn"] = m.n_burn;
  j["thin"] = m.thin;
  j["seconds_per_year"] = kSecondsPerYear;
  j["kappa"] = m.kappa;
  j["wall_time_s"] = m.wall_time_s;
  write_text(path, j.dump(2) + "\n");
}

}  // namespace gst
