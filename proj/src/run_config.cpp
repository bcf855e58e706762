#include "run_config.hpp"

#include "errors.hpp"
#include "io.hpp"
#include "oracle.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <sstream>

namespace qlscar {

using json = nlohmann::ordered_json;

namespace {

struct Key {
  const char* name;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

template <class T>
T as(const json& v, const char* key) {
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw invalid_argument("");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer()) throw invalid_argument("");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) throw invalid_argument("");
      }
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw invalid_argument("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw invalid_argument("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw invalid_argument(std::string("config key ") + key + " has the wrong type: " + v.dump());
  }
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> as_opt(const json& v, const char* key) {
  if (v.is_null()) return std::nullopt;
  return as<T>(v, key);
}

std::vector<double> as_list(const json& v, const char* key) {
  if (!v.is_array()) throw invalid_argument(std::string("config key ") + key + " must be a list of numbers");
  std::vector<double> out;
  for (const json& x : v) out.push_back(as<double>(x, key));
  return out;
}

#define QLSCAR_FIELD(name, member, type)                          \
  Key {                                                           \
    name, [](const RunConfig& c) { return json(c.member); },      \
        [](RunConfig& c, const json& v) { c.member = as<type>(v, name); } \
  }
#define QLSCAR_OPTIONAL(name, member, type)                           \
  Key {                                                               \
    name, [](const RunConfig& c) { return opt(c.member); },           \
        [](RunConfig& c, const json& v) { c.member = as_opt<type>(v, name); } \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      QLSCAR_FIELD("potential.p", potential.p, int),
      QLSCAR_FIELD("potential.q", potential.q, int),
      QLSCAR_FIELD("potential.omega0", potential.omega0, double),
      QLSCAR_OPTIONAL("potential.ratio", potential.ratio_override, double),
      QLSCAR_FIELD("potential.amplitude", potential.amplitude, double),
      QLSCAR_FIELD("potential.sigma", potential.sigma, double),
      QLSCAR_FIELD("potential.density", potential.density, double),
      QLSCAR_FIELD("potential.seed", potential.seed, std::uint64_t),
      QLSCAR_FIELD("potential.scatter_energy", potential.scatter_energy, double),
      QLSCAR_FIELD("potential.fixed_count", potential.fixed_count, bool),
      QLSCAR_FIELD("potential.bumps_file", bumps_file, std::string),
      QLSCAR_OPTIONAL("grid.extent_x", grid.extent_x, double),
      QLSCAR_OPTIONAL("grid.extent_y", grid.extent_y, double),
      QLSCAR_OPTIONAL("grid.points_x", grid.points_x, int),
      QLSCAR_OPTIONAL("grid.points_y", grid.points_y, int),
      QLSCAR_FIELD("grid.energy_margin", grid.energy_margin, double),
      QLSCAR_FIELD("itp.k", itp.k, int),
      QLSCAR_FIELD("itp.extra_states", itp.extra_states, int),
      QLSCAR_FIELD("itp.dt_initial", itp.dt_initial, double),
      QLSCAR_FIELD("itp.dt_min", itp.dt_min, double),
      QLSCAR_FIELD("itp.tolerance", itp.tolerance, double),
      QLSCAR_FIELD("itp.max_iterations", itp.max_iterations, int),
      QLSCAR_FIELD("itp.seed", itp.seed, std::uint64_t),
      QLSCAR_FIELD("itp.random_init", itp.random_init, bool),
      QLSCAR_FIELD("itp.residual_interval", itp.residual_interval, int),
      QLSCAR_FIELD("itp.refine_tolerance", itp.refine_tolerance, double),
      QLSCAR_FIELD("itp.max_refine_iterations", itp.max_refine_iterations, int),
      Key{"analysis.candidates",
          [](const RunConfig& c) {
            json list = json::array();
            for (const auto& pq : c.analysis.candidates) list.push_back(json::array({pq.p, pq.q}));
            return list;
          },
          [](RunConfig& c, const json& v) {
            const char* name = "analysis.candidates";
            if (!v.is_array()) throw invalid_argument("analysis.candidates must be a list of [p, q] pairs");
            c.analysis.candidates.clear();
            for (const json& pair : v) {
              if (!pair.is_array() || pair.size() != 2) {
                throw invalid_argument("analysis.candidates must be a list of [p, q] pairs");
              }
              c.analysis.candidates.push_back({as<int>(pair[0], name), as<int>(pair[1], name)});
            }
          }},
      QLSCAR_FIELD("analysis.n_eta", analysis.n_eta, int),
      QLSCAR_FIELD("analysis.n_phi", analysis.n_phi, int),
      QLSCAR_FIELD("analysis.threshold", analysis.threshold, double),
      QLSCAR_OPTIONAL("analysis.tube_width", analysis.tube_width, double),
      QLSCAR_FIELD("analysis.dos_window", dos_window, double),
      QLSCAR_FIELD("analysis.dos_samples", dos_samples, int),
      QLSCAR_FIELD("analysis.max_images", max_images, int),
      Key{"scan.ratios", [](const RunConfig& c) { return json(c.scan.ratios); },
          [](RunConfig& c, const json& v) { c.scan.ratios = as_list(v, "scan.ratios"); }},
      Key{"scan.deltas", [](const RunConfig& c) { return json(c.scan.deltas); },
          [](RunConfig& c, const json& v) { c.scan.deltas = as_list(v, "scan.deltas"); }},
      QLSCAR_FIELD("scan.source", scan.source, std::string),
      QLSCAR_FIELD("scan.max_energy", scan.max_energy, double),
      QLSCAR_FIELD("scan.n_scars", scan.n_scars, std::size_t),
      QLSCAR_FIELD("output.dir", output_dir, std::string),
  };
  return table;
}

#undef QLSCAR_FIELD
#undef QLSCAR_OPTIONAL

const Key& find_key(const std::string& name) {
  for (const Key& k : keys()) {
    if (name == k.name) return k;
  }
  throw invalid_argument("unknown config key '" + name + "'");
}

}  // namespace

void RunConfig::validate() const {
  potential.validate();
  itp.validate();
  if (grid.extent_x && !(*grid.extent_x > 0.0)) throw invalid_argument("grid.extent_x must be positive");
  if (grid.extent_y && !(*grid.extent_y > 0.0)) throw invalid_argument("grid.extent_y must be positive");
  if (grid.points_x && (*grid.points_x < 8 || *grid.points_x % 2)) throw invalid_argument("grid.points_x must be even and >= 8");
  if (grid.points_y && (*grid.points_y < 8 || *grid.points_y % 2)) throw invalid_argument("grid.points_y must be even and >= 8");
  if (!(grid.energy_margin >= 0.0)) throw invalid_argument("grid.energy_margin must be >= 0");
  for (const auto& pq : analysis.candidates) {
    if (pq.p < 1 || pq.q < 1) throw invalid_argument("candidate (p, q) must be positive");
  }
  if (analysis.n_eta < 1 || analysis.n_phi < 1) throw invalid_argument("template bank sizes must be >= 1");
  if (!(analysis.threshold > 0.0)) throw invalid_argument("analysis.threshold must be positive");
  if (analysis.tube_width && !(*analysis.tube_width > 0.0)) throw invalid_argument("analysis.tube_width must be positive");
  if (!(dos_window > 0.0)) throw invalid_argument("analysis.dos_window must be positive");
  if (dos_samples < 0 || dos_samples == 1) throw invalid_argument("analysis.dos_samples must be 0 (auto) or >= 2");
  if (max_images < 0) throw invalid_argument("analysis.max_images must be >= 0");
  if (scan.source != "analytic" && scan.source != "solved") {
    throw invalid_argument("scan.source must be \"analytic\" or \"solved\"");
  }
  for (double r : scan.ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw invalid_argument("scan.ratios must lie in (0, 1]");
  }
  if (!(scan.max_energy > 0.0)) throw invalid_argument("scan.max_energy must be positive");
  if (scan.n_scars < 1) throw invalid_argument("scan.n_scars must be >= 1");
  if (output_dir.empty()) throw invalid_argument("output.dir must not be empty");
}

std::string to_json(const RunConfig& cfg) {
  json out = json::object();
  for (const Key& k : keys()) out[k.name] = k.get(cfg);
  return out.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::parse_error& e) {
    throw invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!in.is_object()) throw invalid_argument("config must be a JSON object");
  // Run metadata embeds the config it was produced with.
  if (in.contains("config") && in["config"].is_object()) in = json(in["config"]);
  RunConfig cfg;
  for (const auto& [name, value] : in.items()) find_key(name).set(cfg, value);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw io_error("config file not found: " + path.string());
  return config_from_json(io::read_text_file(path));
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const Key& k = find_key(key);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  k.set(cfg, parsed);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Key& k : keys()) out.emplace_back(k.name);
  return out;
}

lattice::GridSpec resolve_grid(const RunConfig& cfg) {
  const double wx = cfg.potential.omega_x();
  const double wy = cfg.potential.omega_y();
  lattice::GridSpec grid;
  if (!(cfg.grid.extent_x && cfg.grid.extent_y && cfg.grid.points_x && cfg.grid.points_y)) {
    const auto modes = oracle::lowest_modes(static_cast<std::size_t>(cfg.itp.ensemble_size()), wx, wy);
    const double e_max = oracle::unperturbed_energy(modes.back(), wx, wy) + cfg.grid.energy_margin;
    std::optional<double> bump_width;
    if (cfg.potential.has_bumps()) bump_width = cfg.potential.sigma;
    grid = lattice::default_grid(wx, wy, e_max, bump_width);
  }
  if (cfg.grid.extent_x) grid.extent_x = *cfg.grid.extent_x;
  if (cfg.grid.extent_y) grid.extent_y = *cfg.grid.extent_y;
  if (cfg.grid.points_x) grid.points_x = *cfg.grid.points_x;
  if (cfg.grid.points_y) grid.points_y = *cfg.grid.points_y;
  grid.validate();
  return grid;
}

potential::BumpSet resolve_bumps(const RunConfig& cfg, const std::filesystem::path& base_dir) {
  if (cfg.bumps_file.empty()) return potential::scatter_bumps(cfg.potential);
  std::filesystem::path path = cfg.bumps_file;
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  std::ifstream in(path);
  if (!in) throw io_error("cannot open bump file " + path.string());
  potential::BumpSet bumps;
  bumps.positions = potential::read_bump_positions_csv(in);
  bumps.amplitude = cfg.potential.amplitude;
  bumps.sigma = cfg.potential.sigma;
  bumps.seed = cfg.potential.seed;
  return bumps;
}

}  // namespace qlscar
