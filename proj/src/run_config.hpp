#pragma once

#include "analysis.hpp"
#include "itp.hpp"
#include "lattice.hpp"
#include "potential.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qlscar {

/// Grid selection. Unset fields come from lattice::default_grid sized for
/// the highest unperturbed energy in the ITP ensemble plus `energy_margin`.
struct GridParams {
  std::optional<double> extent_x;
  std::optional<double> extent_y;
  std::optional<int> points_x;
  std::optional<int> points_y;
  double energy_margin = 4.0;

  bool operator==(const GridParams&) const = default;
};

struct ScanParams {
  std::vector<double> ratios;
  std::vector<double> deltas;
  /// Ratio scans: "analytic" enumerates the unperturbed spectrum, "solved"
  /// runs ITP at each ratio.
  std::string source = "analytic";
  /// Analytic ratio scans keep modes up to this energy.
  double max_energy = 40.0;
  std::size_t n_scars = 5;

  bool operator==(const ScanParams&) const = default;
};

struct RunConfig {
  potential::PotentialConfig potential;
  GridParams grid;
  itp::ItpConfig itp;
  analysis::SurveyConfig analysis;
  double dos_window = analysis::kDefaultDosWindow;
  /// DOS sample count; 0 spaces samples at half the window.
  int dos_samples = 0;
  /// Cap on graymaps written by analyze (highest s first).
  int max_images = 20;
  ScanParams scan;
  std::string output_dir = "qlscar_out";
  /// CSV of fixed bump positions (index,x,y); replaces the random draw.
  std::string bumps_file;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Flat JSON object, keys such as "potential.p" or "itp.k".
std::string to_json(const RunConfig& cfg);
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Overrides one key; `value` is parsed as JSON, falling back to a string.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Documented keys in serialization order.
std::vector<std::string> config_keys();

lattice::GridSpec resolve_grid(const RunConfig& cfg);
/// Random draw, or the positions from bumps_file (relative to `base_dir`).
potential::BumpSet resolve_bumps(const RunConfig& cfg, const std::filesystem::path& base_dir = {});

}  // namespace qlscar
