#pragma once

#include "classical.hpp"
#include "itp.hpp"
#include "lattice.hpp"
#include "potential.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace qlscar::analysis {

inline constexpr double kDefaultDosWindow = 0.001;
inline constexpr double kDefaultScarThreshold = 2.0;

// ---------------------------------------------------------------------------
// Density of states

struct DosCurve {
  std::vector<double> energy;
  std::vector<double> dos;
  double window = kDefaultDosWindow;
};

/// D(E) = sum_n (2 pi s^2)^{-1/2} exp(-(E - E_n)^2 / 2 s^2) on `samples`.
DosCurve dos(std::span<const double> energies, double window, std::span<const double> samples);
std::vector<double> linspace(double lo, double hi, std::size_t count);

/// Degenerate cluster: consecutive sorted energies no further apart than
/// the window are merged; weight counts the members.
struct Level {
  double energy = 0.0;
  int weight = 0;
};
std::vector<Level> level_weights(std::span<const double> energies, double window);
int max_level_weight(std::span<const double> energies, double window);

/// Energies for a given frequency ratio wx / wy.
using EnergySource = std::function<std::vector<double>(double ratio)>;

/// Unperturbed spectrum below e_max with wx held at `omega_x` and
/// wy = omega_x / ratio.
EnergySource analytic_energies(double e_max, double omega_x = 1.0);

struct RatioDos {
  double ratio = 0.0;
  std::vector<double> energies;
  DosCurve curve;
};

std::vector<RatioDos> dos_ratio_scan(std::span<const double> ratios, double window, std::span<const double> samples,
                                     const EnergySource& source);

// ---------------------------------------------------------------------------
// Localization

/// Area 2 pi E / (wx wy) of the classical ellipse 1/2 (wx^2 x^2 + wy^2 y^2) <= E.
double classical_area(double energy, double omega_x, double omega_y);

/// alpha = Z * sum |psi|^4 hx hy with Z the classical area at `energy`.
double alpha_value(const lattice::StateFunction& psi, double energy, double omega_x, double omega_y);

// ---------------------------------------------------------------------------
// Scar detection

struct ScarMatch {
  double s = 0.0;
  double tube_probability = 0.0;  // P_tube of the best template
  double tube_fraction = 0.0;     // f_tube of the best template
  std::size_t template_index = 0;
  std::size_t skipped = 0;  // templates whose tube leaves the grid
  bool found = false;
};

/// Probability density |psi|^2 on the nodes.
std::vector<double> density(const lattice::StateFunction& psi);

/// For each template the tube of nodes within tube_width/2 of its polyline
/// gives P_tube (probability inside) and f_tube (tube area over
/// `ellipse_area`); s is the largest P_tube / f_tube.
ScarMatch scar_measure(const lattice::GridSpec& grid, std::span<const double> density,
                       std::span<const classical::LissajousOrbit> templates, double tube_width, double ellipse_area);
ScarMatch scar_measure(const lattice::StateFunction& psi, std::span<const classical::LissajousOrbit> templates,
                       double tube_width, double ellipse_area);

/// Local de Broglie wavelength 2 pi / sqrt(2 E).
double local_wavelength(double energy);

struct Commensurability {
  int p = 1;
  int q = 2;
  bool operator==(const Commensurability&) const = default;
};

struct SurveyConfig {
  std::vector<Commensurability> candidates{{1, 2}};
  int n_eta = 9;
  int n_phi = 32;
  double threshold = kDefaultScarThreshold;
  /// Fixed tube width; unset uses the local wavelength at each state's energy.
  std::optional<double> tube_width;

  bool operator==(const SurveyConfig&) const = default;
};

enum class ScarKind { None, String, Loop };
std::string_view to_string(ScarKind kind);

struct ScarReport {
  std::size_t index = 0;
  double energy = 0.0;
  double alpha = 0.0;
  std::optional<double> s;  // unset when there are no candidate templates
  int p = 0;
  int q = 0;
  double eta = 0.0;
  double phase = 0.0;
  ScarKind kind = ScarKind::None;
  bool strongly_scarred = false;
};

struct SurveyResult {
  std::vector<ScarReport> reports;
  double scarred_fraction = 0.0;
  std::size_t scarred_count = 0;
};

/// Template orbits for (p, q) at energy E in an oscillator whose y frequency
/// is omega_y (w0 = omega_y / q).
std::vector<classical::LissajousOrbit> templates_for(Commensurability pq, double energy, double omega_y,
                                                     const SurveyConfig& cfg);

ScarReport analyze_state(const lattice::StateFunction& psi, std::size_t index, double energy, double omega_x,
                         double omega_y, const SurveyConfig& cfg);

SurveyResult scar_survey(const itp::EigenSolution& solution, double omega_x, double omega_y, const SurveyConfig& cfg);

// ---------------------------------------------------------------------------
// Deviation scans

struct DeviationRow {
  double delta = 0.0;
  double mean_alpha = 0.0;
  /// alpha~(0) / alpha~(delta)
  double normalized = 0.0;
  std::size_t scar_count = 0;
  std::size_t averaged = 0;
  bool short_of_target = false;
  bool failed = false;
};

/// Solves the perturbed problem at wx / wy = ratio (same bumps every call).
using RatioSolver = std::function<itp::EigenSolution(double ratio)>;

/// For each delta, solve at p/q + delta, survey against (p, q) templates, and
/// average alpha over the n_scars highest-s loop-like scarred states.
std::vector<DeviationRow> deviation_scan(std::span<const double> deltas, Commensurability base, double omega_y,
                                         const SurveyConfig& cfg, std::size_t n_scars, const RatioSolver& solver);

// ---------------------------------------------------------------------------
// CSV output

void write_dos_csv(std::ostream& out, const DosCurve& curve);
void write_scar_reports_csv(std::ostream& out, std::span<const ScarReport> reports);
void write_deviation_csv(std::ostream& out, std::span<const DeviationRow> rows);

}  // namespace qlscar::analysis
