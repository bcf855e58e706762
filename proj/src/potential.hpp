#pragma once

#include "lattice.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace qlscar::potential {

inline constexpr double kDefaultBumpFwhm = 0.235;
inline constexpr double kDefaultBumpAmplitude = 4.0;
inline constexpr double kDefaultBumpDensity = 2.0;

/// Gaussian width whose full width at half maximum is `fwhm`.
double sigma_from_fwhm(double fwhm);
double fwhm_from_sigma(double sigma);

struct PotentialConfig {
  int p = 1;
  int q = 2;
  double omega0 = 1.0;
  /// When set, omega_y = q * omega0 stays fixed and omega_x = ratio * omega_y.
  std::optional<double> ratio_override;
  double amplitude = kDefaultBumpAmplitude;
  double sigma = sigma_from_fwhm(kDefaultBumpFwhm);
  double density = kDefaultBumpDensity;
  std::uint64_t seed = 1;
  /// Energy of the classical ellipse whose bounding rectangle receives bumps.
  double scatter_energy = 100.0;
  /// Use round(density * area) bumps instead of a Poisson draw.
  bool fixed_count = false;

  static PotentialConfig with_fwhm(double fwhm);

  double omega_x() const;
  double omega_y() const;
  double fwhm() const { return fwhm_from_sigma(sigma); }
  bool has_bumps() const { return amplitude > 0.0 && density > 0.0; }
  void validate() const;

  bool operator==(const PotentialConfig&) const = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

struct BumpSet {
  std::vector<Point> positions;
  double amplitude = 0.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;

  bool operator==(const BumpSet&) const = default;
};

/// Half-axes of the classical ellipse 1/2 (wx^2 x^2 + wy^2 y^2) = E.
std::pair<double, double> ellipse_half_axes(double omega_x, double omega_y, double energy);

lattice::ScalarField harmonic_potential(const lattice::GridSpec& grid, const PotentialConfig& cfg);

/// Poisson-distributed bump count over the bounding rectangle of the classical
/// ellipse at cfg.scatter_energy, positions uniform within it.
///
/// Generator: std::mt19937_64 seeded with cfg.seed. Uniform variates are the
/// top 53 bits of each draw scaled to [0, 1). The count is the number of
/// unit-rate exponential arrivals (-log(1 - u)) before time density * area.
/// Positions follow, x then y per bump.
BumpSet scatter_bumps(const PotentialConfig& cfg);

lattice::ScalarField evaluate_bumps(const lattice::GridSpec& grid, const BumpSet& bumps);

struct TotalPotential {
  lattice::ScalarField field;
  BumpSet bumps;
};

TotalPotential total_potential(const lattice::GridSpec& grid, const PotentialConfig& cfg);
/// Reuses an existing bump realization (deviation scans, fixed test layouts).
TotalPotential total_potential(const lattice::GridSpec& grid, const PotentialConfig& cfg, const BumpSet& bumps);

void write_bumps_csv(std::ostream& out, const BumpSet& bumps);
/// Reads positions only; amplitude, width and seed come from the caller.
std::vector<Point> read_bump_positions_csv(std::istream& in);

}  // namespace qlscar::potential
