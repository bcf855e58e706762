#pragma once

#include "lattice.hpp"
#include "potential.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <vector>

namespace qlscar::oracle {

/// Hermite orders along x (n) and y (m).
struct HgIndex {
  int n = 0;
  int m = 0;
  bool operator==(const HgIndex&) const = default;
};

double unperturbed_energy(HgIndex idx, double omega_x, double omega_y);
double unperturbed_energy(HgIndex idx, const potential::PotentialConfig& cfg);

/// Normalized Hermite functions psi_0(xi) .. psi_{out.size()-1}(xi), each
/// including its exp(-xi^2 / 2) factor, via the three-term recurrence
///   psi_{k+1} = sqrt(2/(k+1)) xi psi_k - sqrt(k/(k+1)) psi_{k-1}.
void hermite_functions(double xi, std::span<double> out);
double hermite_function(int order, double xi);

/// Gauss-Hermite rule for weight exp(-t^2). `scaled_weights` hold w_k exp(t_k^2)
/// so integrands can be evaluated with their Gaussian factor included.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> scaled_weights;
};
inline constexpr int kMaxQuadraturePoints = 2048;
GaussHermiteRule gauss_hermite(int points);

/// Raw (analytically normalized) samples of mode idx on the grid.
std::vector<double> sample_mode(HgIndex idx, const lattice::GridSpec& grid, double omega_x, double omega_y);

/// Sampled mode renormalized to unit discrete norm. Throws when the mode's
/// shortest wavelength is below four grid spacings on either axis.
lattice::StateFunction hg_mode(HgIndex idx, const lattice::GridSpec& grid, double omega_x, double omega_y);
lattice::StateFunction hg_mode(HgIndex idx, const lattice::GridSpec& grid, const potential::PotentialConfig& cfg);

/// All modes with energy <= e_cut, ascending by energy, ties by n.
std::vector<HgIndex> enumerate_modes(double e_cut, double omega_x, double omega_y);
/// The lowest `count` modes in the same order.
std::vector<HgIndex> lowest_modes(std::size_t count, double omega_x, double omega_y);

/// 1D overlap  int phi_a(x) phi_b(x) exp(-(x - x0)^2 / 2 sigma^2) dx  for
/// oscillator eigenfunctions of frequency omega.
double bump_overlap_1d(int a, int b, double x0, double sigma, double omega);

/// <a| M exp(-|r - r0|^2 / 2 sigma^2) |b>, exact Gauss-Hermite quadrature.
double bump_matrix_element(HgIndex a, HgIndex b, potential::Point center, double sigma, double amplitude,
                           double omega_x, double omega_y);

struct TruncatedSolution {
  std::vector<HgIndex> basis;
  std::vector<double> energies;      // ascending
  Eigen::MatrixXd coefficients;      // column s = state s over `basis`
  double omega_x = 1.0;
  double omega_y = 1.0;

  std::size_t size() const { return energies.size(); }
  lattice::StateFunction synthesize(std::size_t state, const lattice::GridSpec& grid) const;
};

inline constexpr std::size_t kMaxTruncatedBasis = 6000;

/// Dense H_ab = delta_ab E_a + sum over bumps of <a|V_bump|b> over the modes
/// below e_cut, diagonalized.
TruncatedSolution diagonalize_truncated(double e_cut, const potential::BumpSet& bumps,
                                        const potential::PotentialConfig& cfg);

/// CSV rows: state,n,m,coefficient
void write_coefficients_csv(std::ostream& out, const TruncatedSolution& solution, std::size_t max_states);

}  // namespace qlscar::oracle
