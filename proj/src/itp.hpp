#pragma once

#include "lattice.hpp"
#include "potential.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace qlscar::itp {

struct ItpConfig {
  /// States reported and checked for convergence.
  int k = 10;
  /// Additional ensemble members above k that are propagated but not
  /// reported; they keep a spectral gap above state k. Negative selects
  /// max(4, k / 6).
  int extra_states = -1;
  double dt_initial = 0.05;
  double dt_min = 0.0125;
  double tolerance = 1e-10;
  int max_iterations = 20000;
  std::uint64_t seed = 0;
  /// Start from seeded noise instead of unperturbed Hermite-Gauss modes.
  bool random_init = false;
  /// After propagation, states are polished against the exact Hamiltonian
  /// (block LOBPCG) until every reported residual is below this; 0 skips it.
  double refine_tolerance = 1e-4;
  int max_refine_iterations = 200;
  /// Sweeps between residual evaluations for progress records (0 = only at the end).
  int residual_interval = 50;

  int ensemble_size() const;
  void validate() const;
  bool operator==(const ItpConfig&) const = default;
};

struct EigenSolution {
  lattice::GridSpec grid;
  std::vector<lattice::StateFunction> states;  // energies ascending
  std::vector<double> energies;
  std::vector<double> residuals;  // ||H psi - E psi||
  std::vector<bool> converged;
  int iterations = 0;
  double final_dt = 0.0;

  std::size_t size() const { return states.size(); }
  bool all_converged() const;
};

struct Progress {
  int sweep = 0;
  double dt = 0.0;
  double max_delta_energy = 0.0;
  /// NaN until the first residual evaluation.
  double worst_residual = 0.0;
};
using ProgressCallback = std::function<void(const Progress&)>;

/// k orthonormal starting states. Default: the k lowest unperturbed modes of
/// the oscillator (omega_x, omega_y); random_init: seeded noise under a
/// Gaussian envelope, Loewdin-orthonormalized.
std::vector<lattice::StateFunction> init_states(int k, const lattice::GridSpec& grid, double omega_x, double omega_y,
                                                std::uint64_t seed, bool random_init = false);

/// H psi with the spectral kinetic operator.
lattice::StateFunction hamiltonian_apply(const lattice::StateFunction& psi, const lattice::ScalarField& potential);

/// One Strang step exp(-dt T/2) exp(-dt V) exp(-dt T/2) on every state,
/// followed by renormalization. If dt * (-min V) would overflow the
/// potential factor, dt is halved until it does not. Returns the dt used.
double itp_step(std::vector<lattice::StateFunction>& states, const lattice::ScalarField& potential, double dt);

/// Symmetric (Loewdin) orthonormalization S^{-1/2}. Throws when the Gram
/// matrix condition number exceeds 1e12.
void orthonormalize(std::vector<lattice::StateFunction>& states);

/// Rayleigh-Ritz rotation of an orthonormal ensemble: diagonalizes
/// <psi_i|H|psi_j> and rotates into its eigenbasis, energies ascending.
void subspace_rotate(std::vector<lattice::StateFunction>& states, const lattice::ScalarField& potential);

inline constexpr double kMaxGramCondition = 1e12;

/// Lowest cfg.k eigenpairs of -1/2 Laplacian + V by imaginary-time propagation
/// of an orthonormal ensemble: loop { step; orthonormalize; rotate }. dt halves
/// whenever the largest per-state energy change in a sweep drops below
/// 10 * tolerance; converged once dt == dt_min and every change is below
/// tolerance. The split propagator biases states by O(dt^2); the polish stage
/// (refine_tolerance) removes that. A state counts as converged when both
/// stages met their targets. The Hermite-Gauss start uses (omega_x, omega_y).
EigenSolution solve(const lattice::GridSpec& grid, const lattice::ScalarField& potential, const ItpConfig& cfg,
                    double omega_x, double omega_y, const ProgressCallback& progress = {});

}  // namespace qlscar::itp
