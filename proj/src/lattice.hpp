#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace qlscar::lattice {

using complex = std::complex<double>;

/// Uniform periodic grid on the box [-Lx, Lx) x [-Ly, Ly).
///
/// Node (i, j) sits at x_i = -Lx + i * hx, y_j = -Ly + j * hy. Fields are
/// stored row-major: index = j * points_x + i.
struct GridSpec {
  double extent_x = 0.0;
  double extent_y = 0.0;
  int points_x = 0;
  int points_y = 0;

  double spacing_x() const { return 2.0 * extent_x / points_x; }
  double spacing_y() const { return 2.0 * extent_y / points_y; }
  double cell_area() const { return spacing_x() * spacing_y(); }
  double x(int i) const { return -extent_x + i * spacing_x(); }
  double y(int j) const { return -extent_y + j * spacing_y(); }
  std::size_t size() const { return static_cast<std::size_t>(points_x) * static_cast<std::size_t>(points_y); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * points_x + i; }

  bool operator==(const GridSpec&) const = default;

  /// Throws on odd or too-small point counts and nonpositive extents.
  void validate() const;
};

GridSpec make_grid(double half_width, int points);
GridSpec make_grid(double half_width_x, double half_width_y, int points_x, int points_y);

/// Smallest even integer >= n (and >= 8) whose only prime factors are 2, 3, 5.
int fft_friendly_size(int n);

/// Half-width L at which a 1D oscillator state of energy E has decayed by
/// exp(-decay_exponent) beyond its classical turning point (WKB tunnelling
/// integral), so a periodic box of that size behaves like open space.
double confinement_half_width(double omega, double energy, double decay_exponent = 16.0);

/// Default grid for states up to `max_energy` in the harmonic well
/// 1/2 (wx^2 x^2 + wy^2 y^2). Spacing resolves a quarter of the shortest local
/// wavelength and, when `bump_width` is set, half the bump width.
GridSpec default_grid(double omega_x, double omega_y, double max_energy, std::optional<double> bump_width);

class ScalarField {
public:
  ScalarField() = default;
  ScalarField(GridSpec grid, std::vector<double> values);
  explicit ScalarField(GridSpec grid);

  const GridSpec& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double at(int i, int j) const { return values_[grid_.index(i, j)]; }
  double& at(int i, int j) { return values_[grid_.index(i, j)]; }

private:
  GridSpec grid_;
  std::vector<double> values_;
};

class StateFunction {
public:
  StateFunction() = default;
  StateFunction(GridSpec grid, std::vector<complex> amplitudes, std::optional<double> energy = std::nullopt);
  explicit StateFunction(GridSpec grid);

  const GridSpec& grid() const { return grid_; }
  std::span<const complex> amplitudes() const { return amplitudes_; }
  std::span<complex> amplitudes() { return amplitudes_; }
  complex at(int i, int j) const { return amplitudes_[grid_.index(i, j)]; }
  std::optional<double> energy() const { return energy_; }
  void set_energy(std::optional<double> e) { energy_ = e; }

  double norm() const;
  /// Rescales to unit discrete norm. Throws on a zero state.
  void normalize();
  /// max |psi| on the outermost ring of nodes divided by max |psi| overall.
  double boundary_ratio() const;

  bool operator==(const StateFunction&) const = default;

private:
  GridSpec grid_;
  std::vector<complex> amplitudes_;
  std::optional<double> energy_;
};

inline constexpr double kBoundaryDecayLimit = 1e-6;

/// Discrete <a|b> = sum conj(a_i) b_i hx hy.
complex inner_product(const StateFunction& a, const StateFunction& b);

/// -1/2 Laplacian evaluated spectrally on the periodic box.
StateFunction kinetic_apply(const StateFunction& psi);

/// 1/2 (kx^2 + ky^2) for every mode of the full complex transform, row-major
/// with the symmetric frequency layout (0, 1, ..., n/2-1, -n/2, ..., -1).
std::vector<double> kinetic_symbol(const GridSpec& grid);
/// Same for the real-to-complex half spectrum, shape points_y x (points_x/2 + 1).
std::vector<double> kinetic_symbol_half(const GridSpec& grid);

/// In-place 2D complex FFT pair over a grid. The inverse carries the 1/N factor.
class ComplexTransform {
public:
  explicit ComplexTransform(const GridSpec& grid);
  ~ComplexTransform();
  ComplexTransform(const ComplexTransform&) = delete;
  ComplexTransform& operator=(const ComplexTransform&) = delete;

  void forward(std::span<complex> data) const;
  void inverse(std::span<complex> data) const;

private:
  GridSpec grid_;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

/// Real-to-half-complex 2D FFT pair. `inverse` overwrites its spectral input
/// and carries the 1/N factor.
class RealTransform {
public:
  explicit RealTransform(const GridSpec& grid);
  ~RealTransform();
  RealTransform(const RealTransform&) = delete;
  RealTransform& operator=(const RealTransform&) = delete;

  std::size_t spectrum_size() const;
  void forward(const double* in, complex* out) const;
  void inverse(complex* in, double* out) const;

private:
  GridSpec grid_;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace qlscar::lattice
