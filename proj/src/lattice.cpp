#include "lattice.hpp"

#include "errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

namespace qlscar::lattice {

namespace {

// The FFTW planner is not re-entrant; plan execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr int kMinPoints = 8;

void check_same_grid(const GridSpec& a, const GridSpec& b) {
  if (!(a == b)) throw invalid_argument("grid mismatch between state functions");
}

// Angular wavenumber of mode m on a periodic axis of n points and half-width L.
double wavenumber(int m, int n, double half_width) {
  const int signed_m = (m < n / 2) ? m : m - n;
  return std::numbers::pi / half_width * signed_m;
}

// Integral of sqrt(u^2 - c^2) from c to u.
double wkb_integral(double u, double c) {
  if (u <= c) return 0.0;
  const double root = std::sqrt(u * u - c * c);
  if (c == 0.0) return 0.5 * u * u;
  return 0.5 * (u * root - c * c * std::log((u + root) / c));
}

}  // namespace

void GridSpec::validate() const {
  if (!(extent_x > 0.0) || !(extent_y > 0.0) || !std::isfinite(extent_x) || !std::isfinite(extent_y)) {
    throw invalid_argument("grid extents must be positive and finite");
  }
  for (int n : {points_x, points_y}) {
    if (n < kMinPoints || n % 2 != 0) {
      std::ostringstream os;
      os << "grid point count must be even and >= " << kMinPoints << ", got " << n;
      throw invalid_argument(os.str());
    }
  }
}

GridSpec make_grid(double half_width, int points) { return make_grid(half_width, half_width, points, points); }

GridSpec make_grid(double half_width_x, double half_width_y, int points_x, int points_y) {
  GridSpec g{half_width_x, half_width_y, points_x, points_y};
  g.validate();
  return g;
}

int fft_friendly_size(int n) {
  int candidate = std::max(n, kMinPoints);
  if (candidate % 2) ++candidate;
  for (;; candidate += 2) {
    int r = candidate;
    for (int f : {2, 3, 5}) {
      while (r % f == 0) r /= f;
    }
    if (r == 1) return candidate;
  }
}

double confinement_half_width(double omega, double energy, double decay_exponent) {
  if (!(omega > 0.0) || !(energy >= 0.0) || !(decay_exponent > 0.0)) {
    throw invalid_argument("confinement_half_width: need omega > 0, energy >= 0, decay > 0");
  }
  const double c = std::sqrt(2.0 * energy);
  const double target = omega * decay_exponent;
  double lo = c;
  double hi = c + 1.0;
  while (wkb_integral(hi, c) < target) hi = c + 2.0 * (hi - c);
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (wkb_integral(mid, c) < target ? lo : hi) = mid;
  }
  return hi / omega;
}

GridSpec default_grid(double omega_x, double omega_y, double max_energy, std::optional<double> bump_width) {
  if (!(max_energy > 0.0)) throw invalid_argument("default_grid: max_energy must be positive");
  const double two_pi = 2.0 * std::numbers::pi;
  const double wavelength = two_pi / std::sqrt(2.0 * max_energy);

  auto axis = [&](double omega) {
    const double half_width = confinement_half_width(omega, max_energy);
    // Momentum-space tail: in p-representation the oscillator has frequency
    // 1/omega and energy E/omega^2.
    const double p_cut = confinement_half_width(1.0 / omega, max_energy / (omega * omega));
    double h = std::min(wavelength / 4.0, std::numbers::pi / p_cut);
    if (bump_width) h = std::min(h, *bump_width / 2.0);
    const int points = fft_friendly_size(static_cast<int>(std::ceil(2.0 * half_width / h)));
    return std::pair{half_width, points};
  };
  const auto [lx, nx] = axis(omega_x);
  const auto [ly, ny] = axis(omega_y);
  return make_grid(lx, ly, nx, ny);
}

ScalarField::ScalarField(GridSpec grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  grid_.validate();
  if (values_.size() != grid_.size()) throw invalid_argument("scalar field size does not match grid");
  for (double v : values_) {
    if (!std::isfinite(v)) throw invalid_argument("scalar field contains non-finite values");
  }
}

ScalarField::ScalarField(GridSpec grid) : grid_(grid), values_(grid.size(), 0.0) { grid_.validate(); }

StateFunction::StateFunction(GridSpec grid, std::vector<complex> amplitudes, std::optional<double> energy)
    : grid_(grid), amplitudes_(std::move(amplitudes)), energy_(energy) {
  grid_.validate();
  if (amplitudes_.size() != grid_.size()) throw invalid_argument("state size does not match grid");
}

StateFunction::StateFunction(GridSpec grid) : grid_(grid), amplitudes_(grid.size()) { grid_.validate(); }

double StateFunction::norm() const {
  double sum = 0.0;
  for (const complex& a : amplitudes_) sum += std::norm(a);
  return std::sqrt(sum * grid_.cell_area());
}

void StateFunction::normalize() {
  const double n = norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw numerical_error("cannot normalize a zero or non-finite state");
  const double inv = 1.0 / n;
  for (complex& a : amplitudes_) a *= inv;
}

double StateFunction::boundary_ratio() const {
  double peak = 0.0;
  for (const complex& a : amplitudes_) peak = std::max(peak, std::abs(a));
  if (peak == 0.0) return 0.0;
  double edge = 0.0;
  const int nx = grid_.points_x;
  const int ny = grid_.points_y;
  for (int i = 0; i < nx; ++i) {
    edge = std::max({edge, std::abs(at(i, 0)), std::abs(at(i, ny - 1))});
  }
  for (int j = 0; j < ny; ++j) {
    edge = std::max({edge, std::abs(at(0, j)), std::abs(at(nx - 1, j))});
  }
  return edge / peak;
}

complex inner_product(const StateFunction& a, const StateFunction& b) {
  check_same_grid(a.grid(), b.grid());
  const auto x = a.amplitudes();
  const auto y = b.amplitudes();
  complex sum{0.0, 0.0};
  for (std::size_t i = 0; i < x.size(); ++i) sum += std::conj(x[i]) * y[i];
  return sum * a.grid().cell_area();
}

std::vector<double> kinetic_symbol(const GridSpec& grid) {
  std::vector<double> out(grid.size());
  for (int j = 0; j < grid.points_y; ++j) {
    const double ky = wavenumber(j, grid.points_y, grid.extent_y);
    for (int i = 0; i < grid.points_x; ++i) {
      const double kx = wavenumber(i, grid.points_x, grid.extent_x);
      out[grid.index(i, j)] = 0.5 * (kx * kx + ky * ky);
    }
  }
  return out;
}

std::vector<double> kinetic_symbol_half(const GridSpec& grid) {
  const int half = grid.points_x / 2 + 1;
  std::vector<double> out(static_cast<std::size_t>(half) * grid.points_y);
  for (int j = 0; j < grid.points_y; ++j) {
    const double ky = wavenumber(j, grid.points_y, grid.extent_y);
    for (int i = 0; i < half; ++i) {
      const double kx = std::numbers::pi / grid.extent_x * i;
      out[static_cast<std::size_t>(j) * half + i] = 0.5 * (kx * kx + ky * ky);
    }
  }
  return out;
}

StateFunction kinetic_apply(const StateFunction& psi) {
  if (psi.boundary_ratio() >= kBoundaryDecayLimit) {
    warn("kinetic_apply: state does not decay at the box edge; periodic wraparound makes the result untrustworthy");
  }
  const GridSpec& grid = psi.grid();
  ComplexTransform fft(grid);
  std::vector<complex> work(psi.amplitudes().begin(), psi.amplitudes().end());
  fft.forward(work);
  const std::vector<double> symbol = kinetic_symbol(grid);
  for (std::size_t i = 0; i < work.size(); ++i) work[i] *= symbol[i];
  fft.inverse(work);
  return StateFunction(grid, std::move(work));
}

ComplexTransform::ComplexTransform(const GridSpec& grid) : grid_(grid) {
  grid_.validate();
  std::vector<complex> scratch(grid_.size());
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard<std::mutex> lock(planner_mutex());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  forward_plan_ = fftw_plan_dft_2d(grid_.points_y, grid_.points_x, buf, buf, FFTW_FORWARD, flags);
  inverse_plan_ = fftw_plan_dft_2d(grid_.points_y, grid_.points_x, buf, buf, FFTW_BACKWARD, flags);
  if (!forward_plan_ || !inverse_plan_) throw numerical_error("FFTW failed to create a plan");
}

ComplexTransform::~ComplexTransform() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void ComplexTransform::forward(std::span<complex> data) const {
  if (data.size() != grid_.size()) throw invalid_argument("transform size mismatch");
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), buf, buf);
}

void ComplexTransform::inverse(std::span<complex> data) const {
  if (data.size() != grid_.size()) throw invalid_argument("transform size mismatch");
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(inverse_plan_), buf, buf);
  const double scale = 1.0 / static_cast<double>(data.size());
  for (complex& c : data) c *= scale;
}

RealTransform::RealTransform(const GridSpec& grid) : grid_(grid) {
  grid_.validate();
  std::vector<double> real(grid_.size());
  std::vector<complex> spec(spectrum_size());
  auto* cbuf = reinterpret_cast<fftw_complex*>(spec.data());
  std::lock_guard<std::mutex> lock(planner_mutex());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  forward_plan_ = fftw_plan_dft_r2c_2d(grid_.points_y, grid_.points_x, real.data(), cbuf, flags);
  inverse_plan_ = fftw_plan_dft_c2r_2d(grid_.points_y, grid_.points_x, cbuf, real.data(), flags);
  if (!forward_plan_ || !inverse_plan_) throw numerical_error("FFTW failed to create a plan");
}

RealTransform::~RealTransform() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

std::size_t RealTransform::spectrum_size() const {
  return static_cast<std::size_t>(grid_.points_y) * (grid_.points_x / 2 + 1);
}

void RealTransform::forward(const double* in, complex* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void RealTransform::inverse(complex* in, double* out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), reinterpret_cast<fftw_complex*>(in), out);
  const double scale = 1.0 / static_cast<double>(grid_.size());
  for (std::size_t i = 0; i < grid_.size(); ++i) out[i] *= scale;
}

}  // namespace qlscar::lattice
