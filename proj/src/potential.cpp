#include "potential.hpp"

#include "errors.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace qlscar::potential {

namespace {

const double kFwhmFactor = 2.0 * std::sqrt(2.0 * std::log(2.0));

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t poisson_count(std::mt19937_64& rng, double mean) {
  std::size_t count = 0;
  double t = 0.0;
  for (;;) {
    t += -std::log1p(-uniform01(rng));
    if (t > mean) return count;
    ++count;
  }
}

}  // namespace

double sigma_from_fwhm(double fwhm) { return fwhm / kFwhmFactor; }
double fwhm_from_sigma(double sigma) { return sigma * kFwhmFactor; }

PotentialConfig PotentialConfig::with_fwhm(double fwhm) {
  PotentialConfig cfg;
  cfg.sigma = sigma_from_fwhm(fwhm);
  return cfg;
}

double PotentialConfig::omega_y() const { return q * omega0; }

double PotentialConfig::omega_x() const { return ratio_override ? *ratio_override * omega_y() : p * omega0; }

void PotentialConfig::validate() const {
  if (p < 1 || q < 1) throw invalid_argument("frequency multipliers p, q must be >= 1");
  if (!(omega0 > 0.0)) throw invalid_argument("omega0 must be positive");
  if (ratio_override && !(*ratio_override > 0.0)) throw invalid_argument("ratio override must be positive");
  if (!(amplitude >= 0.0)) throw invalid_argument("bump amplitude must be >= 0");
  if (!(sigma > 0.0)) throw invalid_argument("bump width must be positive");
  if (!(density >= 0.0)) throw invalid_argument("bump density must be >= 0");
  if (!(scatter_energy > 0.0)) throw invalid_argument("scatter energy must be positive");
}

std::pair<double, double> ellipse_half_axes(double omega_x, double omega_y, double energy) {
  const double r = std::sqrt(2.0 * energy);
  return {r / omega_x, r / omega_y};
}

lattice::ScalarField harmonic_potential(const lattice::GridSpec& grid, const PotentialConfig& cfg) {
  cfg.validate();
  const double wx2 = cfg.omega_x() * cfg.omega_x();
  const double wy2 = cfg.omega_y() * cfg.omega_y();
  lattice::ScalarField field(grid);
  for (int j = 0; j < grid.points_y; ++j) {
    const double y = grid.y(j);
    for (int i = 0; i < grid.points_x; ++i) {
      const double x = grid.x(i);
      field.at(i, j) = 0.5 * (wx2 * x * x + wy2 * y * y);
    }
  }
  return field;
}

BumpSet scatter_bumps(const PotentialConfig& cfg) {
  cfg.validate();
  BumpSet bumps;
  bumps.amplitude = cfg.amplitude;
  bumps.sigma = cfg.sigma;
  bumps.seed = cfg.seed;
  if (cfg.density == 0.0) return bumps;

  const auto [a, b] = ellipse_half_axes(cfg.omega_x(), cfg.omega_y(), cfg.scatter_energy);
  const double mean = cfg.density * 4.0 * a * b;
  std::mt19937_64 rng(cfg.seed);
  const std::size_t count = cfg.fixed_count ? static_cast<std::size_t>(std::llround(mean)) : poisson_count(rng, mean);
  bumps.positions.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double x = a * (2.0 * uniform01(rng) - 1.0);
    const double y = b * (2.0 * uniform01(rng) - 1.0);
    bumps.positions.push_back({x, y});
  }
  return bumps;
}

lattice::ScalarField evaluate_bumps(const lattice::GridSpec& grid, const BumpSet& bumps) {
  lattice::ScalarField field(grid);
  if (bumps.amplitude == 0.0 || bumps.positions.empty()) return field;
  if (!(bumps.sigma > 0.0)) throw invalid_argument("bump width must be positive");

  const double inv_two_s2 = 1.0 / (2.0 * bumps.sigma * bumps.sigma);
  // exp(-r^2 / 2 sigma^2) underflows to zero beyond this radius.
  const double reach = bumps.sigma * std::sqrt(2.0 * 745.0);
  const double hx = grid.spacing_x();
  const double hy = grid.spacing_y();
  std::vector<double> gx(grid.points_x);
  std::vector<double> gy(grid.points_y);

  for (const Point& c : bumps.positions) {
    const int i0 = std::max(0, static_cast<int>(std::floor((c.x - reach + grid.extent_x) / hx)));
    const int i1 = std::min(grid.points_x - 1, static_cast<int>(std::ceil((c.x + reach + grid.extent_x) / hx)));
    const int j0 = std::max(0, static_cast<int>(std::floor((c.y - reach + grid.extent_y) / hy)));
    const int j1 = std::min(grid.points_y - 1, static_cast<int>(std::ceil((c.y + reach + grid.extent_y) / hy)));
    if (i0 > i1 || j0 > j1) continue;
    for (int i = i0; i <= i1; ++i) {
      const double dx = grid.x(i) - c.x;
      gx[i] = std::exp(-dx * dx * inv_two_s2);
    }
    for (int j = j0; j <= j1; ++j) {
      const double dy = grid.y(j) - c.y;
      gy[j] = bumps.amplitude * std::exp(-dy * dy * inv_two_s2);
    }
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) field.at(i, j) += gy[j] * gx[i];
    }
  }
  return field;
}

TotalPotential total_potential(const lattice::GridSpec& grid, const PotentialConfig& cfg) {
  return total_potential(grid, cfg, scatter_bumps(cfg));
}

TotalPotential total_potential(const lattice::GridSpec& grid, const PotentialConfig& cfg, const BumpSet& bumps) {
  lattice::ScalarField field = harmonic_potential(grid, cfg);
  const lattice::ScalarField extra = evaluate_bumps(grid, bumps);
  auto out = field.values();
  auto add = extra.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += add[i];
  return {std::move(field), bumps};
}

void write_bumps_csv(std::ostream& out, const BumpSet& bumps) {
  out << "index,x,y\n";
  char buf[64];
  for (std::size_t i = 0; i < bumps.positions.size(); ++i) {
    out << i;
    for (double v : {bumps.positions[i].x, bumps.positions[i].y}) {
      auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out << ',' << std::string_view(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

std::vector<Point> read_bump_positions_csv(std::istream& in) {
  std::vector<Point> points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.rfind("index", 0) == 0) continue;
    std::istringstream row(line);
    std::string idx, xs, ys;
    if (!std::getline(row, idx, ',') || !std::getline(row, xs, ',') || !std::getline(row, ys)) {
      throw corrupt_data("bump CSV line " + std::to_string(line_no) + ": expected index,x,y");
    }
    try {
      points.push_back({std::stod(xs), std::stod(ys)});
    } catch (const std::exception&) {
      throw corrupt_data("bump CSV line " + std::to_string(line_no) + ": bad number");
    }
  }
  return points;
}

}  // namespace qlscar::potential
