#include "oracle.hpp"

#include "errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace qlscar::oracle {

namespace {

// pi^{-1/4}
const double kPsi0 = 1.0 / std::sqrt(std::sqrt(std::numbers::pi));

void check_index(HgIndex idx) {
  if (idx.n < 0 || idx.m < 0) throw invalid_argument("Hermite orders must be nonnegative");
}

// Overlap matrix over orders 0..max_order for one bump coordinate, using a
// single rule exact up to polynomial degree 2 * max_order.
Eigen::MatrixXd overlap_matrix_1d(int max_order, double x0, double sigma, double omega, const GaussHermiteRule& rule) {
  const int count = max_order + 1;
  const double inv_two_s2 = 1.0 / (2.0 * sigma * sigma);
  const double a = omega + inv_two_s2;
  const double c = x0 * inv_two_s2 / a;
  const double inv_sqrt_a = 1.0 / std::sqrt(a);
  const double sqrt_omega = std::sqrt(omega);
  const double amp = std::sqrt(sqrt_omega);

  const int points = static_cast<int>(rule.nodes.size());
  Eigen::MatrixXd phi(points, count);
  std::vector<double> row(count);
  Eigen::VectorXd weight(points);
  for (int k = 0; k < points; ++k) {
    const double x = c + rule.nodes[k] * inv_sqrt_a;
    hermite_functions(sqrt_omega * x, row);
    for (int n = 0; n < count; ++n) phi(k, n) = amp * row[n];
    const double d = x - x0;
    weight[k] = rule.scaled_weights[k] * std::exp(-d * d * inv_two_s2) * inv_sqrt_a;
  }
  return phi.transpose() * weight.asDiagonal() * phi;
}

void check_quadrature_size(int points) {
  if (points < 1 || points > kMaxQuadraturePoints) {
    std::ostringstream os;
    os << "Gauss-Hermite order " << points << " outside [1, " << kMaxQuadraturePoints << "]";
    throw numerical_error(os.str());
  }
}

}  // namespace

double unperturbed_energy(HgIndex idx, double omega_x, double omega_y) {
  check_index(idx);
  return omega_x * (idx.n + 0.5) + omega_y * (idx.m + 0.5);
}

double unperturbed_energy(HgIndex idx, const potential::PotentialConfig& cfg) {
  return unperturbed_energy(idx, cfg.omega_x(), cfg.omega_y());
}

void hermite_functions(double xi, std::span<double> out) {
  if (out.empty()) return;
  out[0] = kPsi0 * std::exp(-0.5 * xi * xi);
  if (out.size() == 1) return;
  out[1] = std::numbers::sqrt2 * xi * out[0];
  for (std::size_t k = 1; k + 1 < out.size(); ++k) {
    const double kd = static_cast<double>(k);
    out[k + 1] = std::sqrt(2.0 / (kd + 1.0)) * xi * out[k] - std::sqrt(kd / (kd + 1.0)) * out[k - 1];
  }
}

double hermite_function(int order, double xi) {
  if (order < 0) throw invalid_argument("Hermite order must be nonnegative");
  std::vector<double> values(order + 1);
  hermite_functions(xi, values);
  return values.back();
}

GaussHermiteRule gauss_hermite(int points) {
  check_quadrature_size(points);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(points);
  Eigen::VectorXd sub(std::max(points - 1, 0));
  for (int k = 1; k < points; ++k) sub[k - 1] = std::sqrt(0.5 * k);

  GaussHermiteRule rule;
  rule.nodes.resize(points);
  if (points == 1) {
    rule.nodes[0] = 0.0;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    for (int k = 0; k < points; ++k) rule.nodes[k] = solver.eigenvalues()[k];
  }

  rule.scaled_weights.resize(points);
  std::vector<double> psi(points + 1);
  for (int k = 0; k < points; ++k) {
    double t = rule.nodes[k];
    // Newton polish on psi_K(t) = 0, with psi_K' = sqrt(2K) psi_{K-1} - t psi_K.
    for (int it = 0; it < 2; ++it) {
      hermite_functions(t, psi);
      const double deriv = std::sqrt(2.0 * points) * psi[points - 1] - t * psi[points];
      if (deriv != 0.0) t -= psi[points] / deriv;
    }
    hermite_functions(t, psi);
    rule.nodes[k] = t;
    rule.scaled_weights[k] = 1.0 / (points * psi[points - 1] * psi[points - 1]);
  }
  return rule;
}

std::vector<double> sample_mode(HgIndex idx, const lattice::GridSpec& grid, double omega_x, double omega_y) {
  check_index(idx);
  grid.validate();
  const double sx = std::sqrt(omega_x);
  const double sy = std::sqrt(omega_y);
  const double amp = std::sqrt(sx * sy);
  std::vector<double> fx(grid.points_x);
  std::vector<double> fy(grid.points_y);
  std::vector<double> work(std::max(idx.n, idx.m) + 1);
  for (int i = 0; i < grid.points_x; ++i) {
    hermite_functions(sx * grid.x(i), std::span(work).first(idx.n + 1));
    fx[i] = work[idx.n];
  }
  for (int j = 0; j < grid.points_y; ++j) {
    hermite_functions(sy * grid.y(j), std::span(work).first(idx.m + 1));
    fy[j] = amp * work[idx.m];
  }
  std::vector<double> values(grid.size());
  for (int j = 0; j < grid.points_y; ++j) {
    for (int i = 0; i < grid.points_x; ++i) values[grid.index(i, j)] = fy[j] * fx[i];
  }
  return values;
}

lattice::StateFunction hg_mode(HgIndex idx, const lattice::GridSpec& grid, double omega_x, double omega_y) {
  check_index(idx);
  const double two_pi = 2.0 * std::numbers::pi;
  const double lambda_x = two_pi / std::sqrt(omega_x * (2.0 * idx.n + 1.0));
  const double lambda_y = two_pi / std::sqrt(omega_y * (2.0 * idx.m + 1.0));
  if (lambda_x < 4.0 * grid.spacing_x() || lambda_y < 4.0 * grid.spacing_y()) {
    std::ostringstream os;
    os << "mode (" << idx.n << "," << idx.m << ") is not resolved by the grid (wavelength below 4 spacings)";
    throw invalid_argument(os.str());
  }
  const std::vector<double> raw = sample_mode(idx, grid, omega_x, omega_y);
  std::vector<lattice::complex> amps(raw.begin(), raw.end());
  lattice::StateFunction psi(grid, std::move(amps), unperturbed_energy(idx, omega_x, omega_y));
  psi.normalize();
  return psi;
}

lattice::StateFunction hg_mode(HgIndex idx, const lattice::GridSpec& grid, const potential::PotentialConfig& cfg) {
  return hg_mode(idx, grid, cfg.omega_x(), cfg.omega_y());
}

std::vector<HgIndex> enumerate_modes(double e_cut, double omega_x, double omega_y) {
  if (!(omega_x > 0.0) || !(omega_y > 0.0)) throw invalid_argument("frequencies must be positive");
  std::vector<HgIndex> modes;
  const double limit = e_cut * (1.0 + 1e-12);
  for (int m = 0; unperturbed_energy({0, m}, omega_x, omega_y) <= limit; ++m) {
    for (int n = 0; unperturbed_energy({n, m}, omega_x, omega_y) <= limit; ++n) modes.push_back({n, m});
  }
  std::sort(modes.begin(), modes.end(), [&](HgIndex a, HgIndex b) {
    const double ea = unperturbed_energy(a, omega_x, omega_y);
    const double eb = unperturbed_energy(b, omega_x, omega_y);
    if (ea != eb) return ea < eb;
    return a.n < b.n;
  });
  return modes;
}

std::vector<HgIndex> lowest_modes(std::size_t count, double omega_x, double omega_y) {
  double e_cut = 0.5 * (omega_x + omega_y);
  const double step = std::max(omega_x, omega_y);
  std::vector<HgIndex> modes;
  while ((modes = enumerate_modes(e_cut, omega_x, omega_y)).size() < count) e_cut += step;
  modes.resize(count);
  return modes;
}

double bump_overlap_1d(int a, int b, double x0, double sigma, double omega) {
  if (a < 0 || b < 0) throw invalid_argument("Hermite orders must be nonnegative");
  if (!(sigma > 0.0) || !(omega > 0.0)) throw invalid_argument("sigma and omega must be positive");
  const int points = (a + b) / 2 + 1;
  const GaussHermiteRule rule = gauss_hermite(points);
  const Eigen::MatrixXd block = overlap_matrix_1d(std::max(a, b), x0, sigma, omega, rule);
  return block(a, b);
}

double bump_matrix_element(HgIndex a, HgIndex b, potential::Point center, double sigma, double amplitude,
                           double omega_x, double omega_y) {
  check_index(a);
  check_index(b);
  if (amplitude == 0.0) return 0.0;
  return amplitude * bump_overlap_1d(a.n, b.n, center.x, sigma, omega_x) *
         bump_overlap_1d(a.m, b.m, center.y, sigma, omega_y);
}

lattice::StateFunction TruncatedSolution::synthesize(std::size_t state, const lattice::GridSpec& grid) const {
  if (state >= size()) throw invalid_argument("state index out of range");
  std::vector<lattice::complex> amps(grid.size());
  for (std::size_t a = 0; a < basis.size(); ++a) {
    const double c = coefficients(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(state));
    if (c == 0.0) continue;
    const std::vector<double> mode = sample_mode(basis[a], grid, omega_x, omega_y);
    for (std::size_t i = 0; i < amps.size(); ++i) amps[i] += c * mode[i];
  }
  lattice::StateFunction psi(grid, std::move(amps), energies[state]);
  psi.normalize();
  return psi;
}

TruncatedSolution diagonalize_truncated(double e_cut, const potential::BumpSet& bumps,
                                        const potential::PotentialConfig& cfg) {
  cfg.validate();
  const double wx = cfg.omega_x();
  const double wy = cfg.omega_y();
  TruncatedSolution out;
  out.omega_x = wx;
  out.omega_y = wy;
  out.basis = enumerate_modes(e_cut, wx, wy);
  const std::size_t size = out.basis.size();
  if (size == 0) throw invalid_argument("energy cutoff below the ground state");
  if (size > kMaxTruncatedBasis) {
    std::ostringstream os;
    os << "truncated basis of " << size << " modes exceeds the limit of " << kMaxTruncatedBasis;
    throw invalid_argument(os.str());
  }

  int max_n = 0;
  int max_m = 0;
  for (const HgIndex& idx : out.basis) {
    max_n = std::max(max_n, idx.n);
    max_m = std::max(max_m, idx.m);
  }

  const bool perturbed = bumps.amplitude != 0.0 && !bumps.positions.empty();
  const std::size_t nb = perturbed ? bumps.positions.size() : 0;
  std::vector<Eigen::MatrixXd> ox(nb);
  std::vector<Eigen::MatrixXd> oy(nb);
  if (perturbed) {
    const GaussHermiteRule rule_x = gauss_hermite(max_n + 1);
    const GaussHermiteRule rule_y = gauss_hermite(max_m + 1);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nb); ++b) {
      ox[b] = overlap_matrix_1d(max_n, bumps.positions[b].x, bumps.sigma, wx, rule_x);
      oy[b] = overlap_matrix_1d(max_m, bumps.positions[b].y, bumps.sigma, wy, rule_y);
    }
  }

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(size, size);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(size); ++a) {
    const HgIndex ia = out.basis[a];
    for (std::size_t b = a; b < size; ++b) {
      const HgIndex ib = out.basis[b];
      double sum = 0.0;
      for (std::size_t k = 0; k < nb; ++k) sum += ox[k](ia.n, ib.n) * oy[k](ia.m, ib.m);
      double value = bumps.amplitude * sum;
      if (static_cast<std::size_t>(a) == b) value += unperturbed_energy(ia, wx, wy);
      h(a, b) = value;
      h(b, a) = value;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success) throw numerical_error("dense eigensolver failed on the truncated Hamiltonian");
  out.energies.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + size);
  out.coefficients = solver.eigenvectors();
  // Fix the sign: largest-magnitude coefficient positive.
  for (Eigen::Index s = 0; s < out.coefficients.cols(); ++s) {
    Eigen::Index arg = 0;
    out.coefficients.col(s).cwiseAbs().maxCoeff(&arg);
    if (out.coefficients(arg, s) < 0.0) out.coefficients.col(s) *= -1.0;
  }
  return out;
}

void write_coefficients_csv(std::ostream& out, const TruncatedSolution& solution, std::size_t max_states) {
  out << "state,n,m,coefficient\n";
  char buf[64];
  const std::size_t states = std::min(max_states, solution.size());
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t a = 0; a < solution.basis.size(); ++a) {
      const double c = solution.coefficients(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(s));
      auto res = std::to_chars(buf, buf + sizeof(buf), c);
      out << s << ',' << solution.basis[a].n << ',' << solution.basis[a].m << ',' << std::string_view(buf, res.ptr - buf)
          << '\n';
    }
  }
}

}  // namespace qlscar::oracle
