#include "itp.hpp"

#include "errors.hpp"
#include "oracle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace qlscar::itp {

using lattice::complex;
using lattice::GridSpec;
using lattice::ScalarField;
using lattice::StateFunction;

namespace {

// exp(x) overflows near 709.78; keep a margin.
constexpr double kMaxExponent = 600.0;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double min_value(const ScalarField& v) {
  double lo = std::numeric_limits<double>::infinity();
  for (double x : v.values()) lo = std::min(lo, x);
  return lo;
}

double safe_dt(double dt, const ScalarField& v) {
  const double depth = std::max(0.0, -min_value(v));
  while (dt * depth > kMaxExponent) {
    dt *= 0.5;
    std::ostringstream os;
    os << "imaginary time step rejected (potential factor would overflow); retrying with dt = " << dt;
    warn(os.str());
  }
  return dt;
}

void check_potential(const GridSpec& grid, const ScalarField& v) {
  if (!(v.grid() == grid)) throw invalid_argument("potential grid does not match the state grid");
}

// Real-arithmetic split-operator propagator for the zero-field Hamiltonian.
class RealPropagator {
public:
  struct Workspace {
    std::vector<complex> spectrum;
    std::vector<complex> spectrum2;
  };

  RealPropagator(const GridSpec& grid, const ScalarField& v)
      : grid_(grid), fft_(grid), potential_(v.values().begin(), v.values().end()),
        symbol_(lattice::kinetic_symbol_half(grid)) {}

  void set_dt(double dt) {
    half_kinetic_.resize(symbol_.size());
    for (std::size_t i = 0; i < symbol_.size(); ++i) half_kinetic_[i] = std::exp(-0.5 * dt * symbol_[i]);
    potential_factor_.resize(potential_.size());
    for (std::size_t i = 0; i < potential_.size(); ++i) potential_factor_[i] = std::exp(-dt * potential_[i]);
  }

  Workspace workspace() const { return {std::vector<complex>(fft_.spectrum_size()), std::vector<complex>(fft_.spectrum_size())}; }

  // Strang step in place on psi; hpsi receives H applied to the result.
  void step(double* psi, double* hpsi, Workspace& ws) const {
    const std::size_t ns = symbol_.size();
    const std::size_t n = potential_.size();
    fft_.forward(psi, ws.spectrum.data());
    for (std::size_t i = 0; i < ns; ++i) ws.spectrum[i] *= half_kinetic_[i];
    fft_.inverse(ws.spectrum.data(), psi);
    for (std::size_t i = 0; i < n; ++i) psi[i] *= potential_factor_[i];
    fft_.forward(psi, ws.spectrum.data());
    for (std::size_t i = 0; i < ns; ++i) {
      ws.spectrum[i] *= half_kinetic_[i];
      ws.spectrum2[i] = ws.spectrum[i] * symbol_[i];
    }
    fft_.inverse(ws.spectrum2.data(), hpsi);
    fft_.inverse(ws.spectrum.data(), psi);
    for (std::size_t i = 0; i < n; ++i) hpsi[i] += potential_[i] * psi[i];
  }

  // w = (T + shift)^{-1} r
  void precondition(const double* r, double* w, double shift, Workspace& ws) const {
    fft_.forward(r, ws.spectrum.data());
    for (std::size_t i = 0; i < symbol_.size(); ++i) ws.spectrum[i] /= symbol_[i] + shift;
    fft_.inverse(ws.spectrum.data(), w);
  }

  double potential_min() const { return *std::min_element(potential_.begin(), potential_.end()); }

  void apply_h(const double* psi, double* hpsi, Workspace& ws) const {
    const std::size_t ns = symbol_.size();
    fft_.forward(psi, ws.spectrum.data());
    for (std::size_t i = 0; i < ns; ++i) ws.spectrum[i] *= symbol_[i];
    fft_.inverse(ws.spectrum.data(), hpsi);
    for (std::size_t i = 0; i < potential_.size(); ++i) hpsi[i] += potential_[i] * psi[i];
  }

private:
  GridSpec grid_;
  lattice::RealTransform fft_;
  std::vector<double> potential_;
  std::vector<double> symbol_;
  std::vector<double> half_kinetic_;
  std::vector<double> potential_factor_;
};

// m <- m * r, in row blocks to bound scratch memory.
void right_multiply(Eigen::MatrixXd& m, const Eigen::MatrixXd& r) {
  constexpr Eigen::Index kBlock = 2048;
  Eigen::MatrixXd tmp(std::min(kBlock, m.rows()), r.cols());
  for (Eigen::Index row = 0; row < m.rows(); row += kBlock) {
    const Eigen::Index nr = std::min(kBlock, m.rows() - row);
    tmp.topRows(nr).noalias() = m.middleRows(row, nr) * r;
    m.middleRows(row, nr) = tmp.topRows(nr);
  }
}

// Columns [0, r.cols()) of m <- m.leftCols(r.rows()) * r. Row blocks are
// independent, so source and destination may overlap.
void right_multiply_into(Eigen::Ref<Eigen::MatrixXd> m, const Eigen::MatrixXd& r, Eigen::Index dest = 0) {
  constexpr Eigen::Index kBlock = 2048;
  Eigen::MatrixXd tmp(std::min(kBlock, m.rows()), r.cols());
  for (Eigen::Index row = 0; row < m.rows(); row += kBlock) {
    const Eigen::Index nr = std::min(kBlock, m.rows() - row);
    tmp.topRows(nr).noalias() = m.block(row, 0, nr, r.rows()) * r;
    m.block(row, dest, nr, r.cols()) = tmp.topRows(nr);
  }
}

// x <- x * top + q * bottom, in row blocks.
void combine(Eigen::MatrixXd& x, const Eigen::Ref<const Eigen::MatrixXd>& q, const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  constexpr Eigen::Index kBlock = 2048;
  Eigen::MatrixXd tmp(std::min(kBlock, x.rows()), top.cols());
  for (Eigen::Index row = 0; row < x.rows(); row += kBlock) {
    const Eigen::Index nr = std::min(kBlock, x.rows() - row);
    tmp.topRows(nr).noalias() = x.middleRows(row, nr) * top;
    tmp.topRows(nr).noalias() += q.middleRows(row, nr) * bottom;
    x.middleRows(row, nr) = tmp.topRows(nr);
  }
}

void throw_if_ill_conditioned(double lo, double hi) {
  if (!(lo > 0.0) || hi / lo > kMaxGramCondition) {
    std::ostringstream os;
    os << "ensemble is numerically rank deficient (Gram condition number "
       << (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) << " > " << kMaxGramCondition << ")";
    throw numerical_error(os.str());
  }
}

void check_condition(const Eigen::MatrixXd& gram) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw numerical_error("eigensolver failed on the Gram matrix");
  throw_if_ill_conditioned(eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff());
}

template <class Matrix>
Matrix inverse_sqrt(const Matrix& gram) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) throw numerical_error("eigensolver failed on the Gram matrix");
  const auto& lambda = eig.eigenvalues();
  throw_if_ill_conditioned(lambda.minCoeff(), lambda.maxCoeff());
  const Eigen::VectorXd scale = lambda.cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * scale.asDiagonal() * eig.eigenvectors().adjoint();
}

struct RefineOutcome {
  int iterations = 0;
  double worst_residual = 0.0;
};

// Block LOBPCG on the exact Hamiltonian with a kinetic preconditioner, started
// from a Rayleigh-Ritz ensemble (psi orthonormal, hpsi = H psi, energies the
// Ritz values). Removes the time-step bias the split propagator leaves behind.
// Search directions live in q: residual corrections W in [0, a), the previous
// step's P in [m, m + p).
RefineOutcome refine(const RealPropagator& prop, Eigen::MatrixXd& psi, Eigen::MatrixXd& hpsi,
                     Eigen::VectorXd& energies, int k, double target, int max_iterations, double cell,
                     const std::function<void(int, double, double)>& report) {
  const Eigen::Index n = psi.rows();
  const int m = static_cast<int>(psi.cols());
  const double vmin = prop.potential_min();
  Eigen::MatrixXd q(n, 2 * m);
  Eigen::MatrixXd hq(n, 2 * m);
  std::vector<int> parked;
  std::vector<double> res(m);
  RefineOutcome out;

  auto exact_h = [&] {
#pragma omp parallel
    {
      RealPropagator::Workspace ws = prop.workspace();
#pragma omp for schedule(static)
      for (int j = 0; j < m; ++j) prop.apply_h(psi.col(j).data(), hpsi.col(j).data(), ws);
    }
  };

  for (int it = 0;; ++it) {
    if (it > 0 && it % 20 == 0) exact_h();
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) res[j] = std::sqrt(cell) * (hpsi.col(j) - energies[j] * psi.col(j)).norm();
    out.worst_residual = *std::max_element(res.begin(), res.begin() + k);
    out.iterations = it;
    if (out.worst_residual <= target || it == max_iterations) return out;

    std::vector<int> active;
    std::vector<char> is_active(m, 0);
    for (int j = 0; j < m; ++j) {
      if (res[j] > target) {
        active.push_back(j);
        is_active[j] = 1;
      }
    }
    const int a = static_cast<int>(active.size());
#pragma omp parallel
    {
      RealPropagator::Workspace ws = prop.workspace();
      Eigen::VectorXd r(n);
#pragma omp for schedule(static)
      for (int t = 0; t < a; ++t) {
        const int j = active[t];
        r = hpsi.col(j) - energies[j] * psi.col(j);
        prop.precondition(r.data(), q.col(t).data(), std::max(energies[j] - vmin, 0.0) + 1.0, ws);
        prop.apply_h(q.col(t).data(), hq.col(t).data(), ws);
      }
    }
    int c = a;
    for (std::size_t s = 0; s < parked.size(); ++s) {
      if (!is_active[parked[s]]) continue;
      q.col(c) = q.col(m + static_cast<Eigen::Index>(s));
      hq.col(c) = hq.col(m + static_cast<Eigen::Index>(s));
      ++c;
    }

    auto qb = q.leftCols(c);
    auto hqb = hq.leftCols(c);
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::MatrixXd overlap = cell * (psi.transpose() * qb);
      qb.noalias() -= psi * overlap;
      hqb.noalias() -= hpsi * overlap;
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(c, c);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(qb.transpose(), cell);
    gram = gram.selfadjointView<Eigen::Lower>();
    Eigen::VectorXd scale(c);
    for (int i = 0; i < c; ++i) scale[i] = gram(i, i) > 0.0 ? 1.0 / std::sqrt(gram(i, i)) : 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> geig(scale.asDiagonal() * gram * scale.asDiagonal());
    if (geig.info() != Eigen::Success) throw numerical_error("eigensolver failed on the search-space Gram matrix");
    const double cutoff = 1e-10 * geig.eigenvalues().maxCoeff();
    int first = 0;
    while (first < c && geig.eigenvalues()[first] <= cutoff) ++first;
    const int r = c - first;
    if (r == 0) return out;
    const Eigen::MatrixXd basis = scale.asDiagonal() * geig.eigenvectors().rightCols(r) *
                                  geig.eigenvalues().tail(r).cwiseSqrt().cwiseInverse().asDiagonal();
    right_multiply_into(qb, basis);
    right_multiply_into(hqb, basis);

    const auto qr = q.leftCols(r);
    const auto hqr = hq.leftCols(r);
    Eigen::MatrixXd reduced(m + r, m + r);
    reduced.topLeftCorner(m, m) = energies.asDiagonal();
    reduced.topRightCorner(m, r) = cell * (hpsi.transpose() * qr);
    reduced.bottomLeftCorner(r, m) = reduced.topRightCorner(m, r).transpose();
    const Eigen::MatrixXd hqq = cell * (qr.transpose() * hqr);
    reduced.bottomRightCorner(r, r) = 0.5 * (hqq + hqq.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced);
    if (eig.info() != Eigen::Success) throw numerical_error("subspace Hamiltonian diagonalization failed");
    const Eigen::MatrixXd top = eig.eigenvectors().topLeftCorner(m, m);
    const Eigen::MatrixXd bottom = eig.eigenvectors().bottomLeftCorner(r, m);
    const double shift = (eig.eigenvalues().head(k) - energies.head(k)).cwiseAbs().maxCoeff();
    energies = eig.eigenvalues().head(m);
    combine(psi, qr, top, bottom);
    combine(hpsi, hqr, top, bottom);

    Eigen::MatrixXd next(r, a);
    for (int t = 0; t < a; ++t) next.col(t) = bottom.col(active[t]);
    right_multiply_into(q, next, m);
    right_multiply_into(hq, next, m);
    parked = active;
    if (report) report(it + 1, shift, out.worst_residual);
  }
}

void check_ensemble(const std::vector<StateFunction>& states) {
  if (states.empty()) throw invalid_argument("empty state ensemble");
  for (const StateFunction& s : states) {
    if (!(s.grid() == states.front().grid())) throw invalid_argument("ensemble members live on different grids");
  }
}

// psi'_j = sum_i psi_i r(i, j)
void rotate_states(std::vector<StateFunction>& states, const Eigen::MatrixXcd& r) {
  const GridSpec grid = states.front().grid();
  const std::size_t n = grid.size();
  const Eigen::Index k = static_cast<Eigen::Index>(states.size());
  Eigen::MatrixXcd block(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    block.col(j) = Eigen::Map<const Eigen::VectorXcd>(states[j].amplitudes().data(), n);
  }
  const Eigen::MatrixXcd rotated = block * r;
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<complex> amps(rotated.col(j).data(), rotated.col(j).data() + n);
    states[j] = StateFunction(grid, std::move(amps));
  }
}

void check_resolvable(const std::vector<oracle::HgIndex>& modes, const GridSpec& grid, double wx, double wy) {
  for (const oracle::HgIndex& idx : modes) {
    const double lambda_x = 2.0 * std::numbers::pi / std::sqrt(wx * (2.0 * idx.n + 1.0));
    const double lambda_y = 2.0 * std::numbers::pi / std::sqrt(wy * (2.0 * idx.m + 1.0));
    if (lambda_x < 4.0 * grid.spacing_x() || lambda_y < 4.0 * grid.spacing_y()) {
      std::ostringstream os;
      os << "starting mode (" << idx.n << "," << idx.m << ") is not resolved by the grid";
      throw invalid_argument(os.str());
    }
  }
}

Eigen::MatrixXd initial_block(int count, const GridSpec& grid, double wx, double wy, std::uint64_t seed,
                              bool random_init) {
  const std::size_t n = grid.size();
  Eigen::MatrixXd block(n, count);
  if (!random_init) {
    const auto modes = oracle::lowest_modes(static_cast<std::size_t>(count), wx, wy);
    check_resolvable(modes, grid, wx, wy);
    for (int s = 0; s < count; ++s) {
      const std::vector<double> values = oracle::sample_mode(modes[s], grid, wx, wy);
      block.col(s) = Eigen::Map<const Eigen::VectorXd>(values.data(), n);
    }
    return block;
  }
  const std::vector<double> envelope = oracle::sample_mode({0, 0}, grid, 0.5 * wx, 0.5 * wy);
  std::mt19937_64 rng(seed);
  for (int s = 0; s < count; ++s) {
    for (std::size_t i = 0; i < n; ++i) block(i, s) = envelope[i] * (2.0 * uniform01(rng) - 1.0);
  }
  return block;
}

}  // namespace

int ItpConfig::ensemble_size() const { return k + (extra_states >= 0 ? extra_states : std::max(4, k / 6)); }

void ItpConfig::validate() const {
  if (k < 1) throw invalid_argument("number of states k must be >= 1");
  if (!(dt_min > 0.0) || !(dt_initial >= dt_min)) throw invalid_argument("need dt_initial >= dt_min > 0");
  if (!(tolerance > 0.0)) throw invalid_argument("tolerance must be positive");
  if (max_iterations < 1) throw invalid_argument("max_iterations must be >= 1");
  if (residual_interval < 0) throw invalid_argument("residual_interval must be >= 0");
  if (!(refine_tolerance >= 0.0)) throw invalid_argument("refine_tolerance must be >= 0");
  if (max_refine_iterations < 0) throw invalid_argument("max_refine_iterations must be >= 0");
}

bool EigenSolution::all_converged() const {
  return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
}

std::vector<StateFunction> init_states(int k, const GridSpec& grid, double omega_x, double omega_y,
                                       std::uint64_t seed, bool random_init) {
  grid.validate();
  if (k < 1) throw invalid_argument("number of states k must be >= 1");
  if (static_cast<std::size_t>(k) > grid.size() / 4) throw invalid_argument("too many states for this grid");
  const Eigen::MatrixXd block = initial_block(k, grid, omega_x, omega_y, seed, random_init);
  std::vector<StateFunction> states;
  states.reserve(k);
  for (int s = 0; s < k; ++s) {
    std::vector<complex> amps(block.col(s).data(), block.col(s).data() + grid.size());
    states.emplace_back(grid, std::move(amps));
    states.back().normalize();
  }
  orthonormalize(states);
  return states;
}

StateFunction hamiltonian_apply(const StateFunction& psi, const ScalarField& potential) {
  check_potential(psi.grid(), potential);
  StateFunction out = lattice::kinetic_apply(psi);
  auto h = out.amplitudes();
  const auto p = psi.amplitudes();
  const auto v = potential.values();
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += v[i] * p[i];
  return out;
}

double itp_step(std::vector<StateFunction>& states, const ScalarField& potential, double dt) {
  check_ensemble(states);
  if (!(dt > 0.0)) throw invalid_argument("imaginary time step must be positive");
  const GridSpec grid = states.front().grid();
  check_potential(grid, potential);
  dt = safe_dt(dt, potential);

  const lattice::ComplexTransform fft(grid);
  const std::vector<double> symbol = lattice::kinetic_symbol(grid);
  std::vector<double> half_kinetic(symbol.size());
  for (std::size_t i = 0; i < symbol.size(); ++i) half_kinetic[i] = std::exp(-0.5 * dt * symbol[i]);
  const auto v = potential.values();

  for (StateFunction& s : states) {
    auto a = s.amplitudes();
    fft.forward(a);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= half_kinetic[i];
    fft.inverse(a);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= std::exp(-dt * v[i]);
    fft.forward(a);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= half_kinetic[i];
    fft.inverse(a);
    s.set_energy(std::nullopt);
    s.normalize();
  }
  return dt;
}

void orthonormalize(std::vector<StateFunction>& states) {
  check_ensemble(states);
  const Eigen::Index k = static_cast<Eigen::Index>(states.size());
  Eigen::MatrixXcd gram(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      const complex s = lattice::inner_product(states[i], states[j]);
      gram(i, j) = s;
      gram(j, i) = std::conj(s);
    }
  }
  const Eigen::MatrixXcd x = inverse_sqrt(gram);
  rotate_states(states, x);
}

void subspace_rotate(std::vector<StateFunction>& states, const ScalarField& potential) {
  check_ensemble(states);
  check_potential(states.front().grid(), potential);
  const Eigen::Index k = static_cast<Eigen::Index>(states.size());
  std::vector<StateFunction> hstates;
  hstates.reserve(k);
  for (const StateFunction& s : states) hstates.push_back(hamiltonian_apply(s, potential));
  Eigen::MatrixXcd h(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      const complex hij = 0.5 * (lattice::inner_product(states[i], hstates[j]) +
                                 std::conj(lattice::inner_product(states[j], hstates[i])));
      h(i, j) = hij;
      h(j, i) = std::conj(hij);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
  if (eig.info() != Eigen::Success) throw numerical_error("subspace Hamiltonian diagonalization failed");
  rotate_states(states, eig.eigenvectors());
  for (Eigen::Index j = 0; j < k; ++j) states[j].set_energy(eig.eigenvalues()[j]);
}

EigenSolution solve(const GridSpec& grid, const ScalarField& potential, const ItpConfig& cfg, double omega_x,
                    double omega_y, const ProgressCallback& progress) {
  cfg.validate();
  grid.validate();
  check_potential(grid, potential);
  const int k = cfg.k;
  const int ensemble = cfg.ensemble_size();
  if (static_cast<std::size_t>(ensemble) > grid.size() / 4) throw invalid_argument("too many states for this grid");

  const std::size_t n = grid.size();
  const double cell = grid.cell_area();
  RealPropagator prop(grid, potential);

  Eigen::MatrixXd psi = initial_block(ensemble, grid, omega_x, omega_y, cfg.seed, cfg.random_init);
  Eigen::MatrixXd hpsi(n, ensemble);

  auto for_each_state = [&](auto&& fn) {
#pragma omp parallel
    {
      RealPropagator::Workspace ws = prop.workspace();
#pragma omp for schedule(static)
      for (int s = 0; s < ensemble; ++s) fn(s, ws);
    }
  };

  auto compute_h = [&] {
    for_each_state([&](int s, RealPropagator::Workspace& ws) { prop.apply_h(psi.col(s).data(), hpsi.col(s).data(), ws); });
  };

  // Loewdin then Rayleigh-Ritz, as one rotation psi <- psi S^{-1/2} U.
  Eigen::VectorXd energies(ensemble);
  auto rayleigh_ritz = [&](bool rotate_h) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(ensemble, ensemble);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(psi.transpose(), cell);
    gram = gram.selfadjointView<Eigen::Lower>();
    Eigen::MatrixXd hmat = cell * (psi.transpose() * hpsi);
    hmat = 0.5 * (hmat + hmat.transpose()).eval();
    const Eigen::MatrixXd x = inverse_sqrt(gram);
    const Eigen::MatrixXd reduced = x * hmat * x;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (reduced + reduced.transpose()));
    if (eig.info() != Eigen::Success) throw numerical_error("subspace Hamiltonian diagonalization failed");
    const Eigen::MatrixXd r = x * eig.eigenvectors();
    right_multiply(psi, r);
    if (rotate_h) right_multiply(hpsi, r);
    energies = eig.eigenvalues();
  };

  // Ritz vectors of the propagator on the propagated block: with phi = P psi
  // and psi orthonormal, the Gram matrix phi^T phi is psi^T P^2 psi, so its
  // eigenvectors (scaled by Lambda^{-1/2}) orthonormalize phi and diagonalize
  // P^2 at once. This is Loewdin S^{-1/2} followed by a rotation. Energies are
  // the Hamiltonian's Rayleigh quotients of the resulting states.
  auto propagator_ritz = [&](bool rotate_h) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(ensemble, ensemble);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(psi.transpose(), cell);
    gram = gram.selfadjointView<Eigen::Lower>();
    Eigen::MatrixXd hmat = cell * (psi.transpose() * hpsi);
    hmat = 0.5 * (hmat + hmat.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw numerical_error("eigensolver failed on the Gram matrix");
    const Eigen::VectorXd lambda = eig.eigenvalues().reverse();
    // Rank test on the unit-diagonal Gram so that the spread of propagator
    // eigenvalues does not count as ill-conditioning.
    const Eigen::VectorXd d = gram.diagonal().cwiseSqrt().cwiseInverse();
    check_condition(d.asDiagonal() * gram * d.asDiagonal());
    const Eigen::MatrixXd r = eig.eigenvectors().rowwise().reverse() * lambda.cwiseSqrt().cwiseInverse().asDiagonal();
    right_multiply(psi, r);
    if (rotate_h) right_multiply(hpsi, r);
    energies = (r.transpose() * hmat * r).diagonal();
  };

  auto residual_norms = [&] {
    std::vector<double> res(ensemble);
    for (int s = 0; s < ensemble; ++s) {
      res[s] = std::sqrt(cell * (hpsi.col(s) - energies[s] * psi.col(s)).squaredNorm());
    }
    return res;
  };

  compute_h();
  rayleigh_ritz(false);
  Eigen::VectorXd previous = energies;

  double dt = safe_dt(cfg.dt_initial, potential);
  prop.set_dt(dt);
  double worst_residual = std::numeric_limits<double>::quiet_NaN();
  bool done = false;
  int sweep = 0;
  Eigen::VectorXd delta = Eigen::VectorXd::Constant(ensemble, std::numeric_limits<double>::infinity());

  while (!done && sweep < cfg.max_iterations) {
    ++sweep;
    for_each_state([&](int s, RealPropagator::Workspace& ws) { prop.step(psi.col(s).data(), hpsi.col(s).data(), ws); });
    for (int s = 0; s < ensemble; ++s) {
      const double norm = psi.col(s).squaredNorm();
      if (!(norm > 0.0) || !std::isfinite(norm)) throw numerical_error("state collapsed during propagation");
    }
    const bool want_residual = cfg.residual_interval > 0 && sweep % cfg.residual_interval == 0;
    propagator_ritz(want_residual);
    if (want_residual) {
      const auto res = residual_norms();
      worst_residual = *std::max_element(res.begin(), res.begin() + k);
    }

    delta = (energies - previous).cwiseAbs();
    previous = energies;
    const double max_delta = delta.head(k).maxCoeff();
    if (progress) progress({sweep, dt, max_delta, worst_residual});

    if (dt <= cfg.dt_min && max_delta < cfg.tolerance) {
      done = true;
    } else if (dt > cfg.dt_min && max_delta < 10.0 * cfg.tolerance) {
      dt = std::max(0.5 * dt, cfg.dt_min);
      prop.set_dt(dt);
    }
  }

  compute_h();
  rayleigh_ritz(true);
  compute_h();
  bool polished = true;
  if (cfg.refine_tolerance > 0.0) {
    const int sweeps = sweep;
    const RefineOutcome r = refine(prop, psi, hpsi, energies, k, cfg.refine_tolerance, cfg.max_refine_iterations, cell,
                                   [&](int it, double shift, double res) {
                                     if (progress) progress({sweeps + it, dt, shift, res});
                                   });
    compute_h();
    rayleigh_ritz(true);
    compute_h();
    polished = r.worst_residual <= cfg.refine_tolerance;
    if (!polished) {
      std::ostringstream os;
      os << "exact-Hamiltonian polish stopped after " << r.iterations << " iterations with residual "
         << r.worst_residual << " > " << cfg.refine_tolerance;
      warn(os.str());
    }
  }
  const std::vector<double> residuals = residual_norms();

  EigenSolution out;
  out.grid = grid;
  out.iterations = sweep;
  out.final_dt = dt;
  out.states.reserve(k);
  for (int s = 0; s < k; ++s) {
    std::vector<complex> amps(psi.col(s).data(), psi.col(s).data() + n);
    out.states.emplace_back(grid, std::move(amps), energies[s]);
    out.energies.push_back(energies[s]);
    out.residuals.push_back(residuals[s]);
    out.converged.push_back(dt <= cfg.dt_min && delta[s] < cfg.tolerance &&
                            (cfg.refine_tolerance == 0.0 || residuals[s] <= cfg.refine_tolerance));
  }
  if (!done) {
    std::ostringstream os;
    os << "imaginary time propagation stopped after " << sweep << " sweeps without converging";
    warn(os.str());
  }
  return out;
}

}  // namespace qlscar::itp
