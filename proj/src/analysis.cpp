#include "analysis.hpp"

#include "errors.hpp"
#include "oracle.hpp"
#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

namespace qlscar::analysis {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double segment_distance2(double px, double py, classical::Point a, classical::Point b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double u = len2 > 0.0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  const double ex = px - (a.x + u * dx);
  const double ey = py - (a.y + u * dy);
  return ex * ex + ey * ey;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
  return out;
}

DosCurve dos(std::span<const double> energies, double window, std::span<const double> samples) {
  if (!(window > 0.0)) throw invalid_argument("DOS window must be positive");
  DosCurve curve;
  curve.window = window;
  curve.energy.assign(samples.begin(), samples.end());
  curve.dos.assign(samples.size(), 0.0);
  const double norm = 1.0 / (std::sqrt(kTwoPi) * window);
  const double inv_two_w2 = 1.0 / (2.0 * window * window);
  const double reach = 40.0 * window;
  std::vector<double> sorted(energies.begin(), energies.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double e = samples[i];
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), e - reach);
    auto hi = std::upper_bound(sorted.begin(), sorted.end(), e + reach);
    double sum = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double d = e - *it;
      sum += std::exp(-d * d * inv_two_w2);
    }
    curve.dos[i] = norm * sum;
  }
  return curve;
}

std::vector<Level> level_weights(std::span<const double> energies, double window) {
  std::vector<double> sorted(energies.begin(), energies.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<Level> levels;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i == sorted.size() || sorted[i] - sorted[i - 1] > window) {
      if (i > start) {
        const double mean = std::accumulate(sorted.begin() + start, sorted.begin() + i, 0.0) / (i - start);
        levels.push_back({mean, static_cast<int>(i - start)});
      }
      start = i;
    }
  }
  return levels;
}

int max_level_weight(std::span<const double> energies, double window) {
  int best = 0;
  for (const Level& l : level_weights(energies, window)) best = std::max(best, l.weight);
  return best;
}

EnergySource analytic_energies(double e_max, double omega_x) {
  return [e_max, omega_x](double ratio) {
    if (!(ratio > 0.0)) throw invalid_argument("frequency ratio must be positive");
    const double omega_y = omega_x / ratio;
    std::vector<double> out;
    for (const oracle::HgIndex& idx : oracle::enumerate_modes(e_max, omega_x, omega_y)) {
      out.push_back(oracle::unperturbed_energy(idx, omega_x, omega_y));
    }
    return out;
  };
}

std::vector<RatioDos> dos_ratio_scan(std::span<const double> ratios, double window, std::span<const double> samples,
                                     const EnergySource& source) {
  std::vector<RatioDos> out;
  out.reserve(ratios.size());
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw invalid_argument("scan ratios must lie in (0, 1]");
    RatioDos row;
    row.ratio = r;
    row.energies = source(r);
    row.curve = dos(row.energies, window, samples);
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------

double classical_area(double energy, double omega_x, double omega_y) { return kTwoPi * energy / (omega_x * omega_y); }

double alpha_value(const lattice::StateFunction& psi, double energy, double omega_x, double omega_y) {
  double sum = 0.0;
  for (const lattice::complex& a : psi.amplitudes()) {
    const double d = std::norm(a);
    sum += d * d;
  }
  return classical_area(energy, omega_x, omega_y) * sum * psi.grid().cell_area();
}

// ---------------------------------------------------------------------------

std::vector<double> density(const lattice::StateFunction& psi) {
  std::vector<double> out(psi.amplitudes().size());
  std::transform(psi.amplitudes().begin(), psi.amplitudes().end(), out.begin(),
                 [](const lattice::complex& a) { return std::norm(a); });
  return out;
}

double local_wavelength(double energy) { return kTwoPi / std::sqrt(2.0 * energy); }

ScarMatch scar_measure(const lattice::GridSpec& grid, std::span<const double> rho,
                       std::span<const classical::LissajousOrbit> templates, double tube_width, double ellipse_area) {
  if (templates.empty()) throw invalid_argument("scar_measure needs at least one template");
  if (!(tube_width > 0.0)) throw invalid_argument("tube width must be positive");
  if (!(ellipse_area > 0.0)) throw invalid_argument("ellipse area must be positive");
  if (rho.size() != grid.size()) throw invalid_argument("density size does not match grid");

  const double hw = 0.5 * tube_width;
  const double hw2 = hw * hw;
  const double hx = grid.spacing_x();
  const double hy = grid.spacing_y();
  const double cell = grid.cell_area();
  std::vector<std::uint32_t> stamp(grid.size(), 0);
  std::uint32_t tag = 0;

  ScarMatch best;
  for (std::size_t t = 0; t < templates.size(); ++t) {
    const auto& pts = templates[t].samples;
    if (pts.size() < 2) continue;
    ++tag;
    double mass = 0.0;
    std::size_t nodes = 0;
    bool outside = false;
    for (std::size_t s = 0; s < pts.size() && !outside; ++s) {
      const classical::Point a = pts[s];
      const classical::Point b = pts[(s + 1) % pts.size()];
      const int i0 = static_cast<int>(std::ceil((std::min(a.x, b.x) - hw + grid.extent_x) / hx));
      const int i1 = static_cast<int>(std::floor((std::max(a.x, b.x) + hw + grid.extent_x) / hx));
      const int j0 = static_cast<int>(std::ceil((std::min(a.y, b.y) - hw + grid.extent_y) / hy));
      const int j1 = static_cast<int>(std::floor((std::max(a.y, b.y) + hw + grid.extent_y) / hy));
      if (i0 < 0 || j0 < 0 || i1 >= grid.points_x || j1 >= grid.points_y) {
        outside = true;
        break;
      }
      for (int j = j0; j <= j1; ++j) {
        const double y = grid.y(j);
        for (int i = i0; i <= i1; ++i) {
          const std::size_t idx = grid.index(i, j);
          if (stamp[idx] == tag) continue;
          if (segment_distance2(grid.x(i), y, a, b) <= hw2) {
            stamp[idx] = tag;
            mass += rho[idx];
            ++nodes;
          }
        }
      }
    }
    if (outside) {
      ++best.skipped;
      continue;
    }
    if (nodes == 0) continue;
    const double p_tube = mass * cell;
    const double f_tube = static_cast<double>(nodes) * cell / ellipse_area;
    const double s = p_tube / f_tube;
    if (!best.found || s > best.s) {
      best.s = s;
      best.tube_probability = p_tube;
      best.tube_fraction = f_tube;
      best.template_index = t;
      best.found = true;
    }
  }
  return best;
}

ScarMatch scar_measure(const lattice::StateFunction& psi, std::span<const classical::LissajousOrbit> templates,
                       double tube_width, double ellipse_area) {
  const std::vector<double> rho = density(psi);
  return scar_measure(psi.grid(), rho, templates, tube_width, ellipse_area);
}

std::string_view to_string(ScarKind kind) {
  switch (kind) {
    case ScarKind::String: return "string";
    case ScarKind::Loop: return "loop";
    case ScarKind::None: break;
  }
  return "none";
}

std::vector<classical::LissajousOrbit> templates_for(Commensurability pq, double energy, double omega_y,
                                                     const SurveyConfig& cfg) {
  return classical::orbit_family(pq.p, pq.q, energy, cfg.n_eta, cfg.n_phi, omega_y / pq.q, 0, false);
}

ScarReport analyze_state(const lattice::StateFunction& psi, std::size_t index, double energy, double omega_x,
                         double omega_y, const SurveyConfig& cfg) {
  ScarReport report;
  report.index = index;
  report.energy = energy;
  report.alpha = alpha_value(psi, energy, omega_x, omega_y);
  if (cfg.candidates.empty() || !(energy > 0.0)) return report;

  const std::vector<double> rho = density(psi);
  const double width = cfg.tube_width.value_or(local_wavelength(energy));
  const double area = classical_area(energy, omega_x, omega_y);
  std::size_t skipped = 0;
  std::optional<classical::LissajousOrbit> best_orbit;
  double best_s = 0.0;
  for (const Commensurability& pq : cfg.candidates) {
    const auto bank = templates_for(pq, energy, omega_y, cfg);
    const ScarMatch match = scar_measure(psi.grid(), rho, bank, width, area);
    skipped += match.skipped;
    if (match.found && (!best_orbit || match.s > best_s)) {
      best_s = match.s;
      best_orbit = bank[match.template_index];
    }
  }
  if (skipped > 0) {
    std::ostringstream os;
    os << "state " << index << ": " << skipped << " template tube(s) leave the grid and were skipped";
    warn(os.str());
  }
  if (!best_orbit) return report;
  report.s = best_s;
  report.p = best_orbit->p;
  report.q = best_orbit->q;
  report.eta = best_orbit->eta;
  report.phase = best_orbit->phase;
  report.kind = classical::classify_kind(*best_orbit) == classical::OrbitKind::String ? ScarKind::String : ScarKind::Loop;
  report.strongly_scarred = best_s >= cfg.threshold;
  return report;
}

SurveyResult scar_survey(const itp::EigenSolution& solution, double omega_x, double omega_y, const SurveyConfig& cfg) {
  SurveyResult out;
  const std::size_t count = solution.states.size();
  out.reports.resize(count);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
    const double energy = solution.energies.at(i);
    out.reports[i] = analyze_state(solution.states[i], static_cast<std::size_t>(i), energy, omega_x, omega_y, cfg);
  }
  for (const ScarReport& r : out.reports) out.scarred_count += r.strongly_scarred ? 1 : 0;
  out.scarred_fraction = count ? static_cast<double>(out.scarred_count) / count : 0.0;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<DeviationRow> deviation_scan(std::span<const double> deltas, Commensurability base, double omega_y,
                                         const SurveyConfig& cfg, std::size_t n_scars, const RatioSolver& solver) {
  if (std::find(deltas.begin(), deltas.end(), 0.0) == deltas.end()) {
    throw invalid_argument("deviation scan needs delta = 0 in its list");
  }
  if (n_scars == 0) throw invalid_argument("n_scars must be >= 1");
  SurveyConfig survey_cfg = cfg;
  survey_cfg.candidates = {base};
  const double base_ratio = static_cast<double>(base.p) / base.q;

  std::vector<DeviationRow> rows;
  rows.reserve(deltas.size());
  for (double delta : deltas) {
    DeviationRow row;
    row.delta = delta;
    const double ratio = base_ratio + delta;
    try {
      const itp::EigenSolution solution = solver(ratio);
      const SurveyResult survey = scar_survey(solution, ratio * omega_y, omega_y, survey_cfg);
      row.scar_count = survey.scarred_count;
      std::vector<const ScarReport*> loops;
      for (const ScarReport& r : survey.reports) {
        if (r.strongly_scarred && r.kind == ScarKind::Loop) loops.push_back(&r);
      }
      std::stable_sort(loops.begin(), loops.end(), [](const ScarReport* a, const ScarReport* b) { return *a->s > *b->s; });
      row.averaged = std::min(n_scars, loops.size());
      row.short_of_target = loops.size() < n_scars;
      double sum = 0.0;
      for (std::size_t i = 0; i < row.averaged; ++i) sum += loops[i]->alpha;
      row.mean_alpha = row.averaged ? sum / row.averaged : std::nan("");
    } catch (const Error& e) {
      warn("deviation scan point delta = " + format_double(delta) + " failed: " + e.what());
      row.failed = true;
      row.mean_alpha = std::nan("");
    }
    rows.push_back(row);
  }
  double reference = std::nan("");
  for (const DeviationRow& r : rows) {
    if (r.delta == 0.0) reference = r.mean_alpha;
  }
  for (DeviationRow& r : rows) r.normalized = reference / r.mean_alpha;
  return rows;
}

// ---------------------------------------------------------------------------

void write_dos_csv(std::ostream& out, const DosCurve& curve) {
  out << "E,D\n";
  for (std::size_t i = 0; i < curve.energy.size(); ++i) {
    out << format_double(curve.energy[i]) << ',' << format_double(curve.dos[i]) << '\n';
  }
}

void write_scar_reports_csv(std::ostream& out, std::span<const ScarReport> reports) {
  out << "index,E,alpha,s,p,q,eta,phi,kind,flag\n";
  for (const ScarReport& r : reports) {
    out << r.index << ',' << format_double(r.energy) << ',' << format_double(r.alpha) << ',';
    if (r.s) {
      out << format_double(*r.s) << ',' << r.p << ',' << r.q << ',' << format_double(r.eta) << ','
          << format_double(r.phase);
    } else {
      out << ",,,,";
    }
    out << ',' << to_string(r.kind) << ',' << (r.strongly_scarred ? 1 : 0) << '\n';
  }
}

void write_deviation_csv(std::ostream& out, std::span<const DeviationRow> rows) {
  out << "delta,ratio,count,mean_alpha,averaged,short,failed\n";
  for (const DeviationRow& r : rows) {
    out << format_double(r.delta) << ',' << format_double(r.normalized) << ',' << r.scar_count << ','
        << format_double(r.mean_alpha) << ',' << r.averaged << ',' << (r.short_of_target ? 1 : 0) << ','
        << (r.failed ? 1 : 0) << '\n';
  }
}

}  // namespace qlscar::analysis
