#include "pipeline.hpp"

#include "analysis.hpp"
#include "classical.hpp"
#include "errors.hpp"
#include "oracle.hpp"
#include "potential.hpp"
#include "text.hpp"

#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qlscar::pipeline {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

class Stopwatch {
public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

fs::path prepare_output(const RunConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Progress lines go to a temporary file that is renamed once the run ends.
class ProgressLog {
public:
  ProgressLog(const fs::path& path, LineSink forward) : path_(path), forward_(std::move(forward)) {
    tmp_ = path_;
    tmp_ += ".partial";
    out_.open(tmp_, std::ios::trunc);
    if (!out_) throw io_error("cannot create " + tmp_.string());
  }
  ~ProgressLog() {
    if (out_.is_open()) {
      out_.close();
      std::error_code ec;
      fs::rename(tmp_, path_, ec);
    }
  }
  void operator()(const std::string& line) {
    out_ << line << '\n';
    if (forward_) forward_(line);
  }

private:
  fs::path path_;
  fs::path tmp_;
  LineSink forward_;
  std::ofstream out_;
};

std::vector<double> dos_samples(const RunConfig& cfg, double lo, double hi) {
  constexpr std::size_t kMaxSamples = 2'000'000;
  std::size_t count = static_cast<std::size_t>(cfg.dos_samples);
  if (count == 0) count = static_cast<std::size_t>(std::ceil((hi - lo) / (0.5 * cfg.dos_window))) + 1;
  count = std::clamp<std::size_t>(count, 2, kMaxSamples);
  return analysis::linspace(lo, hi, count);
}

itp::EigenSolution as_solution(io::WavefunctionArchive&& archive) {
  itp::EigenSolution sol;
  sol.grid = archive.grid;
  sol.energies = std::move(archive.energies);
  sol.states = std::move(archive.states);
  sol.residuals.assign(sol.energies.size(), std::nan(""));
  sol.converged.assign(sol.energies.size(), true);
  return sol;
}

std::string padded(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu", i);
  return buf;
}

}  // namespace

std::string progress_line(const itp::Progress& p) {
  json line;
  line["sweep"] = p.sweep;
  line["dt"] = p.dt;
  line["max_delta_energy"] = number_or_null(p.max_delta_energy);
  line["worst_residual"] = number_or_null(p.worst_residual);
  return line.dump();
}

SolveOutcome cmd_solve(const RunConfig& cfg, const fs::path& base_dir, const LineSink& progress) {
  cfg.validate();
  const fs::path dir = prepare_output(cfg);
  Stopwatch clock;

  const lattice::GridSpec grid = resolve_grid(cfg);
  const potential::BumpSet bumps = resolve_bumps(cfg, base_dir);
  const potential::TotalPotential total = potential::total_potential(grid, cfg.potential, bumps);
  io::write_atomic(dir / "bumps.csv", [&](std::ostream& out) { potential::write_bumps_csv(out, bumps); });
  const double t_potential = clock.lap();

  itp::EigenSolution solution;
  {
    ProgressLog log(dir / "progress.jsonl", progress);
    solution = itp::solve(grid, total.field, cfg.itp, cfg.potential.omega_x(), cfg.potential.omega_y(),
                          [&](const itp::Progress& p) { log(progress_line(p)); });
  }
  const double t_solve = clock.lap();

  SolveOutcome outcome;
  outcome.converged = solution.all_converged();
  outcome.archive = dir / "states.qlsc";
  outcome.metadata = dir / "metadata.json";
  io::save_archive(outcome.archive, {solution.grid, solution.energies, solution.states});
  const double t_write = clock.lap();

  json meta;
  meta["status"] = outcome.converged ? "converged" : "unconverged";
  meta["config"] = json::parse(to_json(cfg));
  meta["grid"] = {{"extent_x", grid.extent_x},
                  {"extent_y", grid.extent_y},
                  {"points_x", grid.points_x},
                  {"points_y", grid.points_y}};
  meta["omega_x"] = cfg.potential.omega_x();
  meta["omega_y"] = cfg.potential.omega_y();
  meta["bump_seed"] = bumps.seed;
  meta["bump_count"] = bumps.positions.size();
  meta["bump_amplitude"] = bumps.amplitude;
  meta["bump_sigma"] = bumps.sigma;
  json positions = json::array();
  for (const potential::Point& p : bumps.positions) positions.push_back({p.x, p.y});
  meta["bumps"] = std::move(positions);
  meta["itp_seed"] = cfg.itp.seed;
  meta["ensemble_size"] = cfg.itp.ensemble_size();
  meta["iterations"] = solution.iterations;
  meta["final_dt"] = solution.final_dt;
  meta["threads"] = omp_get_max_threads();
  meta["timings_s"] = {{"potential", t_potential}, {"solve", t_solve}, {"write", t_write}};
  json states = json::array();
  for (std::size_t i = 0; i < solution.size(); ++i) {
    states.push_back({{"index", i},
                      {"energy", solution.energies[i]},
                      {"residual", number_or_null(solution.residuals[i])},
                      {"converged", static_cast<bool>(solution.converged[i])}});
  }
  meta["states"] = std::move(states);
  io::write_text_atomic(outcome.metadata, meta.dump(2) + "\n");
  return outcome;
}

void cmd_analyze(const RunConfig& cfg, const fs::path& archive_path) {
  cfg.validate();
  itp::EigenSolution solution = as_solution(io::load_archive(archive_path));
  const fs::path dir = prepare_output(cfg);
  const double wx = cfg.potential.omega_x();
  const double wy = cfg.potential.omega_y();

  const analysis::SurveyResult survey = analysis::scar_survey(solution, wx, wy, cfg.analysis);
  io::write_atomic(dir / "scar_reports.csv",
                   [&](std::ostream& out) { analysis::write_scar_reports_csv(out, survey.reports); });
  io::write_atomic(dir / "alpha.csv", [&](std::ostream& out) {
    out << "index,E,alpha\n";
    for (const auto& r : survey.reports) {
      out << r.index << ',' << format_double(r.energy) << ',' << format_double(r.alpha) << '\n';
    }
  });

  if (!solution.energies.empty()) {
    const auto [lo, hi] = std::minmax_element(solution.energies.begin(), solution.energies.end());
    const double pad = 5.0 * cfg.dos_window;
    const auto samples = dos_samples(cfg, *lo - pad, *hi + pad);
    const analysis::DosCurve curve = analysis::dos(solution.energies, cfg.dos_window, samples);
    io::write_atomic(dir / "dos.csv", [&](std::ostream& out) { analysis::write_dos_csv(out, curve); });
  }

  json summary;
  summary["archive"] = archive_path.string();
  summary["state_count"] = solution.size();
  summary["scarred_count"] = survey.scarred_count;
  summary["scarred_fraction"] = survey.scarred_fraction;
  summary["threshold"] = cfg.analysis.threshold;
  io::write_text_atomic(dir / "survey.json", summary.dump(2) + "\n");

  std::vector<const analysis::ScarReport*> flagged;
  for (const auto& r : survey.reports) {
    if (r.strongly_scarred) flagged.push_back(&r);
  }
  std::stable_sort(flagged.begin(), flagged.end(),
                   [](const analysis::ScarReport* a, const analysis::ScarReport* b) { return *a->s > *b->s; });
  flagged.resize(std::min<std::size_t>(flagged.size(), static_cast<std::size_t>(cfg.max_images)));
  for (const analysis::ScarReport* r : flagged) {
    const std::vector<double> rho = analysis::density(solution.states[r->index]);
    const std::string stem = padded(r->index);
    io::write_atomic(dir / ("state_" + stem + ".pgm"),
                     [&](std::ostream& out) { io::write_pgm(out, solution.grid, rho); }, true);
    const classical::LissajousOrbit orbit =
        classical::make_orbit(r->p, r->q, r->energy, r->eta, r->phase, 64 * std::max(r->p, r->q) * 4, wy / r->q);
    io::write_atomic(dir / ("orbit_" + stem + ".csv"),
                     [&](std::ostream& out) { classical::write_orbit_csv(out, orbit); });
  }
}

void cmd_scan(const RunConfig& cfg, const fs::path& base_dir, const LineSink& progress) {
  cfg.validate();
  if (cfg.scan.ratios.empty() && cfg.scan.deltas.empty()) {
    throw invalid_argument("scan needs scan.ratios or scan.deltas");
  }
  const fs::path dir = prepare_output(cfg);
  ProgressLog log(dir / "progress.jsonl", progress);
  const potential::BumpSet bumps = resolve_bumps(cfg, base_dir);

  auto solve_at = [&](double ratio, const std::string& tag, double value) {
    RunConfig point = cfg;
    point.potential.ratio_override = ratio;
    const lattice::GridSpec grid = resolve_grid(point);
    const potential::TotalPotential total = potential::total_potential(grid, point.potential, bumps);
    itp::EigenSolution sol = itp::solve(grid, total.field, point.itp, point.potential.omega_x(),
                                        point.potential.omega_y(), [&](const itp::Progress& p) {
                                          json line = json::parse(progress_line(p));
                                          line[tag] = value;
                                          log(line.dump());
                                        });
    if (!sol.all_converged()) warn("scan point " + tag + " = " + format_double(value) + " did not converge");
    return sol;
  };

  if (!cfg.scan.ratios.empty()) {
    const analysis::EnergySource analytic = analysis::analytic_energies(cfg.scan.max_energy, cfg.potential.omega0);
    const auto samples = dos_samples(cfg, 0.0, cfg.scan.max_energy);
    std::ostringstream dos_rows;
    std::ostringstream weight_rows;
    dos_rows << "ratio,E,D\n";
    weight_rows << "ratio,states,levels,max_weight,failed\n";
    for (double ratio : cfg.scan.ratios) {
      try {
        if (!(ratio > 0.0 && ratio <= 1.0)) throw invalid_argument("scan ratios must lie in (0, 1]");
        std::vector<double> energies;
        if (cfg.scan.source == "analytic") {
          energies = analytic(ratio);
        } else {
          energies = solve_at(ratio, "ratio", ratio).energies;
        }
        const analysis::DosCurve curve = analysis::dos(energies, cfg.dos_window, samples);
        const auto levels = analysis::level_weights(energies, cfg.dos_window);
        int max_weight = 0;
        for (const auto& l : levels) max_weight = std::max(max_weight, l.weight);
        for (std::size_t i = 0; i < curve.energy.size(); ++i) {
          dos_rows << format_double(ratio) << ',' << format_double(curve.energy[i]) << ','
                   << format_double(curve.dos[i]) << '\n';
        }
        weight_rows << format_double(ratio) << ',' << energies.size() << ',' << levels.size() << ',' << max_weight
                    << ",0\n";
      } catch (const Error& e) {
        warn("ratio scan point " + format_double(ratio) + " failed: " + e.what());
        weight_rows << format_double(ratio) << ",,,,1\n";
      }
    }
    io::write_text_atomic(dir / "dos_scan.csv", dos_rows.str());
    io::write_text_atomic(dir / "level_weights.csv", weight_rows.str());
  }

  if (!cfg.scan.deltas.empty()) {
    const analysis::Commensurability base{cfg.potential.p, cfg.potential.q};
    const auto rows = analysis::deviation_scan(cfg.scan.deltas, base, cfg.potential.omega_y(), cfg.analysis,
                                               cfg.scan.n_scars,
                                               [&](double ratio) {
                                                 const double delta =
                                                     ratio - static_cast<double>(base.p) / base.q;
                                                 return solve_at(ratio, "delta", delta);
                                               });
    io::write_atomic(dir / "deviation.csv", [&](std::ostream& out) { analysis::write_deviation_csv(out, rows); });
  }
}

void export_orbit(int p, int q, double energy, double eta, double phase, int samples, double omega0,
                  const fs::path& out) {
  const classical::LissajousOrbit orbit = classical::make_orbit(p, q, energy, eta, phase, samples, omega0);
  io::write_atomic(out, [&](std::ostream& os) { classical::write_orbit_csv(os, orbit); });
}

void export_oracle(const RunConfig& cfg, double e_cut, std::size_t states, const fs::path& out,
                   const fs::path& base_dir) {
  cfg.validate();
  const potential::BumpSet bumps = resolve_bumps(cfg, base_dir);
  const oracle::TruncatedSolution sol = oracle::diagonalize_truncated(e_cut, bumps, cfg.potential);
  io::write_atomic(out, [&](std::ostream& os) { oracle::write_coefficients_csv(os, sol, states); });
  fs::path energies = out;
  energies.replace_extension();
  energies += "_energies.csv";
  io::write_atomic(energies, [&](std::ostream& os) {
    os << "state,E\n";
    for (std::size_t i = 0; i < std::min(states, sol.size()); ++i) os << i << ',' << format_double(sol.energies[i]) << '\n';
  });
}

void export_bumps(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  const potential::BumpSet bumps = potential::scatter_bumps(cfg.potential);
  io::write_atomic(out, [&](std::ostream& os) { potential::write_bumps_csv(os, bumps); });
}

void export_density(const fs::path& archive_path, std::size_t index, const fs::path& out) {
  const io::WavefunctionArchive archive = io::load_archive(archive_path);
  if (index >= archive.states.size()) {
    throw invalid_argument("state index " + std::to_string(index) + " out of range (archive holds " +
                           std::to_string(archive.states.size()) + ")");
  }
  const std::vector<double> rho = analysis::density(archive.states[index]);
  io::write_atomic(out, [&](std::ostream& os) { io::write_pgm(os, archive.grid, rho); }, true);
}

}  // namespace qlscar::pipeline
