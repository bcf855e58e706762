#pragma once

#include "io.hpp"
#include "itp.hpp"
#include "run_config.hpp"

#include <filesystem>
#include <functional>
#include <string>

namespace qlscar::pipeline {

/// One JSON object per line, no trailing newline.
using LineSink = std::function<void(const std::string&)>;

struct SolveOutcome {
  std::filesystem::path archive;
  std::filesystem::path metadata;
  bool converged = false;
};

/// Builds the potential, solves, and writes into cfg.output_dir:
///   bumps.csv, states.qlsc, metadata.json, progress.jsonl
/// `base_dir` resolves a relative bump file. Unconverged states are still
/// written; metadata marks them and `converged` is false.
SolveOutcome cmd_solve(const RunConfig& cfg, const std::filesystem::path& base_dir = {}, const LineSink& progress = {});

/// Writes scar_reports.csv, alpha.csv, dos.csv, survey.json and, for the
/// flagged states with the largest s, state_<i>.pgm plus orbit_<i>.csv.
void cmd_analyze(const RunConfig& cfg, const std::filesystem::path& archive);

/// Ratio scan (scan.ratios) and/or deviation scan (scan.deltas). Writes
/// dos_scan.csv + level_weights.csv and deviation.csv. Failed points are
/// recorded and the scan continues.
void cmd_scan(const RunConfig& cfg, const std::filesystem::path& base_dir = {}, const LineSink& progress = {});

void export_orbit(int p, int q, double energy, double eta, double phase, int samples, double omega0,
                  const std::filesystem::path& out);
/// Truncated-basis oracle: energies plus coefficient rows for the lowest states.
void export_oracle(const RunConfig& cfg, double e_cut, std::size_t states, const std::filesystem::path& out,
                   const std::filesystem::path& base_dir = {});
void export_bumps(const RunConfig& cfg, const std::filesystem::path& out);
void export_density(const std::filesystem::path& archive, std::size_t index, const std::filesystem::path& out);

/// Progress record as a JSON line.
std::string progress_line(const itp::Progress& p);

}  // namespace qlscar::pipeline
