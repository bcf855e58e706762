// Command-line front end. Talks to the library only through qlscar.h.

#include "qlscar/qlscar.h"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

namespace {

enum Exit { kOk = 0, kUsage = 1, kNumerical = 2, kIo = 3 };

int exit_code(qlscar_status status) {
  switch (status) {
    case QLSCAR_OK: return kOk;
    case QLSCAR_ERR_INVALID_ARGUMENT: return kUsage;
    case QLSCAR_ERR_IO:
    case QLSCAR_ERR_CORRUPT_DATA: return kIo;
    case QLSCAR_ERR_NUMERICAL:
    case QLSCAR_ERR_NOT_CONVERGED:
    case QLSCAR_ERR_INTERNAL: return kNumerical;
  }
  return kNumerical;
}

int report(qlscar_status status) {
  if (status != QLSCAR_OK) {
    std::fprintf(stderr, "qlscar: %s: %s\n", qlscar_status_name(status), qlscar_last_error());
  }
  return exit_code(status);
}

struct ConfigDeleter {
  void operator()(qlscar_config_t* c) const { qlscar_config_free(c); }
};
using ConfigPtr = std::unique_ptr<qlscar_config_t, ConfigDeleter>;

struct ConfigOptions {
  std::string path;
  std::vector<std::string> overrides;
  std::string output;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opts, bool required) {
  auto* c = cmd->add_option("-c,--config", opts.path, "Flat-key JSON config (or a run's metadata.json)")
                ->check(CLI::ExistingFile);
  if (required) c->required();
  cmd->add_option("-s,--set", opts.overrides, "Override a config key: key=value (repeatable)");
  cmd->add_option("-o,--output", opts.output, "Output directory (output.dir)");
}

qlscar_status build_config(const ConfigOptions& opts, ConfigPtr& out) {
  qlscar_config_t* raw = nullptr;
  qlscar_status st = opts.path.empty() ? qlscar_config_new(&raw) : qlscar_config_load(opts.path.c_str(), &raw);
  if (st != QLSCAR_OK) return st;
  out.reset(raw);
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "qlscar: --set expects key=value, got '%s'\n", kv.c_str());
      return QLSCAR_ERR_INVALID_ARGUMENT;
    }
    st = qlscar_config_set(out.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (st != QLSCAR_OK) return st;
  }
  if (!opts.output.empty()) {
    st = qlscar_config_set(out.get(), "output.dir", opts.output.c_str());
  }
  return st;
}

void print_progress(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

std::string join(const std::vector<double>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
    out += (i ? "," : "") + std::string(buf);
  }
  return out + "]";
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("QLSCAR_THREADS")) {
    const int n = std::atoi(threads);
    if (n < 1) {
      std::fprintf(stderr, "qlscar: QLSCAR_THREADS must be a positive integer\n");
      return kUsage;
    }
    qlscar_set_threads(n);
  }

  CLI::App app{"Quantum Lissajous scar laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(qlscar_version()));

  ConfigOptions solve_opts;
  bool solve_progress = false;
  auto* solve = app.add_subcommand("solve", "Build the potential, run ITP, write the archive and metadata");
  add_config_options(solve, solve_opts, true);
  solve->add_flag("--progress", solve_progress, "Echo progress records to stderr");

  ConfigOptions analyze_opts;
  std::string archive;
  auto* analyze = app.add_subcommand("analyze", "Scar survey, alpha table, DOS and density images of an archive");
  add_config_options(analyze, analyze_opts, false);
  analyze->add_option("-a,--archive", archive, "Wavefunction archive")->required()->check(CLI::ExistingFile);

  ConfigOptions scan_opts;
  std::vector<double> ratios;
  std::vector<double> deltas;
  std::string source;
  bool scan_progress = false;
  auto* scan = app.add_subcommand("scan", "DOS ratio scan or deviation scan");
  add_config_options(scan, scan_opts, false);
  scan->add_option("--ratios", ratios, "Frequency ratios wx/wy (scan.ratios)")->delimiter(',');
  scan->add_option("--deltas", deltas, "Deviations from p/q (scan.deltas)")->delimiter(',');
  scan->add_option("--source", source, "Ratio scan energies: analytic or solved")
      ->check(CLI::IsMember({"analytic", "solved"}));
  scan->add_flag("--progress", scan_progress, "Echo progress records to stderr");

  auto* exp = app.add_subcommand("export", "Figure data and helper files");
  exp->require_subcommand(1);

  int p = 1, q = 2, samples = 512, index = 0;
  double energy = 20.0, eta = 0.5, phase = 0.0, omega0 = 1.0;
  std::string out_path;
  auto* orbit = exp->add_subcommand("orbit", "Lissajous orbit samples as CSV (t,x,y)");
  orbit->add_option("--p", p, "x frequency multiplier")->required();
  orbit->add_option("--q", q, "y frequency multiplier")->required();
  orbit->add_option("--energy", energy, "Orbit energy")->required();
  orbit->add_option("--eta", eta, "Fraction of the energy in the x motion")->capture_default_str();
  orbit->add_option("--phase", phase, "Relative phase")->capture_default_str();
  orbit->add_option("--samples", samples, "Samples per period")->capture_default_str();
  orbit->add_option("--omega0", omega0, "Base frequency")->capture_default_str();
  orbit->add_option("-f,--file", out_path, "Output CSV")->required();

  ConfigOptions oracle_opts;
  double e_cut = 12.0;
  std::size_t oracle_states = 20;
  auto* oracle = exp->add_subcommand("oracle", "Truncated Hermite-Gauss diagonalization coefficients");
  add_config_options(oracle, oracle_opts, false);
  oracle->add_option("--e-cut", e_cut, "Basis energy cutoff")->required();
  oracle->add_option("--states", oracle_states, "States to export")->capture_default_str();
  oracle->add_option("-f,--file", out_path, "Output CSV")->required();

  ConfigOptions bumps_opts;
  auto* bumps = exp->add_subcommand("bumps", "Bump positions drawn from the config's seed");
  add_config_options(bumps, bumps_opts, false);
  bumps->add_option("-f,--file", out_path, "Output CSV")->required();

  auto* density = exp->add_subcommand("density", "Density of one archived state as a 16-bit graymap");
  density->add_option("-a,--archive", archive, "Wavefunction archive")->required()->check(CLI::ExistingFile);
  density->add_option("-i,--index", index, "State index")->required()->check(CLI::NonNegativeNumber);
  density->add_option("-f,--file", out_path, "Output PGM")->required();

  ConfigOptions config_opts;
  auto* config = exp->add_subcommand("config", "Print the effective config as JSON");
  add_config_options(config, config_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  ConfigPtr cfg;
  if (*solve) {
    if (const auto st = build_config(solve_opts, cfg); st != QLSCAR_OK) return report(st);
    return report(qlscar_run_solve(cfg.get(), solve_progress ? print_progress : nullptr, nullptr));
  }
  if (*analyze) {
    if (const auto st = build_config(analyze_opts, cfg); st != QLSCAR_OK) return report(st);
    return report(qlscar_run_analyze(cfg.get(), archive.c_str()));
  }
  if (*scan) {
    if (const auto st = build_config(scan_opts, cfg); st != QLSCAR_OK) return report(st);
    qlscar_status st = QLSCAR_OK;
    if (!ratios.empty()) st = qlscar_config_set(cfg.get(), "scan.ratios", join(ratios).c_str());
    if (st == QLSCAR_OK && !deltas.empty()) st = qlscar_config_set(cfg.get(), "scan.deltas", join(deltas).c_str());
    if (st == QLSCAR_OK && !source.empty()) st = qlscar_config_set(cfg.get(), "scan.source", source.c_str());
    if (st != QLSCAR_OK) return report(st);
    return report(qlscar_run_scan(cfg.get(), scan_progress ? print_progress : nullptr, nullptr));
  }
  if (*orbit) {
    return report(qlscar_export_orbit(p, q, energy, eta, phase, samples, omega0, out_path.c_str()));
  }
  if (*oracle) {
    if (const auto st = build_config(oracle_opts, cfg); st != QLSCAR_OK) return report(st);
    return report(qlscar_export_oracle(cfg.get(), e_cut, oracle_states, out_path.c_str()));
  }
  if (*bumps) {
    if (const auto st = build_config(bumps_opts, cfg); st != QLSCAR_OK) return report(st);
    return report(qlscar_export_bumps(cfg.get(), out_path.c_str()));
  }
  if (*density) {
    return report(qlscar_export_density(archive.c_str(), static_cast<std::size_t>(index), out_path.c_str()));
  }
  if (*config) {
    if (const auto st = build_config(config_opts, cfg); st != QLSCAR_OK) return report(st);
    char* text = nullptr;
    if (const auto st = qlscar_config_to_json(cfg.get(), &text); st != QLSCAR_OK) return report(st);
    std::fputs(text, stdout);
    qlscar_string_free(text);
    return kOk;
  }
  return kUsage;
}
