#include "qlscar/qlscar.h"

#include "analysis.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "pipeline.hpp"
#include "potential.hpp"
#include "run_config.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

struct qlscar_config {
  qlscar::RunConfig cfg;
  std::filesystem::path base_dir;
};

struct qlscar_solution {
  qlscar::itp::EigenSolution sol;
};

namespace {

thread_local std::string last_error;

qlscar_status fail(qlscar_status status, const std::string& message) {
  last_error = message;
  return status;
}

qlscar_status status_of(qlscar::ErrorKind kind) {
  switch (kind) {
    case qlscar::ErrorKind::InvalidArgument: return QLSCAR_ERR_INVALID_ARGUMENT;
    case qlscar::ErrorKind::Numerical: return QLSCAR_ERR_NUMERICAL;
    case qlscar::ErrorKind::Io: return QLSCAR_ERR_IO;
    case qlscar::ErrorKind::CorruptData: return QLSCAR_ERR_CORRUPT_DATA;
  }
  return QLSCAR_ERR_INTERNAL;
}

template <class Fn>
qlscar_status guarded(Fn&& fn) {
  last_error.clear();
  try {
    return fn();
  } catch (const qlscar::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(QLSCAR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(QLSCAR_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(QLSCAR_ERR_INTERNAL, "unknown error");
  }
}

qlscar_status null_argument(const char* what) {
  return fail(QLSCAR_ERR_INVALID_ARGUMENT, std::string(what) + " must not be NULL");
}

qlscar::pipeline::LineSink line_sink(qlscar_progress_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](const std::string& line) { fn(line.c_str(), user); };
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* qlscar_last_error(void) { return last_error.c_str(); }

const char* qlscar_status_name(qlscar_status status) {
  switch (status) {
    case QLSCAR_OK: return "ok";
    case QLSCAR_ERR_INVALID_ARGUMENT: return "invalid argument";
    case QLSCAR_ERR_NUMERICAL: return "numerical failure";
    case QLSCAR_ERR_IO: return "i/o error";
    case QLSCAR_ERR_CORRUPT_DATA: return "corrupt data";
    case QLSCAR_ERR_NOT_CONVERGED: return "not converged";
    case QLSCAR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* qlscar_version(void) { return "1.0.0"; }

void qlscar_set_diagnostic_sink(qlscar_message_fn sink, void* user) { qlscar::set_diagnostic_sink(sink, user); }

void qlscar_set_threads(int n) {
  if (n >= 1) omp_set_num_threads(n);
}

int qlscar_threads(void) { return omp_get_max_threads(); }

qlscar_status qlscar_config_new(qlscar_config_t** out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = new qlscar_config{};
    return QLSCAR_OK;
  });
}

qlscar_status qlscar_config_load(const char* path, qlscar_config_t** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  return guarded([&] {
    const std::filesystem::path p(path);
    auto handle = std::make_unique<qlscar_config>();
    handle->cfg = qlscar::load_config(p);
    handle->base_dir = p.parent_path();
    *out = handle.release();
    return QLSCAR_OK;
  });
}

qlscar_status qlscar_config_parse(const char* json_text, qlscar_config_t** out) {
  if (!json_text) return null_argument("json_text");
  if (!out) return null_argument("out");
  return guarded([&] {
    auto handle = std::make_unique<qlscar_config>();
    handle->cfg = qlscar::config_from_json(json_text);
    *out = handle.release();
    return QLSCAR_OK;
  });
}

void qlscar_config_free(qlscar_config_t* cfg) { delete cfg; }

qlscar_status qlscar_config_set(qlscar_config_t* cfg, const char* key, const char* value) {
  if (!cfg) return null_argument("cfg");
  if (!key || !value) return null_argument("key and value");
  return guarded([&] {
    qlscar::RunConfig updated = cfg->cfg;
    qlscar::set_config_value(updated, key, value);
    updated.validate();
    cfg->cfg = std::move(updated);
    return QLSCAR_OK;
  });
}

qlscar_status qlscar_config_to_json(const qlscar_config_t* cfg, char** out) {
  if (!cfg) return null_argument("cfg");
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = duplicate(qlscar::to_json(cfg->cfg));
    return QLSCAR_OK;
  });
}

void qlscar_string_free(char* s) { std::free(s); }

qlscar_status qlscar_run_solve(const qlscar_config_t* cfg, qlscar_progress_fn progress, void* user) {
  if (!cfg) return null_argument("cfg");
  return guarded([&] {
    const auto outcome = qlscar::pipeline::cmd_solve(cfg->cfg, cfg->base_dir, line_sink(progress, user));
    if (!outcome.converged) return fail(QLSCAR_ERR_NOT_CONVERGED, "some states did not converge; see metadata.json");
    return QLSCAR_OK;
  });
}

qlscar_status qlscar_run_analyze(const qlscar_config_t* cfg, const char* archive_path) {
  if (!cfg) return null_argument("cfg");
  if (!archive_path) return null_argument("archive_path");
  return guarded([&] {
    qlscar::pipeline::cmd_analyze(cfg->cfg, archive_path);
    return QLSCAR_OK;
  });
}

qlscar_status qlscar_run_scan(const qlscar_config_t* cfg, qlscar_progress_fn progress, void* user) {
  if (!cfg) return null_argument("cfg");
  return guarded([&] {
    qlscar::pipeline::cmd_scan(cfg->cfg, cfg->base_dir, line_sink(progress, user));
    return QLSCAR_OK;
  });
}

qlscar_status qlscar_export_orbit(int p, int q, double energy, double eta, double phase, int samples, double omega0,
                                  const char* path) {
  if (!path) return null_argument("path");
  return guarded([&] {
    qlscar::pipeline::export_orbit(p, q, energy, eta, phase, samples, omega0, path);
    return QLSCAR_OK;
  });
}

qlscar_status qlscar_export_oracle(const qlscar_config_t* cfg, double e_cut, size_t states, const char* path) {
  if (!cfg) return null_argument("cfg");
  if (!path) return null_argument("path");
  return guarded([&] {
    qlscar::pipeline::export_oracle(cfg->cfg, e_cut, states, path, cfg->base_dir);
    return QLSCAR_OK;
  });
}

qlscar_status qlscar_export_bumps(const qlscar_config_t* cfg, const char* path) {
  if (!cfg) return null_argument("cfg");
  if (!path) return null_argument("path");
  return guarded([&] {
    qlscar::pipeline::export_bumps(cfg->cfg, path);
    return QLSCAR_OK;
  });
}

qlscar_status qlscar_export_density(const char* archive_path, size_t index, const char* path) {
  if (!archive_path) return null_argument("archive_path");
  if (!path) return null_argument("path");
  return guarded([&] {
    qlscar::pipeline::export_density(archive_path, index, path);
    return QLSCAR_OK;
  });
}

qlscar_status qlscar_solve(const qlscar_config_t* cfg, qlscar_solution_t** out) {
  if (!cfg) return null_argument("cfg");
  if (!out) return null_argument("out");
  return guarded([&] {
    const qlscar::RunConfig& c = cfg->cfg;
    c.validate();
    const auto grid = qlscar::resolve_grid(c);
    const auto bumps = qlscar::resolve_bumps(c, cfg->base_dir);
    const auto total = qlscar::potential::total_potential(grid, c.potential, bumps);
    auto handle = std::make_unique<qlscar_solution>();
    handle->sol = qlscar::itp::solve(grid, total.field, c.itp, c.potential.omega_x(), c.potential.omega_y());
    const bool converged = handle->sol.all_converged();
    *out = handle.release();
    if (!converged) return fail(QLSCAR_ERR_NOT_CONVERGED, "some states did not converge");
    return QLSCAR_OK;
  });
}

qlscar_status qlscar_solution_load(const char* archive_path, qlscar_solution_t** out) {
  if (!archive_path) return null_argument("archive_path");
  if (!out) return null_argument("out");
  return guarded([&] {
    qlscar::io::WavefunctionArchive archive = qlscar::io::load_archive(archive_path);
    auto handle = std::make_unique<qlscar_solution>();
    auto& sol = handle->sol;
    sol.grid = archive.grid;
    sol.energies = std::move(archive.energies);
    sol.states = std::move(archive.states);
    sol.residuals.assign(sol.energies.size(), std::nan(""));
    sol.converged.assign(sol.energies.size(), true);
    *out = handle.release();
    return QLSCAR_OK;
  });
}

qlscar_status qlscar_solution_save(const qlscar_solution_t* sol, const char* archive_path) {
  if (!sol) return null_argument("sol");
  if (!archive_path) return null_argument("archive_path");
  return guarded([&] {
    qlscar::io::save_archive(archive_path, {sol->sol.grid, sol->sol.energies, sol->sol.states});
    return QLSCAR_OK;
  });
}

void qlscar_solution_free(qlscar_solution_t* sol) { delete sol; }

size_t qlscar_solution_count(const qlscar_solution_t* sol) { return sol ? sol->sol.size() : 0; }

qlscar_status qlscar_solution_grid(const qlscar_solution_t* sol, int* points_x, int* points_y, double* extent_x,
                                   double* extent_y) {
  if (!sol) return null_argument("sol");
  if (points_x) *points_x = sol->sol.grid.points_x;
  if (points_y) *points_y = sol->sol.grid.points_y;
  if (extent_x) *extent_x = sol->sol.grid.extent_x;
  if (extent_y) *extent_y = sol->sol.grid.extent_y;
  return QLSCAR_OK;
}

namespace {

qlscar_status check_index(const qlscar_solution_t* sol, size_t index) {
  if (!sol) return null_argument("sol");
  if (index >= sol->sol.size()) return fail(QLSCAR_ERR_INVALID_ARGUMENT, "state index out of range");
  return QLSCAR_OK;
}

}  // namespace

qlscar_status qlscar_solution_energy(const qlscar_solution_t* sol, size_t index, double* energy) {
  if (const auto st = check_index(sol, index); st != QLSCAR_OK) return st;
  if (!energy) return null_argument("energy");
  *energy = sol->sol.energies[index];
  return QLSCAR_OK;
}

qlscar_status qlscar_solution_residual(const qlscar_solution_t* sol, size_t index, double* residual) {
  if (const auto st = check_index(sol, index); st != QLSCAR_OK) return st;
  if (!residual) return null_argument("residual");
  *residual = sol->sol.residuals[index];
  return QLSCAR_OK;
}

int qlscar_solution_converged(const qlscar_solution_t* sol) { return sol && sol->sol.all_converged() ? 1 : 0; }

qlscar_status qlscar_solution_state(const qlscar_solution_t* sol, size_t index, double* buffer, size_t buffer_len) {
  if (const auto st = check_index(sol, index); st != QLSCAR_OK) return st;
  if (!buffer) return null_argument("buffer");
  const auto amps = sol->sol.states[index].amplitudes();
  if (buffer_len < 2 * amps.size()) return fail(QLSCAR_ERR_INVALID_ARGUMENT, "buffer too small for the state");
  std::memcpy(buffer, amps.data(), 2 * amps.size() * sizeof(double));
  return QLSCAR_OK;
}

qlscar_status qlscar_solution_alpha(const qlscar_solution_t* sol, size_t index, double omega_x, double omega_y,
                                    double* alpha) {
  if (const auto st = check_index(sol, index); st != QLSCAR_OK) return st;
  if (!alpha) return null_argument("alpha");
  return guarded([&] {
    if (!(omega_x > 0.0) || !(omega_y > 0.0)) throw qlscar::invalid_argument("frequencies must be positive");
    *alpha = qlscar::analysis::alpha_value(sol->sol.states[index], sol->sol.energies[index], omega_x, omega_y);
    return QLSCAR_OK;
  });
}

}  // extern "C"
