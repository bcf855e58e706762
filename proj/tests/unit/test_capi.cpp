// Exercises the shared library through its public header only.
#include "qlscar/qlscar.h"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Config {
  qlscar_config_t* ptr = nullptr;
  ~Config() { qlscar_config_free(ptr); }
};

struct Solution {
  qlscar_solution_t* ptr = nullptr;
  ~Solution() { qlscar_solution_free(ptr); }
};

const char* kSmall = R"({"potential.density": 0, "itp.k": 4})";

}  // namespace

TEST_CASE("status reporting") {
  CHECK(std::string(qlscar_status_name(QLSCAR_OK)) == "ok");
  CHECK(std::strlen(qlscar_version()) > 0);
  Config c;
  CHECK(qlscar_config_parse("{not json", &c.ptr) == QLSCAR_ERR_INVALID_ARGUMENT);
  CHECK(c.ptr == nullptr);
  CHECK(std::string(qlscar_last_error()).find("JSON") != std::string::npos);
  CHECK(qlscar_config_parse(nullptr, &c.ptr) == QLSCAR_ERR_INVALID_ARGUMENT);
  CHECK(qlscar_config_load("/nonexistent/qlscar.json", &c.ptr) == QLSCAR_ERR_IO);
  Solution s;
  CHECK(qlscar_solution_load("/nonexistent/states.qlsc", &s.ptr) == QLSCAR_ERR_IO);
  qlscar_config_free(nullptr);
  qlscar_solution_free(nullptr);
}

TEST_CASE("config handles") {
  Config c;
  REQUIRE(qlscar_config_new(&c.ptr) == QLSCAR_OK);
  CHECK(qlscar_config_set(c.ptr, "itp.k", "12") == QLSCAR_OK);
  CHECK(qlscar_config_set(c.ptr, "scan.source", "solved") == QLSCAR_OK);
  CHECK(qlscar_config_set(c.ptr, "itp.kk", "12") == QLSCAR_ERR_INVALID_ARGUMENT);
  CHECK(qlscar_config_set(c.ptr, "itp.k", "-3") == QLSCAR_ERR_INVALID_ARGUMENT);
  char* text = nullptr;
  REQUIRE(qlscar_config_to_json(c.ptr, &text) == QLSCAR_OK);
  const std::string json = text;
  qlscar_string_free(text);
  CHECK(json.find("\"itp.k\": 12") != std::string::npos);

  Config back;
  REQUIRE(qlscar_config_parse(json.c_str(), &back.ptr) == QLSCAR_OK);
  char* again = nullptr;
  REQUIRE(qlscar_config_to_json(back.ptr, &again) == QLSCAR_OK);
  CHECK(json == again);
  qlscar_string_free(again);
}

TEST_CASE("in-memory solve") {
  qlscar_set_threads(1);
  CHECK(qlscar_threads() == 1);
  Config c;
  REQUIRE(qlscar_config_parse(kSmall, &c.ptr) == QLSCAR_OK);
  Solution s;
  REQUIRE(qlscar_solve(c.ptr, &s.ptr) == QLSCAR_OK);
  REQUIRE(qlscar_solution_count(s.ptr) == 4u);
  CHECK(qlscar_solution_converged(s.ptr) == 1);

  const double expected[] = {1.5, 2.5, 3.5, 3.5};
  for (std::size_t i = 0; i < 4; ++i) {
    double e = 0.0, r = 0.0;
    REQUIRE(qlscar_solution_energy(s.ptr, i, &e) == QLSCAR_OK);
    REQUIRE(qlscar_solution_residual(s.ptr, i, &r) == QLSCAR_OK);
    CHECK(std::abs(e - expected[i]) < 1e-6);
    CHECK(r < 1e-3);
  }
  double e = 0.0;
  CHECK(qlscar_solution_energy(s.ptr, 4, &e) == QLSCAR_ERR_INVALID_ARGUMENT);

  int nx = 0, ny = 0;
  double lx = 0.0, ly = 0.0;
  REQUIRE(qlscar_solution_grid(s.ptr, &nx, &ny, &lx, &ly) == QLSCAR_OK);
  std::vector<double> buf(2 * static_cast<std::size_t>(nx) * ny);
  REQUIRE(qlscar_solution_state(s.ptr, 0, buf.data(), buf.size()) == QLSCAR_OK);
  double norm = 0.0;
  for (double v : buf) norm += v * v;
  CHECK(norm * (2 * lx / nx) * (2 * ly / ny) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(qlscar_solution_state(s.ptr, 0, buf.data(), buf.size() - 1) == QLSCAR_ERR_INVALID_ARGUMENT);

  double alpha = 0.0;
  REQUIRE(qlscar_solution_alpha(s.ptr, 0, 1.0, 2.0, &alpha) == QLSCAR_OK);
  CHECK(alpha == doctest::Approx(3.0 / (2.0 * std::sqrt(2.0))).epsilon(0.01));

  const fs::path path = fs::temp_directory_path() / ("qlscar_capi_" + std::to_string(::getpid()) + ".qlsc");
  REQUIRE(qlscar_solution_save(s.ptr, path.c_str()) == QLSCAR_OK);
  Solution loaded;
  REQUIRE(qlscar_solution_load(path.c_str(), &loaded.ptr) == QLSCAR_OK);
  CHECK(qlscar_solution_count(loaded.ptr) == 4u);
  double r = 0.0;
  REQUIRE(qlscar_solution_residual(loaded.ptr, 0, &r) == QLSCAR_OK);
  CHECK(std::isnan(r));
  std::vector<double> buf2(buf.size());
  REQUIRE(qlscar_solution_state(loaded.ptr, 0, buf2.data(), buf2.size()) == QLSCAR_OK);
  CHECK(buf == buf2);
  fs::remove(path);
}

TEST_CASE("diagnostic sink") {
  std::vector<std::string> messages;
  qlscar_set_diagnostic_sink([](const char* m, void* u) { static_cast<std::vector<std::string>*>(u)->push_back(m); },
                             &messages);
  Config c;
  // tiny grid: the top mode reaches the box edge
  REQUIRE(qlscar_config_parse(R"({"potential.density": 0, "itp.k": 2, "itp.max_iterations": 3,
                                   "grid.extent_x": 2.0, "grid.extent_y": 1.0, "grid.points_x": 16,
                                   "grid.points_y": 8})",
                              &c.ptr) == QLSCAR_OK);
  Solution s;
  const qlscar_status st = qlscar_solve(c.ptr, &s.ptr);
  CHECK(st == QLSCAR_ERR_NOT_CONVERGED);
  CHECK(s.ptr != nullptr);
  CHECK(!messages.empty());
  qlscar_set_diagnostic_sink(nullptr, nullptr);
}
