#include "errors.hpp"
#include "io.hpp"
#include "lattice.hpp"
#include "run_config.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace qlscar;
namespace fs = std::filesystem;

namespace {

// Mirrors tests/data/make_golden.py.
io::WavefunctionArchive golden_archive() {
  io::WavefunctionArchive a;
  a.grid = lattice::make_grid(2.0, 8);
  a.energies = {1.5, 2.25};
  for (int s = 0; s < 2; ++s) {
    lattice::StateFunction psi(a.grid);
    for (int j = 0; j < 8; ++j)
      for (int i = 0; i < 8; ++i) psi.amplitudes()[a.grid.index(i, j)] = {(i - 4) / 8.0 + s, j / 16.0 - s / 4.0};
    psi.set_energy(a.energies[s]);
    a.states.push_back(psi);
  }
  return a;
}

std::string bytes_of(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qlscar_unit_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("archive golden file") {
  const fs::path golden = fs::path(QLSCAR_TEST_DATA) / "golden.qlsc";
  const auto expected = golden_archive();
  CHECK(io::load_archive(golden) == expected);

  std::ostringstream out(std::ios::binary);
  io::write_archive(out, expected);
  CHECK(out.str() == bytes_of(golden));
  CHECK(out.str().size() == io::archive_size_bytes(expected.grid, 2));
  CHECK(io::archive_size_bytes(expected.grid, 2) == io::kArchiveHeaderBytes + 2 * 8 + 2 * 64 * 16);
}

TEST_CASE("archive round trip and damage") {
  auto a = golden_archive();
  a.states[1].amplitudes()[5] = {std::nextafter(1.0, 2.0), -0.0};
  a.energies[0] = 1.0 / 3.0;
  a.states[0].set_energy(1.0 / 3.0);
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  io::write_archive(buf, a);
  const std::string bytes = buf.str();
  CHECK(io::read_archive(buf) == a);

  SUBCASE("bad magic") {
    std::string bad = bytes;
    bad[0] = 'X';
    std::istringstream in(bad, std::ios::binary);
    CHECK_THROWS_WITH_AS(io::read_archive(in), doctest::Contains("magic"), Error);
  }
  SUBCASE("truncated") {
    std::istringstream in(bytes.substr(0, bytes.size() - 3), std::ios::binary);
    CHECK_THROWS_AS(io::read_archive(in), Error);
  }
  SUBCASE("trailing bytes") {
    std::istringstream in(bytes + "x", std::ios::binary);
    CHECK_THROWS_AS(io::read_archive(in), Error);
  }
  SUBCASE("odd grid in header") {
    std::string bad = bytes;
    bad[8] = 7;  // points_x
    std::istringstream in(bad, std::ios::binary);
    CHECK_THROWS_AS(io::read_archive(in), Error);
  }
  SUBCASE("errors are classified") {
    std::istringstream in("nope", std::ios::binary);
    try {
      io::read_archive(in);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::CorruptData);
    }
    try {
      io::load_archive("/nonexistent/dir/x.qlsc");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Io);
    }
  }
}

TEST_CASE("atomic writes") {
  const fs::path dir = scratch_dir("atomic");
  const fs::path target = dir / "out.txt";
  io::write_text_atomic(target, "first\n");
  io::write_text_atomic(target, "second\n");
  CHECK(io::read_text_file(target) == "second\n");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 1u);
  CHECK_THROWS_AS(io::write_atomic(dir / "x.txt", [](std::ostream&) { throw numerical_error("fill failed"); }), Error);
  CHECK(!fs::exists(dir / "x.txt"));
  fs::remove_all(dir);
}

TEST_CASE("graymap") {
  const auto g = lattice::make_grid(1.0, 8);
  std::vector<double> v(g.size(), 0.0);
  v[g.index(4, 0)] = 2.0;
  v[g.index(1, 7)] = 1.0;
  std::ostringstream out(std::ios::binary);
  io::write_pgm(out, g, v);
  const std::string s = out.str();
  const std::string header = "P5\n8 8\n65535\n";
  REQUIRE(s.size() == header.size() + 2 * 64);
  CHECK(s.substr(0, header.size()) == header);
  auto level = [&](int i, int j) {
    const std::size_t at = header.size() + 2 * static_cast<std::size_t>(j * 8 + i);
    return (static_cast<unsigned char>(s[at]) << 8) | static_cast<unsigned char>(s[at + 1]);
  };
  // first row in the file is the lowest y
  CHECK(level(4, 0) == 65535);
  CHECK(level(1, 7) == 32768);
  CHECK(level(0, 0) == 0);

  v[0] = -1.0;
  CHECK_THROWS_AS(io::write_pgm(out, g, v), Error);
}

TEST_CASE("run config") {
  RunConfig cfg;
  cfg.potential.seed = 77;
  cfg.potential.ratio_override = 0.502;
  cfg.grid.points_x = 128;
  cfg.itp.k = 42;
  cfg.analysis.candidates = {{1, 2}, {2, 3}};
  cfg.analysis.tube_width = 0.3;
  cfg.scan.deltas = {-0.01, 0.0, 0.01};
  cfg.output_dir = "somewhere";

  SUBCASE("round trip") {
    const std::string text = to_json(cfg);
    CHECK(config_from_json(text) == cfg);
    CHECK(config_from_json(to_json(RunConfig{})) == RunConfig{});
  }
  SUBCASE("metadata wrapper") {
    const std::string wrapped = "{\"status\": \"ok\", \"config\": " + to_json(cfg) + "}";
    CHECK(config_from_json(wrapped) == cfg);
  }
  SUBCASE("partial configs keep defaults") {
    const auto c = config_from_json(R"({"itp.k": 7})");
    CHECK(c.itp.k == 7);
    CHECK(c.potential == potential::PotentialConfig{});
  }
  SUBCASE("rejections") {
    CHECK_THROWS_WITH_AS(config_from_json(R"({"itp.kk": 7})"), doctest::Contains("itp.kk"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"itp.k": "seven"})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"itp.k": 1.5})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"potential.seed": -1})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"grid.points_x": 7})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"analysis.candidates": [[1]]})"), Error);
    CHECK_THROWS_AS(config_from_json("[1, 2]"), Error);
    CHECK_THROWS_AS(config_from_json("{"), Error);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
  }
  SUBCASE("single keys") {
    set_config_value(cfg, "potential.amplitude", "2.5");
    CHECK(cfg.potential.amplitude == 2.5);
    set_config_value(cfg, "scan.source", "solved");
    CHECK(cfg.scan.source == "solved");
    set_config_value(cfg, "analysis.candidates", "[[1, 3]]");
    CHECK(cfg.analysis.candidates == std::vector<analysis::Commensurability>{{1, 3}});
    CHECK_THROWS_AS(set_config_value(cfg, "no.such.key", "1"), Error);
    for (const auto& key : config_keys()) CHECK(to_json(RunConfig{}).find('"' + key + '"') != std::string::npos);
  }
  SUBCASE("grid resolution") {
    RunConfig c;
    c.grid.extent_x = 5.0;
    c.grid.extent_y = 3.0;
    c.grid.points_x = 50;
    c.grid.points_y = 30;
    CHECK(resolve_grid(c) == lattice::make_grid(5.0, 3.0, 50, 30));
    RunConfig d;
    d.itp.k = 30;
    const auto g = resolve_grid(d);
    CHECK(g.spacing_x() <= d.potential.sigma / 2 + 1e-15);
  }
  SUBCASE("bump file") {
    const fs::path dir = scratch_dir("bumps");
    io::write_text_atomic(dir / "b.csv", "index,x,y\n0,0.5,-0.25\n1,1,2\n");
    RunConfig c;
    c.bumps_file = "b.csv";
    const auto bumps = resolve_bumps(c, dir);
    REQUIRE(bumps.positions.size() == 2u);
    CHECK(bumps.positions[0] == potential::Point{0.5, -0.25});
    CHECK(bumps.amplitude == c.potential.amplitude);
    c.bumps_file = "missing.csv";
    CHECK_THROWS_AS(resolve_bumps(c, dir), Error);
    fs::remove_all(dir);
  }
}
