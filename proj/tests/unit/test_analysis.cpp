#include "support.hpp"

#include "analysis.hpp"
#include "classical.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

using namespace qlscar;
using analysis::ScarKind;

namespace {

constexpr double kPi = std::numbers::pi;

// 1/sqrt(Z) inside the ellipse (wx x)^2 + (wy y)^2 <= 2E, zero outside
lattice::StateFunction uniform_ellipse(const lattice::GridSpec& g, double E, double wx, double wy) {
  lattice::StateFunction psi(g);
  for (int j = 0; j < g.points_y; ++j)
    for (int i = 0; i < g.points_x; ++i) {
      const double x = g.x(i), y = g.y(j);
      if (wx * wx * x * x + wy * wy * y * y <= 2 * E) psi.amplitudes()[g.index(i, j)] = 1.0;
    }
  psi.normalize();
  return psi;
}

double polyline_distance(const classical::LissajousOrbit& orbit, double px, double py) {
  double best = std::numeric_limits<double>::infinity();
  const auto& pts = orbit.samples;
  for (std::size_t s = 0; s < pts.size(); ++s) {
    const auto a = pts[s], b = pts[(s + 1) % pts.size()];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double u = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
    best = std::min(best, std::hypot(px - a.x - u * dx, py - a.y - u * dy));
  }
  return best;
}

// density concentrated along the (1,2) figure-eight at E = 100
lattice::StateFunction loop_state(double E) {
  const auto g = lattice::make_grid(16.0, 8.0, 320, 160);
  const auto orbit = classical::make_orbit(1, 2, E, 0.5, kPi / 4, 256);
  lattice::StateFunction psi(g);
  for (int j = 0; j < g.points_y; ++j)
    for (int i = 0; i < g.points_x; ++i) {
      const double d = polyline_distance(orbit, g.x(i), g.y(j));
      psi.amplitudes()[g.index(i, j)] = std::exp(-d * d / 0.02);
    }
  psi.normalize();
  return psi;
}

}  // namespace

TEST_CASE("density of states") {
  SUBCASE("single level") {
    const std::vector<double> e{1.5};
    const std::vector<double> at{1.5};
    const auto curve = analysis::dos(e, 0.001, at);
    CHECK(std::abs(curve.dos[0] - 398.94) < 0.1);
    CHECK(curve.dos[0] == doctest::Approx(1.0 / (std::sqrt(2 * kPi) * 0.001)));
  }
  SUBCASE("empty list") {
    const auto samples = analysis::linspace(0.0, 5.0, 51);
    for (double d : analysis::dos({}, 0.001, samples).dos) CHECK(d == 0.0);
  }
  SUBCASE("bad window") { CHECK_THROWS_AS(analysis::dos({}, 0.0, {}), Error); }
  SUBCASE("isotropic degeneracies integrate to n + 1") {
    const auto energies = analysis::analytic_energies(10.0)(1.0);
    const double w = 0.001;
    for (int level = 1; level <= 10; ++level) {
      const auto samples = analysis::linspace(level - 0.01, level + 0.01, 2001);
      const auto curve = analysis::dos(energies, w, samples);
      double area = 0.0;
      for (std::size_t i = 1; i < samples.size(); ++i)
        area += 0.5 * (curve.dos[i] + curve.dos[i - 1]) * (samples[i] - samples[i - 1]);
      CHECK(area == doctest::Approx(level).epsilon(1e-6));
      CHECK(analysis::dos(energies, w, std::vector<double>{level + 0.5}).dos[0] < 1e-12);
    }
  }
  SUBCASE("total weight and linearity") {
    const std::vector<double> a{1.0, 1.2, 2.25}, b{1.2, 3.0};
    std::vector<double> both = a;
    both.insert(both.end(), b.begin(), b.end());
    const auto samples = analysis::linspace(0.5, 3.5, 30001);
    const auto da = analysis::dos(a, 0.01, samples), db = analysis::dos(b, 0.01, samples);
    const auto dab = analysis::dos(both, 0.01, samples);
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      CHECK(dab.dos[i] == doctest::Approx(da.dos[i] + db.dos[i]).epsilon(1e-12));
      CHECK(dab.dos[i] >= 0.0);
      total += dab.dos[i] * (samples[1] - samples[0]);
    }
    CHECK(total == doctest::Approx(5.0).epsilon(0.01));
  }
}

TEST_CASE("level weights along the ratio scan") {
  const auto source = analysis::analytic_energies(20.0);
  SUBCASE("ratio 1/2") {
    for (const auto& level : analysis::level_weights(source(0.5), 0.001)) {
      // omega_x = 1, omega_y = 2: E = n + 2 m + 1.5
      if (std::abs(level.energy - 5.5) < 1e-9) CHECK(level.weight == 3);
    }
  }
  SUBCASE("isotropic") {
    const auto levels = analysis::level_weights(source(1.0), 0.001);
    for (const auto& level : levels) CHECK(level.weight == static_cast<int>(std::lround(level.energy)));
    CHECK(levels.size() == 20u);
  }
  SUBCASE("near miss") { CHECK(analysis::max_level_weight(source(0.497), 0.001) == 1); }
  SUBCASE("scan shape") {
    const std::vector<double> ratios{0.25, 0.5, 1.0};
    const auto samples = analysis::linspace(0.0, 20.0, 101);
    const auto scan = analysis::dos_ratio_scan(ratios, 0.001, samples, source);
    REQUIRE(scan.size() == 3u);
    CHECK(scan[1].ratio == 0.5);
    CHECK(scan[1].curve.dos.size() == samples.size());
    const std::vector<double> bad{1.5};
    CHECK_THROWS_AS(analysis::dos_ratio_scan(bad, 0.001, samples, source), Error);
  }
}

TEST_CASE("alpha value") {
  SUBCASE("ground states") {
    const auto g = lattice::make_grid(8.0, 64);
    CHECK(analysis::classical_area(1.0, 1.0, 1.0) == doctest::Approx(2 * kPi));
    CHECK(analysis::alpha_value(oracle::hg_mode({0, 0}, g, 1.0, 1.0), 1.0, 1.0, 1.0) ==
          doctest::Approx(1.0).epsilon(1e-10));
    const auto rect = lattice::make_grid(8.0, 4.0, 64, 32);
    CHECK(analysis::alpha_value(oracle::hg_mode({0, 0}, rect, 1.0, 2.0), 1.5, 1.0, 2.0) ==
          doctest::Approx(3.0 / (2.0 * std::sqrt(2.0))).epsilon(1e-10));
  }
  SUBCASE("uniform ellipse") {
    const auto g = lattice::make_grid(5.0, 3.0, 500, 300);
    const auto psi = uniform_ellipse(g, 8.0, 1.0, 2.0);
    CHECK(analysis::alpha_value(psi, 8.0, 1.0, 2.0) == doctest::Approx(1.0).epsilon(0.01));
  }
  SUBCASE("phase invariance and repeatability") {
    const auto g = lattice::make_grid(8.0, 64);
    auto psi = oracle::hg_mode({2, 1}, g, 1.0, 1.0);
    const double a1 = analysis::alpha_value(psi, 4.0, 1.0, 1.0);
    CHECK(analysis::alpha_value(psi, 4.0, 1.0, 1.0) == a1);
    for (auto& v : psi.amplitudes()) v *= std::polar(1.0, 0.7);
    CHECK(analysis::alpha_value(psi, 4.0, 1.0, 1.0) == doctest::Approx(a1).epsilon(1e-14));
  }
  SUBCASE("mixture of disjoint supports") {
    const auto g = lattice::make_grid(4.0, 64);
    lattice::StateFunction a(g), b(g), mix(g);
    for (int j = 0; j < g.points_y; ++j)
      for (int i = 0; i < g.points_x; ++i) {
        const double x = g.x(i), y = g.y(j);
        const double left = x < 0 ? std::exp(-((x + 2) * (x + 2) + y * y)) : 0.0;
        const double right = x >= 0 ? std::exp(-2 * ((x - 2) * (x - 2) + y * y)) : 0.0;
        a.amplitudes()[g.index(i, j)] = left;
        b.amplitudes()[g.index(i, j)] = right;
      }
    a.normalize();
    b.normalize();
    for (std::size_t k = 0; k < g.size(); ++k) mix.amplitudes()[k] = (a.amplitudes()[k] + b.amplitudes()[k]) / std::sqrt(2.0);
    const double E = 3.0;
    const double expected = 0.25 * (analysis::alpha_value(a, E, 1, 1) + analysis::alpha_value(b, E, 1, 1));
    CHECK(analysis::alpha_value(mix, E, 1, 1) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("scar measure") {
  const double E = 10.0, wx = 1.0, wy = 2.0;
  const double area = analysis::classical_area(E, wx, wy);
  const auto g = lattice::make_grid(6.0, 3.0, 240, 120);

  SUBCASE("featureless density") {
    const auto psi = uniform_ellipse(g, E, wx, wy);
    const std::vector<classical::LissajousOrbit> bank{classical::make_orbit(1, 2, E, 0.5, kPi / 4, 256)};
    const auto m = analysis::scar_measure(psi, bank, 0.5, area);
    REQUIRE(m.found);
    CHECK(m.s == doctest::Approx(1.0).epsilon(0.08));
  }
  SUBCASE("density confined to one tube") {
    const auto orbit = classical::make_orbit(1, 2, E, 0.5, kPi / 4, 256);
    const double w = 0.4;
    std::vector<double> rho(g.size(), 0.0);
    std::size_t nodes = 0;
    for (int j = 0; j < g.points_y; ++j)
      for (int i = 0; i < g.points_x; ++i)
        if (polyline_distance(orbit, g.x(i), g.y(j)) <= w / 2) {
          rho[g.index(i, j)] = 1.0;
          ++nodes;
        }
    for (double& r : rho) r /= nodes * g.cell_area();
    const double fake_area = 10.0 * nodes * g.cell_area();
    const std::vector<classical::LissajousOrbit> bank{orbit};
    const auto m = analysis::scar_measure(g, rho, bank, w, fake_area);
    CHECK(m.tube_fraction == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(m.tube_probability == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.s == doctest::Approx(10.0).epsilon(1e-9));
  }
  SUBCASE("reflection symmetry") {
    std::vector<double> rho(g.size());
    for (int j = 0; j < g.points_y; ++j)
      for (int i = 0; i < g.points_x; ++i) {
        const double x = g.x(i), y = g.y(j) - 0.7;
        rho[g.index(i, j)] = std::exp(-(x * x / 4 + y * y)) * (1 + 0.3 * std::cos(3 * x));
      }
    for (double phi : {0.2, 0.9, 2.0}) {
      const std::vector<classical::LissajousOrbit> one{classical::make_orbit(1, 2, E, 0.4, phi, 256)};
      const std::vector<classical::LissajousOrbit> mirrored{classical::make_orbit(1, 2, E, 0.4, phi + kPi, 256)};
      const double s1 = analysis::scar_measure(g, rho, one, 0.5, area).s;
      const double s2 = analysis::scar_measure(g, rho, mirrored, 0.5, area).s;
      CHECK(std::abs(s1 - s2) < 1e-8 * s1);
    }
  }
  SUBCASE("disjoint tubes hold at most the total probability") {
    const auto disk = lattice::make_grid(6.0, 240);
    const auto psi = uniform_ellipse(disk, 18.0, 1.0, 1.0);
    double total = 0.0;
    for (double r : {1.0, 2.0, 3.0, 4.0, 5.0}) {
      // circle of radius r: (1,1), eta 1/2, phase pi/2, E = r^2
      const std::vector<classical::LissajousOrbit> ring{classical::make_orbit(1, 1, r * r, 0.5, kPi / 2, 512)};
      const auto m = analysis::scar_measure(psi, ring, 0.9, analysis::classical_area(18.0, 1.0, 1.0));
      CHECK(m.tube_probability > 0.0);
      total += m.tube_probability;
    }
    CHECK(total <= 1.0 + 1e-12);
  }
  SUBCASE("tubes leaving the grid are skipped") {
    const auto small = lattice::make_grid(2.0, 1.0, 80, 40);
    const auto psi = oracle::hg_mode({0, 0}, small, 1.0, 2.0);
    const std::vector<classical::LissajousOrbit> bank{classical::make_orbit(1, 2, E, 0.5, 0.0, 256),
                                                      classical::make_orbit(1, 2, 0.5, 0.5, 0.0, 256)};
    const auto m = analysis::scar_measure(psi, bank, 0.3, area);
    CHECK(m.skipped == 1u);
    CHECK(m.found);
    CHECK(m.template_index == 1u);
  }
  SUBCASE("argument checks") {
    const auto psi = uniform_ellipse(g, E, wx, wy);
    const std::vector<classical::LissajousOrbit> none;
    CHECK_THROWS_AS(analysis::scar_measure(psi, none, 0.5, area), Error);
    const std::vector<classical::LissajousOrbit> bank{classical::make_orbit(1, 2, E, 0.5, 0.0, 256)};
    CHECK_THROWS_AS(analysis::scar_measure(psi, bank, 0.0, area), Error);
  }
}

TEST_CASE("single-state analysis") {
  const double E = 100.0;
  const auto psi = loop_state(E);

  analysis::SurveyConfig cfg;
  test::WarningCapture warnings;
  const auto report = analysis::analyze_state(psi, 3, E, 1.0, 2.0, cfg);
  REQUIRE(report.s.has_value());
  CHECK(*report.s > 2.0);
  CHECK(report.strongly_scarred);
  CHECK(report.kind == ScarKind::Loop);
  CHECK(report.p == 1);
  CHECK(report.q == 2);
  CHECK(report.index == 3u);
  CHECK(report.alpha == analysis::alpha_value(psi, E, 1.0, 2.0));

  cfg.threshold = std::numeric_limits<double>::infinity();
  CHECK(!analysis::analyze_state(psi, 3, E, 1.0, 2.0, cfg).strongly_scarred);

  cfg.candidates.clear();
  const auto bare = analysis::analyze_state(psi, 3, E, 1.0, 2.0, cfg);
  CHECK(!bare.s.has_value());
  CHECK(bare.kind == ScarKind::None);
  std::stringstream ss;
  analysis::write_scar_reports_csv(ss, std::vector<analysis::ScarReport>{bare});
  std::string header, row;
  std::getline(ss, header);
  std::getline(ss, row);
  CHECK(header == "index,E,alpha,s,p,q,eta,phi,kind,flag");
  CHECK(row.find(",,,,,none,0") != std::string::npos);
}

TEST_CASE("deviation scan bookkeeping") {
  // a fixed two-state "solution" stands in for the solver
  const double E = 100.0;
  const auto loop = loop_state(E);
  itp::EigenSolution fake;
  fake.grid = loop.grid();
  fake.states = {loop, loop};
  fake.energies = {E, E};
  fake.residuals = {0.0, 0.0};
  fake.converged = {true, true};

  analysis::SurveyConfig cfg;
  std::vector<double> seen;
  const auto solver = [&](double ratio) {
    seen.push_back(ratio);
    return fake;
  };
  const std::vector<double> zero{0.0};
  const auto rows = analysis::deviation_scan(zero, {1, 2}, 2.0, cfg, 5, solver);
  REQUIRE(rows.size() == 1u);
  CHECK(rows[0].normalized == 1.0);
  CHECK(rows[0].averaged == 2u);
  CHECK(rows[0].short_of_target);
  CHECK(seen == std::vector<double>{0.5});

  const std::vector<double> no_zero{0.01};
  CHECK_THROWS_AS(analysis::deviation_scan(no_zero, {1, 2}, 2.0, cfg, 5, solver), Error);
  CHECK_THROWS_AS(analysis::deviation_scan(zero, {1, 2}, 2.0, cfg, 0, solver), Error);

  const auto failing = [&](double ratio) -> itp::EigenSolution {
    if (ratio != 0.5) throw numerical_error("boom");
    return fake;
  };
  const std::vector<double> two{0.0, 0.01};
  test::WarningCapture warnings;
  const auto mixed = analysis::deviation_scan(two, {1, 2}, 2.0, cfg, 1, failing);
  CHECK(!mixed[0].failed);
  CHECK(mixed[1].failed);
  CHECK(warnings.contains("failed"));

  std::stringstream ss;
  analysis::write_deviation_csv(ss, mixed);
  std::string header;
  std::getline(ss, header);
  CHECK(header.rfind("delta,ratio,count", 0) == 0);
}
