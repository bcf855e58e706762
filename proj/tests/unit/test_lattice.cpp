#include "support.hpp"

#include "lattice.hpp"
#include "oracle.hpp"
#include "potential.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace qlscar;
using lattice::complex;

TEST_CASE("grid construction") {
  const auto g = lattice::make_grid(10.0, 16);
  CHECK(g.spacing_x() == 1.25);
  CHECK(g.spacing_y() == 1.25);
  CHECK(g.x(8) == 0.0);
  CHECK(g.y(8) == 0.0);
  CHECK(g.x(0) == -10.0);

  CHECK_THROWS_AS(lattice::make_grid(10.0, 15), Error);
  CHECK_THROWS_AS(lattice::make_grid(-1.0, 16), Error);
  CHECK_THROWS_AS(lattice::make_grid(1.0, 0), Error);

  const auto fine = lattice::make_grid(24.0, 512);
  CHECK(fine.spacing_x() == 0.09375);
  CHECK(fine.spacing_x() < potential::sigma_from_fwhm(0.235));

  const auto rect = lattice::make_grid(6.0, 3.0, 24, 12);
  CHECK(rect.spacing_x() == 0.5);
  CHECK(rect.spacing_y() == 0.5);
  CHECK(rect.size() == 288u);
  CHECK(rect.index(3, 2) == 51u);
}

TEST_CASE("fft friendly sizes") {
  CHECK(lattice::fft_friendly_size(7) == 8);
  CHECK(lattice::fft_friendly_size(14) == 16);
  CHECK(lattice::fft_friendly_size(250) == 250);
  CHECK(lattice::fft_friendly_size(242) == 250);
  for (int n = 2; n < 600; ++n) {
    int m = lattice::fft_friendly_size(n);
    CHECK(m >= n);
    CHECK(m % 2 == 0);
    for (int f : {2, 3, 5})
      while (m % f == 0) m /= f;
    CHECK(m == 1);
  }
}

TEST_CASE("default grid resolves the top mode and the bumps") {
  const double wx = 1.0, wy = 2.0, emax = 20.0;
  const double sigma = potential::sigma_from_fwhm(0.235);
  const auto g = lattice::default_grid(wx, wy, emax, sigma);
  CHECK(g.spacing_x() <= sigma / 2 + 1e-15);
  CHECK(g.spacing_y() <= sigma / 2 + 1e-15);
  CHECK(g.points_x % 2 == 0);

  // highest modes along each axis at E_max must be confined
  const int nmax = static_cast<int>((emax - 1.5) / wx);
  const int mmax = static_cast<int>((emax - 1.5) / wy);
  CHECK(oracle::hg_mode({nmax, 0}, g, wx, wy).boundary_ratio() < lattice::kBoundaryDecayLimit);
  CHECK(oracle::hg_mode({0, mmax}, g, wx, wy).boundary_ratio() < lattice::kBoundaryDecayLimit);
}

TEST_CASE("inner product") {
  const auto g = lattice::make_grid(8.0, 64);
  const auto g00 = oracle::hg_mode({0, 0}, g, 1.0, 1.0);
  const auto g10 = oracle::hg_mode({1, 0}, g, 1.0, 1.0);
  CHECK(std::abs(lattice::inner_product(g00, g00) - complex(1.0)) < 1e-12);
  CHECK(std::abs(lattice::inner_product(g00, g10)) < 1e-14);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  lattice::StateFunction a(g), b(g);
  for (auto& v : a.amplitudes()) v = {n01(rng), n01(rng)};
  for (auto& v : b.amplitudes()) v = {n01(rng), n01(rng)};
  const complex ab = lattice::inner_product(a, b);
  const complex ba = lattice::inner_product(b, a);
  CHECK(std::abs(ab - std::conj(ba)) < 1e-10 * std::abs(ab));
  CHECK(lattice::inner_product(a, a).real() > 0.0);
  CHECK(std::abs(lattice::inner_product(a, a).imag()) < 1e-12);

  const auto other = lattice::make_grid(8.0, 32);
  CHECK_THROWS_AS(lattice::inner_product(a, lattice::StateFunction(other)), Error);
}

TEST_CASE("normalization") {
  const auto g = lattice::make_grid(6.0, 32);
  lattice::StateFunction psi(g);
  for (std::size_t i = 0; i < psi.amplitudes().size(); ++i) psi.amplitudes()[i] = complex(std::sin(0.1 * i), 1.0);
  psi.normalize();
  CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-14));
  lattice::StateFunction zero(g);
  CHECK_THROWS_AS(zero.normalize(), Error);
}

TEST_CASE("kinetic operator") {
  SUBCASE("constant field is annihilated and flagged at the edge") {
    const auto g = lattice::make_grid(4.0, 16);
    lattice::StateFunction c(g);
    for (auto& v : c.amplitudes()) v = 1.0;
    test::WarningCapture warnings;
    const auto t = lattice::kinetic_apply(c);
    for (const auto v : t.amplitudes()) CHECK(std::abs(v) < 1e-13);
    CHECK(warnings.contains("edge"));
  }
  SUBCASE("oscillator modes") {
    const auto g = lattice::make_grid(8.0, 64);
    test::WarningCapture warnings;
    CHECK(test::expectation_kinetic(oracle::hg_mode({0, 0}, g, 1.0, 1.0)) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(test::expectation_kinetic(oracle::hg_mode({1, 0}, g, 1.0, 1.0)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(warnings.messages().empty());
  }
  SUBCASE("self-adjoint") {
    const auto g = lattice::make_grid(7.0, 5.0, 48, 40);
    const auto a = oracle::hg_mode({3, 1}, g, 1.0, 2.0);
    auto b = oracle::hg_mode({2, 2}, g, 1.0, 2.0);
    for (std::size_t i = 0; i < b.amplitudes().size(); ++i) b.amplitudes()[i] *= complex(1.0, 0.3 * std::cos(0.01 * i));
    const complex lhs = lattice::inner_product(a, lattice::kinetic_apply(b));
    const complex rhs = lattice::inner_product(lattice::kinetic_apply(a), b);
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
  SUBCASE("spectral convergence") {
    // Gaussian of width s: <T> = 1 / (2 s^2)
    const double s = 0.5;
    double previous = 0.0;
    for (int n : {24, 32, 40, 48, 64}) {
      const auto g = lattice::make_grid(6.0, n);
      std::vector<double> v(g.size());
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) v[g.index(i, j)] = std::exp(-(g.x(i) * g.x(i) + g.y(j) * g.y(j)) / (2 * s * s));
      const double err = std::abs(test::expectation_kinetic(test::from_real(g, v)) - 1.0 / (2 * s * s));
      if (previous > 1e-12) CHECK((err < 1e-12 || previous / err > 8.0));
      previous = err;
    }
    CHECK(previous < 1e-12);
  }
}

TEST_CASE("transforms preserve the norm") {
  const auto g = lattice::make_grid(5.0, 3.0, 30, 18);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  std::vector<complex> data(g.size());
  for (auto& v : data) v = {n01(rng), n01(rng)};
  const auto original = data;
  double before = 0.0;
  for (const auto v : data) before += std::norm(v);

  lattice::ComplexTransform fft(g);
  fft.forward(data);
  double after = 0.0;
  for (const auto v : data) after += std::norm(v);
  CHECK(after / static_cast<double>(g.size()) == doctest::Approx(before).epsilon(1e-12));
  fft.inverse(data);
  double worst = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) worst = std::max(worst, std::abs(data[i] - original[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("kinetic symbol") {
  const auto g = lattice::make_grid(4.0, 8);
  const auto sym = lattice::kinetic_symbol(g);
  REQUIRE(sym.size() == g.size());
  CHECK(sym[0] == 0.0);
  const double dk = std::numbers::pi / 4.0;
  CHECK(sym[g.index(1, 0)] == doctest::Approx(0.5 * dk * dk));
  CHECK(sym[g.index(7, 0)] == doctest::Approx(0.5 * dk * dk));
  CHECK(sym[g.index(4, 4)] == doctest::Approx(0.5 * 2 * (4 * dk) * (4 * dk)));
}

TEST_CASE("boundary ratio") {
  const auto g = lattice::make_grid(8.0, 64);
  CHECK(oracle::hg_mode({0, 0}, g, 1.0, 1.0).boundary_ratio() < 1e-12);
  const auto wide = lattice::make_grid(2.0, 16);
  CHECK(oracle::hg_mode({0, 0}, wide, 1.0, 1.0).boundary_ratio() > 1e-6);
}
