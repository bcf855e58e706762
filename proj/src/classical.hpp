#pragma once

#include "potential.hpp"

#include <iosfwd>
#include <string_view>
#include <vector>

namespace qlscar::classical {

using potential::Point;

enum class OrbitKind { String, Loop };
std::string_view to_string(OrbitKind kind);

/// Closed orbit x(t) = A cos(p w0 t + phase), y(t) = B cos(q w0 t) of the
/// oscillator with wx = p w0, wy = q w0, sampled over one period 2 pi / w0.
struct LissajousOrbit {
  int p = 1;
  int q = 1;
  double omega0 = 1.0;
  double energy = 0.0;
  /// Fraction of the energy carried by the x motion.
  double eta = 0.5;
  double phase = 0.0;
  double amplitude_x = 0.0;
  double amplitude_y = 0.0;
  /// samples[k] = position(k * period / samples.size())
  std::vector<Point> samples;
  OrbitKind kind = OrbitKind::Loop;

  double period() const;
  Point position(double t) const;
  Point velocity(double t) const;
  Point acceleration(double t) const;
  /// Kinetic plus harmonic potential energy at time t.
  double energy_at(double t) const;
};

inline constexpr int kMinSamplesPerFrequency = 64;
inline constexpr double kRetraceTolerance = 1e-6;

/// Throws unless gcd(p, q) == 1, 0 < eta < 1, E > 0 and
/// samples_per_period >= 64 max(p, q). `classify` false skips the retracing
/// test (kind left as Loop).
LissajousOrbit make_orbit(int p, int q, double energy, double eta, double phase, int samples_per_period,
                          double omega0 = 1.0, bool classify = true);

/// String when the point set traced over one half period, starting from the
/// slowest turning instant, coincides with that of the other half (Hausdorff
/// distance <= 1e-6 sqrt(2E)); loop otherwise.
OrbitKind classify_kind(const LissajousOrbit& orbit);
/// Hausdorff distance between the two half-period point sets used above.
double retrace_distance(const LissajousOrbit& orbit);

/// ||r(T) - r(0)|| evaluated analytically.
double closure_residual(const LissajousOrbit& orbit);

/// eta_i = (i + 1/2) / n_eta, phase_j = 2 pi j / n_phi. samples_per_period
/// <= 0 picks 64 max(p, q).
std::vector<LissajousOrbit> orbit_family(int p, int q, double energy, int n_eta, int n_phi, double omega0 = 1.0,
                                         int samples_per_period = 0, bool classify = true);

/// Rows t,x,y including the closing point at t = T.
void write_orbit_csv(std::ostream& out, const LissajousOrbit& orbit);

}  // namespace qlscar::classical
