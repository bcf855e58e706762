#include "classical.hpp"

#include "errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

namespace qlscar::classical {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
Point sub(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }

// Closest point of the orbit over parameters [t_begin, t_end], seeded by a
// dense polyline search and polished with Newton on (r(t) - P) . r'(t) = 0.
double distance_to_arc(const LissajousOrbit& orbit, Point target, double t_begin, double t_end, int segments) {
  const double dt = (t_end - t_begin) / segments;
  double best = std::numeric_limits<double>::infinity();
  double best_t = t_begin;
  Point prev = orbit.position(t_begin);
  for (int s = 1; s <= segments; ++s) {
    const double t = t_begin + s * dt;
    const Point cur = orbit.position(t);
    const Point seg = sub(cur, prev);
    const double len2 = dot(seg, seg);
    double u = len2 > 0.0 ? dot(sub(target, prev), seg) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    const Point proj{prev.x + u * seg.x, prev.y + u * seg.y};
    const Point d = sub(target, proj);
    const double dist2 = dot(d, d);
    if (dist2 < best) {
      best = dist2;
      best_t = t - dt + u * dt;
    }
    prev = cur;
  }
  double t = best_t;
  for (int it = 0; it < 6; ++it) {
    const Point r = sub(orbit.position(t), target);
    const Point v = orbit.velocity(t);
    const Point a = orbit.acceleration(t);
    const double f = dot(r, v);
    const double df = dot(v, v) + dot(r, a);
    if (!(df > 0.0)) break;
    t = std::clamp(t - f / df, t_begin, t_end);
  }
  const Point r = sub(orbit.position(t), target);
  return std::min(std::sqrt(best), std::sqrt(dot(r, r)));
}

}  // namespace

std::string_view to_string(OrbitKind kind) { return kind == OrbitKind::String ? "string" : "loop"; }

double LissajousOrbit::period() const { return kTwoPi / omega0; }

Point LissajousOrbit::position(double t) const {
  return {amplitude_x * std::cos(p * omega0 * t + phase), amplitude_y * std::cos(q * omega0 * t)};
}

Point LissajousOrbit::velocity(double t) const {
  const double wx = p * omega0;
  const double wy = q * omega0;
  return {-amplitude_x * wx * std::sin(wx * t + phase), -amplitude_y * wy * std::sin(wy * t)};
}

Point LissajousOrbit::acceleration(double t) const {
  const double wx = p * omega0;
  const double wy = q * omega0;
  const Point r = position(t);
  return {-wx * wx * r.x, -wy * wy * r.y};
}

double LissajousOrbit::energy_at(double t) const {
  const double wx = p * omega0;
  const double wy = q * omega0;
  const Point r = position(t);
  const Point v = velocity(t);
  return 0.5 * dot(v, v) + 0.5 * (wx * wx * r.x * r.x + wy * wy * r.y * r.y);
}

LissajousOrbit make_orbit(int p, int q, double energy, double eta, double phase, int samples_per_period,
                          double omega0, bool classify) {
  if (p < 1 || q < 1) throw invalid_argument("p and q must be positive");
  if (std::gcd(p, q) != 1) {
    std::ostringstream os;
    const int g = std::gcd(p, q);
    os << "(" << p << "," << q << ") is not coprime; use (" << p / g << "," << q / g << ")";
    throw invalid_argument(os.str());
  }
  if (!(eta > 0.0 && eta < 1.0)) throw invalid_argument("energy fraction eta must lie in (0, 1)");
  if (!(energy > 0.0)) throw invalid_argument("orbit energy must be positive");
  if (!(omega0 > 0.0)) throw invalid_argument("omega0 must be positive");
  if (samples_per_period < kMinSamplesPerFrequency * std::max(p, q)) {
    throw invalid_argument("samples_per_period must be at least 64 max(p, q)");
  }

  LissajousOrbit orbit;
  orbit.p = p;
  orbit.q = q;
  orbit.omega0 = omega0;
  orbit.energy = energy;
  orbit.eta = eta;
  orbit.phase = phase;
  orbit.amplitude_x = std::sqrt(2.0 * eta * energy) / (p * omega0);
  orbit.amplitude_y = std::sqrt(2.0 * (1.0 - eta) * energy) / (q * omega0);
  orbit.samples.reserve(samples_per_period);
  const double dt = orbit.period() / samples_per_period;
  for (int k = 0; k < samples_per_period; ++k) orbit.samples.push_back(orbit.position(k * dt));
  if (classify) orbit.kind = classify_kind(orbit);
  return orbit;
}

double retrace_distance(const LissajousOrbit& orbit) {
  const double period = orbit.period();
  const double wy = orbit.q * orbit.omega0;
  // A self-retracing orbit stops at some instant; both velocity components
  // vanish there, so it is among the zeros of y'(t) = -B wy sin(wy t).
  double t0 = 0.0;
  double slowest = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 2 * orbit.q; ++k) {
    const double t = k * std::numbers::pi / wy;
    const Point v = orbit.velocity(t);
    const double speed = std::sqrt(dot(v, v));
    if (speed < slowest) {
      slowest = speed;
      t0 = t;
    }
  }

  const int half_points = std::max<int>(static_cast<int>(orbit.samples.size()) / 2, 16);
  const int segments = 4 * half_points;
  const double half = 0.5 * period;
  auto directed = [&](double from_begin, double to_begin) {
    double worst = 0.0;
    for (int k = 0; k <= half_points; ++k) {
      const Point pt = orbit.position(from_begin + half * k / half_points);
      worst = std::max(worst, distance_to_arc(orbit, pt, to_begin, to_begin + half, segments));
    }
    return worst;
  };
  return std::max(directed(t0, t0 + half), directed(t0 + half, t0));
}

OrbitKind classify_kind(const LissajousOrbit& orbit) {
  const double tol = kRetraceTolerance * std::sqrt(2.0 * orbit.energy);
  return retrace_distance(orbit) <= tol ? OrbitKind::String : OrbitKind::Loop;
}

double closure_residual(const LissajousOrbit& orbit) {
  const Point a = orbit.position(0.0);
  const Point b = orbit.position(orbit.period());
  return std::hypot(b.x - a.x, b.y - a.y);
}

std::vector<LissajousOrbit> orbit_family(int p, int q, double energy, int n_eta, int n_phi, double omega0,
                                         int samples_per_period, bool classify) {
  if (n_eta < 1 || n_phi < 1) throw invalid_argument("orbit family needs n_eta, n_phi >= 1");
  const int samples = samples_per_period > 0 ? samples_per_period : kMinSamplesPerFrequency * std::max(p, q);
  std::vector<LissajousOrbit> family;
  family.reserve(static_cast<std::size_t>(n_eta) * n_phi);
  for (int i = 0; i < n_eta; ++i) {
    const double eta = (i + 0.5) / n_eta;
    for (int j = 0; j < n_phi; ++j) {
      family.push_back(make_orbit(p, q, energy, eta, kTwoPi * j / n_phi, samples, omega0, classify));
    }
  }
  return family;
}

void write_orbit_csv(std::ostream& out, const LissajousOrbit& orbit) {
  out << "t,x,y\n";
  char buf[64];
  auto put = [&](double v) {
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out << std::string_view(buf, res.ptr - buf);
  };
  const std::size_t n = orbit.samples.size();
  const double dt = orbit.period() / static_cast<double>(n);
  for (std::size_t k = 0; k <= n; ++k) {
    const Point pt = k < n ? orbit.samples[k] : orbit.position(orbit.period());
    put(k * dt);
    out << ',';
    put(pt.x);
    out << ',';
    put(pt.y);
    out << '\n';
  }
}

}  // namespace qlscar::classical
