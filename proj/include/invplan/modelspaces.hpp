#pragma once

// Auxiliary model geometries: the round sphere S^2 (smooth Riemannian
// example) and the flat cone of opening angle theta < 2pi (the singular
// counterexample whose apex admits no inversion plan).

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "invplan/core.hpp"
#include "invplan/jsonio.hpp"
#include "invplan/linalg.hpp"

namespace invplan {

inline constexpr double kSpherePi = 3.14159265358979323846264338327950288;

// ---------------------------------------------------------------------------
// Sphere: points are unit 3-vectors.
inline void require_unit(std::span<const double> v, const char* what) {
  double n = norm2(v);
  if (std::fabs(n - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + ": not a unit vector");
}

inline double sphere_distance(std::span<const double> x, std::span<const double> y) {
  double d = std::clamp(dot(x, y), -1.0, 1.0);
  return std::acos(d);
}

// slerp along the great circle; the formula extends past t=1 which is how the
// inversion map overshoots through z.
inline std::vector<double> sphere_geodesic_point(std::span<const double> x, std::span<const double> y,
                                                 double t) {
  double th = sphere_distance(x, y);
  std::vector<double> out(3);
  if (th < 1e-15) {
    for (int k = 0; k < 3; ++k) out[k] = x[k];
    return out;
  }
  if (th > kSpherePi - 1e-12)
    throw std::invalid_argument("sphere_geodesic_point: antipodal endpoints (non-unique geodesic)");
  double s = std::sin(th);
  double ca = std::sin((1.0 - t) * th) / s, cb = std::sin(t * th) / s;
  double n2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    out[k] = ca * x[k] + cb * y[k];
    n2 += out[k] * out[k];
  }
  double inv = 1.0 / std::sqrt(n2);
  for (int k = 0; k < 3; ++k) out[k] *= inv;
  return out;
}

// Overshoot through z by beta(x) = (pi - d(x,z))/2 so the extended arc stays
// minimizing: the image satisfies d(x,out) = d(x,z) + d(z,out) exactly.
inline std::vector<double> sphere_inversion_map(std::span<const double> z, std::span<const double> x) {
  double d = sphere_distance(x, z);
  if (d < 1e-12) throw std::invalid_argument("sphere_inversion_map: x equals z");
  if (d > kSpherePi - 1e-12)
    throw std::invalid_argument("sphere_inversion_map: x antipodal to z (cut locus)");
  double beta = 0.5 * (kSpherePi - d);
  double tau = (d + beta) / d;
  return sphere_geodesic_point(x, z, tau);
}

class SphereSpace final : public Space {
public:
  std::string tag() const override { return "sphere2"; }
  int dim() const override { return 3; }

  double distance(std::span<const double> a, std::span<const double> b) const override {
    return sphere_distance(a, b);
  }

  std::vector<double> geodesic(std::span<const double> a, std::span<const double> b, double t,
                               bool* unique) const override {
    if (unique) *unique = sphere_distance(a, b) < kSpherePi - 1e-12;
    return sphere_geodesic_point(a, b, t);
  }

  void ball_window(std::span<const double> c, double eps, double* lo, double* hi) const override {
    double chord = 2.0 * std::sin(std::min(eps, kSpherePi) * 0.5);
    for (int k = 0; k < 3; ++k) {
      lo[k] = c[k] - chord;
      hi[k] = c[k] + chord;
    }
  }

  bool extends_past(std::span<const double> a, std::span<const double> b) const override {
    double d = sphere_distance(a, b);
    return d > 0.0 && d < kSpherePi - 1e-12;
  }
};

// ---------------------------------------------------------------------------
// Cone of opening angle theta: intrinsic coordinates (r, phi) with
// r >= 0, phi in [0, theta). Distance by unrolling; for theta < 2pi the
// angular separation never reaches pi, so no geodesic crosses the apex.
struct ConePoint {
  double r = 0.0;
  double phi = 0.0;
};

inline double cone_angular_gap(double phi1, double phi2, double theta) {
  double d = std::fabs(phi1 - phi2);
  d = std::fmod(d, theta);
  return std::min(d, theta - d);
}

inline double cone_distance(const ConePoint& x, const ConePoint& y, double theta) {
  double gap = cone_angular_gap(x.phi, y.phi, theta);
  if (gap >= kSpherePi) return x.r + y.r;
  return std::sqrt(std::max(0.0, x.r * x.r + y.r * y.r - 2.0 * x.r * y.r * std::cos(gap)));
}

// Minimum over a pair grid of d(x,apex) + d(apex,y) - d(x,y); strictly
// positive output certifies that H(apex) only contains pairs through the
// apex itself.
inline double cone_strict_triangle_scan(double theta, int grid) {
  if (!(theta > 0.0 && theta < 2.0 * kSpherePi))
    throw std::invalid_argument("cone_strict_triangle_scan: theta must lie in (0, 2pi)");
  if (grid < 2) throw std::invalid_argument("cone_strict_triangle_scan: grid must be >= 2");
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    double r1 = 0.5 + 0.5 * i / (grid - 1);
    for (int j = 0; j < grid; ++j) {
      double r2 = 0.5 + 0.5 * j / (grid - 1);
      for (int k = 0; k < grid; ++k) {
        // the reachable angular gaps on the cone: [0, theta/2]
        double gap = (0.5 * theta) * k / (grid - 1);
        double d = gap >= kSpherePi
                       ? r1 + r2
                       : std::sqrt(std::max(0.0, r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * std::cos(gap)));
        best = std::min(best, r1 + r2 - d);
      }
    }
  }
  return best;
}

class ConeSpace final : public Space {
public:
  explicit ConeSpace(double theta) : theta_(theta) {
    if (!(theta > 0.0 && theta < 2.0 * kSpherePi))
      throw std::invalid_argument("ConeSpace: theta must lie in (0, 2pi)");
    tag_ = "cone:" + fmt_double(theta);
  }

  std::string tag() const override { return tag_; }
  int dim() const override { return 2; }
  double theta() const { return theta_; }

  double distance(std::span<const double> a, std::span<const double> b) const override {
    return cone_distance(ConePoint{a[0], a[1]}, ConePoint{b[0], b[1]}, theta_);
  }

  std::vector<double> geodesic(std::span<const double> a, std::span<const double> b, double t,
                               bool* unique) const override {
    ConePoint x{a[0], a[1]}, y{b[0], b[1]};
    if (unique) *unique = true;
    if (x.r == 0.0 || y.r == 0.0) {
      // radial segment through/from the apex
      double r = (1.0 - t) * x.r + t * y.r;
      double phi = x.r == 0.0 ? y.phi : x.phi;
      return {r, phi};
    }
    double gap = cone_angular_gap(x.phi, y.phi, theta_);
    if (unique && std::fabs(gap - 0.5 * theta_) < 1e-12) *unique = false;
    // orientation of the short way from x to y
    double fwd = std::fmod(y.phi - x.phi + theta_, theta_);
    double sgn = (fwd <= 0.5 * theta_) ? 1.0 : -1.0;
    // unroll: x at angle 0, y at angle gap
    double px = x.r, py = 0.0;
    double qx = y.r * std::cos(gap), qy = y.r * std::sin(gap);
    double mx = (1.0 - t) * px + t * qx, my = (1.0 - t) * py + t * qy;
    double r = std::sqrt(mx * mx + my * my);
    double psi = std::atan2(my, mx);
    double phi = std::fmod(x.phi + sgn * psi + 4.0 * theta_, theta_);
    return {r, phi};
  }

  void ball_window(std::span<const double> c, double eps, double* lo, double* hi) const override {
    lo[0] = c[0] - eps;
    hi[0] = c[0] + eps;
    double rmin = c[0] - eps;
    double half = theta_;
    if (rmin > 0.0 && eps / (2.0 * rmin) < 1.0) half = 2.0 * std::asin(eps / (2.0 * rmin));
    lo[1] = c[1] - half;
    hi[1] = c[1] + half;
    if (lo[1] < 0.0 || hi[1] > theta_) { // window wraps the phi seam
      lo[1] = 0.0;
      hi[1] = theta_;
    }
  }

  bool extends_past(std::span<const double> a, std::span<const double> b) const override {
    if (b[0] == 0.0) return false; // nothing extends through the apex
    if (a[0] == 0.0) return true;  // radial rays extend forever
    double gap = cone_angular_gap(a[1], b[1], theta_);
    return gap < 0.5 * theta_ - 1e-12;
  }

private:
  double theta_;
  std::string tag_;
};

} // namespace invplan
