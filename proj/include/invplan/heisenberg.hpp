#pragma once

// Exact sub-Riemannian geometry of the Heisenberg group H^n: group law,
// dilations, closed-form geodesics, the endpoint chart and its numerical
// inverse, the Carnot-Caratheodory distance, the operators L_v / A_v, the
// parameter flip Psi and the geodesic-inversion diffeomorphism Lambda.
//
// Points are written x = (xi, eta, t) = [zeta, t] with zeta = xi + i eta in
// C^n. Geodesics from the origin are charted by (a+ib, v, r) in
// S x [-2pi, 2pi] x (0, inf); for v != 0 the arc at length s is
//   xi_j(s)  = (b_j (1 - cos(vs/r)) + a_j sin(vs/r)) r / v
//   eta_j(s) = (-a_j (1 - cos(vs/r)) + b_j sin(vs/r)) r / v
//   t(s)     = 2 (vs/r - sin(vs/r)) r^2 / v^2
// and for v = 0 the straight horizontal line (a s, b s, 0).

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace invplan::heis {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

struct HeisPoint {
  std::vector<double> xi, eta; // Re zeta, Im zeta
  double t = 0.0;

  int n() const { return static_cast<int>(xi.size()); }

  double zeta_norm2() const {
    double s = 0.0;
    for (int j = 0; j < n(); ++j) s += xi[j] * xi[j] + eta[j] * eta[j];
    return s;
  }
  double zeta_norm() const { return std::sqrt(zeta_norm2()); }
  bool on_center() const { return zeta_norm2() == 0.0; }
  bool is_origin() const { return on_center() && t == 0.0; }
};

inline HeisPoint heis_point(std::vector<double> xi, std::vector<double> eta, double t) {
  if (xi.size() != eta.size()) throw std::invalid_argument("heis_point: xi/eta size mismatch");
  return HeisPoint{std::move(xi), std::move(eta), t};
}

// n=1 convenience
inline HeisPoint h1(double x, double y, double t) { return HeisPoint{{x}, {y}, t}; }

// group law: [z,t] . [z',t'] = [z + z', t + t' + 2 sum Im(z_j conj(z'_j))]
inline HeisPoint group_mul(const HeisPoint& x, const HeisPoint& y) {
  if (x.n() != y.n()) throw std::invalid_argument("group_mul: mismatched n");
  HeisPoint o;
  o.xi.resize(x.n());
  o.eta.resize(x.n());
  double twist = 0.0;
  for (int j = 0; j < x.n(); ++j) {
    o.xi[j] = x.xi[j] + y.xi[j];
    o.eta[j] = x.eta[j] + y.eta[j];
    // Im(z_j conj(z'_j)) = eta_j xi'_j - xi_j eta'_j
    twist += x.eta[j] * y.xi[j] - x.xi[j] * y.eta[j];
  }
  o.t = x.t + y.t + 2.0 * twist;
  return o;
}

inline HeisPoint group_inv(const HeisPoint& x) {
  HeisPoint o = x;
  for (int j = 0; j < x.n(); ++j) {
    o.xi[j] = -o.xi[j];
    o.eta[j] = -o.eta[j];
  }
  o.t = -o.t;
  return o;
}

// dilation delta_lam [z,t] = [lam z, lam^2 t]
inline HeisPoint dilate(const HeisPoint& x, double lam) {
  if (!(lam > 0.0)) throw std::invalid_argument("dilate: lam must be > 0");
  HeisPoint o = x;
  for (int j = 0; j < x.n(); ++j) {
    o.xi[j] *= lam;
    o.eta[j] *= lam;
  }
  o.t *= lam * lam;
  return o;
}

struct GeodesicParam {
  std::vector<double> a, b; // unit vector a+ib in C^n
  double v = 0.0;           // in [-2pi, 2pi]
  double r = 0.0;           // length, > 0
  bool non_unique = false;  // set when the endpoint lies on the center

  int n() const { return static_cast<int>(a.size()); }
  double dir_norm() const {
    double s = 0.0;
    for (int j = 0; j < n(); ++j) s += a[j] * a[j] + b[j] * b[j];
    return std::sqrt(s);
  }
};

// g(v) = (v - sin v)/(1 - cos v), strictly increasing on (-2pi, 2pi); the
// series below the cutoff avoids the 0/0 cancellation and carries enough
// terms for full double precision at |v| = 0.5.
inline double v_equation(double v) {
  if (std::fabs(v) < 0.5) {
    double x = v * v;
    return v * (1.0 / 3.0 +
                x * (1.0 / 90.0 +
                     x * (1.0 / 2520.0 +
                          x * (1.0 / 75600.0 +
                               x * (1.0 / 2395008.0 +
                                    x * (691.0 / 54486432000.0 + x / 2668723200.0))))));
  }
  return (v - std::sin(v)) / (1.0 - std::cos(v));
}

inline double v_equation_deriv(double v) {
  if (std::fabs(v) < 0.5) {
    double x = v * v;
    return 1.0 / 3.0 +
           x * (1.0 / 30.0 +
                x * (1.0 / 504.0 +
                     x * (1.0 / 10800.0 +
                          x * (1.0 / 266112.0 +
                               x * (691.0 / 4953312000.0 + x / 205286400.0)))));
  }
  double c = 1.0 - std::cos(v), s = std::sin(v);
  return (c * c - (v - s) * s) / (c * c);
}

// (v/2) cot(v/2), stable for small v
inline double half_cot_half(double v) {
  if (std::fabs(v) < 1e-4) {
    double v2 = v * v;
    return 1.0 - v2 / 12.0 - v2 * v2 / 720.0;
  }
  return 0.5 * v * std::cos(0.5 * v) / std::sin(0.5 * v);
}

// r / |zeta| = |v| / (2 |sin(v/2)|), stable for small v
inline double radius_factor(double v) {
  if (std::fabs(v) < 1e-4) {
    double v2 = v * v;
    return 1.0 + v2 / 24.0;
  }
  return std::fabs(v) / (2.0 * std::fabs(std::sin(0.5 * v)));
}

// |zeta| of the endpoint at parameters (v, r): R = 2 r sin(v/2) / v
inline double chart_radius(double v, double r) {
  if (std::fabs(v) < 1e-4) {
    double v2 = v * v;
    return r * (1.0 - v2 / 24.0);
  }
  return 2.0 * r * std::sin(0.5 * v) / v;
}

// Volume element of the endpoint chart (phi, v, r) -> (xi, eta, t) on H^1:
// |J_Phi| = |R|^4 g'(v) / r, phi-independent by rotational symmetry.
inline double chart_volume_element(double v, double r) {
  double R = chart_radius(v, r);
  return R * R * R * R * v_equation_deriv(v) / r;
}

inline double max_arc(const GeodesicParam& p) {
  if (std::fabs(p.v) < 1e-12) return std::numeric_limits<double>::infinity();
  return kTwoPi * p.r / std::fabs(p.v);
}

// Arc-length evaluation of the geodesic with parameter p at s in [0, max_arc].
inline HeisPoint geodesic_point(const GeodesicParam& p, double s) {
  if (s < 0.0) throw std::invalid_argument("geodesic_point: s must be >= 0");
  double smax = max_arc(p);
  if (s > smax * (1.0 + 1e-12))
    throw std::invalid_argument("geodesic_point: s=" + std::to_string(s) +
                                " beyond maximal interval [0, " + std::to_string(smax) + "]");
  HeisPoint o;
  o.xi.resize(p.n());
  o.eta.resize(p.n());
  if (std::fabs(p.v) < 1e-12) {
    for (int j = 0; j < p.n(); ++j) {
      o.xi[j] = p.a[j] * s;
      o.eta[j] = p.b[j] * s;
    }
    o.t = 0.0;
    return o;
  }
  double th = p.v * s / p.r;
  double c = 1.0 - std::cos(th), sn = std::sin(th);
  double k = p.r / p.v;
  for (int j = 0; j < p.n(); ++j) {
    o.xi[j] = (p.b[j] * c + p.a[j] * sn) * k;
    o.eta[j] = (-p.a[j] * c + p.b[j] * sn) * k;
  }
  // 2 (th - sin th) r^2 / v^2, with the same series guard as v_equation
  double g;
  if (std::fabs(th) < 0.05) {
    double th2 = th * th;
    g = th * th2 * (1.0 / 6.0 - th2 * (1.0 / 120.0 - th2 / 5040.0));
  } else {
    g = th - sn;
  }
  o.t = 2.0 * g * (p.r / p.v) * (p.r / p.v);
  return o;
}

inline HeisPoint endpoint_map(const GeodesicParam& p) { return geodesic_point(p, p.r); }

// Inverse of the endpoint chart. For zeta != 0 solves the monotone equation
// g(v) = t / |zeta|^2 on (-2pi, 2pi) by bracketed bisection plus Newton
// polish, then recovers r and the direction. Points on the center carry the
// canonical direction e_1 and the non_unique flag.
inline GeodesicParam invert_endpoint(const HeisPoint& x, double tol = 1e-13) {
  if (x.is_origin()) throw std::invalid_argument("invert_endpoint: no geodesic parameter at the origin");
  int n = x.n();
  GeodesicParam p;
  p.a.assign(n, 0.0);
  p.b.assign(n, 0.0);
  double rho2 = x.zeta_norm2();
  if (rho2 == 0.0) {
    p.a[0] = 1.0;
    p.v = x.t > 0.0 ? kTwoPi : -kTwoPi;
    p.r = std::sqrt(kPi * std::fabs(x.t));
    p.non_unique = true;
    return p;
  }
  double target = x.t / rho2;
  double lo = -kTwoPi + 1e-12, hi = kTwoPi - 1e-12;
  double v;
  if (target >= v_equation(hi)) {
    v = hi;
  } else if (target <= v_equation(lo)) {
    v = lo;
  } else {
    for (int it = 0; it < 24; ++it) {
      double mid = 0.5 * (lo + hi);
      if (v_equation(mid) < target)
        lo = mid;
      else
        hi = mid;
    }
    // Newton from the 1e-5-wide bracket; g' >= 1/3 keeps the steps tame
    v = 0.5 * (lo + hi);
    for (int it = 0; it < 24; ++it) {
      double f = v_equation(v) - target;
      double step = f / v_equation_deriv(v);
      double vn = std::clamp(v - step, -kTwoPi + 1e-12, kTwoPi - 1e-12);
      bool done = std::fabs(vn - v) <= tol * 1e-2 * (1.0 + std::fabs(vn));
      v = vn;
      if (done) break;
    }
  }
  double rho = std::sqrt(rho2);
  p.v = v;
  p.r = rho * radius_factor(v);
  // (a+ib)_j = [ (v/2) cot(v/2) + i v/2 ] zeta_j / r
  double cre = half_cot_half(v), cim = 0.5 * v;
  for (int j = 0; j < n; ++j) {
    p.a[j] = (cre * x.xi[j] - cim * x.eta[j]) / p.r;
    p.b[j] = (cre * x.eta[j] + cim * x.xi[j]) / p.r;
  }
  double dn = p.dir_norm();
  for (int j = 0; j < n; ++j) {
    p.a[j] /= dn;
    p.b[j] /= dn;
  }
  return p;
}

inline double cc_distance_from_origin(const HeisPoint& x, double tol = 1e-13) {
  if (x.is_origin()) return 0.0;
  return invert_endpoint(x, tol).r;
}

inline double cc_distance(const HeisPoint& x, const HeisPoint& y, double tol = 1e-13) {
  return cc_distance_from_origin(group_mul(group_inv(x), y), tol);
}

// 1 - cos v evaluated as 2 sin^2(v/2): no cancellation near v = 0 mod 2pi
inline double one_minus_cos(double v) {
  double s = std::sin(0.5 * v);
  return 2.0 * s * s;
}

// L_v(x1,x2) = (x1 sin v + x2 (1-cos v), -x1 (1-cos v) + x2 sin v); det = 2(1-cos v)
inline std::pair<double, double> lv_apply(double v, double x1, double x2) {
  double s = std::sin(v), c = one_minus_cos(v);
  if (c < 1e-12) throw std::invalid_argument("lv_apply: v congruent to 0 mod 2pi (L_v singular)");
  return {x1 * s + x2 * c, -x1 * c + x2 * s};
}

// A_v = (L_{-v})^{-1} L_v, an orthogonal transformation of R^2. The
// normalizer s^2 + c^2 equals det L_v = 2(1-cos v) identically, and keeps
// A_v A_v^T = Id exact under rounding.
inline std::array<double, 4> av_matrix(double v) {
  double c = one_minus_cos(v), s = std::sin(v);
  double det = s * s + c * c;
  if (c < 1e-12)
    throw std::invalid_argument("av_matrix: v congruent to 0 mod 2pi (det L_v = 0)");
  // L_{-v}^{-1} = L_{-v}^T / det ; columns of L_v are (s, -c) and (c, s)
  // L_{-v} has entries [ -s  c ; -c  -s ], so L_{-v}^T = [ -s  -c ; c  -s ]
  double m00 = (-s * s + (-c) * (-c)) / det;
  double m01 = (-s * c + (-c) * s) / det;
  double m10 = (c * s + (-s) * (-c)) / det;
  double m11 = (c * c + (-s) * s) / det;
  return {m00, m01, m10, m11};
}

// Psi(a+ib, v, r) = (e^{iv} A_v(a+ib), -v (2pi - |v|)/(2|v|), (2pi - |v|)/(2|v|) r).
// As a complex rotation A_v = -e^{-iv}, so the direction component collapses
// to the antipode -(a+ib): the minimizing continuation through the origin
// leaves with the opposite horizontal velocity and reversed chirality. (The
// bare A_v(a+ib) does not satisfy the collinearity identity; the composed
// rotation does, and it matches the extended-geodesic construction exactly.)
inline GeodesicParam psi_map(const GeodesicParam& p) {
  double av = std::fabs(p.v);
  if (av < 1e-12 || av > kTwoPi - 1e-12)
    throw std::invalid_argument("psi_map: v must lie in (-2pi,0) u (0,2pi)");
  GeodesicParam q;
  q.a.resize(p.n());
  q.b.resize(p.n());
  for (int j = 0; j < p.n(); ++j) {
    q.a[j] = -p.a[j];
    q.b[j] = -p.b[j];
  }
  double f = (kTwoPi - av) / (2.0 * av);
  q.v = -p.v * f;
  q.r = f * p.r;
  q.non_unique = p.non_unique;
  return q;
}

// Lambda = Phi o Psi o Phi^{-1} on H^n minus the center and the t=0 plane;
// (x, Lambda(x)) lies in H(0): d(x,Lx) = d(x,0) + d(0,Lx).
inline HeisPoint lambda_map(const HeisPoint& x, double tol = 1e-13) {
  if (x.zeta_norm2() == 0.0) throw std::invalid_argument("lambda_map: x on the center L");
  if (x.t == 0.0) throw std::invalid_argument("lambda_map: x on the horizontal plane t=0");
  return endpoint_map(psi_map(invert_endpoint(x, tol)));
}

// Point at parameter t in [0,1] along the geodesic from x to o (t=1 lands on
// o). Canonical branch on the center, flagged through *non_unique.
inline HeisPoint contract_toward(const HeisPoint& x, const HeisPoint& o, double t,
                                 bool* non_unique = nullptr, double tol = 1e-13) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("contract_toward: t must be in [0,1]");
  HeisPoint w = group_mul(group_inv(o), x);
  if (w.is_origin()) {
    if (non_unique) *non_unique = false;
    return o;
  }
  GeodesicParam p = invert_endpoint(w, tol);
  if (non_unique) *non_unique = p.non_unique;
  return group_mul(o, geodesic_point(p, (1.0 - t) * p.r));
}

// Inverse of contract_toward when it exists: the point whose t-contraction
// toward o is a. Empty when the required geodesic would exceed its maximal
// interval (|v|/(1-t) > 2pi).
inline std::optional<HeisPoint> expand_from(const HeisPoint& a, const HeisPoint& o, double t,
                                            double tol = 1e-13) {
  if (t < 0.0 || t >= 1.0) throw std::invalid_argument("expand_from: t must be in [0,1)");
  HeisPoint w = group_mul(group_inv(o), a);
  if (w.is_origin()) return o; // the pole contracts from itself only at t=1
  GeodesicParam p = invert_endpoint(w, tol);
  double scale = 1.0 / (1.0 - t);
  if (std::fabs(p.v) * scale > kTwoPi) return std::nullopt;
  GeodesicParam q = p;
  q.v = p.v * scale;
  q.r = p.r * scale;
  return group_mul(o, endpoint_map(q));
}

// x in C(z) iff (-z) x lies on the center away from 0: only the |v| = 2pi
// geodesics reach the center and none of them extends.
inline bool cut_locus_member(const HeisPoint& z, const HeisPoint& x) {
  HeisPoint w = group_mul(group_inv(z), x);
  if (w.is_origin()) throw std::invalid_argument("cut_locus_member: x equals z");
  return w.on_center();
}

inline bool extends_past(const HeisPoint& from, const HeisPoint& through) {
  HeisPoint w = group_mul(group_inv(through), from);
  if (w.is_origin()) return false;
  return !w.on_center();
}

} // namespace invplan::heis
