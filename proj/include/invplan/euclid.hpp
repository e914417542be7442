#pragma once

// The R^d model space: convex bodies with radial extents, homothety evolution
// of sets and its inverse, affine span detection, empirical support convexity,
// the non-degeneracy tester, the rank-one determinant identity, the f_z
// differential, and the end-to-end support/dimension/absolute-continuity
// pipeline for non-degenerate measures.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "invplan/core.hpp"
#include "invplan/linalg.hpp"
#include "invplan/rng.hpp"

namespace invplan {

// ---------------------------------------------------------------------------
struct Halfspace {
  std::vector<double> normal; // a . x <= b
  double offset = 0.0;
};

struct ConvexBody {
  int dim = 0;
  std::string kind; // "ball" | "halfspaces" | "polytope"
  std::vector<Halfspace> faces;
  std::vector<double> ball_center;
  double ball_radius = -1.0;
  std::vector<std::vector<double>> vertices; // kept when built from a polytope
  std::vector<double> interior_point;

  bool is_ball() const { return ball_radius > 0.0; }

  // Max tau >= 0 with z + tau * dir inside the body (dir need not be unit).
  double extent(std::span<const double> z, std::span<const double> dir) const {
    if (is_ball()) {
      // |z + tau d - c|^2 = R^2, positive root
      double aa = dot(dir, dir);
      if (aa == 0.0) return 0.0;
      std::vector<double> zc(dim);
      for (int k = 0; k < dim; ++k) zc[k] = z[k] - ball_center[k];
      double bb = dot(zc, dir), cc = dot(zc, zc) - ball_radius * ball_radius;
      double disc = bb * bb - aa * cc;
      if (disc < 0.0) return 0.0;
      return (-bb + std::sqrt(disc)) / aa;
    }
    double tau = std::numeric_limits<double>::infinity();
    for (const auto& f : faces) {
      double ad = dot(f.normal, dir);
      if (ad > 0.0) {
        double slack = f.offset - dot(f.normal, z);
        tau = std::min(tau, slack / ad);
      }
    }
    return std::max(0.0, tau);
  }

  bool contains(std::span<const double> x, double tol = 0.0) const {
    if (is_ball()) return dist2(x, ball_center) <= ball_radius + tol;
    for (const auto& f : faces)
      if (dot(f.normal, x) > f.offset + tol) return false;
    return true;
  }

  // Strict margin of x against the boundary (positive inside).
  double interior_margin(std::span<const double> x) const {
    if (is_ball()) return ball_radius - dist2(x, ball_center);
    double m = std::numeric_limits<double>::infinity();
    for (const auto& f : faces) {
      double nn = norm2(f.normal);
      m = std::min(m, (f.offset - dot(f.normal, x)) / nn);
    }
    return m;
  }

  double circumradius_from(std::span<const double> z) const {
    if (is_ball()) return ball_radius + dist2(z, ball_center);
    if (!vertices.empty()) {
      double r = 0.0;
      for (const auto& v : vertices) r = std::max(r, dist2(z, v));
      return r;
    }
    // probe directions; adequate for the bounded bodies accepted at build time
    double r = 0.0;
    Rng rng(0xb0d1ull);
    for (int k = 0; k < dim; ++k) {
      std::vector<double> e(dim, 0.0);
      e[k] = 1.0;
      r = std::max(r, extent(z, e));
      e[k] = -1.0;
      r = std::max(r, extent(z, e));
    }
    for (int it = 0; it < 256; ++it) r = std::max(r, extent(z, rng.unit_vector(dim)));
    return r;
  }

  void validate() const {
    if (interior_point.empty()) throw std::invalid_argument("ConvexBody: interior point required");
    if (!(interior_margin(interior_point) > 0.0))
      throw std::invalid_argument("ConvexBody: interior point not strictly inside");
    if (!is_ball()) {
      Rng rng(0xb0d2ull);
      auto check_dir = [&](const std::vector<double>& d) {
        if (!std::isfinite(extent(interior_point, d)))
          throw std::invalid_argument("ConvexBody: unbounded along a direction");
      };
      for (int k = 0; k < dim; ++k) {
        std::vector<double> e(dim, 0.0);
        e[k] = 1.0;
        check_dir(e);
        e[k] = -1.0;
        check_dir(e);
      }
      for (int it = 0; it < 128; ++it) check_dir(rng.unit_vector(dim));
    }
  }
};

inline ConvexBody body_from_ball(std::vector<double> center, double radius) {
  ConvexBody b;
  b.dim = static_cast<int>(center.size());
  b.kind = "ball";
  b.ball_center = center;
  b.ball_radius = radius;
  b.interior_point = std::move(center);
  b.validate();
  return b;
}

inline ConvexBody body_from_halfspaces(int dim, std::vector<Halfspace> faces,
                                       std::vector<double> interior) {
  ConvexBody b;
  b.dim = dim;
  b.kind = "halfspaces";
  b.faces = std::move(faces);
  b.interior_point = std::move(interior);
  b.validate();
  return b;
}

inline ConvexBody body_from_box(const std::vector<double>& lo, const std::vector<double>& hi) {
  int d = static_cast<int>(lo.size());
  std::vector<Halfspace> faces;
  std::vector<double> mid(d);
  for (int k = 0; k < d; ++k) {
    std::vector<double> n(d, 0.0);
    n[k] = 1.0;
    faces.push_back({n, hi[k]});
    n[k] = -1.0;
    faces.push_back({n, -lo[k]});
    mid[k] = 0.5 * (lo[k] + hi[k]);
  }
  ConvexBody b = body_from_halfspaces(d, std::move(faces), mid);
  b.kind = "polytope";
  for (int corner = 0; corner < (1 << d); ++corner) {
    std::vector<double> v(d);
    for (int k = 0; k < d; ++k) v[k] = (corner >> k) & 1 ? hi[k] : lo[k];
    b.vertices.push_back(v);
  }
  return b;
}

// Planar polytope from its vertex list (hull edges become halfspaces).
inline ConvexBody body_from_polygon(std::vector<std::vector<double>> verts) {
  if (verts.size() < 3) throw std::invalid_argument("body_from_polygon: need >= 3 vertices");
  // gift-wrap the hull
  std::sort(verts.begin(), verts.end());
  verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
  auto cross = [](const std::vector<double>& o, const std::vector<double>& a,
                  const std::vector<double>& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<std::vector<double>> hull(2 * verts.size());
  std::size_t k = 0;
  for (const auto& p : verts) { // lower chain
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = verts.size() - 1, lower = k + 1; i-- > 0;) { // upper chain
    while (k >= lower && cross(hull[k - 2], hull[k - 1], verts[i]) <= 0.0) --k;
    hull[k++] = verts[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) throw std::invalid_argument("body_from_polygon: degenerate hull");
  std::vector<Halfspace> faces;
  std::vector<double> centroid(2, 0.0);
  for (const auto& v : hull) {
    centroid[0] += v[0];
    centroid[1] += v[1];
  }
  centroid[0] /= static_cast<double>(hull.size());
  centroid[1] /= static_cast<double>(hull.size());
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    // outward normal of edge a->b for a CCW hull
    std::vector<double> n = {b[1] - a[1], a[0] - b[0]};
    double off = n[0] * a[0] + n[1] * a[1];
    if (n[0] * centroid[0] + n[1] * centroid[1] > off) {
      n[0] = -n[0];
      n[1] = -n[1];
      off = -off;
    }
    faces.push_back({n, off});
  }
  ConvexBody b = body_from_halfspaces(2, std::move(faces), centroid);
  b.kind = "polytope";
  b.vertices = hull;
  return b;
}

// ---------------------------------------------------------------------------
// Set evolution z = (1-t) y + t o and its inverse.
inline std::vector<Point> evolve_set(const std::vector<Point>& points, const Point& o, double t) {
  if (!(t >= 0.0 && t < 1.0))
    throw std::invalid_argument("evolve_set: t must lie in [0,1) (use a Dirac for t=1)");
  std::vector<Point> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (p.coords.size() != o.coords.size())
      throw std::invalid_argument("evolve_set: dimension mismatch");
    Point q = p;
    for (std::size_t k = 0; k < q.coords.size(); ++k)
      q.coords[k] = (1.0 - t) * p.coords[k] + t * o.coords[k];
    out.push_back(std::move(q));
  }
  return out;
}

inline std::vector<Point> contraction_preimage(const std::vector<Point>& set_points, const Point& o,
                                               double t) {
  if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("contraction_preimage: t must lie in (0,1)");
  std::vector<Point> out;
  out.reserve(set_points.size());
  for (const auto& p : set_points) {
    Point q = p;
    for (std::size_t k = 0; k < q.coords.size(); ++k)
      q.coords[k] = (p.coords[k] - t * o.coords[k]) / (1.0 - t);
    out.push_back(std::move(q));
  }
  return out;
}

// ---------------------------------------------------------------------------
struct AffineSpan {
  int k = 0;
  Mat basis;                  // dim x k, orthonormal columns
  std::vector<double> offset; // weighted barycenter
  std::vector<double> singular_values;
};

inline AffineSpan affine_span_dim(const DiscreteMeasure& cloud, double tol = 1e-8) {
  if (cloud.size() == 0) throw std::invalid_argument("affine_span_dim: empty cloud");
  int d = cloud.dim;
  AffineSpan out;
  out.offset.assign(d, 0.0);
  double mass = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto p = cloud.at(i);
    double w = cloud.weights[i];
    mass += w;
    for (int k = 0; k < d; ++k) out.offset[k] += w * p[k];
  }
  if (mass <= 0.0) throw std::invalid_argument("affine_span_dim: zero-mass cloud");
  for (int k = 0; k < d; ++k) out.offset[k] /= mass;

  Mat cov(d, d);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto p = cloud.at(i);
    double w = cloud.weights[i] / mass;
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) cov(a, b) += w * (p[a] - out.offset[a]) * (p[b] - out.offset[b]);
  }
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < a; ++b) cov(a, b) = cov(b, a);

  std::vector<double> evals;
  Mat V;
  jacobi_eigen_sym(cov, evals, V);
  out.singular_values.resize(d);
  for (int i = 0; i < d; ++i) out.singular_values[i] = std::sqrt(std::max(0.0, evals[i]));
  double smax = out.singular_values.empty() ? 0.0 : out.singular_values[0];
  int k = 0;
  for (int i = 0; i < d; ++i)
    if (out.singular_values[i] > tol * smax && smax > 0.0) ++k;
  out.k = k;
  out.basis = Mat(d, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < d; ++i) out.basis(i, j) = V(i, j);
  return out;
}

// Project onto the detected affine subspace (coordinates in the basis).
inline DiscreteMeasure project_to_span(const DiscreteMeasure& cloud, const AffineSpan& span,
                                       const std::string& tag) {
  DiscreteMeasure out = make_measure(tag, span.k);
  out.weights = cloud.weights;
  out.total_mass = cloud.total_mass;
  out.coords.reserve(cloud.size() * static_cast<std::size_t>(span.k));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto p = cloud.at(i);
    for (int j = 0; j < span.k; ++j) {
      double s = 0.0;
      for (int kk = 0; kk < cloud.dim; ++kk) s += span.basis(kk, j) * (p[kk] - span.offset[kk]);
      out.coords.push_back(s);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Max distance of sampled particle-pair midpoints to the cloud; a value at
// the sampling resolution certifies empirical weak geodesic convexity.
inline double support_convexity_defect(const DiscreteMeasure& cloud, const Space& sp,
                                       int pair_samples, double eps, std::uint64_t seed = 1) {
  if (cloud.size() < 2) return 0.0;
  NeighborIndex index(cloud, sp, std::max(eps, 1e-9));
  Rng rng(seed, 0xc0);
  double defect = 0.0;
  for (int s = 0; s < pair_samples; ++s) {
    std::size_t i = rng.below(cloud.size());
    std::size_t j = rng.below(cloud.size());
    if (i == j) continue;
    std::vector<double> mid = sp.geodesic(cloud.at(i), cloud.at(j), 0.5);
    defect = std::max(defect, index.nearest_distance(mid));
  }
  return defect;
}

// ---------------------------------------------------------------------------
struct NondegeneracyWitness {
  Point center;     // center of the test set A
  double radius = 0.0;
  Point o;
  double t = 0.0;
};

struct NondegeneracyReport {
  bool pass = true;
  int trials = 0;
  std::optional<NondegeneracyWitness> witness;
};

// Evolve small positive-mass test sets toward random poles and require the
// evolved set to keep positive mass in the eps-neighborhood estimator.
inline NondegeneracyReport nondegeneracy_test(const DiscreteMeasure& cloud, const Space& sp,
                                              int trials, const std::vector<double>& t_grid,
                                              double eps, std::uint64_t seed = 1) {
  if (cloud.size() == 0) throw std::invalid_argument("nondegeneracy_test: empty cloud");
  NondegeneracyReport rep;
  rep.trials = trials;
  const bool atoms = cloud.descriptor && cloud.descriptor->kind == "atom-list";
  double radius = atoms ? 0.0 : 2.0 * eps;
  NeighborIndex index(cloud, sp, eps);
  Rng rng(seed, 0xde);
  for (int trial = 0; trial < trials; ++trial) {
    std::size_t ci = rng.below(cloud.size());
    std::size_t oi = rng.below(cloud.size());
    Point center = cloud.point(ci);
    Point o = cloud.point(oi);
    // members of A: particles within `radius` of the center (the center itself
    // for atom-list measures)
    std::vector<std::vector<double>> members;
    if (atoms) {
      members.push_back(center.coords);
    } else {
      for (std::size_t i = 0; i < cloud.size(); ++i)
        if (sp.distance(cloud.at(i), center.coords) <= radius)
          members.emplace_back(cloud.at(i).begin(), cloud.at(i).end());
    }
    for (double t : t_grid) {
      if (!(t >= 0.0 && t < 1.0)) continue;
      std::vector<std::vector<double>> evolved;
      evolved.reserve(members.size());
      for (const auto& y : members) {
        std::vector<double> zc(y.size());
        for (std::size_t k = 0; k < y.size(); ++k) zc[k] = (1.0 - t) * y[k] + t * o.coords[k];
        evolved.push_back(std::move(zc));
      }
      std::vector<std::span<const double>> probes;
      probes.reserve(evolved.size());
      for (const auto& e : evolved) probes.emplace_back(e);
      if (index.mass_near(probes, eps) <= 0.0) {
        rep.pass = false;
        rep.witness = NondegeneracyWitness{center, radius, o, t};
        return rep;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// det(Id + a b^T) = 1 + <b, a>
inline double det_rank_one_update(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("det_rank_one_update: length mismatch");
  return 1.0 + dot(b, a);
}

struct JacobianFz {
  Mat matrix;
  double det_factor = 0.0;
};

// Differential of f_z(w) = delta (z - w) / (delta - |w|) and the rank-one
// determinant factor 1 - <z-w, w> / ((delta - |w|)|w|), nonzero on the ball.
inline JacobianFz jacobian_fz(const Point& z, const Point& w, double delta) {
  int d = static_cast<int>(w.coords.size());
  double wn = norm2(w.coords);
  double zn = norm2(z.coords);
  if (wn == 0.0) throw std::invalid_argument("jacobian_fz: w = 0 excluded");
  if (!(wn < delta && zn < delta))
    throw std::invalid_argument("jacobian_fz: z and w must lie in the open ball B_delta(0)");
  JacobianFz out;
  out.matrix = Mat(d, d);
  double g = delta - wn;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double v = delta * (z.coords[i] - w.coords[i]) * (w.coords[j] / wn) / (g * g);
      if (i == j) v -= delta / g;
      out.matrix(i, j) = v;
    }
  double ip = 0.0;
  for (int i = 0; i < d; ++i) ip += (z.coords[i] - w.coords[i]) * w.coords[i];
  out.det_factor = 1.0 - ip / (g * wn);
  return out;
}

// ---------------------------------------------------------------------------
struct Theorem1Config {
  double span_tol = 1e-8;
  int convexity_pairs = 2000;
  int nondegeneracy_trials = 64;
  std::vector<double> t_grid = {0.1, 0.25, 0.5, 0.75, 0.9};
  double eps = 0.02;
  double ratio_threshold = 50.0;
  int score_levels = 3;
  std::uint64_t seed = 1;
};

struct Theorem1Report {
  int k = 0;
  std::vector<double> singular_values;
  double convexity_defect = 0.0;
  bool nondegenerate = true;
  std::optional<NondegeneracyWitness> witness;
  std::vector<std::pair<double, double>> singularity_scores; // (cell size, score)
  int trials = 0;
};

// Concentration scan used by the pipeline: mass in cells whose share of m
// exceeds ratio_k times the Lebesgue share of the occupied region.
inline double hull_concentration_score(const DiscreteMeasure& m, double cell, double coarse_cell,
                                       double ratio_k) {
  if (m.size() == 0) return 0.0;
  int d = m.dim;
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto p = m.at(i);
    for (int k = 0; k < d; ++k) lo[k] = std::min(lo[k], p[k]);
  }
  auto key_at = [&](std::span<const double> x, double h) {
    std::uint64_t h64 = 0xcbf29ce484222325ull;
    for (int k = 0; k < d; ++k) {
      auto c = static_cast<std::int64_t>(std::floor((x[k] - lo[k]) / h));
      h64 ^= static_cast<std::uint64_t>(c) + 0x9e3779b97f4a7c15ull;
      h64 *= 0x100000001b3ull;
    }
    return h64;
  };
  std::unordered_set<std::uint64_t> occupied;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.weights[i] > 0.0) occupied.insert(key_at(m.at(i), coarse_cell));
  double vol = static_cast<double>(occupied.size());
  for (int k = 0; k < d; ++k) vol *= coarse_cell;
  double cell_vol = 1.0;
  for (int k = 0; k < d; ++k) cell_vol *= cell;
  double share = cell_vol / std::max(vol, 1e-300);

  std::unordered_map<std::uint64_t, double> cells;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.weights[i] > 0.0) cells[key_at(m.at(i), cell)] += m.weights[i];
  double tot = std::max(m.total_mass, 1e-300);
  double score = 0.0;
  for (const auto& [key, mass] : cells)
    if (mass / tot > ratio_k * share) score += mass;
  return score;
}

// ---------------------------------------------------------------------------
// R^d with the Euclidean metric, optionally restricted to a convex body (the
// support Omega as its own geodesic space).
class EuclideanSpace final : public Space {
public:
  explicit EuclideanSpace(int d, std::optional<ConvexBody> body = std::nullopt)
      : d_(d), body_(std::move(body)), tag_("r" + std::to_string(d)) {}

  std::string tag() const override { return tag_; }
  int dim() const override { return d_; }

  double distance(std::span<const double> a, std::span<const double> b) const override {
    return dist2(a, b);
  }

  std::vector<double> geodesic(std::span<const double> a, std::span<const double> b, double t,
                               bool* unique) const override {
    if (unique) *unique = true;
    std::vector<double> out(d_);
    for (int k = 0; k < d_; ++k) out[k] = (1.0 - t) * a[k] + t * b[k];
    return out;
  }

  void ball_window(std::span<const double> c, double eps, double* lo, double* hi) const override {
    for (int k = 0; k < d_; ++k) {
      lo[k] = c[k] - eps;
      hi[k] = c[k] + eps;
    }
  }

  bool extends_past(std::span<const double> a, std::span<const double> b) const override {
    double d = dist2(a, b);
    if (d == 0.0) return false;
    if (!body_) return true;
    std::vector<double> dir(d_);
    for (int k = 0; k < d_; ++k) dir[k] = (b[k] - a[k]) / d;
    return body_->extent(b, dir) > 1e-12;
  }

  std::optional<std::vector<double>> contraction_preimage(std::span<const double> a,
                                                          std::span<const double> o,
                                                          double t) const override {
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("contraction_preimage: t in (0,1)");
    std::vector<double> x(d_);
    for (int k = 0; k < d_; ++k) x[k] = (a[k] - t * o[k]) / (1.0 - t);
    if (body_ && !body_->contains(x, 1e-12)) return std::nullopt;
    return x;
  }

  const std::optional<ConvexBody>& body() const { return body_; }

private:
  int d_;
  std::optional<ConvexBody> body_;
  std::string tag_;
};

// Full Theorem-1 style pipeline: affine dimension, support convexity,
// non-degeneracy, then grid absolute-continuity scores on the detected span.
inline Theorem1Report theorem1_pipeline(const DiscreteMeasure& cloud, const Theorem1Config& cfg = {}) {
  Theorem1Report rep;
  rep.trials = cfg.nondegeneracy_trials;
  AffineSpan span = affine_span_dim(cloud, cfg.span_tol);
  rep.k = span.k;
  rep.singular_values = span.singular_values;
  if (span.k == 0) return rep; // a single atom: convex, trivially non-degenerate

  DiscreteMeasure flat = project_to_span(cloud, span, "r" + std::to_string(span.k));
  flat.descriptor = cloud.descriptor;
  EuclideanSpace sub(span.k);

  rep.convexity_defect = support_convexity_defect(flat, sub, cfg.convexity_pairs, cfg.eps, cfg.seed);
  NondegeneracyReport nd =
      nondegeneracy_test(flat, sub, cfg.nondegeneracy_trials, cfg.t_grid, cfg.eps, cfg.seed);
  rep.nondegenerate = nd.pass;
  rep.witness = nd.witness;

  // grid absolute-continuity scan on the span coordinates
  std::vector<double> lo(span.k, std::numeric_limits<double>::infinity());
  std::vector<double> hi(span.k, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    auto p = flat.at(i);
    for (int k = 0; k < span.k; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  }
  double diam = 0.0;
  for (int k = 0; k < span.k; ++k) diam = std::max(diam, hi[k] - lo[k]);
  double coarse = diam / 8.0;
  double cell = coarse;
  for (int lvl = 0; lvl < cfg.score_levels; ++lvl) {
    rep.singularity_scores.emplace_back(
        cell, hull_concentration_score(flat, cell, coarse, cfg.ratio_threshold));
    cell *= 0.5;
  }
  return rep;
}

} // namespace invplan
