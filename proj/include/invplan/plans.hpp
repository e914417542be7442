#pragma once

// Construction and verification of inversion plans: couplings with first
// marginal mu, support inside H(z) (pairs collinear through the center), and
// second marginal absolutely continuous with respect to mu. Builders cover
// convex Euclidean bodies (radial extension ratio), the sphere (adaptive
// overshoot through z) and the Heisenberg group (geodesic inversion), plus
// density rescaling, annulus-wise local-to-global extension, and the
// eps-isometry stability harness.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "invplan/core.hpp"
#include "invplan/euclid.hpp"
#include "invplan/modelspaces.hpp"
#include "invplan/spaces.hpp"

namespace invplan {

struct PlanDiagnostics {
  double marginal_defect = 0.0;
  double hz_defect = 0.0;
  double uniformity_constant = 0.0; // infinity when the <<-check fails a cell
  std::vector<std::pair<double, double>> ac_scores; // (cell size, normalized score)
  double excluded_mass = 0.0;
  bool marginal_ok = false, hz_ok = false, ac_ok = false;
  bool pass() const { return marginal_ok && hz_ok && ac_ok; }
};

struct InversionPlan {
  Point center;
  Coupling coupling;
  std::vector<std::uint32_t> excluded; // source indices dropped by the builder
  PlanDiagnostics diagnostics;
};

struct VerifyOptions {
  double hz_tol = 1e-7;
  double ac_tol = 0.02;
  // grid scale for the absolute-continuity scores; detecting atoms against a
  // cloud reference needs cells below the reference particle spacing
  double cell_size = 0.1;
};

// ---------------------------------------------------------------------------
// The three defining conditions of an inversion plan, evaluated exactly where
// possible: exact marginal comparison, exact distances for the H(z) defect,
// and grid absolute-continuity scores at two resolutions.
inline PlanDiagnostics verify_plan(const InversionPlan& plan, const DiscreteMeasure& mu,
                                   const Space& sp, const VerifyOptions& opts = {}) {
  PlanDiagnostics d;
  d.excluded_mass = 0.0;
  const Coupling& c = plan.coupling;
  if (c.source.size() != mu.size())
    throw std::invalid_argument("verify_plan: plan source and mu disagree in size");

  std::vector<bool> excluded(mu.size(), false);
  for (auto i : plan.excluded) {
    excluded[i] = true;
    d.excluded_mass += mu.weights[i];
  }

  std::vector<double> first(mu.size(), 0.0);
  for (const auto& p : c.pairs) first[p.src] += p.w;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (excluded[i]) continue;
    d.marginal_defect = std::max(d.marginal_defect, std::fabs(first[i] - mu.weights[i]));
  }

  for (const auto& p : c.pairs) {
    if (p.w <= 0.0) continue;
    auto x = c.source.at(p.src);
    auto y = c.target_at(p.tgt);
    double res = std::fabs(sp.distance(x, y) - sp.distance(x, plan.center.coords) -
                           sp.distance(plan.center.coords, y));
    d.hz_defect = std::max(d.hz_defect, res);
  }

  DiscreteMeasure second = marginal(c, MarginalSide::Second);
  double mass = std::max(second.total_mass, 1e-300);
  for (double cell : {opts.cell_size, 0.5 * opts.cell_size})
    d.ac_scores.emplace_back(cell, singularity_score(second, mu, cell) / mass);

  d.marginal_ok = d.marginal_defect <= 1e-10 * std::max(1.0, mu.total_mass);
  d.hz_ok = d.hz_defect <= opts.hz_tol;
  double s0 = d.ac_scores[0].second, s1 = d.ac_scores[1].second;
  d.ac_ok = s1 <= opts.ac_tol && s1 <= s0 + opts.ac_tol;
  return d;
}

// max over occupied cells of (second-marginal mass)/(mu mass); infinity when
// a cell carries plan mass the reference never charges
inline double uniformity_constant(const InversionPlan& plan, const DiscreteMeasure& mu,
                                  double cell_size) {
  DiscreteMeasure second = marginal(plan.coupling, MarginalSide::Second);
  detail::CellGrid grid = detail::make_cell_grid(second, mu, cell_size, 134217728.0);
  std::unordered_map<std::uint64_t, double> cells2, cellsref;
  for (std::size_t i = 0; i < second.size(); ++i)
    if (second.weights[i] > 0.0) cells2[grid.key_of(second.at(i))] += second.weights[i];
  const bool analytic_haar = mu.descriptor && mu.descriptor->kind == "haar-box";
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (mu.weights[i] > 0.0) cellsref[grid.key_of(mu.at(i))] += mu.weights[i];
  double cmax = 0.0;
  double cell_vol = 1.0;
  for (int k = 0; k < grid.dim; ++k) cell_vol *= cell_size;
  // cells carrying no more than a few particles' worth of plan mass are
  // sampling slivers, not evidence of singular mass
  double wmax = 0.0;
  for (double w : second.weights) wmax = std::max(wmax, w);
  double sliver = std::max(3.0 * wmax, 0.002 * second.total_mass);
  for (std::size_t i = 0; i < second.size(); ++i) {
    if (second.weights[i] <= 0.0) continue;
    std::uint64_t key = grid.key_of(second.at(i));
    double m2 = cells2[key];
    double ref;
    if (analytic_haar) {
      ref = mu.descriptor->density * cell_vol;
    } else {
      auto it = cellsref.find(key);
      ref = it == cellsref.end() ? 0.0 : it->second;
    }
    if (ref <= 0.0) {
      if (m2 <= sliver) continue;
      return std::numeric_limits<double>::infinity();
    }
    cmax = std::max(cmax, m2 / ref);
  }
  return cmax;
}

// ---------------------------------------------------------------------------
// Convex body: x at z - s u maps to z + s (l+(u)/l-(u)) u, where l+- are the
// boundary extents from z along +-u. Collinearity through z is exact by
// construction and the uniformity constant is finite for interior z.
inline InversionPlan build_plan_convex_body(const ConvexBody& body, const Point& z,
                                            const DiscreteMeasure& mu) {
  if (!(body.interior_margin(z.coords) > 0.0))
    throw std::invalid_argument("build_plan_convex_body: z must be strictly interior");
  InversionPlan plan;
  plan.center = z;
  plan.coupling.source = mu;
  plan.coupling.target_space = mu.space;
  plan.coupling.target_dim = mu.dim;
  int d = mu.dim;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto x = mu.at(i);
    if (!body.contains(x, 1e-9))
      throw std::invalid_argument("build_plan_convex_body: particle outside the body");
    double s = dist2(x, z.coords);
    std::vector<double> y(z.coords.begin(), z.coords.end());
    if (s > 0.0) {
      std::vector<double> w(d), wneg(d);
      for (int k = 0; k < d; ++k) {
        w[k] = (x[k] - z.coords[k]) / s;
        wneg[k] = -w[k];
      }
      double l_same = body.extent(z.coords, w);
      double l_op = body.extent(z.coords, wneg);
      double reach = s * (l_op / l_same);
      for (int k = 0; k < d; ++k) y[k] = z.coords[k] - reach * w[k];
    }
    plan.coupling.target_coords.insert(plan.coupling.target_coords.end(), y.begin(), y.end());
    plan.coupling.pairs.push_back(
        {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), mu.weights[i]});
  }
  return plan;
}

// ---------------------------------------------------------------------------
inline InversionPlan build_plan_sphere(const Point& z, const DiscreteMeasure& mu,
                                       double cut_tube = 1e-3) {
  InversionPlan plan;
  plan.center = z;
  plan.coupling.source = mu;
  plan.coupling.target_space = mu.space;
  plan.coupling.target_dim = 3;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto x = mu.at(i);
    double dxz = sphere_distance(x, z.coords);
    if (dxz < 1e-12 || dxz > kSpherePi - cut_tube) {
      plan.excluded.push_back(static_cast<std::uint32_t>(i));
      plan.coupling.target_coords.insert(plan.coupling.target_coords.end(), x.begin(), x.end());
      continue;
    }
    std::vector<double> y = sphere_inversion_map(z.coords, x);
    plan.coupling.target_coords.insert(plan.coupling.target_coords.end(), y.begin(), y.end());
    plan.coupling.pairs.push_back(
        {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), mu.weights[i]});
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Heisenberg: pair x with z . Lambda((-z) x); the excluded null set (center
// tube and t = 0 slab after translation) is dropped with its mass recorded.
inline InversionPlan build_plan_heisenberg(const Point& z, const DiscreteMeasure& mu,
                                           double tube = 1e-3, double max_excluded_fraction = 0.01) {
  InversionPlan plan;
  plan.center = z;
  plan.coupling.source = mu;
  plan.coupling.target_space = mu.space;
  plan.coupling.target_dim = mu.dim;
  heis::HeisPoint hz = to_heis(z.coords);
  heis::HeisPoint hz_inv = heis::group_inv(hz);
  double excluded_mass = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    heis::HeisPoint w = heis::group_mul(hz_inv, to_heis(mu.at(i)));
    if (w.zeta_norm() < tube || std::fabs(w.t) < tube) {
      plan.excluded.push_back(static_cast<std::uint32_t>(i));
      excluded_mass += mu.weights[i];
      auto x = mu.at(i);
      plan.coupling.target_coords.insert(plan.coupling.target_coords.end(), x.begin(), x.end());
      continue;
    }
    std::vector<double> y = from_heis(heis::group_mul(hz, heis::lambda_map(w)));
    plan.coupling.target_coords.insert(plan.coupling.target_coords.end(), y.begin(), y.end());
    plan.coupling.pairs.push_back(
        {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), mu.weights[i]});
  }
  if (excluded_mass > max_excluded_fraction * mu.total_mass)
    throw std::invalid_argument(
        "build_plan_heisenberg: excluded mass fraction " +
        std::to_string(excluded_mass / std::max(mu.total_mass, 1e-300)) + " exceeds " +
        std::to_string(max_excluded_fraction) + " (cloud concentrated on the singular set)");
  plan.diagnostics.excluded_mass = excluded_mass;
  return plan;
}

// ---------------------------------------------------------------------------
// pi-hat = (f o P1) pi: pair weights rescale by f at the source particle; the
// first marginal becomes f mu while the H(z) support is untouched.
struct RescaleResult {
  InversionPlan plan;
  double zero_set_mass = 0.0; // mu-mass where f vanishes
};

inline RescaleResult rescale_plan(const InversionPlan& plan,
                                  const std::function<double(const Point&)>& f) {
  RescaleResult out;
  out.plan = plan;
  std::vector<double> fx(plan.coupling.source.size());
  for (std::size_t i = 0; i < plan.coupling.source.size(); ++i) {
    double v = f(plan.coupling.source.point(i));
    if (v < 0.0)
      throw std::invalid_argument("rescale_plan: density negative at particle " + std::to_string(i));
    fx[i] = v;
    if (v == 0.0) out.zero_set_mass += plan.coupling.source.weights[i];
  }
  for (auto& p : out.plan.coupling.pairs) p.w *= fx[p.src];
  for (std::size_t i = 0; i < out.plan.coupling.source.size(); ++i)
    out.plan.coupling.source.weights[i] *= fx[i];
  out.plan.coupling.source.recompute_mass();
  return out;
}

// ---------------------------------------------------------------------------
// Restriction of mu to the metric ball B_r(z); index_map[i] gives the mu
// index of restricted particle i.
inline DiscreteMeasure restrict_to_ball(const DiscreteMeasure& mu, const Space& sp, const Point& z,
                                        double r, std::vector<std::uint32_t>* index_map = nullptr) {
  DiscreteMeasure out = make_measure(mu.space, mu.dim);
  if (index_map) index_map->clear();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (sp.distance(mu.at(i), z.coords) < r) {
      out.push_back(mu.at(i), mu.weights[i]);
      if (index_map) index_map->push_back(static_cast<std::uint32_t>(i));
    }
  }
  return out;
}

// Annulus-wise extension of a local plan on B_r(z) to the whole body: on the
// n-th annulus the ray point at radius (1-e) n r + e (n+1) r maps to the
// opposite-ray point at (1-e) tau/2 + e tau, tau the opposite boundary extent.
inline InversionPlan extend_local_plan(const ConvexBody& body, const Point& z,
                                       const InversionPlan& local_plan, double r,
                                       const DiscreteMeasure& mu, int annuli = 0) {
  if (!(r > 0.0)) throw std::invalid_argument("extend_local_plan: r must be > 0");
  double R = body.circumradius_from(z.coords);
  if (r >= R) return local_plan;
  int d = mu.dim;
  EuclideanSpace amb(d);
  std::vector<std::uint32_t> index_map;
  DiscreteMeasure local_mu = restrict_to_ball(mu, amb, z, r, &index_map);
  if (local_plan.coupling.source.size() != local_mu.size())
    throw std::invalid_argument("extend_local_plan: local plan does not match mu on B_r(z)");

  InversionPlan out;
  out.center = z;
  out.coupling.source = mu;
  out.coupling.target_space = mu.space;
  out.coupling.target_dim = d;
  // carry the local plan over, remapping source indices into mu
  out.coupling.target_coords = local_plan.coupling.target_coords;
  for (const auto& p : local_plan.coupling.pairs)
    out.coupling.pairs.push_back({index_map[p.src], p.tgt, p.w});
  for (auto e : local_plan.excluded) out.excluded.push_back(index_map[e]);

  int needed = static_cast<int>(std::ceil(R / r)) - 1;
  int count = annuli > 0 ? std::max(annuli, needed) : needed;
  std::vector<bool> in_local(mu.size(), false);
  for (auto i : index_map) in_local[i] = true;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (in_local[i]) continue;
    auto x = mu.at(i);
    double s = dist2(x, z.coords);
    int n = static_cast<int>(std::floor(s / r));
    if (n < 1 || n > count) continue; // beyond the requested annuli
    double e = s / r - n;
    std::vector<double> w(d), wneg(d);
    for (int k = 0; k < d; ++k) {
      w[k] = (x[k] - z.coords[k]) / s;
      wneg[k] = -w[k];
    }
    double tau = body.extent(z.coords, wneg);
    double reach = (1.0 - e) * 0.5 * tau + e * tau;
    std::vector<double> y(d);
    for (int k = 0; k < d; ++k) y[k] = z.coords[k] - reach * w[k];
    auto tgt = static_cast<std::uint32_t>(out.coupling.target_count());
    out.coupling.target_coords.insert(out.coupling.target_coords.end(), y.begin(), y.end());
    out.coupling.pairs.push_back({static_cast<std::uint32_t>(i), tgt, mu.weights[i]});
  }
  return out;
}

// ---------------------------------------------------------------------------
struct EpsIsometry {
  std::function<Point(const Point&)> map;
  double eps = 0.0;
  double radius = 0.0; // the R-ball on which distortion is certified
  Point base_src, base_tgt;
};

struct EpsIsometryReport {
  double max_distortion = 0.0;    // sup | d(x,y) - d(f x, f y) | on the R-ball
  double surjectivity_defect = 0.0; // sup over targets in B_{R-eps} of dist to f(samples)
  double base_defect = 0.0;
  double measure_defect = 0.0;    // grid total-variation proxy for narrow convergence
};

inline EpsIsometryReport check_eps_isometry(const EpsIsometry& f, const DiscreteMeasure& src,
                                            const DiscreteMeasure& tgt, const Space& src_sp,
                                            const Space& tgt_sp, std::uint64_t seed = 1,
                                            int pair_samples = 20000) {
  EpsIsometryReport rep;
  Rng rng(seed, 0xe9);
  std::vector<Point> mapped(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) mapped[i] = f.map(src.point(i));

  for (int s = 0; s < pair_samples; ++s) {
    std::size_t i = rng.below(src.size()), j = rng.below(src.size());
    if (src_sp.distance(src.at(i), f.base_src.coords) > f.radius ||
        src_sp.distance(src.at(j), f.base_src.coords) > f.radius)
      continue;
    double a = src_sp.distance(src.at(i), src.at(j));
    double b = tgt_sp.distance(mapped[i].coords, mapped[j].coords);
    rep.max_distortion = std::max(rep.max_distortion, std::fabs(a - b));
  }

  // eps-surjectivity onto B_{R-eps}(base_tgt)
  double probe_eps = std::max(f.eps, 1e-12);
  for (std::size_t j = 0; j < tgt.size(); ++j) {
    if (tgt_sp.distance(tgt.at(j), f.base_tgt.coords) > f.radius - probe_eps) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < src.size(); ++i)
      best = std::min(best, tgt_sp.distance(tgt.at(j), mapped[i].coords));
    rep.surjectivity_defect = std::max(rep.surjectivity_defect, best);
    if (rep.surjectivity_defect > 100.0 * probe_eps) break; // hopeless, stop scanning
  }

  rep.base_defect = tgt_sp.distance(f.map(f.base_src).coords, f.base_tgt.coords);

  // pushforward vs target measure: total variation on a grid at scale 4 eps
  DiscreteMeasure pushed = make_measure(tgt.space, tgt.dim);
  for (std::size_t i = 0; i < src.size(); ++i) pushed.push_back(mapped[i].coords, src.weights[i]);
  double diag = 0.0;
  for (int k = 0; k < tgt.dim; ++k) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t j = 0; j < tgt.size(); ++j) {
      lo = std::min(lo, tgt.at(j)[k]);
      hi = std::max(hi, tgt.at(j)[k]);
    }
    diag = std::max(diag, hi - lo);
  }
  double h = std::max(4.0 * f.eps, diag / 64.0 + 1e-12);
  detail::CellGrid grid = detail::make_cell_grid(pushed, tgt, h, 134217728.0);
  std::unordered_map<std::uint64_t, double> pa, pb;
  for (std::size_t i = 0; i < pushed.size(); ++i) pa[grid.key_of(pushed.at(i))] += pushed.weights[i];
  for (std::size_t j = 0; j < tgt.size(); ++j) pb[grid.key_of(tgt.at(j))] += tgt.weights[j];
  double tv = 0.0;
  for (const auto& [k, v] : pa) {
    auto it = pb.find(k);
    tv += std::fabs(v - (it == pb.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : pb)
    if (!pa.count(k)) tv += v;
  rep.measure_defect = 0.5 * tv / std::max(1.0, tgt.total_mass);
  return rep;
}

// ---------------------------------------------------------------------------
struct PushedPlan {
  InversionPlan plan;
  double hz_defect = 0.0;   // exact defect of the pushed pairs wrt f(z)
  double hz_bound = 0.0;    // original defect + 4 eps (triangle estimate)
};

inline PushedPlan push_plan(const InversionPlan& plan, const EpsIsometry& f, const Space& tgt_sp,
                            double original_hz_defect) {
  PushedPlan out;
  out.plan.center = f.map(plan.center);
  out.plan.excluded = plan.excluded;
  Coupling& c = out.plan.coupling;
  c.source = pushforward(plan.coupling.source, [&](std::span<const double> x) {
    Point p{std::vector<double>(x.begin(), x.end()), plan.coupling.source.space};
    return f.map(p).coords;
  });
  c.source.space = out.plan.center.space.empty() ? c.source.space : out.plan.center.space;
  c.target_space = c.source.space;
  c.target_dim = c.source.dim;
  for (std::size_t j = 0; j < plan.coupling.target_count(); ++j) {
    auto t = plan.coupling.target_at(j);
    Point p{std::vector<double>(t.begin(), t.end()), plan.coupling.target_space};
    Point q = f.map(p);
    c.target_coords.insert(c.target_coords.end(), q.coords.begin(), q.coords.end());
  }
  c.pairs = plan.coupling.pairs;

  for (const auto& p : c.pairs) {
    if (p.w <= 0.0) continue;
    double res = std::fabs(tgt_sp.distance(c.source.at(p.src), c.target_at(p.tgt)) -
                           tgt_sp.distance(c.source.at(p.src), out.plan.center.coords) -
                           tgt_sp.distance(out.plan.center.coords, c.target_at(p.tgt)));
    out.hz_defect = std::max(out.hz_defect, res);
  }
  out.hz_bound = original_hz_defect + 4.0 * f.eps;
  return out;
}

// ---------------------------------------------------------------------------
// Plan file format
inline std::string plan_to_json(const InversionPlan& plan) {
  JsonWriter w;
  w.begin_object();
  w.key("schema").value(1);
  w.key("space").value(plan.center.space);
  w.key("center").value(plan.center.coords);
  w.key("coupling").raw(coupling_to_json(plan.coupling));
  w.key("excluded").begin_array();
  for (auto i : plan.excluded) w.value(static_cast<long long>(i));
  w.end_array();
  const auto& d = plan.diagnostics;
  w.key("diagnostics").begin_object();
  w.key("marginal_defect").value(d.marginal_defect);
  w.key("hz_defect").value(d.hz_defect);
  w.key("uniformity_constant").value(d.uniformity_constant);
  w.key("excluded_mass").value(d.excluded_mass);
  w.key("ac_scores").begin_array();
  for (const auto& [cell, score] : d.ac_scores) {
    w.begin_array();
    w.value(cell);
    w.value(score);
    w.end_array();
  }
  w.end_array();
  w.end_object();
  w.end_object();
  return w.str();
}

inline InversionPlan plan_from_json(const json& j) {
  InversionPlan plan;
  plan.center.space = j.at("space").get<std::string>();
  plan.center.coords = j.at("center").get<std::vector<double>>();
  plan.coupling = coupling_from_json(j.at("coupling"));
  if (j.contains("excluded"))
    for (const auto& e : j.at("excluded")) plan.excluded.push_back(e.get<std::uint32_t>());
  return plan;
}

} // namespace invplan
