#pragma once

// Monte-Carlo verifiers for measure-contraction conditions: qualitative and
// quantitative MCP with (1-t)^N profiles, the strong (preimage) variant,
// rays-through-a-point coverage, symmetric cut locus scans, and discrete
// disintegration along geodesic rays.
//
// Mass estimation runs on two routes. Measures carrying an analytic
// uniform/Haar descriptor use exact box volumes plus membership-sampled
// volumes of contracted images (the inverse contraction decides membership).
// Plain particle clouds fall back to the eps-neighborhood estimator; that
// route is resolution-limited for t near 1 and failures must survive a
// confirmation pass at doubled resolution before they are reported.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "invplan/core.hpp"
#include "invplan/euclid.hpp"
#include "invplan/rng.hpp"
#include "invplan/spaces.hpp"

namespace invplan {

// ---------------------------------------------------------------------------
struct MCPProfile {
  double K = 0.0;
  double N = 1.0;
  std::function<double(double)> f;

  static MCPProfile power(double N) {
    if (!(N > 1.0)) throw std::invalid_argument("MCPProfile: N must exceed 1");
    MCPProfile p;
    p.N = N;
    p.f = [N](double t) { return std::pow(1.0 - t, N); };
    return p;
  }

  // user-supplied f table, piecewise linear; must satisfy f(0)=1, f(1)=0,
  // f > 0 on [0,1)
  static MCPProfile table(std::vector<std::pair<double, double>> pts) {
    std::sort(pts.begin(), pts.end());
    if (pts.empty() || pts.front().first != 0.0 || pts.back().first != 1.0 ||
        pts.front().second != 1.0 || pts.back().second != 0.0)
      throw std::invalid_argument("MCPProfile: table must run from (0,1) to (1,0)");
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      if (!(pts[i].second > 0.0))
        throw std::invalid_argument("MCPProfile: f must stay positive on [0,1)");
    MCPProfile p;
    p.N = 0.0;
    p.f = [pts](double t) {
      auto it = std::lower_bound(pts.begin(), pts.end(), std::make_pair(t, -1e300));
      if (it == pts.begin()) return it->second;
      if (it == pts.end()) return pts.back().second;
      auto prev = std::prev(it);
      double u = (t - prev->first) / (it->first - prev->first);
      return (1.0 - u) * prev->second + u * it->second;
    };
    return p;
  }

  static MCPProfile make(double K, double N) {
    if (K != 0.0)
      throw std::invalid_argument("MCPProfile: only K = 0 profiles are supported");
    return power(N);
  }
};

struct MCPTrialReport {
  Point center;
  double rho = 0.0;
  Point o;
  double t = 0.0;
  double ratio = 0.0;
  double bound = 0.0;
  bool confirmed = false;
};

struct MCPReport {
  bool pass = true;
  int trials = 0;
  double worst_margin = std::numeric_limits<double>::infinity(); // min ratio/f(t)
  std::optional<MCPTrialReport> worst;
  std::vector<std::array<double, 3>> t_curve; // (t, worst ratio, bound)
};

struct MCPOptions {
  int trials = 10000;
  double eps = 0.05;
  double slack = 0.05;
  std::vector<double> t_grid = {0.25, 0.5, 0.75, 0.85, 0.9};
  std::uint64_t seed = 1;
  int volume_samples = 4096;     // membership samples per contracted-volume estimate
  double axis_fraction = 0.15;   // directed near-axis trials on Heisenberg spaces
  bool fail_fast = false;        // stop at the first confirmed counterexample
  std::size_t probe_cap = 512;   // cloud-route probe subsample
};

namespace detail_mcp {

struct Box {
  std::vector<double> lo, hi;
  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const {
    double v = 1.0;
    for (int k = 0; k < dim(); ++k) v *= std::max(0.0, hi[k] - lo[k]);
    return v;
  }
  bool contains(std::span<const double> x) const {
    for (int k = 0; k < dim(); ++k)
      if (x[k] < lo[k] || x[k] > hi[k]) return false;
    return true;
  }
  static Box intersect(const Box& a, const Box& b) {
    Box out = a;
    for (int k = 0; k < a.dim(); ++k) {
      out.lo[k] = std::max(a.lo[k], b.lo[k]);
      out.hi[k] = std::min(a.hi[k], b.hi[k]);
    }
    return out;
  }
};

inline Box descriptor_box(const Descriptor& d) { return Box{d.box_lo, d.box_hi}; }

inline Box cube_around(std::span<const double> c, double rho) {
  Box b;
  b.lo.assign(c.begin(), c.end());
  b.hi.assign(c.begin(), c.end());
  for (std::size_t k = 0; k < c.size(); ++k) {
    b.lo[k] -= rho;
    b.hi[k] += rho;
  }
  return b;
}

// test boxes follow the Carnot grading on Heisenberg spaces (vertical
// half-width rho^2, the shape of a CC-ball); cubes elsewhere
inline Box test_box(std::span<const double> c, double rho, bool carnot) {
  Box b = cube_around(c, rho);
  if (carnot) {
    std::size_t last = c.size() - 1;
    b.lo[last] = c[last] - rho * rho;
    b.hi[last] = c[last] + rho * rho;
  }
  return b;
}

// deterministic probe lattice over a box (3 points per axis plus corners)
inline std::vector<std::vector<double>> probe_lattice(const Box& b, int per_axis) {
  int d = b.dim();
  std::vector<std::vector<double>> out;
  std::vector<int> idx(d, 0);
  while (true) {
    std::vector<double> p(d);
    for (int k = 0; k < d; ++k)
      p[k] = b.lo[k] + (b.hi[k] - b.lo[k]) * (per_axis == 1 ? 0.5 : double(idx[k]) / (per_axis - 1));
    out.push_back(std::move(p));
    int k = 0;
    for (; k < d; ++k) {
      if (++idx[k] < per_axis) break;
      idx[k] = 0;
    }
    if (k == d) break;
  }
  return out;
}

// vol(scaled image of A) / vol(A) on H^1 through the endpoint chart at o.
// In chart coordinates (phi, v, r) the s-scaled geodesic evolution of A is
// the linear map (phi, v, r) -> (phi, s v, s r), so both the set and its
// image integrate over the same chart region with scaled volume elements:
//   vol = int_U s^2 |J_Phi|(s v, s r) 1{|s v| < 2pi},  vol(A) = int_U |J_Phi|.
// Sharing the membership indicator between numerator and denominator cancels
// the acceptance noise, leaving only the smooth pointwise-ratio variance;
// this stays accurate uniformly in t where coordinate windows around the
// curled image degenerate. s = 1-t gives the contraction, s = 1/(1-t) the
// strong-MCP preimage.
inline double heis_chart_scale_ratio(const Box& A, std::span<const double> o, double s,
                                     int samples, Rng& rng, int lattice_per_axis) {
  heis::HeisPoint ho = to_heis(o);
  heis::HeisPoint oinv = heis::group_inv(ho);
  double phi0 = 0.0;
  bool have_phi0 = false;
  Box pw;
  pw.lo.assign(3, std::numeric_limits<double>::infinity());
  pw.hi.assign(3, -std::numeric_limits<double>::infinity());
  for (const auto& p : probe_lattice(A, lattice_per_axis)) {
    heis::HeisPoint w = heis::group_mul(oinv, to_heis(p));
    if (w.is_origin()) continue;
    heis::GeodesicParam pp = heis::invert_endpoint(w);
    double phi = std::atan2(pp.b[0], pp.a[0]);
    if (!have_phi0) {
      phi0 = phi;
      have_phi0 = true;
    }
    double coords[3] = {std::remainder(phi - phi0, 2.0 * heis::kPi), pp.v, pp.r};
    for (int k = 0; k < 3; ++k) {
      pw.lo[k] = std::min(pw.lo[k], coords[k]);
      pw.hi[k] = std::max(pw.hi[k], coords[k]);
    }
  }
  if (!have_phi0) return 0.0;
  for (int k = 0; k < 3; ++k) {
    double pad = 0.35 * (pw.hi[k] - pw.lo[k]) + 1e-9;
    pw.lo[k] -= pad;
    pw.hi[k] += pad;
  }
  pw.lo[1] = std::max(pw.lo[1], -heis::kTwoPi + 1e-9);
  pw.hi[1] = std::min(pw.hi[1], heis::kTwoPi - 1e-9);
  pw.lo[2] = std::max(pw.lo[2], 1e-9);
  // The window can dwarf the chart region when the pole sits close to A;
  // grow the sample count until the acceptance count supports the ratio.
  double acc_s = 0.0, acc_0 = 0.0;
  long accepted = 0;
  int budget = samples;
  for (int round = 0; round < 4; ++round) {
    for (int it = 0; it < budget; ++it) {
      std::vector<double> th = rng.uniform_box(pw.lo, pw.hi);
      double phi = phi0 + th[0], v = th[1], r = th[2];
      heis::GeodesicParam gp;
      gp.a = {std::cos(phi)};
      gp.b = {std::sin(phi)};
      gp.v = v;
      gp.r = r;
      if (!A.contains(from_heis(heis::group_mul(ho, heis::endpoint_map(gp))))) continue;
      ++accepted;
      acc_0 += heis::chart_volume_element(v, r);
      if (std::fabs(s * v) < heis::kTwoPi)
        acc_s += s * s * heis::chart_volume_element(s * v, s * r);
    }
    if (accepted >= 64) break;
    budget *= 4;
  }
  if (acc_0 <= 0.0) return 0.0;
  return acc_s / acc_0;
}

// Volume of the image T_t(A) for the contraction toward o, estimated by
// membership sampling: q lies in the image iff its contraction preimage
// exists and falls back inside A. Heisenberg spaces route through the
// endpoint chart above.
inline double contracted_volume(const Space& sp, const Box& A, std::span<const double> o, double t,
                                int samples, Rng& rng, int lattice_per_axis) {
  auto probes = probe_lattice(A, lattice_per_axis);
  Box window;
  window.lo.assign(A.dim(), std::numeric_limits<double>::infinity());
  window.hi.assign(A.dim(), -std::numeric_limits<double>::infinity());
  auto absorb = [&](std::span<const double> q) {
    for (int k = 0; k < A.dim(); ++k) {
      window.lo[k] = std::min(window.lo[k], q[k]);
      window.hi[k] = std::max(window.hi[k], q[k]);
    }
  };

  if (const auto* hsp = dynamic_cast<const HeisenbergSpace*>(&sp); hsp && hsp->group_n() == 1)
    return A.volume() * heis_chart_scale_ratio(A, o, 1.0 - t, samples, rng, lattice_per_axis);

  for (const auto& p : probes) absorb(sp.contract_toward(p, o, t));
  for (int k = 0; k < A.dim(); ++k) {
    double pad = 0.4 * (window.hi[k] - window.lo[k]) + 1e-12;
    window.lo[k] -= pad;
    window.hi[k] += pad;
  }
  int hits = 0;
  for (int s = 0; s < samples; ++s) {
    std::vector<double> q = rng.uniform_box(window.lo, window.hi);
    auto back = sp.contraction_preimage(q, o, t);
    if (back && A.contains(*back)) ++hits;
  }
  return window.volume() * static_cast<double>(hits) / static_cast<double>(samples);
}

inline bool is_uniform_box_measure(const DiscreteMeasure& m) {
  return m.descriptor &&
         (m.descriptor->kind == "haar-box" ||
          (m.descriptor->kind == "uniform-body" && m.descriptor->is_box()));
}

} // namespace detail_mcp

// ---------------------------------------------------------------------------
// Contraction inequality m(A_{t,o}) >= f(t) m(A), scanned over random test
// sets, poles and grid times.
inline MCPReport mcp_verify(const DiscreteMeasure& measure, const Space& sp,
                            const MCPProfile& profile, const MCPOptions& opts = {}) {
  using namespace detail_mcp;
  if (measure.size() == 0) throw std::invalid_argument("mcp_verify: empty measure");
  MCPReport rep;
  rep.trials = opts.trials;
  Rng rng(opts.seed, 0x3c9);

  const bool analytic = is_uniform_box_measure(measure);
  const bool euclidean = dynamic_cast<const EuclideanSpace*>(&sp) != nullptr;
  const auto* heisp = dynamic_cast<const HeisenbergSpace*>(&sp);

  std::optional<NeighborIndex> index;
  if (!analytic) index.emplace(measure, sp, opts.eps);

  std::vector<double> t_worst(opts.t_grid.size(), std::numeric_limits<double>::infinity());
  // haar-box means the global Haar measure sampled through a box window, so
  // test-set masses never clip to the window; uniform-body is the genuinely
  // restricted (convex) measure and does clip.
  const bool clipped = analytic && measure.descriptor->kind == "uniform-body";
  Box support;
  if (analytic) support = descriptor_box(*measure.descriptor);

  auto record = [&](double ratio, double t, std::size_t tslot, const Point& center, double rho,
                    const Point& o, double bound, bool confirmed) {
    double margin = ratio / std::max(profile.f(t), 1e-300);
    t_worst[tslot] = std::min(t_worst[tslot], ratio);
    if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst = MCPTrialReport{center, rho, o, t, ratio, bound, confirmed};
    }
  };

  // candidates below the bound, confirmed worst-first after the scan
  struct Candidate {
    double margin;
    int trial;
    Point center, o;
    double rho, t, bound, ratio;
    std::size_t tslot;
  };
  std::vector<Candidate> candidates;

  for (int trial = 0; trial < opts.trials && !(opts.fail_fast && !rep.pass); ++trial) {
    std::size_t ci = rng.below(measure.size());
    Point center = measure.point(ci);
    Point o = measure.point(rng.below(measure.size()));

    // directed near-axis configurations exercise the worst Heisenberg rate
    if (heisp && analytic &&
        static_cast<double>(trial % 1000) < opts.axis_fraction * 1000.0) {
      heis::HeisPoint hc = to_heis(center.coords);
      double s = rng.uniform(0.5, 1.5);
      heis::HeisPoint off;
      off.xi = {rng.uniform(-0.02, 0.02)};
      off.eta = {rng.uniform(-0.02, 0.02)};
      for (int j = 1; j < heisp->group_n(); ++j) {
        off.xi.push_back(0.0);
        off.eta.push_back(0.0);
      }
      off.t = -s;
      o = Point{from_heis(heis::group_mul(hc, off)), measure.space};
    }

    std::size_t tslot = rng.below(opts.t_grid.size());
    double t = opts.t_grid[tslot];
    double bound = profile.f(t) * (1.0 - opts.slack);

    // the endpoint chart degenerates when the pole sits inside or next to
    // the test set; such configurations carry no falsification power anyway
    if (heisp && analytic && sp.distance(center.coords, o.coords) < 4.0 * opts.eps) continue;

    if (analytic) {
      double rho = opts.eps;
      Box A = test_box(center.coords, rho, heisp != nullptr);
      if (clipped) A = Box::intersect(A, support);
      if (A.volume() <= 0.0) continue;
      double ratio;
      if (euclidean) {
        // homothety: exact Lebesgue scaling, zero estimator slack
        ratio = std::pow(1.0 - t, sp.dim());
        bound = profile.f(t);
      } else {
        double mA = A.volume();
        double mAt = contracted_volume(sp, A, o.coords, t, opts.volume_samples, rng, 3);
        ratio = mAt / mA;
        if (ratio < bound) {
          // defer the doubled-resolution confirmation to the worst-first pass
          candidates.push_back({ratio / std::max(profile.f(t), 1e-300), trial, center, o, rho, t,
                                bound, ratio, tslot});
          continue;
        }
      }
      if (ratio < bound) rep.pass = false;
      record(ratio, t, tslot, center, rho, o, bound, false);
    } else {
      // cloud route: eps-neighborhood masses at matched scales
      double rho = 2.5 * opts.eps;
      std::vector<std::vector<double>> members;
      for (std::size_t i = 0; i < measure.size() && members.size() < opts.probe_cap; ++i)
        if (sp.distance(measure.at(i), center.coords) <= rho)
          members.emplace_back(measure.at(i).begin(), measure.at(i).end());
      if (members.empty()) continue;
      std::vector<std::span<const double>> probes;
      for (const auto& mb : members) probes.emplace_back(mb);
      double s0 = index->mass_near(probes, opts.eps);
      if (s0 <= 0.0) continue;
      std::vector<std::vector<double>> moved;
      moved.reserve(members.size());
      for (const auto& mb : members) moved.push_back(sp.contract_toward(mb, o.coords, t));
      std::vector<std::span<const double>> mprobes;
      for (const auto& mv : moved) mprobes.emplace_back(mv);
      double st = index->mass_near(mprobes, opts.eps * (1.0 - t));
      double ratio = st / s0;
      if (ratio < bound) rep.pass = false;
      record(ratio, t, tslot, center, rho, o, bound, ratio < bound);
    }
  }

  // Confirmation pass: failures must survive a doubled-resolution re-estimate
  // before they are reported. Worst margins first; the first survivor decides
  // and unconfirmed candidates contribute their refined (cleaner) estimates.
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.margin < b.margin; });
  bool confirmed_any = false;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const Candidate& cand = candidates[k];
    if (confirmed_any || k >= 32) { // verdict settled or noise tail
      t_worst[cand.tslot] = std::min(t_worst[cand.tslot], cand.ratio);
      continue;
    }
    Box A = test_box(cand.center.coords, cand.rho, heisp != nullptr);
    if (clipped) A = Box::intersect(A, support);
    Rng crng(opts.seed ^ 0x5eedf00dull, static_cast<std::uint64_t>(cand.trial));
    double again = contracted_volume(sp, A, cand.o.coords, cand.t, 4 * opts.volume_samples, crng, 5) /
                   A.volume();
    record(again, cand.t, cand.tslot, cand.center, cand.rho, cand.o, cand.bound, again < cand.bound);
    if (again < cand.bound) {
      rep.pass = false;
      confirmed_any = true;
      rep.worst_margin = again / std::max(profile.f(cand.t), 1e-300);
      rep.worst = MCPTrialReport{cand.center, cand.rho, cand.o, cand.t, again, cand.bound, true};
    }
  }

  for (std::size_t k = 0; k < opts.t_grid.size(); ++k)
    if (std::isfinite(t_worst[k]))
      rep.t_curve.push_back({opts.t_grid[k], t_worst[k],
                             profile.f(opts.t_grid[k]) * (1.0 - opts.slack)});
  return rep;
}

// ---------------------------------------------------------------------------
// Strong variant: m(A) >= f(t) m(e_0(e_t^{-1}(A) \cap Geo(o))).
inline MCPReport strong_mcp_verify(const DiscreteMeasure& measure, const Space& sp,
                                   const MCPProfile& profile, const MCPOptions& opts = {}) {
  using namespace detail_mcp;
  if (measure.size() == 0) throw std::invalid_argument("strong_mcp_verify: empty measure");
  {
    std::vector<double> probe(measure.at(0).begin(), measure.at(0).end());
    if (!sp.contraction_preimage(probe, probe, 0.5) && !dynamic_cast<const HeisenbergSpace*>(&sp) &&
        !dynamic_cast<const EuclideanSpace*>(&sp))
      throw std::invalid_argument("strong_mcp_verify: space provides no contraction preimage");
  }
  MCPReport rep;
  rep.trials = opts.trials;
  Rng rng(opts.seed, 0x57f);

  const bool analytic = is_uniform_box_measure(measure);
  const bool euclidean = dynamic_cast<const EuclideanSpace*>(&sp) != nullptr;
  const bool atoms = measure.descriptor && measure.descriptor->kind == "atom-list";
  const bool clipped = analytic && measure.descriptor->kind == "uniform-body";
  std::optional<NeighborIndex> index;
  if (!analytic) index.emplace(measure, sp, opts.eps);
  Box support;
  if (analytic) support = descriptor_box(*measure.descriptor);

  std::vector<double> t_worst(opts.t_grid.size(), std::numeric_limits<double>::infinity());

  for (int trial = 0; trial < opts.trials && !(opts.fail_fast && !rep.pass); ++trial) {
    Point center = measure.point(rng.below(measure.size()));
    Point o = measure.point(rng.below(measure.size()));
    std::size_t tslot = rng.below(opts.t_grid.size());
    double t = opts.t_grid[tslot];
    double bound_factor = profile.f(t) * (1.0 - opts.slack);

    double mA, mPre;
    double rho = analytic ? opts.eps : 2.5 * opts.eps;
    if (atoms) {
      // test sets centered at contracted atom positions expose degeneracy:
      // the set itself misses the atoms while its preimage hits one
      std::vector<double> c = sp.contract_toward(center.coords, o.coords, t);
      Point cc{c, measure.space};
      std::vector<std::span<const double>> probe = {std::span<const double>(c)};
      mA = index->mass_near(probe, opts.eps);
      auto back = sp.contraction_preimage(c, o.coords, t == 0.0 ? 0.5 : t);
      if (!back) continue;
      std::vector<std::span<const double>> pre = {std::span<const double>(*back)};
      mPre = index->mass_near(pre, opts.eps / (1.0 - t));
      center = cc;
    } else if (analytic) {
      const bool heis_chart = dynamic_cast<const HeisenbergSpace*>(&sp) != nullptr;
      if (heis_chart && sp.distance(center.coords, o.coords) < 4.0 * opts.eps) continue;
      Box A = test_box(center.coords, rho, heis_chart);
      if (clipped) A = Box::intersect(A, support);
      if (A.volume() <= 0.0) continue;
      mA = A.volume();
      if (euclidean) {
        // exact affine preimage, clipped to the support box when restricted
        Box pre;
        pre.lo.resize(A.dim());
        pre.hi.resize(A.dim());
        for (int k = 0; k < A.dim(); ++k) {
          double a = (A.lo[k] - t * o.coords[k]) / (1.0 - t);
          double b = (A.hi[k] - t * o.coords[k]) / (1.0 - t);
          pre.lo[k] = std::min(a, b);
          pre.hi[k] = std::max(a, b);
        }
        mPre = (clipped ? Box::intersect(pre, support) : pre).volume();
      } else if (const auto* hsp = dynamic_cast<const HeisenbergSpace*>(&sp);
                 hsp && hsp->group_n() == 1) {
        // preimage through the endpoint chart: parameter scaling 1/(1-t)
        mPre = mA * heis_chart_scale_ratio(A, o.coords, 1.0 / (1.0 - t), opts.volume_samples, rng, 3);
      } else {
        // membership-sampled preimage volume: q belongs iff T_t(q) lands in A
        auto probes = probe_lattice(A, 3);
        Box window;
        window.lo.assign(A.dim(), std::numeric_limits<double>::infinity());
        window.hi.assign(A.dim(), -std::numeric_limits<double>::infinity());
        bool any = false;
        for (const auto& p : probes) {
          auto back = sp.contraction_preimage(p, o.coords, t);
          if (!back) continue;
          any = true;
          for (int k = 0; k < A.dim(); ++k) {
            window.lo[k] = std::min(window.lo[k], (*back)[k]);
            window.hi[k] = std::max(window.hi[k], (*back)[k]);
          }
        }
        if (!any) {
          mPre = 0.0;
        } else {
          for (int k = 0; k < A.dim(); ++k) {
            double pad = 0.4 * (window.hi[k] - window.lo[k]) + 1e-12;
            window.lo[k] -= pad;
            window.hi[k] += pad;
          }
          Box win = clipped ? Box::intersect(window, support) : window;
          int hits = 0;
          for (int s = 0; s < opts.volume_samples; ++s) {
            std::vector<double> q = rng.uniform_box(win.lo, win.hi);
            if (A.contains(sp.contract_toward(q, o.coords, t))) ++hits;
          }
          mPre = win.volume() * hits / static_cast<double>(opts.volume_samples);
        }
      }
    } else {
      std::vector<std::vector<double>> members;
      for (std::size_t i = 0; i < measure.size() && members.size() < opts.probe_cap; ++i)
        if (sp.distance(measure.at(i), center.coords) <= rho)
          members.emplace_back(measure.at(i).begin(), measure.at(i).end());
      if (members.empty()) continue;
      std::vector<std::span<const double>> probes;
      for (const auto& mb : members) probes.emplace_back(mb);
      mA = index->mass_near(probes, opts.eps);
      std::vector<std::vector<double>> pre;
      for (const auto& mb : members) {
        auto back = sp.contraction_preimage(mb, o.coords, std::max(t, 1e-9));
        if (back) pre.push_back(*back);
      }
      if (pre.empty()) {
        mPre = 0.0;
      } else {
        std::vector<std::span<const double>> pp;
        for (const auto& q : pre) pp.emplace_back(q);
        mPre = index->mass_near(pp, opts.eps / (1.0 - t));
      }
    }

    double lhs = mA, rhs = bound_factor * mPre;
    double ratio = mPre > 0.0 ? mA / mPre : std::numeric_limits<double>::infinity();
    double margin = ratio / std::max(profile.f(t), 1e-300);
    t_worst[tslot] = std::min(t_worst[tslot], ratio);
    if (lhs < rhs) {
      rep.pass = false;
      if (margin < rep.worst_margin) {
        rep.worst_margin = margin;
        rep.worst = MCPTrialReport{center, rho, o, t, ratio, bound_factor, true};
      }
    } else if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst = MCPTrialReport{center, rho, o, t, ratio, bound_factor, false};
    }
  }
  for (std::size_t k = 0; k < opts.t_grid.size(); ++k)
    if (std::isfinite(t_worst[k]))
      rep.t_curve.push_back({opts.t_grid[k], t_worst[k],
                             profile.f(opts.t_grid[k]) * (1.0 - opts.slack)});
  return rep;
}

// ---------------------------------------------------------------------------
// Fraction of sampled particles whose geodesic to z extends strictly past z.
inline double ray_coverage(const DiscreteMeasure& measure, const Space& sp, const Point& z,
                           int samples, std::uint64_t seed = 1) {
  if (measure.size() == 0) throw std::invalid_argument("ray_coverage: empty measure");
  Rng rng(seed, 0xa11);
  int hit = 0, used = 0;
  for (int s = 0; s < samples; ++s) {
    auto x = measure.at(rng.below(measure.size()));
    if (sp.distance(x, z.coords) == 0.0) continue;
    ++used;
    if (sp.extends_past(x, z.coords)) ++hit;
  }
  if (used == 0) return 0.0;
  return static_cast<double>(hit) / static_cast<double>(used);
}

// (x,y) in SC iff either point lies in the other's cut locus.
inline bool sc_membership(const Space& sp, const Point& x, const Point& y) {
  if (x.coords == y.coords) throw std::invalid_argument("sc_membership: x equals y");
  return !sp.extends_past(y.coords, x.coords) || !sp.extends_past(x.coords, y.coords);
}

// empirical m (x) m (SC) over random particle pairs
inline double sc_scan(const DiscreteMeasure& measure, const Space& sp, int pairs,
                      std::uint64_t seed = 1) {
  Rng rng(seed, 0x5c);
  int in_sc = 0, used = 0;
  for (int s = 0; s < pairs; ++s) {
    auto x = measure.point(rng.below(measure.size()));
    auto y = measure.point(rng.below(measure.size()));
    if (x.coords == y.coords) continue;
    ++used;
    if (sc_membership(sp, x, y)) ++in_sc;
  }
  return used == 0 ? 0.0 : static_cast<double>(in_sc) / static_cast<double>(used);
}

// ---------------------------------------------------------------------------
struct RayBin {
  std::uint64_t key = 0;
  std::vector<double> direction; // representative chart direction
  std::vector<std::uint32_t> members;
  std::vector<std::pair<double, double>> conditional; // (arc length, weight), sorted
  double quotient_weight = 0.0;
};

struct RayDecomposition {
  Point pole;
  std::vector<RayBin> bins;
  std::vector<std::uint32_t> pole_members;
  double pole_mass = 0.0;

  double reconstructed_mass() const {
    double s = pole_mass;
    for (const auto& b : bins)
      for (const auto& [arc, w] : b.conditional) {
        (void)arc;
        s += w;
      }
    return s;
  }
};

namespace detail_mcp {

// equal-area-ish bins on S^{d-1}: sectors (d=2), band x longitude (d=3),
// hypercube-face gnomonic grid for d > 3
inline std::uint64_t sphere_dir_bin(std::span<const double> u, int resolution) {
  const double pi = 3.14159265358979323846;
  int d = static_cast<int>(u.size());
  if (d == 1) return u[0] >= 0.0 ? 1 : 0;
  if (d == 2) {
    double a = std::atan2(u[1], u[0]) + pi;
    int k = std::min(resolution - 1, static_cast<int>(a / (2.0 * pi) * resolution));
    return static_cast<std::uint64_t>(k);
  }
  if (d == 3) {
    int bands = std::max(1, static_cast<int>(std::round(std::sqrt(double(resolution)))));
    int per_band = std::max(1, resolution / bands);
    double z = std::clamp(u[2], -1.0, 1.0);
    int band = std::min(bands - 1, static_cast<int>((z + 1.0) / 2.0 * bands));
    double a = std::atan2(u[1], u[0]) + pi;
    int sector = std::min(per_band - 1, static_cast<int>(a / (2.0 * pi) * per_band));
    return static_cast<std::uint64_t>(band) * per_band + sector;
  }
  int face_axis = 0;
  for (int k = 1; k < d; ++k)
    if (std::fabs(u[k]) > std::fabs(u[face_axis])) face_axis = k;
  std::uint64_t key = 2 * face_axis + (u[face_axis] >= 0.0 ? 0 : 1);
  int g = std::max(1, resolution);
  for (int k = 0; k < d; ++k) {
    if (k == face_axis) continue;
    double w = std::clamp(u[k] / std::fabs(u[face_axis]), -1.0, 1.0);
    int cell = std::min(g - 1, static_cast<int>((w + 1.0) / 2.0 * g));
    key = key * static_cast<std::uint64_t>(g) + cell;
  }
  return key;
}

} // namespace detail_mcp

// Bin particles by the ray chart at z; conditional measures are arc-length
// weighted samples per ray bin; reconstruction is an exact repartition.
inline RayDecomposition disintegrate(const DiscreteMeasure& measure, const Space& sp,
                                     const Point& z, int angular_resolution) {
  if (angular_resolution < 1) throw std::invalid_argument("disintegrate: resolution must be >= 1");
  RayDecomposition out;
  out.pole = z;
  const auto* eu = dynamic_cast<const EuclideanSpace*>(&sp);
  const auto* s2 = dynamic_cast<const SphereSpace*>(&sp);
  const auto* hs = dynamic_cast<const HeisenbergSpace*>(&sp);
  if (!eu && !s2 && !hs)
    throw std::invalid_argument("disintegrate: no ray chart for space " + sp.tag());

  std::unordered_map<std::uint64_t, std::size_t> slot;
  for (std::size_t i = 0; i < measure.size(); ++i) {
    auto x = measure.at(i);
    double dist = sp.distance(x, z.coords);
    if (dist == 0.0) {
      out.pole_members.push_back(static_cast<std::uint32_t>(i));
      out.pole_mass += measure.weights[i];
      continue;
    }
    std::uint64_t key;
    std::vector<double> dir;
    if (eu) {
      dir.resize(eu->dim());
      for (int k = 0; k < eu->dim(); ++k) dir[k] = (x[k] - z.coords[k]) / dist;
      key = detail_mcp::sphere_dir_bin(dir, angular_resolution);
    } else if (s2) {
      // initial direction in the tangent plane at z
      double c = dot(x, z.coords);
      dir.resize(3);
      double n2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        dir[k] = x[k] - c * z.coords[k];
        n2 += dir[k] * dir[k];
      }
      if (n2 == 0.0) { // antipode: no unique ray, park it with the pole
        out.pole_members.push_back(static_cast<std::uint32_t>(i));
        out.pole_mass += measure.weights[i];
        continue;
      }
      for (int k = 0; k < 3; ++k) dir[k] /= std::sqrt(n2);
      // fixed frame: project onto two vectors orthogonal to z
      std::vector<double> e1(3), e2(3);
      int axis = std::fabs(z.coords[0]) < 0.9 ? 0 : 1;
      e1 = {0, 0, 0};
      e1[axis] = 1.0;
      double zc = dot(e1, z.coords);
      for (int k = 0; k < 3; ++k) e1[k] -= zc * z.coords[k];
      double e1n = norm2(e1);
      for (int k = 0; k < 3; ++k) e1[k] /= e1n;
      e2 = {z.coords[1] * e1[2] - z.coords[2] * e1[1], z.coords[2] * e1[0] - z.coords[0] * e1[2],
            z.coords[0] * e1[1] - z.coords[1] * e1[0]};
      std::vector<double> tang = {dot(dir, e1), dot(dir, e2)};
      key = detail_mcp::sphere_dir_bin(tang, angular_resolution);
      dir = tang;
    } else {
      heis::HeisPoint w = heis::group_mul(heis::group_inv(to_heis(z.coords)), to_heis(x));
      heis::GeodesicParam p = heis::invert_endpoint(w);
      std::vector<double> full;
      full.insert(full.end(), p.a.begin(), p.a.end());
      full.insert(full.end(), p.b.begin(), p.b.end());
      std::uint64_t dkey = detail_mcp::sphere_dir_bin(full, angular_resolution);
      int vbins = std::max(2, angular_resolution / 2);
      double vfrac = std::clamp((p.v + heis::kTwoPi) / (2.0 * heis::kTwoPi), 0.0, 1.0);
      auto vbin = std::min<std::uint64_t>(vbins - 1, static_cast<std::uint64_t>(vfrac * vbins));
      key = dkey * static_cast<std::uint64_t>(vbins) + vbin;
      dir = full;
      dir.push_back(p.v);
    }
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, out.bins.size()).first;
      RayBin b;
      b.key = key;
      b.direction = dir;
      out.bins.push_back(std::move(b));
    }
    RayBin& bin = out.bins[it->second];
    bin.members.push_back(static_cast<std::uint32_t>(i));
    bin.conditional.emplace_back(dist, measure.weights[i]);
    bin.quotient_weight += measure.weights[i];
  }
  for (auto& b : out.bins) std::sort(b.conditional.begin(), b.conditional.end());
  std::sort(out.bins.begin(), out.bins.end(),
            [](const RayBin& a, const RayBin& b) { return a.key < b.key; });
  return out;
}

} // namespace invplan
