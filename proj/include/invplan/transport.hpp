#pragma once

// Exact discrete L^2 optimal transport: W_2 distance and optimal couplings by
// successive shortest paths with node potentials (reduced-cost Dijkstra over
// the dense bipartite graph), displacement interpolation along the space's
// geodesics, and the transport-to-a-Dirac special case.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "invplan/core.hpp"

namespace invplan {

struct TransportOptions {
  std::size_t size_cap = 500;   // per side
  double mass_tol = 1e-9;       // equal-total-mass precondition
  double supply_tol = 1e-12;    // remaining-mass termination threshold
};

struct TransportResult {
  Coupling coupling;
  double cost = 0.0;                     // sum w_ij d(x_i, y_j)^2 = W_2^2
  std::vector<double> dual_source;       // potentials; on the support
  std::vector<double> dual_target;       // cost_ij = dual_target[j] - dual_source[i]
  double w2() const { return std::sqrt(std::max(0.0, cost)); }
};

inline TransportResult solve_w2(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                const Space& sp, const TransportOptions& opts = {}) {
  const std::size_t m = mu0.size(), n = mu1.size();
  if (m == 0 || n == 0) throw std::invalid_argument("solve_w2: empty marginal");
  if (m > opts.size_cap || n > opts.size_cap)
    throw std::invalid_argument("solve_w2: support size exceeds cap " +
                                std::to_string(opts.size_cap));
  double scale = std::max({1.0, mu0.total_mass, mu1.total_mass});
  if (std::fabs(mu0.total_mass - mu1.total_mass) > opts.mass_tol * scale)
    throw std::invalid_argument("solve_w2: marginals carry different total masses");

  // dense cost matrix c_ij = d^2
  std::vector<double> cost(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double d = sp.distance(mu0.at(i), mu1.at(j));
      cost[i * n + j] = d * d;
    }

  std::vector<double> flow(m * n, 0.0);
  std::vector<double> supply(mu0.weights), demand(mu1.weights);
  std::vector<double> pot(m + n, 0.0); // node potentials, sources then targets
  double remaining = std::accumulate(supply.begin(), supply.end(), 0.0);

  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t iter_cap = 16 * (m + n) + 1024;
  std::size_t iters = 0;
  while (remaining > opts.supply_tol * scale) {
    if (++iters > iter_cap) throw std::runtime_error("solve_w2: augmentation cap exceeded");
    // Dijkstra with reduced costs from all sources with remaining supply
    std::vector<double> dist(m + n, inf);
    std::vector<int> parent(m + n, -1);
    std::vector<bool> done(m + n, false);
    for (std::size_t i = 0; i < m; ++i)
      if (supply[i] > opts.supply_tol * scale) dist[i] = 0.0;
    std::size_t best_target = static_cast<std::size_t>(-1);
    while (true) {
      std::size_t u = static_cast<std::size_t>(-1);
      double du = inf;
      for (std::size_t v = 0; v < m + n; ++v)
        if (!done[v] && dist[v] < du) {
          du = dist[v];
          u = v;
        }
      if (u == static_cast<std::size_t>(-1)) break;
      done[u] = true;
      if (u >= m && demand[u - m] > opts.supply_tol * scale) {
        best_target = u - m;
        break;
      }
      if (u < m) {
        const std::size_t i = u;
        for (std::size_t j = 0; j < n; ++j) {
          double rc = cost[i * n + j] + pot[i] - pot[m + j];
          if (rc < 0.0) rc = 0.0; // clip fp drift
          if (dist[i] + rc < dist[m + j] - 1e-18) {
            dist[m + j] = dist[i] + rc;
            parent[m + j] = static_cast<int>(i);
          }
        }
      } else {
        const std::size_t j = u - m;
        for (std::size_t i = 0; i < m; ++i) {
          if (flow[i * n + j] <= 0.0) continue;
          double rc = -cost[i * n + j] - pot[i] + pot[m + j];
          if (rc < 0.0) rc = 0.0;
          if (dist[m + j] + rc < dist[i] - 1e-18) {
            dist[i] = dist[m + j] + rc;
            parent[i] = static_cast<int>(m + j);
          }
        }
      }
    }
    if (best_target == static_cast<std::size_t>(-1))
      throw std::runtime_error("solve_w2: no augmenting path (unbalanced instance)");

    // bottleneck along the path
    double push = demand[best_target];
    for (int v = static_cast<int>(m + best_target); parent[v] != -1; v = parent[v]) {
      int p = parent[v];
      if (p < static_cast<int>(m) && v >= static_cast<int>(m)) {
        // forward arc p -> v
      } else {
        // backward arc: flow v(> m side? no: p >= m, v < m) being reduced
        push = std::min(push, flow[static_cast<std::size_t>(v) * n + (p - m)]);
      }
      if (parent[p] == -1 && p < static_cast<int>(m)) push = std::min(push, supply[p]);
    }
    for (int v = static_cast<int>(m + best_target); parent[v] != -1; v = parent[v]) {
      int p = parent[v];
      if (p < static_cast<int>(m)) {
        flow[static_cast<std::size_t>(p) * n + (v - m)] += push;
      } else {
        flow[static_cast<std::size_t>(v) * n + (p - m)] -= push;
      }
    }
    // root of the path carries the supply
    {
      int v = static_cast<int>(m + best_target);
      while (parent[v] != -1) v = parent[v];
      supply[v] -= push;
    }
    demand[best_target] -= push;
    remaining -= push;
    // potential update keeps reduced costs nonnegative
    double dcap = dist[m + best_target];
    for (std::size_t v = 0; v < m + n; ++v) pot[v] += std::min(dist[v], dcap);
  }

  TransportResult out;
  out.coupling.source = mu0;
  out.coupling.target_space = mu1.space;
  out.coupling.target_dim = mu1.dim;
  out.coupling.target_coords = mu1.coords;
  out.cost = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (flow[i * n + j] > 0.0) {
        out.coupling.pairs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                      flow[i * n + j]});
        out.cost += flow[i * n + j] * cost[i * n + j];
      }
  out.dual_source.assign(pot.begin(), pot.begin() + m);
  out.dual_target.assign(pot.begin() + m, pot.end());
  return out;
}

// Max complementary-slackness violation of the emitted duals: feasibility
// cost_ij >= v_j - u_i everywhere and equality on the support.
inline double dual_certificate_defect(const TransportResult& res, const Space& sp) {
  const auto& c = res.coupling;
  double defect = 0.0;
  for (const auto& p : c.pairs) {
    double d = sp.distance(c.source.at(p.src), c.target_at(p.tgt));
    defect = std::max(defect, std::fabs(d * d - (res.dual_target[p.tgt] - res.dual_source[p.src])));
  }
  for (std::size_t i = 0; i < c.source.size(); ++i)
    for (std::size_t j = 0; j < c.target_count(); ++j) {
      double d = sp.distance(c.source.at(i), c.target_at(j));
      double slack = d * d - (res.dual_target[j] - res.dual_source[i]);
      if (slack < 0.0) defect = std::max(defect, -slack);
    }
  return defect;
}

// Displacement interpolation mu_t of the coupled pairs. Non-unique geodesics
// proceed along the canonical branch and are counted; spaces that throw
// (sphere antipodes) surface the offending pair index.
inline DiscreteMeasure interpolate(const TransportResult& res, double t, const Space& sp,
                                   int* non_unique_count = nullptr) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("interpolate: t must lie in [0,1]");
  const auto& c = res.coupling;
  DiscreteMeasure out = make_measure(c.target_space, c.target_dim);
  int flagged = 0;
  for (std::size_t k = 0; k < c.pairs.size(); ++k) {
    const auto& p = c.pairs[k];
    bool unique = true;
    std::vector<double> pos;
    try {
      pos = sp.geodesic(c.source.at(p.src), c.target_at(p.tgt), t, &unique);
    } catch (const std::exception& e) {
      throw std::invalid_argument("interpolate: geodesic failure at pair " + std::to_string(k) +
                                  ": " + e.what());
    }
    if (!unique) ++flagged;
    out.push_back(pos, p.w);
  }
  if (non_unique_count) *non_unique_count = flagged;
  return out;
}

// Transport to a Dirac: the unique admissible coupling is mu (x) delta_o, so
// mu_t is the pushforward under the space's contraction map.
inline DiscreteMeasure contract_to_dirac(const DiscreteMeasure& mu, const Point& o, double t,
                                         const Space& sp) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("contract_to_dirac: t in [0,1]");
  return pushforward(mu, [&](std::span<const double> x) { return sp.contract_toward(x, o.coords, t); });
}

} // namespace invplan
