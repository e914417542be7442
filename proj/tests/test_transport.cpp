#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "invplan/euclid.hpp"
#include "invplan/rng.hpp"
#include "invplan/spaces.hpp"
#include "invplan/transport.hpp"

using namespace invplan;

namespace {

DiscreteMeasure atoms_r2(const std::vector<std::array<double, 2>>& pts,
                         const std::vector<double>& w) {
  DiscreteMeasure m = make_measure("r2", 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    m.push_back(std::span<const double>(pts[i].data(), 2), w[i]);
  return m;
}

// Exhaustive oracle: weights are integer multiples of a unit, so the optimum
// equals the best assignment over all unit permutations (every vertex of the
// split transportation polytope is a permutation matrix).
double brute_force_w2sq(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const Space& sp,
                        const std::vector<int>& units0, const std::vector<int>& units1,
                        double unit) {
  std::vector<int> src, tgt;
  for (std::size_t i = 0; i < units0.size(); ++i)
    for (int k = 0; k < units0[i]; ++k) src.push_back(static_cast<int>(i));
  for (std::size_t j = 0; j < units1.size(); ++j)
    for (int k = 0; k < units1[j]; ++k) tgt.push_back(static_cast<int>(j));
  REQUIRE(src.size() == tgt.size());
  std::vector<std::vector<double>> c(mu0.size(), std::vector<double>(mu1.size()));
  for (std::size_t i = 0; i < mu0.size(); ++i)
    for (std::size_t j = 0; j < mu1.size(); ++j) {
      double d = sp.distance(mu0.at(i), mu1.at(j));
      c[i][j] = d * d;
    }
  std::sort(tgt.begin(), tgt.end());
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t k = 0; k < src.size(); ++k) s += c[src[k]][tgt[k]];
    best = std::min(best, s);
  } while (std::next_permutation(tgt.begin(), tgt.end()));
  return best * unit;
}

} // namespace

TEST_CASE("dirac to dirac") {
  EuclideanSpace r2(2);
  DiscreteMeasure a = atoms_r2({{0, 0}}, {1});
  DiscreteMeasure b = atoms_r2({{3, 4}}, {1});
  TransportResult res = solve_w2(a, b, r2);
  CHECK(std::fabs(res.cost - 25.0) < 1e-12);
  CHECK(res.coupling.pairs.size() == 1);
}

TEST_CASE("two-pair fixture: vertical matching beats crossing") {
  EuclideanSpace r2(2);
  DiscreteMeasure mu0 = atoms_r2({{0, 0}, {1, 0}}, {0.5, 0.5});
  DiscreteMeasure mu1 = atoms_r2({{0, 1}, {1, 1}}, {0.5, 0.5});
  TransportResult res = solve_w2(mu0, mu1, r2);
  CHECK(std::fabs(res.cost - 1.0) < 1e-14);

  // t = 1/2 puts atoms at (0, 0.5) and (1, 0.5)
  DiscreteMeasure mid = interpolate(res, 0.5, r2);
  REQUIRE(mid.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) CHECK(std::fabs(mid.at(i)[1] - 0.5) < 1e-15);
}

TEST_CASE("preconditions: unequal masses and size cap") {
  EuclideanSpace r2(2);
  DiscreteMeasure a = atoms_r2({{0, 0}}, {1.0});
  DiscreteMeasure b = atoms_r2({{1, 0}}, {1.5});
  CHECK_THROWS_AS(solve_w2(a, b, r2), std::invalid_argument);

  TransportOptions small;
  small.size_cap = 3;
  DiscreteMeasure big = atoms_r2({{0, 0}, {1, 0}, {2, 0}, {3, 0}}, {1, 1, 1, 1});
  CHECK_THROWS_WITH(solve_w2(big, big, r2, small), Catch::Matchers::ContainsSubstring("3"));
}

TEST_CASE("exact against the exhaustive permutation oracle") {
  EuclideanSpace r2(2);
  Rng rng(101);
  for (int inst = 0; inst < 100; ++inst) {
    int m = 2 + static_cast<int>(rng.below(5)); // <= 6 atoms per side
    int n = 2 + static_cast<int>(rng.below(5));
    const int total = 9; // 9! permutations per oracle call
    std::vector<int> u0(m, 1), u1(n, 1);
    for (int k = m; k < total; ++k) ++u0[rng.below(m)];
    for (int k = n; k < total; ++k) ++u1[rng.below(n)];

    const double unit = 0.125; // exact in binary
    std::vector<std::array<double, 2>> p0(m), p1(n);
    std::vector<double> w0(m), w1(n);
    for (int i = 0; i < m; ++i) {
      p0[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      w0[i] = u0[i] * unit;
    }
    for (int j = 0; j < n; ++j) {
      p1[j] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      w1[j] = u1[j] * unit;
    }
    DiscreteMeasure mu0 = atoms_r2(p0, w0), mu1 = atoms_r2(p1, w1);

    TransportResult res = solve_w2(mu0, mu1, r2);
    double brute = brute_force_w2sq(mu0, mu1, r2, u0, u1, unit);
    CHECK(std::fabs(res.cost - brute) < 1e-10);

    // marginal defects below 1e-10, dual certificate tight
    CHECK(res.coupling.first_marginal_defect() < 1e-10);
    DiscreteMeasure m2 = marginal(res.coupling, MarginalSide::Second);
    double defect2 = 0.0;
    for (std::size_t j = 0; j < m2.size(); ++j)
      defect2 = std::max(defect2, std::fabs(m2.weights[j] - mu1.weights[j]));
    CHECK(defect2 < 1e-10);
    CHECK(dual_certificate_defect(res, r2) < 1e-9);
  }
}

TEST_CASE("geodesic interpolation is metric-linear in t") {
  EuclideanSpace r2(2);
  Rng rng(103);
  std::vector<std::array<double, 2>> p0(20), p1(20);
  std::vector<double> w(20, 0.05);
  for (int i = 0; i < 20; ++i) {
    p0[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    p1[i] = {rng.uniform(1.5, 3.5), rng.uniform(-1, 1)};
  }
  DiscreteMeasure mu0 = atoms_r2(p0, w), mu1 = atoms_r2(p1, w);
  TransportResult res = solve_w2(mu0, mu1, r2);
  double w2 = res.w2();
  for (double t : {0.25, 0.5, 0.75}) {
    DiscreteMeasure mt = interpolate(res, t, r2);
    double wt = solve_w2(mu0, mt, r2).w2();
    CHECK(std::fabs(wt - t * w2) < 1e-6);
  }
  // concatenation: W(mu0, mu_s) + W(mu_s, mu_t) = W(mu0, mu_t)
  DiscreteMeasure ms = interpolate(res, 0.3, r2);
  DiscreteMeasure mt = interpolate(res, 0.8, r2);
  double a = solve_w2(mu0, ms, r2).w2();
  double b = solve_w2(ms, mt, r2).w2();
  double c = solve_w2(mu0, mt, r2).w2();
  CHECK(std::fabs(a + b - c) < 1e-5);

  // endpoints reproduce the marginals as weighted point sets
  DiscreteMeasure m0 = interpolate(res, 0.0, r2);
  double worst = 0.0;
  for (std::size_t k = 0; k < res.coupling.pairs.size(); ++k)
    worst = std::max(worst, dist2(m0.at(k), mu0.at(res.coupling.pairs[k].src)));
  CHECK(worst == 0.0);
}

TEST_CASE("heisenberg interpolation: center target carries the non-unique flag") {
  HeisenbergSpace h(1);
  DiscreteMeasure a = make_measure("heis1", 3);
  double o[3] = {0, 0, 0};
  a.push_back(std::span<const double>(o, 3), 1.0);
  DiscreteMeasure b = make_measure("heis1", 3);
  double c[3] = {0, 0, 1};
  b.push_back(std::span<const double>(c, 3), 1.0);
  TransportResult res = solve_w2(a, b, h);
  CHECK(std::fabs(res.cost - heis::kPi) < 1e-9); // d = sqrt(pi t)

  int flagged = 0;
  DiscreteMeasure mid = interpolate(res, 0.5, h, &flagged);
  CHECK(flagged == 1);
  // canonical branch: geodesic_point((e1, 2pi, sqrt(pi)), sqrt(pi)/2)
  heis::GeodesicParam p;
  p.a = {1.0};
  p.b = {0.0};
  p.v = 2.0 * heis::kPi;
  p.r = std::sqrt(heis::kPi);
  heis::HeisPoint expect = heis::geodesic_point(p, 0.5 * p.r);
  CHECK(std::fabs(mid.at(0)[0] - expect.xi[0]) < 1e-12);
  CHECK(std::fabs(mid.at(0)[1] - expect.eta[0]) < 1e-12);
  CHECK(std::fabs(mid.at(0)[2] - expect.t) < 1e-12);
}

TEST_CASE("sphere interpolation aborts on antipodal pairs with the pair index") {
  SphereSpace s2;
  DiscreteMeasure a = make_measure("sphere2", 3);
  double n[3] = {0, 0, 1};
  a.push_back(std::span<const double>(n, 3), 1.0);
  DiscreteMeasure b = make_measure("sphere2", 3);
  double s[3] = {0, 0, -1};
  b.push_back(std::span<const double>(s, 3), 1.0);
  TransportResult res = solve_w2(a, b, s2);
  CHECK_THROWS_WITH(interpolate(res, 0.5, s2), Catch::Matchers::ContainsSubstring("pair 0"));
}

TEST_CASE("contract_to_dirac equals interpolation of the solved problem") {
  EuclideanSpace r2(2);
  Rng rng(107);
  std::vector<std::array<double, 2>> pts(20);
  std::vector<double> w(20);
  double tot = 0.0;
  for (int i = 0; i < 20; ++i) {
    pts[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    w[i] = rng.uniform(0.1, 1.0);
    tot += w[i];
  }
  DiscreteMeasure mu = atoms_r2(pts, w);
  Point o{{0.3, -0.2}, "r2"};
  DiscreteMeasure target = atoms_r2({{0.3, -0.2}}, {tot});

  for (double t : {0.0, 0.3, 0.7, 1.0}) {
    DiscreteMeasure direct = contract_to_dirac(mu, o, t, r2);
    TransportResult res = solve_w2(mu, target, r2);
    DiscreteMeasure via = interpolate(res, t, r2);
    // same atoms in source order (the coupling to a Dirac is unique)
    double worst = 0.0;
    for (std::size_t k = 0; k < via.size(); ++k)
      worst = std::max(worst, dist2(via.at(k), direct.at(res.coupling.pairs[k].src)));
    CHECK(worst < 1e-9);
  }
  DiscreteMeasure collapsed = contract_to_dirac(mu, o, 1.0, r2);
  for (std::size_t i = 0; i < collapsed.size(); ++i) CHECK(dist2(collapsed.at(i), o.coords) == 0.0);
  CHECK(collapsed.total_mass == mu.total_mass);

  // in R^d this is exactly the homothety evolution of the particle set
  DiscreteMeasure ev = contract_to_dirac(mu, o, 0.4, r2);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto p = evolve_set({mu.point(i)}, o, 0.4);
    CHECK(dist2(ev.at(i), p[0].coords) < 1e-15);
  }
}
