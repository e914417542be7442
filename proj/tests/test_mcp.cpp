#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "invplan/mcp.hpp"
#include "invplan/rng.hpp"

using namespace invplan;

namespace {

DiscreteMeasure lebesgue_square(int n, std::uint64_t seed) {
  DiscreteMeasure m = make_measure("r2", 2);
  Descriptor d;
  d.kind = "uniform-body";
  d.box_lo = {0.0, 0.0};
  d.box_hi = {1.0, 1.0};
  d.density = 1.0;
  m.descriptor = d;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    double p[2] = {rng.u01(), rng.u01()};
    m.push_back(std::span<const double>(p, 2), 1.0 / n);
  }
  return m;
}

DiscreteMeasure haar_box(int n, std::uint64_t seed) {
  DiscreteMeasure m = make_measure("heis1", 3);
  Descriptor d;
  d.kind = "haar-box";
  d.box_lo = {-1.0, -1.0, -2.0};
  d.box_hi = {1.0, 1.0, 2.0};
  d.density = 1.0;
  m.descriptor = d;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    auto p = rng.uniform_box(d.box_lo, d.box_hi);
    m.push_back(p, d.box_volume() / n);
  }
  return m;
}

} // namespace

TEST_CASE("profile validation") {
  CHECK_THROWS_AS(MCPProfile::make(1.0, 5.0), std::invalid_argument); // K != 0 out of scope
  CHECK_THROWS_AS(MCPProfile::power(1.0), std::invalid_argument);
  MCPProfile p = MCPProfile::power(2.0);
  CHECK(p.f(0.0) == 1.0);
  CHECK(p.f(1.0) == 0.0);
  CHECK(p.f(0.5) == 0.25);
  MCPProfile tab = MCPProfile::table({{0.0, 1.0}, {0.5, 0.6}, {1.0, 0.0}});
  CHECK(std::fabs(tab.f(0.25) - 0.8) < 1e-15);
  CHECK_THROWS_AS(MCPProfile::table({{0.0, 1.0}, {0.5, 0.0}, {1.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("lebesgue square reproduces the exact (1-t)^d ratio") {
  EuclideanSpace r2(2);
  DiscreteMeasure m = lebesgue_square(2000, 3);
  MCPOptions opts;
  opts.trials = 300;
  opts.seed = 5;
  MCPReport rep = mcp_verify(m, r2, MCPProfile::power(2.0), opts);
  CHECK(rep.pass);
  // analytic fast path: worst ratio at each t equals (1-t)^2 bit-exactly
  for (const auto& row : rep.t_curve) CHECK(row[1] == std::pow(1.0 - row[0], 2.0));

  // a demanded dimension below the true one fails
  MCPReport bad = mcp_verify(m, r2, MCPProfile::power(1.5), opts);
  CHECK_FALSE(bad.pass);
  REQUIRE(bad.worst.has_value());
}

TEST_CASE("heisenberg haar: MCP(0,5) holds, MCP(0,4) fails near the axis") {
  HeisenbergSpace h(1);
  DiscreteMeasure m = haar_box(4000, 7);
  MCPOptions opts;
  opts.trials = 1200;
  opts.seed = 11;
  MCPReport r5 = mcp_verify(m, h, MCPProfile::power(5.0), opts);
  CHECK(r5.pass);
  CHECK(r5.worst_margin > 0.95);
  CHECK(r5.worst_margin < 1.5); // the sharp exponent leaves little headroom

  MCPReport r4 = mcp_verify(m, h, MCPProfile::power(4.0), opts);
  CHECK_FALSE(r4.pass);
  REQUIRE(r4.worst.has_value());
  CHECK(r4.worst->confirmed);
  CHECK(r4.worst->t >= 0.8);
  // the witness ratio sits at the (1-t)^5 scale, an order below the N=4 bound
  CHECK(r4.worst->ratio < 0.5 * std::pow(1.0 - r4.worst->t, 4.0));
  CHECK(r4.worst->ratio > 0.5 * std::pow(1.0 - r4.worst->t, 5.0));
}

TEST_CASE("cloud-route estimator stays consistent at moderate t") {
  EuclideanSpace r2(2);
  DiscreteMeasure m = lebesgue_square(20000, 13);
  m.descriptor.reset(); // force the eps-neighborhood route
  MCPOptions opts;
  opts.trials = 60;
  opts.eps = 0.03;
  opts.t_grid = {0.25, 0.5};
  opts.slack = 0.35; // sampling-resolution slack for the raw-cloud route
  opts.seed = 17;
  MCPReport rep = mcp_verify(m, r2, MCPProfile::power(2.0), opts);
  CHECK(rep.pass);
}

TEST_CASE("strong MCP: euclidean exactness and heisenberg consistency") {
  EuclideanSpace r2(2);
  DiscreteMeasure m = lebesgue_square(2000, 19);
  MCPOptions opts;
  opts.trials = 300;
  opts.seed = 23;
  MCPReport rep = strong_mcp_verify(m, r2, MCPProfile::power(2.0), opts);
  CHECK(rep.pass);

  HeisenbergSpace h(1);
  DiscreteMeasure hm = haar_box(4000, 29);
  MCPOptions hopts;
  hopts.trials = 400;
  hopts.seed = 31;
  MCPReport hrep = strong_mcp_verify(hm, h, MCPProfile::power(5.0), hopts);
  CHECK(hrep.pass);
}

TEST_CASE("strong MCP detects atomic degeneracy") {
  EuclideanSpace r2(2);
  DiscreteMeasure atoms = make_measure("r2", 2);
  Rng rng(37);
  for (int i = 0; i < 12; ++i) {
    double p[2] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    atoms.push_back(std::span<const double>(p, 2), 1.0 / 12);
  }
  Descriptor d;
  d.kind = "atom-list";
  atoms.descriptor = d;
  MCPOptions opts;
  opts.trials = 200;
  opts.eps = 0.02;
  opts.t_grid = {0.5};
  opts.seed = 41;
  MCPReport rep = strong_mcp_verify(atoms, r2, MCPProfile::power(2.0), opts);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("ray coverage: convex body, heisenberg, cone apex") {
  // convex body with interior pole: every chord extends
  ConvexBody square = body_from_box({0, 0}, {1, 1});
  EuclideanSpace body_space(2, square);
  DiscreteMeasure m = lebesgue_square(3000, 43);
  Point z{{0.4, 0.6}, "r2"};
  CHECK(ray_coverage(m, body_space, z, 2000, 1) == 1.0);

  HeisenbergSpace h(1);
  DiscreteMeasure hm = haar_box(3000, 47);
  Point hz{{0, 0, 0}, "heis1"};
  CHECK(ray_coverage(hm, h, hz, 2000, 1) == 1.0);

  ConeSpace cone(2.0);
  DiscreteMeasure cm = make_measure(cone.tag(), 2);
  Rng rng(53);
  for (int i = 0; i < 500; ++i) {
    double p[2] = {rng.uniform(0.1, 1.0), rng.uniform(0.0, 2.0)};
    cm.push_back(std::span<const double>(p, 2), 1.0);
  }
  Point apex{{0.0, 0.0}, cone.tag()};
  CHECK(ray_coverage(cm, cone, apex, 500, 1) == 0.0);
}

TEST_CASE("symmetric cut locus") {
  EuclideanSpace r2(2);
  Point a{{0, 0}, "r2"}, b{{1, 1}, "r2"};
  CHECK_FALSE(sc_membership(r2, a, b)); // complete extendability in R^d
  CHECK_THROWS_AS(sc_membership(r2, a, a), std::invalid_argument);

  HeisenbergSpace h(1);
  Point o{{0, 0, 0}, "heis1"}, c{{0, 0, 1}, "heis1"}, x{{1, 0, 0}, "heis1"};
  CHECK(sc_membership(h, o, c)); // the center is unreachable as interior point
  CHECK_FALSE(sc_membership(h, o, x));

  DiscreteMeasure hm = haar_box(5000, 59);
  CHECK(sc_scan(hm, h, 100000, 61) == 0.0);
}

TEST_CASE("disintegration partitions an annulus into uniform sectors") {
  EuclideanSpace r2(2);
  DiscreteMeasure ann = make_measure("r2", 2);
  Rng rng(67);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double rad = std::sqrt(rng.uniform(0.25, 1.0)); // uniform in the annulus
    double a = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    double p[2] = {rad * std::cos(a), rad * std::sin(a)};
    ann.push_back(std::span<const double>(p, 2), 1.0 / n);
  }
  Point z{{0.0, 0.0}, "r2"};
  RayDecomposition dec = disintegrate(ann, r2, z, 8);
  CHECK(dec.bins.size() == 8);

  // quotient weights uniform within 3 sigma of multinomial sampling error
  double sigma = std::sqrt(0.125 * 0.875 / n);
  for (const auto& bin : dec.bins) CHECK(std::fabs(bin.quotient_weight - 0.125) < 3.5 * sigma);

  // exact reconstruction and exclusive-exhaustive membership
  CHECK(std::fabs(dec.reconstructed_mass() - ann.total_mass) < 1e-12);
  std::set<std::uint32_t> seen(dec.pole_members.begin(), dec.pole_members.end());
  std::size_t count = dec.pole_members.size();
  for (const auto& bin : dec.bins) {
    for (auto idx : bin.members) {
      CHECK(seen.insert(idx).second); // exclusive
      ++count;
    }
  }
  CHECK(count == ann.size()); // exhaustive

  // conditionals are sorted by arc length and live inside the annulus radii
  for (const auto& bin : dec.bins) {
    for (std::size_t k = 1; k < bin.conditional.size(); ++k)
      CHECK(bin.conditional[k - 1].first <= bin.conditional[k].first);
    CHECK(bin.conditional.front().first >= 0.5 - 1e-12);
    CHECK(bin.conditional.back().first <= 1.0 + 1e-12);
  }
}

TEST_CASE("disintegration on the heisenberg group has positive interior conditionals") {
  HeisenbergSpace h(1);
  DiscreteMeasure hm = haar_box(20000, 71);
  Point z{{0, 0, 0}, "heis1"};
  RayDecomposition dec = disintegrate(hm, h, z, 12);
  CHECK(std::fabs(dec.reconstructed_mass() - hm.total_mass) < 1e-9 * hm.total_mass);
  // most bins should carry several members with spread interior arc lengths
  int populated = 0;
  for (const auto& bin : dec.bins)
    if (bin.conditional.size() >= 5) {
      ++populated;
      CHECK(bin.quotient_weight > 0.0);
      CHECK(bin.conditional.front().first > 0.0);
    }
  CHECK(populated > 10);
}

TEST_CASE("disintegration rejects spaces without a ray chart") {
  ConeSpace cone(3.0);
  DiscreteMeasure cm = make_measure(cone.tag(), 2);
  double p[2] = {1.0, 0.5};
  cm.push_back(std::span<const double>(p, 2), 1.0);
  Point apex{{0.0, 0.0}, cone.tag()};
  CHECK_THROWS_AS(disintegrate(cm, cone, apex, 8), std::invalid_argument);
}

TEST_CASE("sphere disintegration bins by initial direction at the pole") {
  SphereSpace s2;
  DiscreteMeasure sm = make_measure("sphere2", 3);
  Rng rng(73);
  for (int i = 0; i < 5000; ++i) {
    auto u = rng.unit_vector(3);
    sm.push_back(u, 1.0 / 5000);
  }
  Point z{{0, 0, 1}, "sphere2"};
  RayDecomposition dec = disintegrate(sm, s2, z, 8);
  CHECK(std::fabs(dec.reconstructed_mass() - sm.total_mass) < 1e-12);
  CHECK(dec.bins.size() == 8);
  double sigma = std::sqrt(0.125 * 0.875 / 5000.0);
  for (const auto& bin : dec.bins)
    CHECK(std::fabs(bin.quotient_weight - 0.125 * sm.total_mass) < 4.0 * sigma);
}
