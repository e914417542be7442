#pragma once

// Batch experiment driver: validated configs, seeded fixture generators, and
// the experiment runners behind the CLI subcommands. Reports are JSON (17
// significant digits) plus CSV tables; identical seed and config produce
// bit-identical output.

#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "invplan/core.hpp"
#include "invplan/euclid.hpp"
#include "invplan/jsonio.hpp"
#include "invplan/mcp.hpp"
#include "invplan/plans.hpp"
#include "invplan/rng.hpp"
#include "invplan/spaces.hpp"
#include "invplan/transport.hpp"

namespace invplan {

// exit codes: 0 pass, 1 property failure (witness written), then usage errors
enum ExitCode : int {
  kPass = 0,
  kPropertyFailure = 1,
  kInvalidValue = 2,   // unknown key or out-of-range value
  kMalformedJson = 3,
  kMissingField = 4,
  kUnknownExperiment = 5,
  kIoError = 6,
};

struct ConfigError : std::runtime_error {
  int code;
  ConfigError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

struct ExperimentConfig {
  std::string experiment;
  std::string space = "r2";
  std::uint64_t seed = 0;
  int trials = 10000;
  double eps = 0.05;
  double slack = 0.05;
  double K = 0.0;
  double N = 5.0;
  double tolerance = 1e-7;
  double cell_size = 0.1;
  int n_particles = 10000;
  int angular_bins = 8;
  double snap_h = 0.01;
  double t = 0.5;
  std::string fixture;   // bundled fixture name when no measure file is given
  std::string measure;   // measure file path
  std::string measure2;  // second marginal for transport
  std::string build;     // convex | heisenberg | sphere
  std::string verify;    // plan file to verify
  std::string push_map;  // map file for plan pushing
  std::string rescale;   // density expression constant:<c> | linear:<axis>:<a>:<b>
  std::string out = ".";
};

inline ExperimentConfig parse_config(const json& j) {
  static const std::set<std::string> known = {
      "experiment", "space", "seed",    "trials",  "eps",     "slack",   "K",
      "N",          "tolerance", "cell_size", "n_particles", "angular_bins", "snap_h",
      "t",          "fixture", "measure", "measure2", "build", "verify", "push_map",
      "rescale",    "out"};
  if (!j.is_object()) throw ConfigError(kMalformedJson, "config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError(kInvalidValue, "unknown config key '" + key + "'");

  ExperimentConfig c;
  if (!j.contains("experiment")) throw ConfigError(kMissingField, "missing field 'experiment'");
  c.experiment = j.at("experiment").get<std::string>();
  static const std::set<std::string> kinds = {"theorem1", "mcp",       "plan",
                                              "transport", "stability", "heis-suite"};
  if (!kinds.count(c.experiment))
    throw ConfigError(kUnknownExperiment, "unknown experiment kind '" + c.experiment + "'");
  if (!j.contains("seed"))
    throw ConfigError(kMissingField, "missing field 'seed' (determinism is mandatory)");
  c.seed = j.at("seed").get<std::uint64_t>();

  auto get_num = [&](const char* key, double& slot, bool positive) {
    if (!j.contains(key)) return;
    slot = j.at(key).get<double>();
    if (positive && !(slot > 0.0))
      throw ConfigError(kInvalidValue, std::string("config value '") + key + "' must be > 0");
  };
  if (j.contains("space")) c.space = j.at("space").get<std::string>();
  if (j.contains("trials")) {
    c.trials = j.at("trials").get<int>();
    if (c.trials <= 0) throw ConfigError(kInvalidValue, "config value 'trials' must be > 0");
  }
  if (j.contains("n_particles")) {
    c.n_particles = j.at("n_particles").get<int>();
    if (c.n_particles <= 0) throw ConfigError(kInvalidValue, "'n_particles' must be > 0");
  }
  if (j.contains("angular_bins")) {
    c.angular_bins = j.at("angular_bins").get<int>();
    if (c.angular_bins <= 0) throw ConfigError(kInvalidValue, "'angular_bins' must be > 0");
  }
  get_num("eps", c.eps, true);
  get_num("slack", c.slack, false);
  get_num("K", c.K, false);
  get_num("N", c.N, true);
  get_num("tolerance", c.tolerance, true);
  get_num("cell_size", c.cell_size, true);
  get_num("snap_h", c.snap_h, true);
  get_num("t", c.t, false);
  for (const char* key : {"fixture", "measure", "measure2", "build", "verify", "push_map",
                          "rescale", "out"}) {
    if (!j.contains(key)) continue;
    const std::string v = j.at(key).get<std::string>();
    if (std::string(key) == "fixture") c.fixture = v;
    else if (std::string(key) == "measure") c.measure = v;
    else if (std::string(key) == "measure2") c.measure2 = v;
    else if (std::string(key) == "build") c.build = v;
    else if (std::string(key) == "verify") c.verify = v;
    else if (std::string(key) == "push_map") c.push_map = v;
    else if (std::string(key) == "rescale") c.rescale = v;
    else c.out = v;
  }
  return c;
}

// ---------------------------------------------------------------------------
namespace fixtures {

inline DiscreteMeasure lebesgue_square(int n, std::uint64_t seed) {
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

// unit square embedded in the z = 1/4 plane of R^3
inline DiscreteMeasure square3d(int n, std::uint64_t seed) {
  DiscreteMeasure m = make_measure("r3", 3);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    double p[3] = {rng.u01(), rng.u01(), 0.25};
    m.push_back(std::span<const double>(p, 3), 1.0 / n);
  }
  return m;
}

inline DiscreteMeasure circle(int n, std::uint64_t seed) {
  DiscreteMeasure m = make_measure("r2", 2);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    double a = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    double p[2] = {std::cos(a), std::sin(a)};
    m.push_back(std::span<const double>(p, 2), 1.0 / n);
  }
  return m;
}

inline DiscreteMeasure half_lebesgue_half_atom(int n, std::uint64_t seed) {
  DiscreteMeasure m = make_measure("r3", 3);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    double p[3] = {rng.u01(), rng.u01(), 0.25};
    m.push_back(std::span<const double>(p, 3), 0.5 / n);
  }
  double atom[3] = {0.3183098861837907, 0.5772156649015329, 0.25};
  m.push_back(std::span<const double>(atom, 3), 0.5);
  return m;
}

inline DiscreteMeasure haar_box(int n, std::uint64_t seed) {
  DiscreteMeasure m = make_measure("heis1", 3);
  Descriptor d;
  d.kind = "haar-box";
  d.box_lo = {-1.0, -1.0, -2.0};
  d.box_hi = {1.0, 1.0, 2.0};
  d.density = 1.0;
  m.descriptor = d;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) m.push_back(rng.uniform_box(d.box_lo, d.box_hi), 16.0 / n);
  return m;
}

inline DiscreteMeasure sphere_uniform(int n, std::uint64_t seed) {
  DiscreteMeasure m = make_measure("sphere2", 3);
  Descriptor d;
  d.kind = "sphere-surface";
  m.descriptor = d;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) m.push_back(rng.unit_vector(3), 1.0 / n);
  return m;
}

inline DiscreteMeasure annulus(int n, std::uint64_t seed) {
  DiscreteMeasure m = make_measure("r2", 2);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    double rad = std::sqrt(rng.uniform(0.25, 1.0));
    double a = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    double p[2] = {rad * std::cos(a), rad * std::sin(a)};
    m.push_back(std::span<const double>(p, 2), 1.0 / n);
  }
  return m;
}

inline DiscreteMeasure by_name(const std::string& name, int n, std::uint64_t seed) {
  if (name == "lebesgue-square") return lebesgue_square(n, seed);
  if (name == "square3d") return square3d(n, seed);
  if (name == "circle") return circle(n, seed);
  if (name == "half-atom") return half_lebesgue_half_atom(n, seed);
  if (name == "haar-box") return haar_box(n, seed);
  if (name == "sphere-uniform") return sphere_uniform(n, seed);
  if (name == "annulus") return annulus(n, seed);
  throw ConfigError(kInvalidValue, "unknown fixture '" + name + "'");
}

} // namespace fixtures

// ---------------------------------------------------------------------------
struct ExperimentResult {
  int exit_code = kPass;
  std::string report;                 // report.json content
  std::optional<std::string> witness; // witness.json content on failure
  std::optional<std::pair<std::string, std::string>> csv; // (name, content)
};

namespace detail_exp {

inline void report_header(JsonWriter& w, const ExperimentConfig& cfg) {
  w.key("schema").value(1);
  w.key("experiment").value(cfg.experiment);
  w.key("seed").value(static_cast<long long>(cfg.seed));
  w.key("space").value(cfg.space);
}

inline DiscreteMeasure load_or_fixture(const ExperimentConfig& cfg, const std::string& fallback) {
  if (!cfg.measure.empty()) {
    try {
      return measure_from_json(parse_json_file(cfg.measure));
    } catch (const json::exception& e) {
      throw ConfigError(kMalformedJson, std::string("measure file: ") + e.what());
    }
  }
  std::string name = cfg.fixture.empty() ? fallback : cfg.fixture;
  return fixtures::by_name(name, cfg.n_particles, cfg.seed);
}

inline void write_point(JsonWriter& w, const Point& p) {
  w.begin_object();
  w.key("space").value(p.space);
  w.key("coords").value(p.coords);
  w.end_object();
}

} // namespace detail_exp

// ---------------------------------------------------------------------------
inline ExperimentResult run_theorem1(const ExperimentConfig& cfg) {
  using namespace detail_exp;
  DiscreteMeasure cloud = load_or_fixture(cfg, "square3d");
  Theorem1Config tcfg;
  tcfg.seed = cfg.seed;
  tcfg.eps = cfg.eps == 0.05 ? 0.02 : cfg.eps;
  Theorem1Report rep = theorem1_pipeline(cloud, tcfg);

  ExperimentResult out;
  JsonWriter w;
  w.begin_object();
  report_header(w, cfg);
  w.key("k").value(rep.k);
  w.key("singular_values").value(rep.singular_values);
  w.key("convexity_defect").value(rep.convexity_defect);
  w.key("nondegenerate").value(rep.nondegenerate);
  w.key("singularity_scores").begin_array();
  for (const auto& [h, s] : rep.singularity_scores) {
    w.begin_array();
    w.value(h);
    w.value(s);
    w.end_array();
  }
  w.end_array();
  w.key("pass").value(rep.nondegenerate);
  w.end_object();
  out.report = w.str();
  if (!rep.nondegenerate) {
    out.exit_code = kPropertyFailure;
    JsonWriter ww;
    ww.begin_object();
    ww.key("kind").value("nondegeneracy");
    if (rep.witness) {
      ww.key("center");
      write_point(ww, rep.witness->center);
      ww.key("radius").value(rep.witness->radius);
      ww.key("o");
      write_point(ww, rep.witness->o);
      ww.key("t").value(rep.witness->t);
    }
    ww.end_object();
    out.witness = ww.str();
  }
  return out;
}

// ---------------------------------------------------------------------------
inline ExperimentResult run_mcp(const ExperimentConfig& cfg) {
  using namespace detail_exp;
  std::unique_ptr<Space> sp = make_space(cfg.space);
  std::string fallback = cfg.space.rfind("heis", 0) == 0 ? "haar-box" : "lebesgue-square";
  DiscreteMeasure m = load_or_fixture(cfg, fallback);
  MCPProfile profile = MCPProfile::make(cfg.K, cfg.N);
  MCPOptions opts;
  opts.trials = cfg.trials;
  opts.eps = cfg.eps;
  opts.slack = cfg.slack;
  opts.seed = cfg.seed;
  MCPReport rep = mcp_verify(m, *sp, profile, opts);

  ExperimentResult out;
  JsonWriter w;
  w.begin_object();
  report_header(w, cfg);
  w.key("K").value(cfg.K);
  w.key("N").value(cfg.N);
  w.key("trials").value(rep.trials);
  w.key("slack").value(opts.slack);
  w.key("worst_margin").value(rep.worst_margin);
  w.key("pass").value(rep.pass);
  w.end_object();
  out.report = w.str();

  std::string csv = "t,worst_ratio,bound\n";
  for (const auto& row : rep.t_curve)
    csv += fmt_double(row[0]) + "," + fmt_double(row[1]) + "," + fmt_double(row[2]) + "\n";
  out.csv = {std::string("mcp_curve.csv"), csv};

  if (!rep.pass) {
    out.exit_code = kPropertyFailure;
    JsonWriter ww;
    ww.begin_object();
    ww.key("kind").value("mcp");
    if (rep.worst) {
      ww.key("center");
      write_point(ww, rep.worst->center);
      ww.key("rho").value(rep.worst->rho);
      ww.key("o");
      write_point(ww, rep.worst->o);
      ww.key("t").value(rep.worst->t);
      ww.key("ratio").value(rep.worst->ratio);
      ww.key("bound").value(rep.worst->bound);
      ww.key("confirmed").value(rep.worst->confirmed);
    }
    ww.end_object();
    out.witness = ww.str();
  }
  return out;
}

// ---------------------------------------------------------------------------
inline ExperimentResult run_plan(const ExperimentConfig& cfg) {
  using namespace detail_exp;
  std::unique_ptr<Space> sp;
  InversionPlan plan;
  DiscreteMeasure mu;
  Point center;

  if (!cfg.verify.empty()) {
    try {
      plan = plan_from_json(parse_json_file(cfg.verify));
    } catch (const json::exception& e) {
      throw ConfigError(kMalformedJson, std::string("plan file: ") + e.what());
    }
    mu = plan.coupling.source;
    sp = make_space(plan.center.space.empty() ? cfg.space : plan.center.space);
    center = plan.center;
  } else {
    std::string build = cfg.build.empty() ? "convex" : cfg.build;
    if (build == "convex") {
      mu = load_or_fixture(cfg, "lebesgue-square");
      sp = make_space("r2");
      ConvexBody square = body_from_box({0, 0}, {1, 1});
      center = Point{{0.4, 0.5}, "r2"};
      plan = build_plan_convex_body(square, center, mu);
    } else if (build == "heisenberg") {
      mu = load_or_fixture(cfg, "haar-box");
      sp = make_space("heis1");
      center = Point{{0, 0, 0}, "heis1"};
      plan = build_plan_heisenberg(center, mu);
    } else if (build == "sphere") {
      mu = load_or_fixture(cfg, "sphere-uniform");
      sp = make_space("sphere2");
      center = Point{{0, 0, 1}, "sphere2"};
      plan = build_plan_sphere(center, mu);
    } else {
      throw ConfigError(kInvalidValue, "unknown plan builder '" + build + "'");
    }
    plan.center.space = mu.space;
  }

  if (!cfg.rescale.empty()) {
    std::function<double(const Point&)> f;
    if (cfg.rescale.rfind("constant:", 0) == 0) {
      double c = std::stod(cfg.rescale.substr(9));
      f = [c](const Point&) { return c; };
    } else if (cfg.rescale.rfind("linear:", 0) == 0) {
      std::string rest = cfg.rescale.substr(7);
      auto p1 = rest.find(':');
      auto p2 = rest.find(':', p1 + 1);
      int axis = std::stoi(rest.substr(0, p1));
      double a = std::stod(rest.substr(p1 + 1, p2 - p1 - 1));
      double b = std::stod(rest.substr(p2 + 1));
      f = [axis, a, b](const Point& p) { return std::max(0.0, a + b * p.coords[axis]); };
    } else {
      throw ConfigError(kInvalidValue, "unknown rescale expression '" + cfg.rescale + "'");
    }
    RescaleResult rs = rescale_plan(plan, f);
    plan = rs.plan;
    mu = plan.coupling.source;
  }

  VerifyOptions vo;
  vo.hz_tol = cfg.tolerance;
  vo.cell_size = cfg.cell_size;
  PlanDiagnostics diag = verify_plan(plan, mu, *sp, vo);
  double c_unif = uniformity_constant(plan, mu, cfg.cell_size);
  plan.diagnostics = diag;
  plan.diagnostics.uniformity_constant = c_unif;

  ExperimentResult out;
  JsonWriter w;
  w.begin_object();
  report_header(w, cfg);
  w.key("center").value(plan.center.coords);
  w.key("pairs").value(static_cast<long long>(plan.coupling.pairs.size()));
  w.key("marginal_defect").value(diag.marginal_defect);
  w.key("hz_defect").value(diag.hz_defect);
  w.key("uniformity_constant").value(c_unif);
  w.key("excluded_mass").value(diag.excluded_mass);
  w.key("ac_scores").begin_array();
  for (const auto& [h, s] : diag.ac_scores) {
    w.begin_array();
    w.value(h);
    w.value(s);
    w.end_array();
  }
  w.end_array();
  w.key("pass").value(diag.pass());
  w.end_object();
  out.report = w.str();
  if (!diag.pass()) {
    out.exit_code = kPropertyFailure;
    JsonWriter ww;
    ww.begin_object();
    ww.key("kind").value("plan");
    ww.key("marginal_ok").value(diag.marginal_ok);
    ww.key("hz_ok").value(diag.hz_ok);
    ww.key("ac_ok").value(diag.ac_ok);
    ww.end_object();
    out.witness = ww.str();
  }
  return out;
}

// ---------------------------------------------------------------------------
inline ExperimentResult run_transport(const ExperimentConfig& cfg) {
  using namespace detail_exp;
  std::unique_ptr<Space> sp = make_space(cfg.space);
  DiscreteMeasure mu0, mu1;
  if (!cfg.measure.empty() && !cfg.measure2.empty()) {
    try {
      mu0 = measure_from_json(parse_json_file(cfg.measure));
      mu1 = measure_from_json(parse_json_file(cfg.measure2));
    } catch (const json::exception& e) {
      throw ConfigError(kMalformedJson, std::string("measure file: ") + e.what());
    }
  } else {
    // bundled two-cloud instance
    Rng rng(cfg.seed);
    mu0 = make_measure(cfg.space, sp->dim());
    mu1 = make_measure(cfg.space, sp->dim());
    int n = std::min(cfg.n_particles, 200);
    for (int i = 0; i < n; ++i) {
      std::vector<double> a, b;
      for (int k = 0; k < sp->dim(); ++k) {
        a.push_back(rng.uniform(-1, 1));
        b.push_back(rng.uniform(-1, 1));
      }
      mu0.push_back(a, 1.0 / n);
      mu1.push_back(b, 1.0 / n);
    }
  }
  TransportResult res = solve_w2(mu0, mu1, *sp);
  double dual_defect = dual_certificate_defect(res, *sp);
  DiscreteMeasure mid = interpolate(res, cfg.t, *sp);

  ExperimentResult out;
  JsonWriter w;
  w.begin_object();
  report_header(w, cfg);
  w.key("cost").value(res.cost);
  w.key("w2").value(res.w2());
  w.key("pairs").value(static_cast<long long>(res.coupling.pairs.size()));
  w.key("marginal_defect").value(res.coupling.first_marginal_defect());
  w.key("dual_defect").value(dual_defect);
  w.key("t").value(cfg.t);
  w.key("interpolant_particles").value(static_cast<long long>(mid.size()));
  w.key("pass").value(dual_defect < 1e-7);
  w.end_object();
  out.report = w.str();
  if (dual_defect >= 1e-7) out.exit_code = kPropertyFailure;
  return out;
}

// ---------------------------------------------------------------------------
inline ExperimentResult run_stability(const ExperimentConfig& cfg) {
  using namespace detail_exp;
  DiscreteMeasure mu = load_or_fixture(cfg, "lebesgue-square");
  EuclideanSpace r2(2);
  ConvexBody square = body_from_box({0, 0}, {1, 1});
  Point z{{0.4, 0.5}, "r2"};
  InversionPlan plan = build_plan_convex_body(square, z, mu);
  VerifyOptions vo;
  vo.hz_tol = cfg.tolerance;
  vo.cell_size = cfg.cell_size;
  PlanDiagnostics diag = verify_plan(plan, mu, r2, vo);
  double c0 = uniformity_constant(plan, mu, cfg.cell_size);

  const double h = cfg.snap_h;
  EpsIsometry snap;
  snap.map = [h](const Point& p) {
    Point q = p;
    for (auto& v : q.coords) v = h * std::round(v / h);
    return q;
  };
  snap.radius = 2.0;
  snap.base_src = z;
  snap.base_tgt = snap.map(z);
  snap.eps = 2.0 * h * std::sqrt(2.0);
  DiscreteMeasure snapped = pushforward(mu, [&](std::span<const double> x) {
    return snap.map(Point{std::vector<double>(x.begin(), x.end()), "r2"}).coords;
  });
  EpsIsometryReport iso = check_eps_isometry(snap, mu, snapped, r2, r2, cfg.seed);
  EpsIsometry measured = snap;
  measured.eps = iso.max_distortion;

  PushedPlan pushed = push_plan(plan, measured, r2, diag.hz_defect);
  double c1 = uniformity_constant(pushed.plan, snapped, std::max(cfg.cell_size, 4.0 * h));
  double c0r = uniformity_constant(plan, mu, std::max(cfg.cell_size, 4.0 * h));

  bool hz_ok = pushed.hz_defect <= pushed.hz_bound;
  bool unif_ok = c1 <= 1.1 * c0r;
  ExperimentResult out;
  JsonWriter w;
  w.begin_object();
  report_header(w, cfg);
  w.key("snap_h").value(h);
  w.key("distortion").value(iso.max_distortion);
  w.key("distortion_bound").value(2.0 * h * std::sqrt(2.0));
  w.key("surjectivity_defect").value(iso.surjectivity_defect);
  w.key("measure_defect").value(iso.measure_defect);
  w.key("hz_defect_original").value(diag.hz_defect);
  w.key("hz_defect_pushed").value(pushed.hz_defect);
  w.key("hz_bound").value(pushed.hz_bound);
  w.key("uniformity_original").value(c0);
  w.key("uniformity_reference").value(c0r);
  w.key("uniformity_pushed").value(c1);
  w.key("pass").value(hz_ok && unif_ok);
  w.end_object();
  out.report = w.str();
  if (!(hz_ok && unif_ok)) out.exit_code = kPropertyFailure;
  return out;
}

// ---------------------------------------------------------------------------
inline ExperimentResult run_heis_suite(const ExperimentConfig& cfg) {
  using namespace detail_exp;
  Rng rng(cfg.seed, 0x6e15);
  const int n_round = cfg.trials;

  double worst_round = 0.0;
  for (int i = 0; i < n_round; ++i) {
    heis::GeodesicParam p;
    auto dir = rng.unit_vector(2);
    p.a = {dir[0]};
    p.b = {dir[1]};
    p.v = rng.uniform(-2.0 * heis::kPi + 1e-3, 2.0 * heis::kPi - 1e-3);
    p.r = rng.uniform(0.05, 3.0);
    heis::HeisPoint x = heis::endpoint_map(p);
    heis::HeisPoint y = heis::endpoint_map(heis::invert_endpoint(x));
    worst_round = std::max({worst_round, std::fabs(x.t - y.t), std::fabs(x.xi[0] - y.xi[0]),
                            std::fabs(x.eta[0] - y.eta[0])});
  }

  double worst_orth = 0.0;
  for (int i = 0; i < 1000; ++i) {
    double v = rng.uniform(-2.0 * heis::kPi + 1e-6, 2.0 * heis::kPi - 1e-6);
    if (std::fabs(v) < 1e-6) continue;
    auto A = heis::av_matrix(v);
    worst_orth = std::max({worst_orth, std::fabs(A[0] * A[0] + A[1] * A[1] - 1.0),
                           std::fabs(A[0] * A[2] + A[1] * A[3]),
                           std::fabs(A[2] * A[2] + A[3] * A[3] - 1.0)});
  }

  heis::HeisPoint origin = heis::h1(0, 0, 0);
  double worst_col = 0.0;
  int used = 0;
  for (int i = 0; i < n_round; ++i) {
    heis::HeisPoint x = heis::h1(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                                 rng.uniform(-3.0, 3.0));
    if (x.zeta_norm() < 1e-3 || std::fabs(x.t) < 1e-3) continue;
    ++used;
    heis::HeisPoint lx = heis::lambda_map(x);
    worst_col = std::max(worst_col,
                         std::fabs(heis::cc_distance(x, lx) - heis::cc_distance(x, origin) -
                                   heis::cc_distance(origin, lx)));
  }

  // the worked instance x = Phi(1, pi, 1): distances (1, 1/2, 3/2)
  heis::GeodesicParam wp;
  wp.a = {1.0};
  wp.b = {0.0};
  wp.v = heis::kPi;
  wp.r = 1.0;
  heis::HeisPoint wx = heis::endpoint_map(wp);
  heis::HeisPoint wl = heis::lambda_map(wx);
  double inst_x0 = heis::cc_distance(wx, origin);
  double inst_0l = heis::cc_distance(origin, wl);
  double inst_xl = heis::cc_distance(wx, wl);

  bool pass = worst_round < 1e-9 && worst_orth < 1e-12 && worst_col < 1e-7 &&
              std::fabs(inst_x0 - 1.0) < 1e-7 && std::fabs(inst_0l - 0.5) < 1e-7 &&
              std::fabs(inst_xl - 1.5) < 1e-7;

  ExperimentResult out;
  JsonWriter w;
  w.begin_object();
  report_header(w, cfg);
  w.key("roundtrip_samples").value(n_round);
  w.key("roundtrip_max_err").value(worst_round);
  w.key("av_orthogonality_max_err").value(worst_orth);
  w.key("collinearity_samples").value(used);
  w.key("collinearity_max_residual").value(worst_col);
  w.key("worked_instance").begin_array();
  w.value(inst_x0);
  w.value(inst_0l);
  w.value(inst_xl);
  w.end_array();
  w.key("pass").value(pass);
  w.end_object();
  out.report = w.str();
  if (!pass) out.exit_code = kPropertyFailure;
  return out;
}

// ---------------------------------------------------------------------------
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "theorem1") return run_theorem1(cfg);
  if (cfg.experiment == "mcp") return run_mcp(cfg);
  if (cfg.experiment == "plan") return run_plan(cfg);
  if (cfg.experiment == "transport") return run_transport(cfg);
  if (cfg.experiment == "stability") return run_stability(cfg);
  if (cfg.experiment == "heis-suite") return run_heis_suite(cfg);
  throw ConfigError(kUnknownExperiment, "unknown experiment kind '" + cfg.experiment + "'");
}

} // namespace invplan
