#pragma once

// Space-agnostic measure, coupling and geodesic abstractions: weighted
// particle clouds with optional analytic descriptors, couplings with declared
// marginals, the metric-ball neighborhood estimator and grid singularity
// detectors shared by every model space.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "invplan/jsonio.hpp"
#include "invplan/linalg.hpp"

namespace invplan {

inline constexpr double kWeightTol = 1e-12;

struct Point {
  std::vector<double> coords;
  std::string space;
};

inline void require_finite(std::span<const double> x, const char* what) {
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite coordinate");
}

// ---------------------------------------------------------------------------
// Analytic descriptors: exact fast paths for measures whose law is known in
// closed form; the particle cloud is always present as the universal fallback.
struct Descriptor {
  std::string kind; // uniform-body | sphere-surface | cone-surface | haar-box | atom-list
  std::vector<double> box_lo, box_hi; // uniform-body (box) and haar-box
  std::vector<double> ball_center;    // uniform-body (ball)
  double ball_radius = -1.0;
  double density = 1.0; // mass per unit volume for uniform laws
  double theta = 0.0;   // cone-surface opening angle

  bool is_box() const { return !box_lo.empty(); }
  bool is_ball() const { return ball_radius > 0.0; }

  double box_volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < box_lo.size(); ++i) v *= (box_hi[i] - box_lo[i]);
    return v;
  }
};

// ---------------------------------------------------------------------------
struct DiscreteMeasure {
  std::string space;
  int dim = 0;
  std::vector<double> coords; // n * dim, row-major
  std::vector<double> weights;
  std::optional<Descriptor> descriptor;
  double total_mass = 0.0;

  std::size_t size() const { return weights.size(); }

  std::span<const double> at(std::size_t i) const {
    return {coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }

  Point point(std::size_t i) const {
    auto s = at(i);
    return Point{std::vector<double>(s.begin(), s.end()), space};
  }

  void push_back(std::span<const double> x, double w) {
    if (static_cast<int>(x.size()) != dim) throw std::invalid_argument("push_back: dimension mismatch");
    coords.insert(coords.end(), x.begin(), x.end());
    weights.push_back(w);
    total_mass += w;
  }

  void recompute_mass() {
    total_mass = 0.0;
    for (double w : weights) total_mass += w;
  }

  void validate() const {
    if (coords.size() != weights.size() * static_cast<std::size_t>(dim))
      throw std::invalid_argument("measure: coords/weights size mismatch");
    double s = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("measure: negative weight");
      s += w;
    }
    require_finite(coords, "measure");
    double scale = std::max(1.0, std::fabs(s));
    if (std::fabs(s - total_mass) > kWeightTol * scale)
      throw std::invalid_argument("measure: total_mass out of tolerance");
  }
};

inline DiscreteMeasure make_measure(const std::string& space, int dim) {
  DiscreteMeasure m;
  m.space = space;
  m.dim = dim;
  return m;
}

// ---------------------------------------------------------------------------
struct CouplingPair {
  std::uint32_t src = 0, tgt = 0;
  double w = 0.0;
};

struct Coupling {
  DiscreteMeasure source;
  std::string target_space;
  int target_dim = 0;
  std::vector<double> target_coords; // m * target_dim
  std::vector<CouplingPair> pairs;

  std::size_t target_count() const {
    return target_dim == 0 ? 0 : target_coords.size() / static_cast<std::size_t>(target_dim);
  }

  std::span<const double> target_at(std::size_t j) const {
    return {target_coords.data() + j * static_cast<std::size_t>(target_dim),
            static_cast<std::size_t>(target_dim)};
  }

  double total_weight() const {
    double s = 0.0;
    for (const auto& p : pairs) s += p.w;
    return s;
  }

  // max particle-wise defect of the first marginal against the source weights
  double first_marginal_defect() const {
    std::vector<double> acc(source.size(), 0.0);
    for (const auto& p : pairs) {
      if (p.src >= source.size() || p.tgt >= target_count())
        throw std::invalid_argument("coupling: pair index out of range");
      if (!(p.w >= 0.0)) throw std::invalid_argument("coupling: negative pair weight");
      acc[p.src] += p.w;
    }
    double defect = 0.0;
    for (std::size_t i = 0; i < acc.size(); ++i)
      defect = std::max(defect, std::fabs(acc[i] - source.weights[i]));
    return defect;
  }

  void validate() const {
    double scale = std::max(1.0, source.total_mass);
    if (first_marginal_defect() > kWeightTol * scale)
      throw std::invalid_argument("coupling: first marginal does not match source");
  }
};

// ---------------------------------------------------------------------------
// Model-space interface over raw coordinate vectors. Implementations live in
// euclid.hpp / modelspaces.hpp / heisenberg.hpp and are assembled by
// spaces.hpp; everything here treats the space as an opaque geodesic metric.
struct Space {
  virtual ~Space() = default;
  virtual std::string tag() const = 0;
  virtual int dim() const = 0;
  virtual double distance(std::span<const double> a, std::span<const double> b) const = 0;

  // Constant-speed geodesic from a to b at time t in [0,1]. When the
  // minimizing geodesic is not unique a canonical branch is evaluated and
  // *unique is cleared; spaces with genuinely impassable pairs throw.
  virtual std::vector<double> geodesic(std::span<const double> a, std::span<const double> b,
                                       double t, bool* unique = nullptr) const = 0;

  // Axis-aligned raw-coordinate window guaranteed to contain B_eps(c).
  virtual void ball_window(std::span<const double> c, double eps, double* lo, double* hi) const = 0;

  // Whether the geodesic a -> b extends strictly past b inside the space.
  virtual bool extends_past(std::span<const double> a, std::span<const double> b) const = 0;

  // e_0(e_t^{-1}({a}) \cap Geo(o)): the point contracting onto a at time t,
  // when it exists in the space.
  virtual std::optional<std::vector<double>> contraction_preimage(std::span<const double> a,
                                                                  std::span<const double> o,
                                                                  double t) const {
    (void)a;
    (void)o;
    (void)t;
    return std::nullopt;
  }

  std::vector<double> contract_toward(std::span<const double> x, std::span<const double> o,
                                      double t, bool* unique = nullptr) const {
    return geodesic(x, o, t, unique);
  }
};

// ---------------------------------------------------------------------------
struct GeodesicSegment {
  Point a, b;
  double length = 0.0;
  bool unique = true;
  std::function<Point(double)> eval;
};

inline GeodesicSegment make_segment(const Space& sp, const Point& a, const Point& b) {
  GeodesicSegment seg;
  seg.a = a;
  seg.b = b;
  seg.length = sp.distance(a.coords, b.coords);
  bool uniq = true;
  (void)sp.geodesic(a.coords, b.coords, 0.5, &uniq);
  seg.unique = uniq;
  std::string tag = sp.tag();
  const Space* spp = &sp;
  std::vector<double> ac = a.coords, bc = b.coords;
  seg.eval = [spp, ac, bc, tag](double t) {
    return Point{spp->geodesic(ac, bc, t), tag};
  };
  return seg;
}

// ---------------------------------------------------------------------------
// pushforward: realizes the sharp operator f_# m. Total mass is preserved
// bit-exactly because weights are copied untouched.
inline DiscreteMeasure pushforward(const DiscreteMeasure& m,
                                   const std::function<std::vector<double>(std::span<const double>)>& map,
                                   const std::string& out_space = "", int out_dim = -1) {
  DiscreteMeasure out;
  out.space = out_space.empty() ? m.space : out_space;
  out.dim = out_dim < 0 ? m.dim : out_dim;
  out.weights = m.weights;
  out.total_mass = m.total_mass;
  out.coords.reserve(m.size() * static_cast<std::size_t>(out.dim));
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::vector<double> y = map(m.at(i));
    if (static_cast<int>(y.size()) != out.dim)
      throw std::invalid_argument("pushforward: map changed dimension at particle " + std::to_string(i));
    for (double v : y)
      if (!std::isfinite(v))
        throw std::invalid_argument("pushforward: non-finite image at particle " + std::to_string(i));
    out.coords.insert(out.coords.end(), y.begin(), y.end());
  }
  return out;
}

enum class MarginalSide { First, Second };

inline DiscreteMeasure marginal(const Coupling& c, MarginalSide side) {
  DiscreteMeasure out;
  if (side == MarginalSide::First) {
    out = make_measure(c.source.space, c.source.dim);
    out.coords = c.source.coords;
    out.weights.assign(c.source.size(), 0.0);
    for (const auto& p : c.pairs) out.weights[p.src] += p.w;
  } else {
    out = make_measure(c.target_space, c.target_dim);
    out.coords = c.target_coords;
    out.weights.assign(c.target_count(), 0.0);
    for (const auto& p : c.pairs) out.weights[p.tgt] += p.w;
  }
  out.recompute_mass();
  return out;
}

// ---------------------------------------------------------------------------
// Uniform grid index over raw coordinates. Cell side defaults to the query
// radius; windows come from the space so metric balls are never clipped.
class NeighborIndex {
public:
  NeighborIndex(const DiscreteMeasure& m, const Space& sp, double cell)
      : m_(&m), sp_(&sp), dimension_(m.dim) {
    if (!(cell > 0.0)) throw std::invalid_argument("NeighborIndex: cell must be > 0");
    cell_.assign(dimension_, cell);
    // widen per-axis cells to the window the space needs for radius `cell`
    if (m.size() > 0) {
      std::vector<double> lo(dimension_), hi(dimension_);
      sp.ball_window(m.at(0), cell, lo.data(), hi.data());
      for (int k = 0; k < dimension_; ++k)
        cell_[k] = std::max(cell_[k], 0.5 * (hi[k] - lo[k]));
    }
    for (std::size_t i = 0; i < m.size(); ++i) grid_[key_of(m.at(i))].push_back(static_cast<std::uint32_t>(i));
    stamp_.assign(m.size(), 0);
  }

  // Sum of weights of particles within distance eps of any probe point.
  double mass_near(const std::vector<std::span<const double>>& probes, double eps) const {
    ++epoch_;
    double mass = 0.0;
    std::vector<std::int64_t> clo(dimension_), chi(dimension_), cur(dimension_);
    std::vector<double> lo(dimension_), hi(dimension_);
    for (auto p : probes) {
      sp_->ball_window(p, eps, lo.data(), hi.data());
      for (int k = 0; k < dimension_; ++k) {
        clo[k] = cell_index(lo[k], k);
        chi[k] = cell_index(hi[k], k);
        cur[k] = clo[k];
      }
      while (true) {
        auto it = grid_.find(hash_cells(cur));
        if (it != grid_.end()) {
          for (std::uint32_t idx : it->second) {
            if (stamp_[idx] == epoch_) continue;
            if (sp_->distance(p, m_->at(idx)) <= eps) {
              stamp_[idx] = epoch_;
              mass += m_->weights[idx];
            }
          }
        }
        int k = 0;
        for (; k < dimension_; ++k) {
          if (++cur[k] <= chi[k]) break;
          cur[k] = clo[k];
        }
        if (k == dimension_) break;
      }
    }
    return mass;
  }

  // Exact nearest-particle distance from probe (expanding ring search).
  double nearest_distance(std::span<const double> p) const {
    if (m_->size() == 0) return std::numeric_limits<double>::infinity();
    double r = cell_[0];
    for (int iter = 0; iter < 64; ++iter) {
      double best = std::numeric_limits<double>::infinity();
      std::vector<double> lo(dimension_), hi(dimension_);
      sp_->ball_window(p, r, lo.data(), hi.data());
      std::vector<std::int64_t> clo(dimension_), chi(dimension_), cur(dimension_);
      for (int k = 0; k < dimension_; ++k) {
        clo[k] = cell_index(lo[k], k);
        chi[k] = cell_index(hi[k], k);
        cur[k] = clo[k];
      }
      while (true) {
        auto it = grid_.find(hash_cells(cur));
        if (it != grid_.end())
          for (std::uint32_t idx : it->second) best = std::min(best, sp_->distance(p, m_->at(idx)));
        int k = 0;
        for (; k < dimension_; ++k) {
          if (++cur[k] <= chi[k]) break;
          cur[k] = clo[k];
        }
        if (k == dimension_) break;
      }
      if (best <= r) return best;
      r *= 2.0;
    }
    // degenerate spread; fall back to a linear scan
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m_->size(); ++i) best = std::min(best, sp_->distance(p, m_->at(i)));
    return best;
  }

private:
  std::int64_t cell_index(double x, int axis) const {
    return static_cast<std::int64_t>(std::floor(x / cell_[axis]));
  }
  std::uint64_t key_of(std::span<const double> x) const {
    std::vector<std::int64_t> c(dimension_);
    for (int k = 0; k < dimension_; ++k) c[k] = cell_index(x[k], k);
    return hash_cells(c);
  }
  static std::uint64_t hash_cells(const std::vector<std::int64_t>& c) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::int64_t v : c) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  const DiscreteMeasure* m_;
  const Space* sp_;
  int dimension_;
  std::vector<double> cell_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid_;
  mutable std::vector<std::uint32_t> stamp_;
  mutable std::uint32_t epoch_ = 0;
};

inline double eps_neighborhood_mass(const DiscreteMeasure& m, const Space& sp,
                                    const std::vector<Point>& probe_set, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps_neighborhood_mass: eps must be > 0");
  if (probe_set.empty()) throw std::invalid_argument("eps_neighborhood_mass: empty probe set");
  for (const auto& p : probe_set)
    if (p.space != m.space)
      throw std::invalid_argument("eps_neighborhood_mass: mixed space tags (" + p.space + " vs " + m.space + ")");
  NeighborIndex index(m, sp, eps);
  std::vector<std::span<const double>> probes;
  probes.reserve(probe_set.size());
  for (const auto& p : probe_set) probes.emplace_back(p.coords);
  return index.mass_near(probes, eps);
}

// ---------------------------------------------------------------------------
// Grid cell bookkeeping shared by the singularity detectors.
namespace detail {

struct CellGrid {
  std::vector<double> lo;
  double h = 0.0;
  int dim = 0;

  std::uint64_t key_of(std::span<const double> x) const {
    std::uint64_t h64 = 0xcbf29ce484222325ull;
    for (int k = 0; k < dim; ++k) {
      auto c = static_cast<std::int64_t>(std::floor((x[k] - lo[k]) / h));
      h64 ^= static_cast<std::uint64_t>(c) + 0x9e3779b97f4a7c15ull;
      h64 *= 0x100000001b3ull;
    }
    return h64;
  }

  void cell_bounds(std::span<const double> x, double* clo, double* chi) const {
    for (int k = 0; k < dim; ++k) {
      auto c = std::floor((x[k] - lo[k]) / h);
      clo[k] = lo[k] + c * h;
      chi[k] = clo[k] + h;
    }
  }
};

inline bool analytic_reference(const DiscreteMeasure& mu) {
  return mu.descriptor && mu.descriptor->kind != "atom-list";
}

inline CellGrid make_cell_grid(const DiscreteMeasure& m, const DiscreteMeasure& mu, double cell_size,
                               double cell_cap) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("singularity_score: cell_size must be > 0");
  if (m.space != mu.space || m.dim != mu.dim)
    throw std::invalid_argument("singularity_score: measures live in different spaces");
  int d = m.dim;
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  auto absorb = [&](const DiscreteMeasure& x) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto p = x.at(i);
      for (int k = 0; k < d; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    }
  };
  absorb(m);
  absorb(mu);
  // The dense cell-count cap guards cloud references against meaninglessly
  // fine resolutions; analytic descriptors answer positivity at any scale (and
  // only occupied cells are ever materialized), so they skip it.
  if (!analytic_reference(mu)) {
    double cells = 1.0;
    for (int k = 0; k < d; ++k) cells *= std::max(1.0, std::ceil((hi[k] - lo[k]) / cell_size) + 1.0);
    if (cells > cell_cap)
      throw std::invalid_argument("singularity_score: cell count " + std::to_string(cells) +
                                  " exceeds cap " + std::to_string(cell_cap));
  }
  return CellGrid{lo, cell_size, d};
}

// Does the reference measure charge this cell? Analytic descriptors answer
// from the law itself; otherwise cell occupancy of the particle cloud decides.
inline bool reference_charges_cell(const DiscreteMeasure& mu,
                                   const std::unordered_set<std::uint64_t>& mu_cells,
                                   const CellGrid& grid, std::span<const double> rep,
                                   std::uint64_t cell_key) {
  if (mu.descriptor) {
    const Descriptor& de = *mu.descriptor;
    int d = grid.dim;
    std::vector<double> clo(d), chi(d);
    grid.cell_bounds(rep, clo.data(), chi.data());
    if (de.kind == "haar-box" || de.kind == "cone-surface") {
      // the Haar class (and the cone chart) is globally positive
      return true;
    }
    if (de.kind == "uniform-body" && de.is_box()) {
      for (int k = 0; k < d; ++k)
        if (std::min(chi[k], de.box_hi[k]) - std::max(clo[k], de.box_lo[k]) <= 0.0) return false;
      return true;
    }
    if (de.kind == "uniform-body" && de.is_ball()) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        double c = std::clamp(de.ball_center[k], clo[k], chi[k]);
        double dd = de.ball_center[k] - c;
        s += dd * dd;
      }
      return std::sqrt(s) < de.ball_radius;
    }
    if (de.kind == "sphere-surface") {
      double dmin2 = 0.0, dmax2 = 0.0;
      for (int k = 0; k < d; ++k) {
        double a = std::fabs(clo[k]), b = std::fabs(chi[k]);
        double far = std::max(a, b);
        double near = (clo[k] <= 0.0 && chi[k] >= 0.0) ? 0.0 : std::min(a, b);
        dmin2 += near * near;
        dmax2 += far * far;
      }
      return dmin2 <= 1.0 && dmax2 >= 1.0;
    }
    // atom-list descriptors fall through to particle occupancy
  }
  return mu_cells.count(cell_key) > 0;
}

} // namespace detail

// ---------------------------------------------------------------------------
// singularity_score: mass of m sitting in grid cells the reference never
// charges. A decreasing trend under cell halving signals m << mu; a stable
// positive score signals singular mass.
inline double singularity_score(const DiscreteMeasure& m, const DiscreteMeasure& mu, double cell_size,
                                double cell_cap = 134217728.0) {
  detail::CellGrid grid = detail::make_cell_grid(m, mu, cell_size, cell_cap);
  std::unordered_set<std::uint64_t> mu_cells;
  if (!mu.descriptor || mu.descriptor->kind == "atom-list")
    for (std::size_t i = 0; i < mu.size(); ++i)
      if (mu.weights[i] > 0.0) mu_cells.insert(grid.key_of(mu.at(i)));
  double score = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.weights[i] <= 0.0) continue;
    auto p = m.at(i);
    std::uint64_t key = grid.key_of(p);
    if (!detail::reference_charges_cell(mu, mu_cells, grid, p, key)) score += m.weights[i];
  }
  return score;
}

// concentration_score: singular mass by the empty-cell rule plus mass in
// cells whose share of m exceeds ratio_k times the reference share. Catches
// atoms and density blow-ups sitting inside the support of the reference.
inline double concentration_score(const DiscreteMeasure& m, const DiscreteMeasure& mu, double cell_size,
                                  double ratio_k = 50.0, double cell_cap = 134217728.0) {
  detail::CellGrid grid = detail::make_cell_grid(m, mu, cell_size, cell_cap);
  std::unordered_map<std::uint64_t, double> m_cells, mu_cells_mass;
  std::unordered_set<std::uint64_t> mu_cells;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.weights[i] > 0.0) m_cells[grid.key_of(m.at(i))] += m.weights[i];
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (mu.weights[i] > 0.0) {
      std::uint64_t k = grid.key_of(mu.at(i));
      mu_cells_mass[k] += mu.weights[i];
      mu_cells.insert(k);
    }
  double m_tot = std::max(m.total_mass, 1e-300);
  double mu_tot = std::max(mu.total_mass, 1e-300);

  // reference cell share for analytic uniform laws: Lebesgue share of the cell
  const bool analytic_uniform =
      mu.descriptor && (mu.descriptor->kind == "haar-box" ||
                        (mu.descriptor->kind == "uniform-body" && mu.descriptor->is_box()));
  double cell_vol_share = 0.0;
  if (analytic_uniform) {
    double v = mu.descriptor->box_volume();
    double cv = 1.0;
    for (int k = 0; k < grid.dim; ++k) cv *= cell_size;
    cell_vol_share = cv / std::max(v, 1e-300);
  }

  double score = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.weights[i] <= 0.0) continue;
    auto p = m.at(i);
    std::uint64_t key = grid.key_of(p);
    if (!detail::reference_charges_cell(mu, mu_cells, grid, p, key)) {
      score += m.weights[i];
      continue;
    }
    double share;
    if (analytic_uniform) {
      share = cell_vol_share;
    } else {
      auto it = mu_cells_mass.find(key);
      share = it == mu_cells_mass.end() ? 0.0 : it->second / mu_tot;
    }
    double m_share = m_cells[key] / m_tot;
    if (share <= 0.0 || m_share > ratio_k * share) score += m.weights[i];
  }
  return score;
}

// ---------------------------------------------------------------------------
// Measure / coupling file formats (floats at 17 significant digits).
inline void write_descriptor(JsonWriter& w, const std::optional<Descriptor>& d) {
  if (!d) {
    w.null();
    return;
  }
  w.begin_object();
  w.key("kind").value(d->kind);
  if (d->is_box()) {
    w.key("box_lo").value(d->box_lo);
    w.key("box_hi").value(d->box_hi);
  }
  if (d->is_ball()) {
    w.key("ball_center").value(d->ball_center);
    w.key("ball_radius").value(d->ball_radius);
  }
  w.key("density").value(d->density);
  if (d->kind == "cone-surface") w.key("theta").value(d->theta);
  w.end_object();
}

inline std::string measure_to_json(const DiscreteMeasure& m) {
  JsonWriter w;
  w.begin_object();
  w.key("space").value(m.space);
  w.key("particles").begin_array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    w.begin_array();
    auto p = m.at(i);
    w.value(std::vector<double>(p.begin(), p.end()));
    w.value(m.weights[i]);
    w.end_array();
  }
  w.end_array();
  w.key("descriptor");
  write_descriptor(w, m.descriptor);
  w.end_object();
  return w.str();
}

inline DiscreteMeasure measure_from_json(const json& j) {
  DiscreteMeasure m;
  m.space = j.at("space").get<std::string>();
  const auto& parts = j.at("particles");
  if (!parts.is_array()) throw std::invalid_argument("measure: particles must be an array");
  for (const auto& e : parts) {
    std::vector<double> x = e.at(0).get<std::vector<double>>();
    double w = e.at(1).get<double>();
    if (m.dim == 0) m.dim = static_cast<int>(x.size());
    m.push_back(x, w);
  }
  if (j.contains("descriptor") && !j.at("descriptor").is_null()) {
    const auto& dj = j.at("descriptor");
    Descriptor d;
    d.kind = dj.at("kind").get<std::string>();
    if (dj.contains("box_lo")) {
      d.box_lo = dj.at("box_lo").get<std::vector<double>>();
      d.box_hi = dj.at("box_hi").get<std::vector<double>>();
    }
    if (dj.contains("ball_radius")) {
      d.ball_center = dj.at("ball_center").get<std::vector<double>>();
      d.ball_radius = dj.at("ball_radius").get<double>();
    }
    if (dj.contains("density")) d.density = dj.at("density").get<double>();
    if (dj.contains("theta")) d.theta = dj.at("theta").get<double>();
    m.descriptor = d;
  }
  m.validate();
  return m;
}

inline std::string coupling_to_json(const Coupling& c) {
  JsonWriter w;
  w.begin_object();
  w.key("pairs").begin_array();
  for (const auto& p : c.pairs) {
    w.begin_array();
    w.value(static_cast<long long>(p.src));
    w.value(static_cast<long long>(p.tgt));
    w.value(p.w);
    w.end_array();
  }
  w.end_array();
  w.key("source").raw(measure_to_json(c.source));
  w.key("target_space").value(c.target_space);
  w.key("targets").begin_array();
  for (std::size_t j = 0; j < c.target_count(); ++j) {
    auto t = c.target_at(j);
    w.value(std::vector<double>(t.begin(), t.end()));
  }
  w.end_array();
  w.end_object();
  return w.str();
}

inline Coupling coupling_from_json(const json& j) {
  Coupling c;
  c.source = measure_from_json(j.at("source"));
  c.target_space = j.at("target_space").get<std::string>();
  for (const auto& e : j.at("targets")) {
    std::vector<double> x = e.get<std::vector<double>>();
    if (c.target_dim == 0) c.target_dim = static_cast<int>(x.size());
    c.target_coords.insert(c.target_coords.end(), x.begin(), x.end());
  }
  for (const auto& e : j.at("pairs")) {
    CouplingPair p;
    p.src = e.at(0).get<std::uint32_t>();
    p.tgt = e.at(1).get<std::uint32_t>();
    p.w = e.at(2).get<double>();
    c.pairs.push_back(p);
  }
  return c;
}

} // namespace invplan
