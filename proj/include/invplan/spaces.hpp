#pragma once

// Space adapters and the tag registry. Raw coordinate layouts:
//   r<d>      -> (x_1..x_d)
//   sphere2   -> unit 3-vector
//   cone:<t>  -> (r, phi)
//   heis<n>   -> (xi_1..xi_n, eta_1..eta_n, t)

#include <memory>
#include <string>

#include "invplan/core.hpp"
#include "invplan/euclid.hpp"
#include "invplan/heisenberg.hpp"
#include "invplan/modelspaces.hpp"

namespace invplan {

inline heis::HeisPoint to_heis(std::span<const double> x) {
  int n = (static_cast<int>(x.size()) - 1) / 2;
  heis::HeisPoint p;
  p.xi.assign(x.begin(), x.begin() + n);
  p.eta.assign(x.begin() + n, x.begin() + 2 * n);
  p.t = x[2 * n];
  return p;
}

inline std::vector<double> from_heis(const heis::HeisPoint& p) {
  std::vector<double> out;
  out.reserve(2 * p.n() + 1);
  out.insert(out.end(), p.xi.begin(), p.xi.end());
  out.insert(out.end(), p.eta.begin(), p.eta.end());
  out.push_back(p.t);
  return out;
}

class HeisenbergSpace final : public Space {
public:
  explicit HeisenbergSpace(int n) : n_(n), tag_("heis" + std::to_string(n)) {}

  std::string tag() const override { return tag_; }
  int dim() const override { return 2 * n_ + 1; }
  int group_n() const { return n_; }

  double distance(std::span<const double> a, std::span<const double> b) const override {
    return heis::cc_distance(to_heis(a), to_heis(b));
  }

  std::vector<double> geodesic(std::span<const double> a, std::span<const double> b, double t,
                               bool* unique) const override {
    // source-anchored canonical branch: translate a to the origin and walk
    // the chart geodesic toward b
    heis::HeisPoint ha = to_heis(a);
    heis::HeisPoint w = heis::group_mul(heis::group_inv(ha), to_heis(b));
    if (w.is_origin()) {
      if (unique) *unique = true;
      return std::vector<double>(a.begin(), a.end());
    }
    heis::GeodesicParam p = heis::invert_endpoint(w);
    if (unique) *unique = !p.non_unique;
    return from_heis(heis::group_mul(ha, heis::geodesic_point(p, t * p.r)));
  }

  void ball_window(std::span<const double> c, double eps, double* lo, double* hi) const override {
    // |zeta difference| <= eps componentwise; group t-difference obeys
    // |dt| <= eps^2/pi, and the raw t window picks up the twist 2|zeta||dzeta|.
    double zn = 0.0;
    for (int k = 0; k < 2 * n_; ++k) zn += c[k] * c[k];
    zn = std::sqrt(zn);
    for (int k = 0; k < 2 * n_; ++k) {
      lo[k] = c[k] - eps;
      hi[k] = c[k] + eps;
    }
    double tw = eps * eps / heis::kPi + 2.0 * zn * eps + 1e-15;
    lo[2 * n_] = c[2 * n_] - tw;
    hi[2 * n_] = c[2 * n_] + tw;
  }

  bool extends_past(std::span<const double> a, std::span<const double> b) const override {
    return heis::extends_past(to_heis(a), to_heis(b));
  }

  std::optional<std::vector<double>> contraction_preimage(std::span<const double> a,
                                                          std::span<const double> o,
                                                          double t) const override {
    auto p = heis::expand_from(to_heis(a), to_heis(o), t);
    if (!p) return std::nullopt;
    return from_heis(*p);
  }

private:
  int n_;
  std::string tag_;
};

// ---------------------------------------------------------------------------
inline std::unique_ptr<Space> make_space(const std::string& tag) {
  if (tag.rfind("r", 0) == 0 && tag.size() > 1 && std::isdigit(static_cast<unsigned char>(tag[1]))) {
    int d = std::stoi(tag.substr(1));
    if (d >= 1 && d <= 64) return std::make_unique<EuclideanSpace>(d);
  }
  if (tag == "sphere2") return std::make_unique<SphereSpace>();
  if (tag.rfind("heis", 0) == 0) {
    int n = std::stoi(tag.substr(4));
    if (n >= 1 && n <= 8) return std::make_unique<HeisenbergSpace>(n);
  }
  if (tag.rfind("cone:", 0) == 0) {
    double theta = std::stod(tag.substr(5));
    return std::make_unique<ConeSpace>(theta);
  }
  throw std::invalid_argument("make_space: unknown space tag '" + tag + "'");
}

} // namespace invplan
