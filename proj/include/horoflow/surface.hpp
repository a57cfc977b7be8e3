#pragma once

// Compact hyperbolic surfaces given by a Dirichlet domain centered at i and its side pairings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "horoflow/errors.hpp"
#include "horoflow/hyperbolic.hpp"
#include "horoflow/quadrature.hpp"

namespace horoflow {

struct FuchsianSurface {
  std::string name;
  /// Side pairings g_0..g_{n-1}.
  std::vector<MoebiusMap> generators;
  /// generators followed by their inverses; words index into this list.
  std::vector<MoebiusMap> pairings;
  /// pairings[k]^{-1} . i, so that d(pairings[k] z, i) = d(z, pairing_targets[k]).
  std::vector<Complex> pairing_targets;
  /// Canonical relator as indices into `pairings` (may be empty for user surfaces).
  std::vector<int> relator;
  Complex center = kI;
  double area = 0.0;
  double declared_area = 0.0;
  double injectivity_radius = 0.0;
  /// Largest distance from the center to a point of the closed domain.
  double domain_radius = 0.0;
  /// Radius used for the stored translate ball.
  double translate_radius = 0.0;
  std::vector<MoebiusMap> translate_ball;
  std::size_t iteration_cap = 10000;

  std::size_t num_pairings() const { return pairings.size(); }
  double max_translate_radius() const { return 3.0 * injectivity_radius; }
};

/// Result of reducing a state into the closed fundamental domain.
struct ReducedPoint {
  CotangentState state;
  /// Pairing indices in the order they were applied.
  std::vector<int> word;
  /// Product of the applied pairings (last applied on the left).
  MoebiusMap element;
};

namespace detail {

struct Hyperboloid {
  double x0, x1, x2;
};

inline Hyperboloid to_hyperboloid(Complex z) {
  const Complex w = to_disk(z);
  const double r2 = std::norm(w);
  const double k = 1.0 / (1.0 - r2);
  return {(1.0 + r2) * k, 2.0 * w.real() * k, 2.0 * w.imag() * k};
}

/// Distance from the center to the Dirichlet boundary along the disk ray of angle theta,
/// together with the index of the pairing whose bisector is hit first.
inline std::pair<double, int> boundary_ray(const std::vector<Complex>& targets, double theta) {
  const double ct = std::cos(theta), st = std::sin(theta);
  double best = std::numeric_limits<double>::infinity();
  int arg = -1;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const Hyperboloid q = to_hyperboloid(targets[k]);
    const double den = q.x1 * ct + q.x2 * st;
    if (den <= 0.0) continue;
    const double th = (q.x0 - 1.0) / den;
    if (th >= 1.0) continue;
    const double r = std::atanh(th);
    if (r < best) {
      best = r;
      arg = static_cast<int>(k);
    }
  }
  return {best, arg};
}

struct CellKey {
  std::int64_t x, y;
  bool operator==(const CellKey&) const = default;
};
struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    return std::hash<std::int64_t>()(k.x * 1000003LL) ^ std::hash<std::int64_t>()(k.y);
  }
};

/// Set of orbit points of i, deduplicated on a fine grid of disk coordinates.
class OrbitIndex {
 public:
  explicit OrbitIndex(double cell = 1e-7) : cell_(cell) {}

  bool insert(Complex z) {
    const Complex w = to_disk(z);
    const CellKey key{static_cast<std::int64_t>(std::floor(w.real() / cell_)),
                      static_cast<std::int64_t>(std::floor(w.imag() / cell_))};
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find({key.x + dx, key.y + dy});
        if (it != cells_.end() && std::abs(it->second - w) < 4.0 * cell_) return false;
      }
    cells_.emplace(key, w);
    return true;
  }

 private:
  double cell_;
  std::unordered_map<CellKey, Complex, CellKeyHash> cells_;
};

}  // namespace detail

/// Breadth-first enumeration of group elements sigma with d(sigma.i, i) <= prune_radius,
/// in order of discovery (deterministic). `keep` filters the returned elements.
template <class Keep>
std::vector<MoebiusMap> enumerate_elements(const FuchsianSurface& surf, double prune_radius,
                                           Keep&& keep) {
  const double prune_cosh = std::cosh(prune_radius) + 1e-9;
  std::vector<MoebiusMap> out;
  detail::OrbitIndex seen;
  std::deque<MoebiusMap> queue{MoebiusMap::identity()};
  seen.insert(kI);
  while (!queue.empty()) {
    const MoebiusMap sigma = queue.front();
    queue.pop_front();
    if (keep(sigma)) out.push_back(sigma);
    for (const auto& p : surf.pairings) {
      const MoebiusMap next = sigma * p;
      const Complex z = next.apply(kI);
      if (cosh_distance(z, kI) > prune_cosh) continue;
      if (seen.insert(z)) queue.push_back(next);
    }
  }
  return out;
}

/// All group elements moving the center by at most `radius`, identity first.
inline std::vector<MoebiusMap> translate_ball(const FuchsianSurface& surf, double radius) {
  if (radius < 0.0) throw ConfigError("translate_ball: negative radius");
  if (radius > surf.max_translate_radius() + 1e-12)
    throw ConfigError("translate_ball: radius " + std::to_string(radius) +
                      " exceeds cap 3 * injectivity radius = " +
                      std::to_string(surf.max_translate_radius()));
  const double cosh_r = std::cosh(radius + 1e-9);
  auto elems = enumerate_elements(surf, radius + surf.domain_radius + 1e-6, [&](const MoebiusMap& s) {
    return cosh_distance(s.apply(kI), kI) <= cosh_r;
  });
  std::stable_sort(elems.begin(), elems.end(), [](const MoebiusMap& x, const MoebiusMap& y) {
    return cosh_distance(x.apply(kI), kI) < cosh_distance(y.apply(kI), kI);
  });
  return elems;
}

/// Elements sigma with d(sigma.p, i) <= radius, paired with the image point sigma.p.
inline std::vector<std::pair<MoebiusMap, Complex>> orbit_near_center(const FuchsianSurface& surf,
                                                                    Complex p, double radius) {
  require_upper_half_plane(p, "orbit_near_center");
  const double dp = hyperbolic_distance(p, kI);
  const double cosh_r = std::cosh(radius + 1e-9);
  std::vector<std::pair<MoebiusMap, Complex>> out;
  enumerate_elements(surf, radius + dp + surf.domain_radius + 1e-6, [&](const MoebiusMap& s) {
    const Complex q = s.apply(p);
    if (cosh_distance(q, kI) <= cosh_r) out.emplace_back(s, q);
    return false;
  });
  return out;
}

namespace detail {

inline double dirichlet_slack(double cosh_here) {
  return 1e-9 * std::sqrt(std::max(cosh_here * cosh_here - 1.0, 0.0));
}

/// Index of the pairing that most decreases the distance to the center by more than the
/// Dirichlet tolerance, or -1. Ties go to the lowest index.
inline int best_descent(const FuchsianSurface& surf, Complex z) {
  const double y = z.imag();
  const double here = 1.0 + std::norm(z - kI) / (2.0 * y);
  double best = here - dirichlet_slack(here);
  int arg = -1;
  for (std::size_t k = 0; k < surf.pairing_targets.size(); ++k) {
    const Complex q = surf.pairing_targets[k];
    const double c = 1.0 + std::norm(z - q) / (2.0 * y * q.imag());
    if (c < best) {
      best = c;
      arg = static_cast<int>(k);
    }
  }
  return arg;
}

[[noreturn]] inline void reduction_overflow(const FuchsianSurface& surf, Complex z0, Complex z) {
  std::ostringstream os;
  os << "reduce_to_domain: no termination after " << surf.iteration_cap << " steps (start " << z0
     << ", current " << z << ")";
  throw InternalError(os.str());
}

}  // namespace detail

/// Closed Dirichlet domain membership with the 1e-9 boundary tolerance.
inline bool in_domain(const FuchsianSurface& surf, Complex z) {
  return detail::best_descent(surf, z) < 0;
}

/// Group element gamma with gamma.z in the domain, plus the number of pairings applied.
inline std::pair<MoebiusMap, std::size_t> reducing_element(const FuchsianSurface& surf,
                                                           Complex z) {
  require_upper_half_plane(z, "reduce_to_domain");
  MoebiusMap gamma;
  std::size_t steps = 0;
  const Complex z0 = z;
  for (int k = detail::best_descent(surf, z); k >= 0; k = detail::best_descent(surf, z)) {
    if (++steps > surf.iteration_cap) detail::reduction_overflow(surf, z0, z);
    gamma = surf.pairings[static_cast<std::size_t>(k)] * gamma;
    z = surf.pairings[static_cast<std::size_t>(k)].apply(z);
  }
  return {gamma, steps};
}

/// Greedy descent toward the center, pushing the covector along.
inline ReducedPoint reduce_to_domain(const FuchsianSurface& surf, const CotangentState& s) {
  require_upper_half_plane(s.z, "reduce_to_domain");
  ReducedPoint out{s, {}, MoebiusMap::identity()};
  const Complex z0 = s.z;
  for (int k = detail::best_descent(surf, out.state.z); k >= 0;
       k = detail::best_descent(surf, out.state.z)) {
    if (out.word.size() >= surf.iteration_cap) detail::reduction_overflow(surf, z0, out.state.z);
    const MoebiusMap& p = surf.pairings[static_cast<std::size_t>(k)];
    out.state = apply_moebius(p, out.state);
    out.element = p * out.element;
    out.word.push_back(k);
  }
  return out;
}

/// Reduces a unit frame by left multiplication.
inline UnitTangentFrame reduce_frame(const FuchsianSurface& surf, const UnitTangentFrame& f,
                                     std::size_t* steps = nullptr) {
  const auto [gamma, n] = reducing_element(surf, f.base());
  if (steps) *steps = n;
  return n == 0 ? f : UnitTangentFrame{gamma * f.g};
}

/// Element represented by a word (first index applied first).
inline MoebiusMap word_element(const FuchsianSurface& surf, const std::vector<int>& word) {
  MoebiusMap m;
  for (int k : word) m = surf.pairings.at(static_cast<std::size_t>(k)) * m;
  return m;
}

/// Distance on the quotient: min over the translates of the second point that can beat the
/// distance between the reduced representatives.
inline double quotient_distance(const FuchsianSurface& surf, Complex z1, Complex z2) {
  const Complex r1 = reducing_element(surf, z1).first.apply(z1);
  const Complex r2 = reducing_element(surf, z2).first.apply(z2);
  const double direct = hyperbolic_distance(r1, r2);
  double best = direct;
  for (const auto& [g, q] : orbit_near_center(surf, r2, hyperbolic_distance(r1, kI) + direct))
    best = std::min(best, hyperbolic_distance(r1, q));
  return best;
}

/// Hyperbolic area of the Dirichlet domain by quadrature in geodesic polar coordinates:
/// integral over theta of (cosh rho(theta) - 1), split at the vertex directions.
inline double dirichlet_area(const std::vector<Complex>& targets, double* max_radius = nullptr) {
  constexpr int kScan = 4096;
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> breaks{0.0};
  int prev = detail::boundary_ray(targets, 0.0).second;
  for (int i = 1; i <= kScan; ++i) {
    const double th = two_pi * i / kScan;
    const int cur = detail::boundary_ray(targets, th).second;
    if (cur != prev) {
      double lo = two_pi * (i - 1) / kScan, hi = th;
      for (int it = 0; it < 80 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        (detail::boundary_ray(targets, mid).second == prev ? lo : hi) = mid;
      }
      breaks.push_back(0.5 * (lo + hi));
      prev = cur;
    }
  }
  breaks.push_back(two_pi);
  double area = 0.0, rmax = 0.0;
  const auto& gl = quad::gauss_legendre(32);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = breaks[i], hi = breaks[i + 1];
    if (hi <= lo) continue;
    for (int p = 0; p < 4; ++p) {
      const double a = lo + (hi - lo) * p / 4.0, b = lo + (hi - lo) * (p + 1) / 4.0;
      area += gl.integrate(
          [&](double th) {
            const double r = detail::boundary_ray(targets, th).first;
            return std::cosh(r) - 1.0;
          },
          a, b);
    }
    rmax = std::max(rmax, detail::boundary_ray(targets, lo).first);
  }
  if (max_radius) *max_radius = rmax;
  return area;
}

/// Builds and validates a surface from side pairings of a Dirichlet domain centered at i.
inline FuchsianSurface make_surface(std::string name, std::vector<MoebiusMap> generators,
                                    std::vector<int> relator, double declared_area) {
  if (generators.empty()) throw ConfigError("surface needs at least one generator", "generators");
  FuchsianSurface s;
  s.name = std::move(name);
  for (auto& g : generators) {
    if (!(g.det() > 0.0)) throw ConfigError("generator with non-positive determinant", "generators");
    g = g.normalized();
    if (!(std::abs(g.trace()) > 2.0)) throw ConfigError("generator is not hyperbolic", "generators");
  }
  s.generators = generators;
  s.pairings = generators;
  for (const auto& g : generators) s.pairings.push_back(g.inverse());
  for (const auto& p : s.pairings) s.pairing_targets.push_back(p.inverse().apply(kI));
  s.relator = std::move(relator);
  if (!s.relator.empty()) {
    MoebiusMap r;
    for (int k : s.relator) {
      if (k < 0 || static_cast<std::size_t>(k) >= s.pairings.size())
        throw ConfigError("relator index out of range", "relator");
      r = r * s.pairings[static_cast<std::size_t>(k)];
    }
    if (projective_distance(r, MoebiusMap::identity()) > 1e-9)
      throw ConfigError("relator does not close to the identity", "relator");
  }
  s.declared_area = declared_area;
  s.area = dirichlet_area(s.pairing_targets, &s.domain_radius);
  if (!std::isfinite(s.area) || std::abs(s.area - declared_area) > 1e-6)
    throw ConfigError("domain area " + std::to_string(s.area) + " differs from declared " +
                          std::to_string(declared_area),
                      "area");

  // Half the systole. A shortest closed geodesic crosses the domain, so one of its conjugates
  // moves the center by at most (its length + 2 * domain radius).
  double shortest = std::numeric_limits<double>::infinity();
  for (const auto& g : generators) shortest = std::min(shortest, 2.0 * std::acosh(std::abs(g.trace()) / 2.0));
  const double search = shortest + 2.0 * s.domain_radius;
  enumerate_elements(s, search + s.domain_radius, [&](const MoebiusMap& g) {
    const double tr = std::abs(g.trace());
    if (tr > 2.0 + 1e-9 && cosh_distance(g.apply(kI), kI) <= std::cosh(search))
      shortest = std::min(shortest, 2.0 * std::acosh(tr / 2.0));
    return false;
  });
  s.injectivity_radius = 0.5 * shortest;
  s.translate_radius = 2.0 * s.injectivity_radius;
  s.translate_ball = translate_ball(s, s.translate_radius);
  return s;
}

/// Genus-two Bolza surface: regular octagon with vertex angle pi/4, opposite sides paired by
/// rotations (by k pi / 4 in the disk) of the translation along the disk's real axis of length
/// 2 arccosh(1 + sqrt 2).
inline FuchsianSurface build_bolza() {
  const double ell = 2.0 * std::acosh(1.0 + std::numbers::sqrt2);
  const MoebiusMap translation = geodesic_element(ell);
  std::vector<MoebiusMap> gens;
  for (int k = 0; k < 4; ++k) {
    const MoebiusMap r = rotation_element(k * std::numbers::pi / 8.0);
    gens.push_back(r * translation * r.inverse());
  }
  // g0 g1^-1 g2 g3^-1 g0^-1 g1 g2^-1 g3
  return make_surface("bolza", gens, {0, 5, 2, 7, 4, 1, 6, 3}, 4.0 * std::numbers::pi);
}

}  // namespace horoflow
