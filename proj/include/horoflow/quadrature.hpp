#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numbers>
#include <utility>
#include <vector>

namespace horoflow::quad {

/// Gauss-Legendre nodes and weights on [-1, 1], Newton iteration on P_n.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(std::size_t n) : nodes(n), weights(n) {
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                          (static_cast<double>(n) + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
          p0 = p1;
          p1 = pk;
        }
        if (n == 1) p0 = 1.0;
        dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }

  std::size_t size() const { return nodes.size(); }

  template <class F>
  auto integrate(F&& f, double lo, double hi) const {
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    auto acc = f(mid + half * nodes[0]) * weights[0];
    for (std::size_t i = 1; i < nodes.size(); ++i) acc += f(mid + half * nodes[i]) * weights[i];
    return acc * half;
  }
};

inline const GaussLegendre& gauss_legendre(std::size_t n) {
  static const std::array<GaussLegendre, 4> cache{GaussLegendre(4), GaussLegendre(8),
                                                  GaussLegendre(16), GaussLegendre(32)};
  for (const auto& g : cache)
    if (g.size() == n) return g;
  static thread_local std::deque<GaussLegendre> extra;
  for (const auto& g : extra)
    if (g.size() == n) return g;
  extra.emplace_back(n);
  return extra.back();
}

/// Composite rule over `panels` equal panels.
template <class F>
double composite(F&& f, double lo, double hi, std::size_t panels, std::size_t order = 8) {
  const auto& gl = gauss_legendre(order);
  const double w = (hi - lo) / static_cast<double>(panels);
  double acc = 0.0;
  for (std::size_t p = 0; p < panels; ++p)
    acc += gl.integrate(f, lo + w * static_cast<double>(p), lo + w * static_cast<double>(p + 1));
  return acc;
}

}  // namespace horoflow::quad
