#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "horoflow/fields.hpp"
#include "horoflow/hyperbolic.hpp"
#include "horoflow/surface.hpp"

namespace horoflow::test {

// Independent oracle: adaptive Simpson on the universal cover, no reduction of the orbit and
// no Gauss-Legendre panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                      double whole, double tol, int depth) {
  const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  // Unit subintervals keep the recursion local to each feature.
  double total = 0.0;
  for (double lo = a; lo < b; lo += 1.0) {
    const double hi = std::min(b, lo + 1.0);
    const double fa = f(lo), fm = f(0.5 * (lo + hi)), fb = f(hi);
    total += simpson(f, lo, hi, fa, fm, fb, (hi - lo) / 6.0 * (fa + 4.0 * fm + fb), tol / (b - a), 40);
  }
  return total;
}

// The orbit is advanced exactly in unit steps and re-reduced at integer times, so the frame
// entries stay bounded; within a step the exact flow is applied from the reduced frame.
inline double oracle_L(const CotangentState& rho, const Potential& W, double T) {
  const FuchsianSurface& surf = potential_surface(W);
  std::vector<UnitTangentFrame> marks{reduce_frame(surf, state_to_frame(rho))};
  for (double t = 1.0; t <= T + 1.0; t += 1.0) marks.push_back(reduce_frame(surf, geodesic_flow_exact(marks.back(), 1.0)));
  auto integrand = [&](double t) {
    const double k = std::min(std::floor(t), static_cast<double>(marks.size() - 1));
    const CotangentState s = frame_to_state(geodesic_flow_exact(marks[static_cast<std::size_t>(k)], t - k));
    const Complex D = grad_potential(W, s.z);
    const Complex p = perp(s.xi);
    const double y = s.z.imag();
    return 0.5 * y * y * (D.real() * p.real() + D.imag() * p.imag()) * std::exp(-t);
  };
  return adaptive_simpson(integrand, 0.0, T, 1e-12);
}

}  // namespace horoflow::test
