#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "safegain/plant.hpp"

namespace safegain::test {

inline Vec vec1(double v) {
  Vec x(1);
  x[0] = v;
  return x;
}

inline Vec vec2(double a, double b) {
  Vec x(2);
  x[0] = a;
  x[1] = b;
  return x;
}

// Scalar plant xdot = f(x) + u with h = x and alpha = slope * s, no
// disturbance channel. Used to build the hand-evaluable fixtures.
inline ControlAffinePlant scalar_plant(std::function<double(double)> f) {
  ControlAffinePlant p;
  p.state_dim = 1;
  p.dist_dim = 0;
  p.ctrl_dim = 1;
  p.f = [f](const Vec& x) { return vec1(f(x[0])); };
  p.g2 = [](const Vec&) { return Mat::Identity(1, 1); };
  return p;
}

// Adaptive Simpson quadrature, the independent oracle for the
// Legendre-Fenchel values (never used by the library itself).
inline double adaptive_simpson(const std::function<double(double)>& f,
                               double a, double b, double eps = 1e-10,
                               int depth = 40) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  std::function<double(double, double, double, double, double, double, int)>
      rec = [&](double lo, double hi, double flo, double fhi, double fmid,
                double acc, int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
    const double flm = f(lm), frm = f(rm);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    if (d <= 0 || std::abs(left + right - acc) <= 15.0 * eps) {
      return left + right + (left + right - acc) / 15.0;
    }
    return rec(lo, mid, flo, fmid, flm, left, d - 1) +
           rec(mid, hi, fmid, fhi, frm, right, d - 1);
  };
  if (a == b) return 0.0;
  return rec(a, b, fa, fb, fm, whole, depth);
}

}  // namespace safegain::test
