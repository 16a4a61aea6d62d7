#pragma once

#include <cmath>
#include <utility>

namespace biassurv {

//! Golden-section search for the maximum of f on [a, b]. Stops when the
//! bracket is narrower than `tol`; returns the best evaluated (x, f(x)).
template<class F>
std::pair<double, double> golden_section_maximize(F&& f, double a, double b, double tol)
{
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? std::pair{ c, fc } : std::pair{ d, fd };
}

} // namespace biassurv
