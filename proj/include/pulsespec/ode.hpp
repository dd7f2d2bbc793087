// Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4)) on Eigen
// states, real or complex, vector- or matrix-valued, plus cubic Hermite
// sample tables used to expose computed trajectories as smooth functions.
//
// Coefficients are smooth in all systems integrated here; stiffness enters
// only through scale separation, which the callers handle by renormalized
// marching, so an explicit embedded pair of order 5 is the right tool.
#pragma once

#include "pulsespec/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace pspec {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_init = 0.0;   // 0: automatic
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 20000000;
};

struct OdeStats {
  long steps_accepted = 0;
  long steps_rejected = 0;
  double error_estimate = 0.0;  // accumulated local error estimates
};

// Integrates y' = rhs(x, y) from x0 to x1 (either direction).  The observer,
// if given, is called at every accepted step with (x, y, y') including the
// initial point, which is exactly the data cubic Hermite interpolation needs.
template <class State, class RHS>
State integrate_ode(const RHS& rhs, double x0, double x1, State y, const OdeOptions& opt,
                    OdeStats* stats = nullptr,
                    const std::function<void(double, const State&, const State&)>& observer = {}) {
  // Dormand-Prince 5(4) tableau.
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                      b6 = 11.0 / 84;
  // Error weights b_i - bhat_i (the embedded 4th-order solution).
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double dir = (x1 >= x0) ? 1.0 : -1.0;
  const double span = std::abs(x1 - x0);
  if (span == 0.0) {
    if (observer) observer(x0, y, rhs(x0, y));
    return y;
  }

  auto err_norm = [&](const State& err, const State& ya, const State& yb) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
      double sc = opt.atol + opt.rtol * std::max(std::abs(ya(i)), std::abs(yb(i)));
      m = std::max(m, std::abs(err(i)) / sc);
    }
    return m;
  };

  double x = x0;
  State k1 = rhs(x, y);
  if (observer) observer(x, y, k1);

  double h = opt.h_init;
  if (h == 0.0) {
    // Crude starting step from the first derivative scale.
    double ynorm = 1e-8, dnorm = 1e-8;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      ynorm = std::max(ynorm, std::abs(y(i)));
      dnorm = std::max(dnorm, std::abs(k1(i)));
    }
    h = std::min({0.01 * (ynorm + 1.0) / dnorm, span, opt.h_max});
    h = std::max(h, 1e-10 * span);
  }
  h = std::min(h, opt.h_max);

  long steps = 0;
  while (dir * (x1 - x) > 0.0) {
    if (++steps > opt.max_steps)
      throw Error(ErrorKind::solver, "integrate_ode: max step count exceeded");
    h = std::min(h, std::abs(x1 - x));
    if (h < 1e-14 * (std::abs(x) + 1.0))
      throw Error(ErrorKind::solver, "integrate_ode: step size underflow (stiffness)");
    const double hs = dir * h;

    State k2 = rhs(x + c2 * hs, y + hs * (a21 * k1));
    State k3 = rhs(x + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
    State k4 = rhs(x + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
    State k5 = rhs(x + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    State k6 = rhs(x + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    State ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    State k7 = rhs(x + hs, ynew);  // FSAL
    State err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double en = err_norm(err, y, ynew);
    if (en <= 1.0) {
      x += hs;
      y = std::move(ynew);
      k1 = std::move(k7);
      if (stats) {
        ++stats->steps_accepted;
        stats->error_estimate += en * opt.atol;
      }
      if (observer) observer(x, y, k1);
    } else if (stats) {
      ++stats->steps_rejected;
    }
    double fac = 0.9 * std::pow(std::max(en, 1e-10), -0.2);
    h = std::min(h * std::clamp(fac, 0.2, 5.0), opt.h_max);
  }
  return y;
}

// Cubic Hermite table over an ascending grid; evaluation clamps to the ends.
// Derivative samples come from the ODE right-hand side, so the interpolation
// error is O(h^4) with exact nodal values and slopes.
template <class VecT>
struct HermiteTable {
  std::vector<double> x;
  std::vector<VecT> y;
  std::vector<VecT> dy;

  VecT eval(double xq) const {
    if (x.empty()) throw Error(ErrorKind::precondition, "HermiteTable: empty table");
    if (xq <= x.front()) return y.front();
    if (xq >= x.back()) return y.back();
    auto it = std::upper_bound(x.begin(), x.end(), xq);
    size_t i = static_cast<size_t>(it - x.begin()) - 1;
    double h = x[i + 1] - x[i];
    double t = (xq - x[i]) / h;
    double t2 = t * t, t3 = t2 * t;
    double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * y[i] + (h10 * h) * dy[i] + h01 * y[i + 1] + (h11 * h) * dy[i + 1];
  }

  VecT eval_derivative(double xq) const {
    if (x.empty()) throw Error(ErrorKind::precondition, "HermiteTable: empty table");
    if (xq <= x.front()) return dy.front();
    if (xq >= x.back()) return dy.back();
    auto it = std::upper_bound(x.begin(), x.end(), xq);
    size_t i = static_cast<size_t>(it - x.begin()) - 1;
    double h = x[i + 1] - x[i];
    double t = (xq - x[i]) / h;
    double d00 = (6 * t * t - 6 * t) / h, d10 = 3 * t * t - 4 * t + 1;
    double d01 = (-6 * t * t + 6 * t) / h, d11 = 3 * t * t - 2 * t;
    return d00 * y[i] + d10 * dy[i] + d01 * y[i + 1] + d11 * dy[i + 1];
  }
};

// Resamples adaptive-step observer output (appended in integration order,
// possibly descending in x) into an ascending-grid Hermite table.
template <class VecT>
HermiteTable<VecT> make_hermite_table(std::vector<double> xs, std::vector<VecT> ys,
                                      std::vector<VecT> dys) {
  if (xs.size() >= 2 && xs.front() > xs.back()) {
    std::reverse(xs.begin(), xs.end());
    std::reverse(ys.begin(), ys.end());
    std::reverse(dys.begin(), dys.end());
  }
  HermiteTable<VecT> t;
  t.x = std::move(xs);
  t.y = std::move(ys);
  t.dy = std::move(dys);
  return t;
}

// count equally spaced nodes on [a, b] including both ends (count >= 2).
std::vector<double> uniform_grid(double a, double b, int count);

}  // namespace pspec
