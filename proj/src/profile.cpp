#include "pulsespec/profile.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace pspec {

namespace {
using GK = boost::math::quadrature::gauss_kronrod<double, 15>;

// Observer sink collecting accepted integration steps for Hermite tables.
struct StepSink {
  std::vector<double> x;
  std::vector<Vec> y, dy;
  std::function<void(double, const Vec&, const Vec&)> fn() {
    return [this](double xx, const Vec& yy, const Vec& dyy) {
      x.push_back(xx);
      y.push_back(yy);
      dy.push_back(dyy);
    };
  }
};
}  // namespace

Vec fast_reduced_rhs(const ModelSpec& model, const Vec& u0, const Vec& vq) {
  const int n = model.n;
  NonlinearityValues nl = model.eval(u0, vq.head(n), 0.0);
  Vec out(2 * n);
  out.head(n) = vq.tail(n).cwiseQuotient(model.D2);  // D2 v' = q
  out.tail(n) = nl.G;                                // q' = G(u0, v, 0)
  return out;
}

Vec slow_reduced_rhs(const ModelSpec& model, const Vec& up) {
  const int m = model.m;
  NonlinearityValues nl = model.eval(up.head(m), Vec::Zero(model.n), 0.0);
  Vec out(2 * m);
  out.head(m) = up.tail(m).cwiseQuotient(model.D1);  // D1 u' = p
  out.tail(m) = nl.H1;                               // p' = H1(u, 0, 0)
  return out;
}

Vec existence_rhs(const ModelSpec& model, double eps, const Vec& upvq) {
  const int m = model.m, n = model.n;
  Vec u = upvq.segment(0, m), p = upvq.segment(m, m);
  Vec v = upvq.segment(2 * m, n), q = upvq.segment(2 * m + n, n);
  NonlinearityValues nl = model.eval(u, v, eps);
  Vec out(2 * (m + n));
  out.segment(0, m) = eps * p.cwiseQuotient(model.D1);  // D1 u' = eps p
  out.segment(m, m) = eps * nl.H1 + nl.H2;              // p' = eps H1 + H2
  out.segment(2 * m, n) = q.cwiseQuotient(model.D2);    // D2 v' = q
  out.segment(2 * m + n, n) = nl.G;                     // q' = G
  return out;
}

FastHomoclinic solve_fast_homoclinic(const ModelSpec& model, const Vec& u0, double X,
                                     double tol) {
  if (model.n != 1)
    throw Error(ErrorKind::precondition,
                "solve_fast_homoclinic: automated shooting implemented for n = 1 only");
  NonlinearityValues at0 = eval_nonlinearities(model, u0, Vec::Zero(1), 0.0);
  const double g0 = at0.dG_dv(0, 0);
  const double d2 = model.D2[0];
  if (g0 <= 0.0)
    throw Error(ErrorKind::precondition,
                "solve_fast_homoclinic: origin of the fast system is not a hyperbolic saddle "
                "((S2) fails at u0)");
  const double nu = std::sqrt(g0 / d2);     // linear decay rate at the origin
  const double su = std::sqrt(g0 * d2);     // slope of the stable eigendirection: q = -su v

  OdeOptions opt;
  opt.rtol = std::min(tol, 1e-11);
  opt.atol = 1e-14;
  opt.h_max = 0.25;

  // Backward shot from the linear stable subspace at x = X; returns q(0).
  // delta parameterizes arc length along the 1-D stable manifold, i.e. the
  // time shift of the homoclinic; q(0) = 0 centers the pulse maximum at 0.
  auto shoot = [&](double delta, StepSink* sink) {
    Vec s0(2);
    s0 << delta, -su * delta;
    auto rhs = [&](double, const Vec& vq) { return fast_reduced_rhs(model, u0, vq); };
    Vec end = integrate_ode(rhs, X, 0.0, s0, opt, nullptr, sink ? sink->fn() : nullptr);
    return end[1];
  };

  // Bracket the zero of q(0) in log-delta.  Too small a delta leaves the
  // maximum beyond x = 0 (q(0) keeps the tail sign), too large a delta puts
  // it inside (0, X) and q(0) flips sign.
  const double base = std::exp(-nu * X);
  double lo = 0.0, hi = 0.0, qlo = 0.0, qhi = 0.0;
  bool bracketed = false;
  for (double sign_delta : {1.0, -1.0}) {
    double prev_f = 0.0, prev_d = 0.0;
    bool have_prev = false;
    for (int k = -6; k <= 10 && !bracketed; ++k) {
      double delta = sign_delta * base * std::pow(10.0, k);
      double f;
      try {
        f = shoot(delta, nullptr);
      } catch (const Error&) {
        have_prev = false;
        continue;
      }
      if (have_prev && prev_f * f < 0.0) {
        lo = prev_d;
        hi = delta;
        qlo = prev_f;
        qhi = f;
        bracketed = true;
      }
      prev_f = f;
      prev_d = delta;
      have_prev = true;
    }
    if (bracketed) break;
  }
  if (!bracketed)
    throw Error(ErrorKind::solver,
                "solve_fast_homoclinic: no homoclinic found (shooting bracket failed)");

  // Bisection in log|delta| (same sign throughout the bracket by construction
  // of the scan), finished by a couple of secant steps.
  double sgn = (lo >= 0.0) ? 1.0 : -1.0;
  double la = std::log(std::abs(lo)), lb = std::log(std::abs(hi));
  double fa = qlo, fb = qhi;
  for (int it = 0; it < 80 && std::abs(lb - la) > 1e-14; ++it) {
    double lm = 0.5 * (la + lb);
    double fm = shoot(sgn * std::exp(lm), nullptr);
    if (fa * fm <= 0.0) {
      lb = lm;
      fb = fm;
    } else {
      la = lm;
      fa = fm;
    }
  }
  double delta_star = sgn * std::exp(0.5 * (la + lb));
  (void)fb;

  StepSink sink;
  double q0 = shoot(delta_star, &sink);
  if (std::abs(q0) > 1e-8 * (1.0 + std::abs(sink.y.back()[0])))
    throw Error(ErrorKind::solver, "solve_fast_homoclinic: shooting residual too large, q(0) = " +
                                       std::to_string(q0));

  // Half-table on [0, X] (sink is descending in x and gets reversed), then
  // mirror: v even, q odd.
  HermiteTable<Vec> half = make_hermite_table(sink.x, sink.y, sink.dy);
  HermiteTable<Vec> full;
  for (size_t i = half.x.size(); i-- > 0;) {
    if (half.x[i] == 0.0) continue;
    Vec y(2), dy(2);
    y << half.y[i][0], -half.y[i][1];
    dy << -half.dy[i][0], half.dy[i][1];
    full.x.push_back(-half.x[i]);
    full.y.push_back(y);
    full.dy.push_back(dy);
  }
  // Exact symmetric center value: q(0) forced to zero.
  {
    Vec yc = half.y.front(), dyc = half.dy.front();
    yc[1] = 0.0;
    dyc[0] = 0.0;  // v'(0) = q(0)/D2 = 0
    full.x.push_back(0.0);
    full.y.push_back(yc);
    full.dy.push_back(dyc);
  }
  for (size_t i = 1; i < half.x.size(); ++i) {
    full.x.push_back(half.x[i]);
    full.y.push_back(half.y[i]);
    full.dy.push_back(half.dy[i]);
  }

  FastHomoclinic hom;
  hom.u0 = u0;
  hom.n = 1;
  hom.X = X;
  hom.state = std::move(full);
  // Empirical decay exponent from the outer half of the window.
  double nh = hom.state.eval(X / 2).norm();
  double nx = hom.state.eval(X).norm();
  hom.decay_rate = (nh > 0 && nx > 0) ? std::log(nh / nx) / (X / 2) : nu;
  return hom;
}

TakeoffResult takeoff_integral(const ModelSpec& model, const FastHomoclinic& hom) {
  const int m = model.m;
  const double X = hom.X;
  double tail_norm = eval_nonlinearities(model, hom.u0, hom.v_at(X), 0.0).H2.norm();
  if (tail_norm > 1e-6)
    throw Error(ErrorKind::precondition,
                "takeoff_integral: homoclinic tail not small enough at the window edge");

  TakeoffResult out;
  out.J = Vec::Zero(m);
  out.error_estimate = 0.0;
  for (int i = 0; i < m; ++i) {
    auto f = [&](double z) { return model.eval(hom.u0, hom.v_at(z), 0.0).H2[i]; };
    double err = 0.0;
    out.J[i] = GK::integrate(f, -X, 0.0, 10, 1e-12, &err);
    out.error_estimate = std::max(out.error_estimate, err);
  }
  // Analytic tail: |H2| decays exponentially; estimate the local rate from
  // the last unit of the window and integrate the exponential to -infinity.
  Vec h2_edge = model.eval(hom.u0, hom.v_at(X), 0.0).H2;
  double a = h2_edge.norm(), b = model.eval(hom.u0, hom.v_at(X - 1.0), 0.0).H2.norm();
  if (a > 0.0 && b > a) {
    double rate = std::log(b / a);
    out.J += h2_edge / rate;
    out.error_estimate += a / rate * 0.5;
  } else {
    out.error_estimate += a;
  }
  return out;
}

SlowSegment solve_slow_segment(const ModelSpec& model, double u0, double J0, double tol) {
  if (model.m != 1)
    throw Error(ErrorKind::precondition,
                "solve_slow_segment: Hamiltonian construction requires m = 1");
  auto H1s = [&](double u) {
    return model.eval(Vec::Constant(1, u), Vec::Zero(model.n), 0.0).H1[0];
  };
  // Energy increment 2*int_{ua}^{ub} H1; computed as an increment to avoid
  // cancellation near the turning point.
  auto twoF_from = [&](double ua, double ub) {
    if (ua == ub) return 0.0;
    double err = 0.0;
    return 2.0 * GK::integrate(H1s, ua, ub, 10, 1e-13, &err);
  };

  // Turning value u1: int_{u1}^{u0} H1 = J0^2/2 with (u1 - u0) J0 > 0,
  // i.e. g(u) := 2*int_{u0}^{u} H1 + J0^2 vanishes at u1.
  auto g = [&](double u) { return twoF_from(u0, u) + J0 * J0; };
  double dir;
  if (J0 == 0.0) {
    // Weak-interaction limit H2 == 0: the segment starts at its own turning
    // point, so the transversality condition (u1 - u0) J(u0) > 0 is vacuous
    // and u = u0 is a trivial root of g.  The nontrivial turning value lies
    // in the direction where the potential admits motion, g'(u0) > 0.
    const double h = H1s(u0);
    if (h == 0.0)
      throw Error(ErrorKind::precondition,
                  "solve_slow_segment: J(u0) = 0 and H1(u0,0,0) = 0 leave the slow segment "
                  "fully degenerate");
    std::fprintf(stderr,
                 "warning: J(u0) = 0: degenerate slow segment (transversality is marginal)\n");
    dir = (h > 0.0) ? 1.0 : -1.0;
  } else {
    dir = (J0 > 0.0) ? 1.0 : -1.0;
  }
  double step = 0.1 * (1.0 + std::abs(u0));
  // Seed just off u0 so the J0 = 0 case does not re-find the trivial root.
  double a = u0, b = u0 + dir * 1e-8 * (1.0 + std::abs(u0)), gb = g(b);
  if (J0 != 0.0 && gb <= 0.0) b = u0, gb = J0 * J0;
  bool found = false;
  for (int k = 0; k < 60; ++k) {
    a = b;
    double ga = gb;
    b = u0 + dir * step * std::pow(1.3, k);
    Vec ub = Vec::Constant(1, b);
    if (!model.domain_box.contains(ub, Vec::Zero(model.n)))
      throw Error(ErrorKind::solver,
                  "solve_slow_segment: no turning value u1 inside domain_box");
    gb = g(b);
    if (ga * gb <= 0.0) {
      found = true;
      break;
    }
  }
  if (!found)
    throw Error(ErrorKind::solver, "solve_slow_segment: no connecting orbit (u1 bracket failed)");
  // Bisection is plenty here (g is smooth and the bracket is tight enough).
  for (int it = 0; it < 200 && std::abs(b - a) > 1e-15 * (1.0 + std::abs(a)); ++it) {
    double mid = 0.5 * (a + b);
    if (g(a) * g(mid) <= 0.0)
      b = mid;
    else
      a = mid;
  }
  const double u1 = 0.5 * (a + b);
  if (std::abs(H1s(u1)) < 1e-10)
    throw Error(ErrorKind::accuracy,
                "solve_slow_segment: transversality H1(u1,0,0) != 0 violated (degenerate "
                "segment)");

  // Time of flight L0 = int_{u1}^{u0} du / sqrt(2F(u) + J0^2).  The endpoint
  // u1 is always a turning point (the radicand vanishes linearly), and for
  // J0 = 0 the endpoint u0 is a turning point as well, so the interval is
  // split at its midpoint and each half gets the square-root substitution
  // u = ue + d s^2 anchored at its own endpoint.  W_ue is the exact value of
  // the radicand at the endpoint (0 at u1, J0^2 at u0), so the increment
  // quadrature does not lose the cancellation near a turning point.
  const double sigma = (u0 > u1) ? 1.0 : -1.0;
  const double um = 0.5 * (u0 + u1);
  double qerr = 0.0;
  auto half_time = [&](double ue, double d, double W_ue) {
    const double s_max = std::sqrt(std::abs(um - ue));
    // Radicand increment in the substituted variable: with u = ue + d sg^2,
    // 2 int_{ue}^{ue + d s^2} H1 du = 4 d int_0^s sg H1(ue + d sg^2) dsg.
    // Integrating in sg rather than u keeps the abscissae well separated even
    // when s^2 is at rounding level relative to ue, where an integral over
    // [ue, ue + d s^2] would see its width quantized away.
    auto W_of = [&](double s) {
      double werr = 0.0;
      return W_ue + 4.0 * d *
                        GK::integrate([&](double sg) { return sg * H1s(ue + d * sg * sg); }, 0.0,
                                      s, 10, 1e-13, &werr);
    };
    auto integrand = [&](double s) {
      if (s < 1e-10)
        return (W_ue > 0.0) ? 2.0 * s / std::sqrt(W_ue)
                            : 2.0 / std::sqrt(2.0 * d * H1s(ue));
      double W = W_of(s);
      if (W <= 0.0) W = W_ue + 2.0 * d * H1s(ue) * s * s;  // fallback to the leading order
      return 2.0 * s / std::sqrt(W);
    };
    double err = 0.0;
    double val = GK::integrate(integrand, 0.0, s_max, 12, 1e-12, &err);
    qerr += err;
    return val;
  };
  const double L0 = half_time(u1, sigma, 0.0) + half_time(u0, -sigma, J0 * J0);
  if (qerr > 1e-8 * (1.0 + L0))
    throw Error(ErrorKind::accuracy, "solve_slow_segment: time-of-flight quadrature inaccurate");

  // Half trajectory of the slow system from the symmetric point (u1, 0).
  StepSink sink;
  OdeOptions opt;
  opt.rtol = std::min(tol, 1e-11);
  opt.atol = 1e-13;
  Vec s0(2);
  s0 << u1, 0.0;
  auto rhs = [&](double, const Vec& up) { return slow_reduced_rhs(model, up); };
  Vec endst = integrate_ode(rhs, 0.0, L0, s0, opt, nullptr, sink.fn());
  if (std::abs(endst[0] - u0) > 1e-6 * (1.0 + std::abs(u0)))
    throw Error(ErrorKind::accuracy,
                "solve_slow_segment: time-of-flight and trajectory endpoint disagree, u(L0) = " +
                    std::to_string(endst[0]));

  // Stability parameterization on [0, 2L0]: mirror the half trajectory about
  // the turning point (u even, p odd about xi = L0).
  HermiteTable<Vec> table;
  for (size_t i = sink.x.size(); i-- > 0;) {
    if (sink.x[i] == 0.0) continue;
    Vec y(2), dy(2);
    y << sink.y[i][0], -sink.y[i][1];
    dy << -sink.dy[i][0], sink.dy[i][1];
    table.x.push_back(L0 - sink.x[i]);
    table.y.push_back(y);
    table.dy.push_back(dy);
  }
  for (size_t i = 0; i < sink.x.size(); ++i) {
    Vec y = sink.y[i], dy = sink.dy[i];
    if (sink.x[i] == 0.0) {
      y[1] = 0.0;   // exact symmetric point
      dy[0] = 0.0;  // u' = p/D1 = 0 there
    }
    table.x.push_back(L0 + sink.x[i]);
    table.y.push_back(y);
    table.dy.push_back(dy);
  }

  SlowSegment seg;
  seg.u0 = u0;
  seg.u1 = u1;
  seg.J0 = J0;
  seg.L0_check = L0;
  seg.state = std::move(table);
  return seg;
}

SingularOrbit assemble_singular_orbit(const ModelSpec& model, const FastHomoclinic& hom,
                                      const SlowSegment& slow, double match_tol) {
  TakeoffResult tk = takeoff_integral(model, hom);
  const double J = tk.J[0];
  std::ostringstream defect;
  if (std::abs(J - slow.J0) > match_tol * (1.0 + std::abs(J))) {
    defect << "take-off value mismatch: homoclinic gives J = " << J
           << ", slow segment was built with J0 = " << slow.J0;
    throw Error(ErrorKind::precondition, "assemble_singular_orbit: " + defect.str());
  }
  const double p_end = slow.p_at(2.0 * slow.L0_check);
  if (std::abs(p_end + J) > match_tol * (1.0 + std::abs(J))) {
    defect << "gluing defect |p_s(2L0) + J(u0)| = " << std::abs(p_end + J);
    throw Error(ErrorKind::precondition, "assemble_singular_orbit: " + defect.str());
  }
  SingularOrbit orbit;
  orbit.hom = hom;
  orbit.slow = slow;
  // p at the pulse center: -J(u0) + int_{-inf}^0 H2 = -J + J; the reversible
  // pulse sits on ker(I - R).
  orbit.p0 = Vec::Constant(model.m, -J + tk.J[0]);
  return orbit;
}

PulseProfile shoot_periodic_orbit(const ModelSpec& model, double eps, const SingularOrbit& orbit,
                                  double tol) {
  if (model.m != 1 || model.n != 1)
    throw Error(ErrorKind::precondition, "shoot_periodic_orbit: implemented for m = n = 1");
  const double u0 = orbit.hom.u0[0];
  const double v_init = orbit.hom.v_at(0.0)[0];
  const double d2 = model.D2[0];
  const double L_guess = orbit.slow.L0_check / eps;
  // Single-shooting window: long enough that the flushed stable tail
  // exp(-nu X_f) is below the requested tolerance, short enough that the
  // growing fast mode does not amplify the v(0) rounding granularity past it
  // (the exp(nu X_f) * macheps barrier).  Both errors meet near
  // exp(-nu X_f) ~ sqrt(macheps).
  const double nu = std::max(orbit.hom.decay_rate, 0.1);
  const double X_prec =
      std::clamp(0.75 * (-std::log(std::max(tol, 1e-14))) / nu, 12.0, 17.9 / nu);
  const double X_f = std::min({orbit.hom.X, 0.6 * L_guess, X_prec});
  if (X_f < 12.0)
    throw Error(ErrorKind::solver,
                "shoot_periodic_orbit: eps too large for the asymptotic fast/slow splitting; "
                "use a smaller eps (ladder continuation)");

  OdeOptions fast_opt;
  fast_opt.rtol = std::min(tol, 1e-11);
  fast_opt.atol = 1e-14;
  fast_opt.h_max = 0.25;

  // Fast stage: from (u0, 0, v0, 0) to X_f; returns the coefficient of the
  // growing fast eigendirection at the frozen slow value.  Killing it lands
  // the shot on the stable fast subspace so the long slow stretch can run on
  // the invariant manifold v = 0.  Off-manifold shots blow up in finite
  // time, so the march is chunked and capped: once (v, q) escapes, the
  // current coefficient already carries the sign the bisection needs.
  auto rhs = [&](double, const Vec& y) { return existence_rhs(model, eps, y); };
  auto b_of = [&](const Vec& y) {
    double g = eval_nonlinearities(model, y.segment(0, 1), Vec::Zero(1), eps).dG_dv(0, 0);
    double su = std::sqrt(std::max(g, 1e-12) * d2);
    return (y[3] + su * y[2]) / (2.0 * su);
  };
  // A shot from (u0, 0, v0, 0) either decays onto the fast-stable subspace
  // or leaves the pulse region through one of two phase-portrait events:
  //  * v crosses zero while still falling: v0 too large (outside the
  //    homoclinic loop, the excess energy carries v through the saddle);
  //  * q turns positive while v > 0: v0 too small (inside the loop, v
  //    bottoms out and starts another oscillation).
  // Intermediate values of the growing-mode coefficient are meaningless
  // while v is O(1) -- they even have spurious zeros during blowup -- so
  // only the first event enters the bisection.  Shots that survive to X_f
  // are ranked by the coefficient b = (q + su v) / (2 su) of the growing
  // fast eigendirection at the frozen slow value; b > 0 means the leftover
  // growing mode will push v back up (still too small).
  const double cap = 50.0 * (1.0 + std::abs(v_init));
  auto fast_stage = [&](double v0, StepSink* sink, Vec* out_end, double* b_out) -> int {
    Vec y(4);
    y << u0, 0.0, v0, 0.0;
    double x = 0.0;
    int cls = 0;
    std::function<void(double, const Vec&, const Vec&)> watch =
        [&](double xx, const Vec& yy, const Vec& dyy) {
          if (cls != 0) return;
          if (yy[2] <= 0.0)
            cls = +1;  // outside: v hit the saddle level
          else if (xx > 0.5 && yy[3] >= 0.0)
            cls = -1;  // inside: v bottomed out
          if (sink && cls == 0) sink->fn()(xx, yy, dyy);
        };
    while (x < X_f - 1e-12 && cls == 0) {
      double xn = std::min(x + 0.5, X_f);
      try {
        y = integrate_ode(rhs, x, xn, y, fast_opt, nullptr, watch);
      } catch (const Error&) {
        if (cls == 0) cls = (y[2] <= 0.0) ? +1 : -1;
        break;
      }
      x = xn;
      if (cls == 0 && (y.segment(2, 2).norm() > cap || !y.allFinite()))
        cls = (y[2] <= 0.0) ? +1 : -1;
    }
    if (cls != 0) return cls;
    if (out_end) *out_end = y;
    if (b_out) *b_out = b_of(y);
    return 0;
  };
  auto side_of = [&](double v0, double* b_out) -> int {
    double b = 0.0;
    int cls = fast_stage(v0, nullptr, nullptr, &b);
    if (b_out) *b_out = (cls == 0) ? b : std::numeric_limits<double>::infinity();
    return (cls != 0) ? cls : ((b > 0.0) ? -1 : +1);
  };

  // Bracket-and-bisect on v(0): the inside/outside classification is
  // monotone in v0 near the orbit, which secant iterations on the raw
  // coefficient cannot exploit (they step into the blowup region).
  const double delta0 = 0.01 * (1.0 + std::abs(v_init));
  double b_best = std::numeric_limits<double>::infinity();
  double v_star = v_init;
  auto probe = [&](double v0) -> int {
    double b;
    int s = side_of(v0, &b);
    if (std::abs(b) < std::abs(b_best)) {
      b_best = b;
      v_star = v0;
    }
    return s;
  };
  double va = v_init;
  int sa = probe(va);
  double vb = va;
  bool bracketed = false;
  for (int k = 0; k < 40 && !bracketed; ++k) {
    double step = delta0 * std::pow(1.4, k);
    for (double cand : {v_init + step, v_init - step}) {
      if (probe(cand) != sa) {
        vb = cand;
        bracketed = true;
        break;
      }
    }
  }
  if (!bracketed)
    throw Error(ErrorKind::solver,
                "shoot_periodic_orbit: could not bracket the fast shooting parameter; try a "
                "larger eps first and continue down the ladder");
  for (int it = 0; it < 90 && std::abs(vb - va) > 1e-17 * (1.0 + std::abs(v_init)); ++it) {
    double vm = 0.5 * (va + vb);
    if (probe(vm) == sa)
      va = vm;
    else
      vb = vm;
  }

  // Achievable accuracy: the v(0) rounding granularity amplified over the
  // window, plus an absolute floor.
  const double b_floor = 100.0 * (1.0 + std::abs(v_init)) * 1e-16 * std::exp(nu * X_f) +
                         1e-8 * (1.0 + std::abs(v_init));

  StepSink fast_sink;
  Vec fast_end;
  double b_res = 0.0;
  int cls_res = fast_stage(v_star, &fast_sink, &fast_end, &b_res);
  if (cls_res != 0 || std::abs(b_res) > b_floor || fast_sink.x.empty() ||
      std::abs(fast_sink.x.back() - X_f) > 1e-9)
    throw Error(ErrorKind::solver,
                "shoot_periodic_orbit: fast-stage shooting did not converge; try a larger eps "
                "first and continue down the ladder");
  double flush_norm = fast_end.segment(2, 2).norm();

  // Slow stage on the invariant manifold v = q = 0: 2-D subsystem until the
  // turning event p = 0 fixes the half-period L_eps.
  auto slow_rhs = [&](double, const Vec& y) {
    NonlinearityValues nl = model.eval(y.segment(0, 1), Vec::Zero(1), eps);
    Vec out(2);
    out[0] = eps * y[1] / model.D1[0];
    out[1] = eps * nl.H1[0] + nl.H2[0];
    return out;
  };
  OdeOptions slow_opt;
  slow_opt.rtol = std::min(tol, 1e-11);
  slow_opt.atol = 1e-14;
  slow_opt.h_max = std::max(1.0, 0.01 * L_guess);

  StepSink slow_sink;
  Vec s0(2);
  s0 << fast_end[0], fast_end[1];
  const double p_sign = (fast_end[1] >= 0) ? 1.0 : -1.0;
  integrate_ode(slow_rhs, X_f, X_f + 2.5 * L_guess, s0, slow_opt, nullptr, slow_sink.fn());

  // Locate the first sign change of p past the pulse.
  size_t ci = 0;
  bool crossed = false;
  for (size_t i = 1; i < slow_sink.x.size(); ++i) {
    if (slow_sink.y[i][1] * p_sign <= 0.0) {
      ci = i;
      crossed = true;
      break;
    }
  }
  if (!crossed)
    throw Error(ErrorKind::solver, "shoot_periodic_orbit: no p = 0 turning event found");

  // Refine the crossing on the local Hermite interpolant of p.
  HermiteTable<Vec> local;
  local.x = {slow_sink.x[ci - 1], slow_sink.x[ci]};
  local.y = {slow_sink.y[ci - 1], slow_sink.y[ci]};
  local.dy = {slow_sink.dy[ci - 1], slow_sink.dy[ci]};
  double xa = local.x[0], xb = local.x[1];
  for (int k = 0; k < 100 && xb - xa > 1e-13 * (1.0 + xb); ++k) {
    double xm = 0.5 * (xa + xb);
    if (local.eval(xa)[1] * local.eval(xm)[1] <= 0.0)
      xb = xm;
    else
      xa = xm;
  }
  const double L = 0.5 * (xa + xb);
  const double p_res = std::abs(local.eval(L)[1]);

  // Assemble [0, L]: fast-stage 4-D samples, then slow-stage samples with
  // (v, q) flushed to the invariant manifold.
  std::vector<double> xs;
  std::vector<Vec> ys, dys;
  for (size_t i = 0; i < fast_sink.x.size(); ++i) {
    xs.push_back(fast_sink.x[i]);
    ys.push_back(fast_sink.y[i]);
    dys.push_back(fast_sink.dy[i]);
  }
  for (size_t i = 0; i < slow_sink.x.size() && slow_sink.x[i] < L; ++i) {
    if (slow_sink.x[i] <= xs.back()) continue;
    Vec y(4), dy(4);
    y << slow_sink.y[i][0], slow_sink.y[i][1], 0.0, 0.0;
    dy << slow_sink.dy[i][0], slow_sink.dy[i][1], 0.0, 0.0;
    xs.push_back(slow_sink.x[i]);
    ys.push_back(y);
    dys.push_back(dy);
  }
  {
    Vec yL(4), dyL(4);
    Vec sl = local.eval(L);
    yL << sl[0], 0.0, 0.0, 0.0;  // p(L) = 0 imposed at the matched end
    Vec dsl = slow_rhs(L, sl);
    dyL << 0.0, dsl[1], 0.0, 0.0;  // u'(L) = eps p/D1 = 0
    xs.push_back(L);
    ys.push_back(yL);
    dys.push_back(dyL);
  }

  // Mirror by reversibility: u, v even; p, q odd.
  HermiteTable<Vec> table;
  for (size_t i = xs.size(); i-- > 0;) {
    if (xs[i] == 0.0) continue;
    Vec y(4), dy(4);
    y << ys[i][0], -ys[i][1], ys[i][2], -ys[i][3];
    dy << -dys[i][0], dys[i][1], -dys[i][2], dys[i][3];
    table.x.push_back(-xs[i]);
    table.y.push_back(y);
    table.dy.push_back(dy);
  }
  for (size_t i = 0; i < xs.size(); ++i) {
    Vec y = ys[i], dy = dys[i];
    if (xs[i] == 0.0) {
      y[1] = 0.0;
      y[3] = 0.0;
      dy[0] = 0.0;
      dy[2] = 0.0;
    }
    table.x.push_back(xs[i]);
    table.y.push_back(y);
    table.dy.push_back(dy);
  }

  PulseProfile profile;
  profile.eps = eps;
  profile.L_eps = L;
  profile.m = 1;
  profile.n = 1;
  profile.state = std::move(table);
  profile.shooting_residual = std::max({std::abs(b_res), flush_norm, p_res});
  return profile;
}

double profile_ode_residual(const ModelSpec& model, const PulseProfile& profile, int samples) {
  double worst = 0.0;
  const double L = profile.L_eps;
  for (int i = 0; i < samples; ++i) {
    double x = -L + (2.0 * L) * (i + 0.5) / samples;
    Vec y = profile.state.eval(x);
    Vec dy = profile.state.eval_derivative(x);
    Vec rhs = existence_rhs(model, profile.eps, y);
    worst = std::max(worst, (dy - rhs).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace pspec
