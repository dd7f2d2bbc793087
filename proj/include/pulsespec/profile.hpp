// Construction of the singular periodic orbit (fast homoclinic pulse glued to
// a slow segment via the take-off integral J) and, for concrete small eps > 0,
// of the actual 2L_eps-periodic pulse solution of the existence system
//
//   D1 u_x = eps p,   p_x = eps H1 + H2,   D2 v_x = q,   q_x = G,
//
// by reversible shooting (launch on ker(I - R) = {p = q = 0}, match the same
// space after a half period).
#pragma once

#include "pulsespec/model.hpp"
#include "pulsespec/ode.hpp"

namespace pspec {

// Homoclinic solution of the fast reduced system D2 v_xx-style problem
//   D2 v_x = q,  q_x = G(u0, v, 0)
// at frozen slow value u0, stored on a symmetric window [-X, X].
struct FastHomoclinic {
  Vec u0;                    // m
  int n = 1;
  double X = 30.0;
  double decay_rate = 1.0;   // empirical exponential decay exponent
  HermiteTable<Vec> state;   // stacked (v; q), length 2n, ascending grid on [-X, X]

  Vec v_at(double x) const { return state.eval(x).head(n); }
  Vec q_at(double x) const { return state.eval(x).tail(n); }
};

// Slow passage between consecutive pulses, stored in the stability
// parameterization on [0, 2L0]: u_s(0) = u_s(2L0) = u0, p_s(0) = J(u0),
// p_s(L0) = 0 at the turning value u1, p_s(2L0) = -J(u0); symmetric about L0.
// The constructor starts on ker(I - R_s) at the midpoint (u1, 0) and mirrors.
struct SlowSegment {
  double u1 = 0.0;
  double L0_check = 0.0;     // the slow half-period L0
  double J0 = 0.0;           // take-off value J(u0) used for the construction
  double u0 = 0.0;
  HermiteTable<Vec> state;   // stacked (u; p), length 2, grid on [0, 2L0]

  double u_at(double xi) const { return state.eval(xi)[0]; }
  double p_at(double xi) const { return state.eval(xi)[1]; }
};

struct SingularOrbit {
  FastHomoclinic hom;
  SlowSegment slow;
  Vec p0;  // p at the pulse center: -J(u0) + int_{-inf}^0 H2(u0, v_h), i.e. 0 for
           // the reversible construction
};

struct PulseProfile {
  double eps = 0.0;
  double L_eps = 0.0;
  double shooting_residual = 0.0;
  int m = 1, n = 1;
  HermiteTable<Vec> state;  // stacked (u; p; v; q), grid on [-L_eps, L_eps]

  Vec u_at(double x) const { return state.eval(x).segment(0, m); }
  Vec p_at(double x) const { return state.eval(x).segment(m, m); }
  Vec v_at(double x) const { return state.eval(x).segment(2 * m, n); }
  Vec q_at(double x) const { return state.eval(x).segment(2 * m + n, n); }
};

// Right-hand sides of the reduced/existence systems (shared with tests).
Vec fast_reduced_rhs(const ModelSpec& model, const Vec& u0, const Vec& vq);
Vec slow_reduced_rhs(const ModelSpec& model, const Vec& up);
Vec existence_rhs(const ModelSpec& model, double eps, const Vec& upvq);

// Shoots from the stable subspace of the saddle at the origin at x = X
// backward to x = 0, adjusting the stable amplitude so q(0) = 0, then mirrors
// (n = 1 automated; larger n is not).
FastHomoclinic solve_fast_homoclinic(const ModelSpec& model, const Vec& u0, double X, double tol);

// J(u0) = int_{-inf}^0 H2(u0, v_h(z)) dz, adaptive quadrature plus an
// analytic exponential tail estimate; the estimate is added and reported.
struct TakeoffResult {
  Vec J;
  double error_estimate;
};
TakeoffResult takeoff_integral(const ModelSpec& model, const FastHomoclinic& hom);

// m = 1 Hamiltonian construction: finds the turning value u1 from the energy
// identity int_{u1}^{u0} H1 = J^2/2, computes L0 by the time-of-flight
// quadrature with integrand 1/sqrt(2F + J^2) (square-root substitution at the
// singular endpoint u1), and integrates the slow system from (u1, 0).
SlowSegment solve_slow_segment(const ModelSpec& model, double u0, double J0, double tol);

// Glues the pieces; checks |p_s(2L0) + J(u0)| < match_tol with J recomputed
// from the homoclinic, and stores p0 = -J + int_{-inf}^0 H2 (= 0 here).
SingularOrbit assemble_singular_orbit(const ModelSpec& model, const FastHomoclinic& hom,
                                      const SlowSegment& slow, double match_tol = 1e-6);

// Reversible half-period shooting at concrete eps.  Sequential structure:
// first the fast stage on [0, X_f] Newton-adjusts v(0) (u(0) pinned to u0,
// p(0) = q(0) = 0 imposed) until the solution lands on the stable fast
// subspace; then (v, q) are flushed to the invariant manifold v = 0 and the
// slow stage integrates until the p = 0 turning event fixes L_eps.
PulseProfile shoot_periodic_orbit(const ModelSpec& model, double eps, const SingularOrbit& orbit,
                                  double tol);

// Max norm of the existence-ODE residual of an interpolated profile sampled
// between grid nodes (diagnostic used by tests).
double profile_ode_residual(const ModelSpec& model, const PulseProfile& profile, int samples);

}  // namespace pspec
