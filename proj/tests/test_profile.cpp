// Singular-orbit construction and finite-eps shooting, checked against the
// closed forms available for the Gierer-Meinhardt family: sech-power fast
// pulses, the half-line take-off integral, center-case slow segments, and
// pointwise ODE residuals of shot profiles.
#include "pulsespec/profile.hpp"

#include <doctest.h>

#include <cmath>

using namespace pspec;

namespace {

ModelSpec center_model(double mu = 1.0, int beta2 = 2) {
  GMParams p;
  p.slow_type = GMSlowType::center;
  p.mu = mu;
  p.beta2 = beta2;
  return make_gm_model(p);
}

// Shared fixtures; built once (the homoclinic and slow segment are reused by
// several cases and the shooting case is the expensive one).
const FastHomoclinic& hom_center() {
  static FastHomoclinic hom = solve_fast_homoclinic(center_model(), Vec::Ones(1), 30.0, 1e-10);
  return hom;
}

const SingularOrbit& orbit_center() {
  static SingularOrbit orbit = [] {
    ModelSpec model = center_model();
    TakeoffResult tk = takeoff_integral(model, hom_center());
    SlowSegment slow = solve_slow_segment(model, 1.0, tk.J[0], 1e-10);
    return assemble_singular_orbit(model, hom_center(), slow);
  }();
  return orbit;
}

}  // namespace

TEST_CASE("fast homoclinic matches the sech-power closed forms") {
  // beta2 = 2: v_h = (3/2) sech^2(x/2); beta2 = 3: v_h = sqrt(2) sech(x).
  for (double x : {0.0, 0.8, 2.5, 6.0}) {
    double exact2 = 1.5 / std::pow(std::cosh(0.5 * x), 2.0);
    CHECK(hom_center().v_at(x)[0] == doctest::Approx(exact2).epsilon(1e-8));
    CHECK(hom_center().v_at(-x)[0] == doctest::Approx(exact2).epsilon(1e-8));
  }
  FastHomoclinic hom3 =
      solve_fast_homoclinic(center_model(1.0, 3), Vec::Ones(1), 30.0, 1e-10);
  for (double x : {0.0, 1.0, 3.0})
    CHECK(hom3.v_at(x)[0] == doctest::Approx(std::sqrt(2.0) / std::cosh(x)).epsilon(1e-8));
  // q = D2 v' at the crest vanishes by symmetry.
  CHECK(std::abs(hom_center().q_at(0.0)[0]) < 1e-9);
}

TEST_CASE("take-off integral equals the closed form -u0^{-2 alpha2} 3/(2) ...") {
  // J(u0) = int_{-inf}^0 -v_h^2 dx = -(1/2) c^2 int sech^4(x/2) dx with
  // c = 3/(2 u0^2): J(1) = -3, J(2) = -3/16.
  ModelSpec model = center_model();
  TakeoffResult tk = takeoff_integral(model, hom_center());
  CHECK(tk.J[0] == doctest::Approx(-3.0).epsilon(1e-9));
  FastHomoclinic hom_u2 = solve_fast_homoclinic(model, Vec::Constant(1, 2.0), 30.0, 1e-10);
  CHECK(takeoff_integral(model, hom_u2).J[0] == doctest::Approx(-3.0 / 16.0).epsilon(1e-8));
  CHECK(tk.error_estimate < 1e-8);
}

TEST_CASE("center-case slow segment: turning value, half-period, symmetry") {
  const SlowSegment& slow = orbit_center().slow;
  // p^2 = mu(u1^2 - u^2) with mu u1^2 = J^2 + mu u0^2: u1 = -sqrt(10).
  CHECK(slow.u1 == doctest::Approx(-std::sqrt(10.0)).epsilon(1e-9));
  // L0 = (1/sqrt(mu)) (pi/2 + arcsin(u0 / |u1|)).
  double L0_exact = 0.5 * pi + std::asin(1.0 / std::sqrt(10.0));
  CHECK(slow.L0_check == doctest::Approx(L0_exact).epsilon(1e-9));
  // Stability parameterization invariants.
  CHECK(slow.u_at(0.0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(slow.p_at(0.0) == doctest::Approx(-3.0).epsilon(1e-7));
  CHECK(std::abs(slow.p_at(slow.L0_check)) < 1e-7);
  CHECK(slow.p_at(2.0 * slow.L0_check) == doctest::Approx(3.0).epsilon(1e-7));
  for (double s : {0.3, 0.9, 1.4})
    CHECK(slow.u_at(slow.L0_check - s) ==
          doctest::Approx(slow.u_at(slow.L0_check + s)).epsilon(1e-8));
}

TEST_CASE("assembled orbit is reversible: p0 = 0 and touch-down matches -J") {
  const SingularOrbit& orbit = orbit_center();
  CHECK(std::abs(orbit.p0[0]) < 1e-9);
  CHECK(orbit.slow.p_at(2.0 * orbit.slow.L0_check) ==
        doctest::Approx(-orbit.slow.J0).epsilon(1e-7));
}

TEST_CASE("slow segment rejects a saddle configuration without turning point") {
  // Saddle flow u'' = mu u with |J| >= sqrt(mu) u0 never turns.
  GMParams p;
  p.mu = 1.0;
  ModelSpec model = make_gm_model(p);
  CHECK_THROWS_AS(solve_slow_segment(model, 1.0, -3.0, 1e-10), Error);
}

TEST_CASE("shot profile solves the existence system and touches ker(I - R)") {
  ModelSpec model = center_model();
  PulseProfile prof = shoot_periodic_orbit(model, 0.02, orbit_center(), 1e-10);
  CHECK(prof.shooting_residual < 1e-6);
  CHECK(profile_ode_residual(model, prof, 400) < 1e-5);
  // Reversibility: p and q vanish at the half-period boundaries.
  CHECK(std::abs(prof.p_at(0.0)[0]) < 1e-8);
  CHECK(std::abs(prof.q_at(0.0)[0]) < 1e-8);
  CHECK(std::abs(prof.p_at(prof.L_eps)[0]) < 1e-6);
  // u stays near u0 at the pulse and near the slow segment at the far end.
  CHECK(prof.u_at(0.0)[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(prof.v_at(0.0)[0] == doctest::Approx(1.5).epsilon(0.1));
  CHECK(std::abs(prof.v_at(prof.L_eps)[0]) < 1e-8);
  // Wavelength approaches L0 / eps: eps L_eps near L0.
  CHECK(0.02 * prof.L_eps ==
        doctest::Approx(orbit_center().slow.L0_check).epsilon(0.05));
}

TEST_CASE("existence rhs reduces to the fast/slow reduced fields at eps = 0") {
  ModelSpec model = center_model();
  Vec upvq(4);
  upvq << 1.1, 0.3, 0.7, -0.2;
  Vec full = existence_rhs(model, 0.0, upvq);
  Vec vq(2);
  vq << 0.7, -0.2;
  Vec fast = fast_reduced_rhs(model, Vec::Constant(1, 1.1), vq);
  CHECK(full[2] == doctest::Approx(fast[0]).epsilon(1e-14));
  CHECK(full[3] == doctest::Approx(fast[1]).epsilon(1e-14));
  CHECK(full[0] == 0.0);  // u frozen at eps = 0
  Vec up(2);
  up << 1.1, 0.3;
  Vec slow = slow_reduced_rhs(model, up);
  CHECK(slow[0] == doctest::Approx(0.3 / model.D1[0]).epsilon(1e-14));
}
