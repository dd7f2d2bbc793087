// Spectrum machinery against analytic oracles: winding counts on functions
// with known zeros and poles, quadtree root finding on polynomials, the
// residue-based cancelation verdict at the fast eigenvalue, the explicit
// instability functionals for the center family, and the fixed-point property
// of the cancelation-failure parameter.
#include "pulsespec/spectrum.hpp"

#include <doctest.h>

#include <cmath>

using namespace pspec;

namespace {

const ModelSpec& center_model() {
  static ModelSpec model = [] {
    GMParams p;
    p.slow_type = GMSlowType::center;
    p.mu = 1.0;
    return make_gm_model(p);
  }();
  return model;
}

const SingularOrbit& center_orbit() {
  static SingularOrbit orbit = [] {
    FastHomoclinic hom = solve_fast_homoclinic(center_model(), Vec::Ones(1), 30.0, 1e-10);
    TakeoffResult tk = takeoff_integral(center_model(), hom);
    SlowSegment slow = solve_slow_segment(center_model(), 1.0, tk.J[0], 1e-10);
    return assemble_singular_orbit(center_model(), hom, slow);
  }();
  return orbit;
}

}  // namespace

TEST_CASE("contour points trace closed counterclockwise curves") {
  ContourSpec c = circle_contour(Cplx(0.3, -0.2), 1.5);
  CHECK(std::abs(c.point(0.0) - Cplx(1.8, -0.2)) < 1e-14);
  CHECK(std::abs(c.point(0.25) - Cplx(0.3, 1.3)) < 1e-14);
  ContourSpec r = rectangle_contour(Cplx(1.0, 0.0), 2.0, 0.5);
  // Both shapes wind once around their center.
  for (const ContourSpec& spec : {c, r}) {
    double arg_sum = 0.0;
    const int n = 400;
    for (int i = 0; i < n; ++i) {
      Cplx a = spec.point(double(i) / n) - spec.center;
      Cplx b = spec.point(double(i + 1) / n) - spec.center;
      arg_sum += std::arg(b / a);
    }
    CHECK(arg_sum == doctest::Approx(2.0 * pi).epsilon(1e-10));
  }
}

TEST_CASE("count_roots_contour counts zeros minus poles") {
  LedgeredFn cubic = as_ledgered(
      [](Cplx z) { return (z - Cplx(0.2, 0.1)) * (z + 0.4) * (z + 0.4) * std::exp(3.0 * z); });
  CHECK(count_roots_contour(cubic, circle_contour(Cplx(0.0, 0.0), 1.0)) == 3);
  CHECK(count_roots_contour(cubic, circle_contour(Cplx(0.2, 0.1), 0.2)) == 1);
  LedgeredFn pole = as_ledgered([](Cplx z) { return (z - 1.0) / (z * z); });
  CHECK(count_roots_contour(pole, circle_contour(Cplx(0.0, 0.0), 0.5)) == -2);
  CHECK(count_roots_contour(pole, circle_contour(Cplx(0.0, 0.0), 1.5)) == -1);
}

TEST_CASE("count_roots_contour rejects a contour through a zero") {
  LedgeredFn f = as_ledgered([](Cplx z) { return z - 1.0; });
  CHECK_THROWS_AS(count_roots_contour(f, circle_contour(Cplx(0.0, 0.0), 1.0)), Error);
}

TEST_CASE("find_roots locates polynomial roots with multiplicities") {
  LedgeredFn f = as_ledgered([](Cplx z) {
    return (z * z + 1.0) * (z - 0.3) * (z - Cplx(0.2, 0.0)) * (z - Cplx(0.2, 0.0));
  });
  std::vector<Root> roots = find_roots(f, Cplx(-1.5, -1.5), Cplx(1.5, 1.5), 1e-10);
  REQUIRE(roots.size() == 4);
  int total = 0;
  bool saw_double = false;
  for (const Root& r : roots) {
    total += r.multiplicity;
    CHECK(r.resolved);
    if (r.multiplicity == 2) {
      saw_double = true;
      CHECK(std::abs(r.location - Cplx(0.2, 0.0)) < 1e-8);
    }
  }
  CHECK(total == 5);
  CHECK(saw_double);
  double best_i = 1.0, best_03 = 1.0;
  for (const Root& r : roots) {
    best_i = std::min(best_i, std::abs(r.location - Cplx(0.0, 1.0)));
    best_03 = std::min(best_03, std::abs(r.location - Cplx(0.3, 0.0)));
  }
  CHECK(best_i < 1e-9);
  CHECK(best_03 < 1e-9);
}

TEST_CASE("find_roots returns nothing on a root-free box") {
  LedgeredFn f = as_ledgered([](Cplx z) { return std::exp(z) + 10.0; });
  CHECK(find_roots(f, Cplx(-1.0, -1.0), Cplx(1.0, 1.0), 1e-10).empty());
}

TEST_CASE("residue at the fast eigenvalue reports cancelation for the center family") {
  CancelationReport rep =
      residue_slow_at_fast_zero(center_model(), center_orbit(), Cplx(1.25, 0.0));
  CHECK(rep.verdict == CancelVerdict::cancels);
  CHECK(std::abs(rep.residue) > 1e-3);
  // The residue factorizes through the reported inner products.
  CHECK(std::abs(rep.residue - rep.u_boundary * rep.ip_H2v * rep.ip_Gu) < 1e-12);
  CHECK(std::abs(rep.residue.imag()) < 1e-8 * std::abs(rep.residue));
}

TEST_CASE("instability functionals for the center family at mu = 1") {
  InstabilityReport rep = instability_criteria(center_model(), center_orbit());
  // G0 = -2 int v_h dv_h/du dx = 24 and lambda0 = 5/4 have closed forms;
  // I2 = -8 reproduces t(0)/2 = -8 for this symmetric segment.
  CHECK(rep.G0 == doctest::Approx(24.0).epsilon(1e-4));
  CHECK(rep.lambda0 == doctest::Approx(1.25).epsilon(1e-7));
  CHECK(rep.I2 == doctest::Approx(-8.0).epsilon(1e-5));
  CHECK(rep.I1 > 0.0);
  CHECK(rep.verdict == InstabilityVerdict::inconclusive);
}

TEST_CASE("cancelation-failure parameter satisfies its defining equation") {
  GMParams p;
  p.slow_type = GMSlowType::center;
  double mu1 = find_cancelation_failure_mu(p, 1.0, 1.25);
  CHECK(mu1 > 1.25);  // mu = lambda0 + (pi / (2 L0))^2 > lambda0
  // Closed-form L0(mu) for the center segment with J = -3:
  // L0 = (pi/2 + arcsin(u0 / sqrt(J^2/mu + u0^2))) / sqrt(mu).
  double L0 = (0.5 * pi + std::asin(1.0 / std::sqrt(9.0 / mu1 + 1.0))) / std::sqrt(mu1);
  double k_term = pi / (2.0 * L0);
  CHECK(mu1 == doctest::Approx(1.25 + k_term * k_term).epsilon(1e-8));
}

TEST_CASE("gamma curves of the fast reduced function are gamma-independent") {
  std::vector<SpectrumCurve> curves =
      trace_gamma_curves(EvansKind::fast_reduced, center_model(), &center_orbit(), nullptr, 8,
                         Cplx(1.0, -0.25), Cplx(1.5, 0.25), 1e-8);
  REQUIRE(curves.size() == 1);
  CHECK(curves[0].closure_defect < 1e-8);
  for (Cplx lam : curves[0].lambda) CHECK(std::abs(lam - Cplx(1.25, 0.0)) < 1e-6);
}
