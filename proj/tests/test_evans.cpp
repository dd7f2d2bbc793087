// Evans-function layer: the fast reduced function and its known zeros, the
// Melnikov matrix (including its regular value on a fast eigenvalue), the
// slow reduced quadratic, and agreement of the full-Evans evaluation paths.
#include "pulsespec/evans.hpp"

#include <doctest.h>

#include <cmath>

using namespace pspec;

namespace {

struct Fixture {
  ModelSpec model;
  SingularOrbit orbit;
  PulseProfile prof;
};

const Fixture& fx() {
  static Fixture f = [] {
    GMParams p;
    p.slow_type = GMSlowType::center;
    p.mu = 1.0;
    Fixture out{make_gm_model(p), {}, {}};
    FastHomoclinic hom = solve_fast_homoclinic(out.model, Vec::Ones(1), 30.0, 1e-10);
    TakeoffResult tk = takeoff_integral(out.model, hom);
    SlowSegment slow = solve_slow_segment(out.model, 1.0, tk.J[0], 1e-10);
    out.orbit = assemble_singular_orbit(out.model, hom, slow);
    out.prof = shoot_periodic_orbit(out.model, 0.02, out.orbit, 1e-10);
    return out;
  }();
  return f;
}

double log_abs(const EvansValue& e) { return std::log(std::abs(e.value)) + e.ledger; }

Cplx log_val(const EvansValue& e) { return std::log(e.value) + e.ledger; }

}  // namespace

TEST_CASE("fast reduced Evans function vanishes at 0 and lambda0 only") {
  // lambda0 = (beta2+1)^2/4 - 1 = 5/4 for beta2 = 2.
  double at_zero = log_abs(evans_fast_reduced(fx().model, fx().orbit.hom, Cplx(1e-8, 0.0)));
  double at_l0 = log_abs(evans_fast_reduced(fx().model, fx().orbit.hom, Cplx(1.25 + 1e-8, 0.0)));
  double between = log_abs(evans_fast_reduced(fx().model, fx().orbit.hom, Cplx(0.6, 0.0)));
  double beyond = log_abs(evans_fast_reduced(fx().model, fx().orbit.hom, Cplx(3.0, 0.0)));
  CHECK(at_zero < between - 10.0);
  CHECK(at_l0 < between - 10.0);
  CHECK(beyond > between - 5.0);
}

TEST_CASE("fast reduced Evans function is conjugation symmetric") {
  Cplx lam(0.45, 0.37);
  EvansValue a = evans_fast_reduced(fx().model, fx().orbit.hom, lam);
  EvansValue b = evans_fast_reduced(fx().model, fx().orbit.hom, std::conj(lam));
  CHECK(std::abs(b.value - std::conj(a.value)) < 1e-10 * std::abs(a.value));
  CHECK(b.ledger == doctest::Approx(a.ledger).epsilon(1e-12));
}

TEST_CASE("lambda left of the fast essential spectrum is rejected") {
  CHECK_THROWS_AS(evans_fast_reduced(fx().model, fx().orbit.hom, Cplx(-1.5, 0.0)), Error);
}

TEST_CASE("Melnikov matrix: regular values and the eigenvalue fallback") {
  MelnikovResult reg = melnikov_G(fx().model, fx().orbit.hom, Cplx(0.5, 0.0));
  CHECK(reg.opening > 1e-3);
  CHECK(std::isfinite(reg.G(0, 0).real()));
  // At lambda = 0 the pole residue vanishes by parity and the regular value
  // has the closed form G(0) = -2 int v_h dv_h/du dx = 24 for u0 = 1.
  MelnikovResult at0 = melnikov_G(fx().model, fx().orbit.hom, Cplx(0.0, 0.0));
  CHECK(at0.G(0, 0).real() == doctest::Approx(24.0).epsilon(1e-5));
  CHECK(std::abs(at0.G(0, 0).imag()) < 1e-6);
}

TEST_CASE("slow reduced Evans function is the trace quadratic in gamma") {
  Cplx lam(0.8, 0.3);
  TraceResult tr = trace_criterion(fx().model, fx().orbit, lam);
  for (Cplx g : {Cplx(1.0, 0.0), Cplx(std::cos(2.2), std::sin(2.2))}) {
    EvansValue es = evans_slow_reduced(fx().model, fx().orbit, lam, g);
    Cplx expect = g * g - tr.t * g + 1.0;
    Cplx got = es.value * std::exp(es.ledger);
    CHECK(std::abs(got - expect) < 1e-8 * (1.0 + std::abs(expect)));
  }
}

TEST_CASE("reduced product assembles (-gamma)^n E_f0 E_s0") {
  Cplx lam(0.7, 0.2), g(std::cos(0.9), std::sin(0.9));
  EvansValue ef = evans_fast_reduced(fx().model, fx().orbit.hom, lam);
  EvansValue es = evans_slow_reduced(fx().model, fx().orbit, lam, g);
  EvansValue e0 = evans_reduced(fx().model, fx().orbit, lam, g);
  Cplx lhs = log_val(e0);
  Cplx rhs = std::log(-g) + log_val(ef) + log_val(es);
  CHECK(std::abs(lhs.real() - rhs.real()) < 1e-9);
  double dphase = std::remainder(lhs.imag() - rhs.imag(), 2.0 * pi);
  CHECK(std::abs(dphase) < 1e-9);
}

TEST_CASE("full Evans paths agree and satisfy the reversibility identity") {
  Cplx lam(0.3, 0.2);
  for (Cplx g : {Cplx(1.0, 0.0), Cplx(std::cos(1.0), std::sin(1.0))}) {
    EvansValue a = evans_full(fx().model, fx().prof, lam, g, EvansPath::automatic);
    EvansValue b = evans_full(fx().model, fx().prof, lam, g, EvansPath::factorized);
    Cplx la = log_val(a), lb = log_val(b);
    CHECK(std::abs(la.real() - lb.real()) < 1e-3 * (1.0 + std::abs(la.real())));
    CHECK(std::abs(std::remainder(la.imag() - lb.imag(), 2.0 * pi)) < 1e-3);

    // E(lambda, gamma) = E(lambda, 1/gamma) gamma^{2(m+n)}.
    EvansValue inv = evans_full(fx().model, fx().prof, lam, 1.0 / g, EvansPath::factorized);
    Cplx lhs = log_val(b);
    Cplx rhs = log_val(inv) + 4.0 * std::log(g);
    CHECK(std::abs(lhs.real() - rhs.real()) < 1e-6 * (1.0 + std::abs(lhs.real())));
    CHECK(std::abs(std::remainder(lhs.imag() - rhs.imag(), 2.0 * pi)) < 1e-6);
  }
}

TEST_CASE("full Evans function is conjugation symmetric") {
  Cplx lam(0.4, 0.25), g(std::cos(0.7), std::sin(0.7));
  EvansValue a = evans_full(fx().model, fx().prof, lam, g);
  EvansValue b = evans_full(fx().model, fx().prof, std::conj(lam), std::conj(g));
  CHECK(std::abs(b.value - std::conj(a.value)) < 1e-8 * std::abs(a.value));
  CHECK(b.ledger == doctest::Approx(a.ledger).epsilon(1e-10));
}
