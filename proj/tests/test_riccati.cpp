// Riccati block-diagonalization: structural identities that hold exactly
// (A21 == 0 forces U == 0; det H == 1), residuals of computed solutions, and
// the slow/fast decoupled systems along a real shot profile.
#include "pulsespec/riccati.hpp"

#include <doctest.h>

#include <cmath>

using namespace pspec;

namespace {

struct Fixture {
  ModelSpec model;
  PulseProfile prof;
  SlowFastBlocks blocks;
  std::vector<double> grid;
  LineDichotomy dich;
  BoundedSolution U;
};

// One shared Riccati solve at eps = 0.02, lambda = 1 (building it is the
// expensive part of this suite).
const Fixture& fx() {
  static Fixture f = [] {
    GMParams p;
    p.slow_type = GMSlowType::center;
    p.mu = 1.0;
    Fixture out{make_gm_model(p), {}, {}, {}, {}, {}};
    FastHomoclinic hom = solve_fast_homoclinic(out.model, Vec::Ones(1), 30.0, 1e-10);
    TakeoffResult tk = takeoff_integral(out.model, hom);
    SlowSegment slow = solve_slow_segment(out.model, 1.0, tk.J[0], 1e-10);
    SingularOrbit orbit = assemble_singular_orbit(out.model, hom, slow);
    out.prof = shoot_periodic_orbit(out.model, 0.02, orbit, 1e-10);
    out.blocks = make_stability_blocks(out.model, out.prof, Cplx(1.0, 0.0));
    out.grid = riccati_grid(out.blocks.window, out.blocks.eps);
    out.dich = build_line_dichotomy(out.blocks.A22, out.grid, 1e-11);
    out.U = solve_riccati_U(out.blocks, out.dich, 1e-11);
    return out;
  }();
  return f;
}

}  // namespace

TEST_CASE("stability blocks carry the sqrt(eps) scaling and window") {
  const SlowFastBlocks& b = fx().blocks;
  CHECK(b.eps == doctest::Approx(0.02));
  CHECK(b.eps_tilde == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));
  CHECK(b.n1 == 2);
  CHECK(b.n2 == 2);
  CHECK(b.window == doctest::Approx(fx().prof.L_eps).epsilon(1e-12));
  // A21 couples through the v-derivatives of H2 and is localized at the pulse.
  CHECK(b.A21(0.0).norm() > 0.1);
  CHECK(b.A21(0.9 * b.window).norm() < 1e-6);
}

TEST_CASE("riccati grid is fine in the pulse region and covers the window") {
  const std::vector<double>& g = fx().grid;
  REQUIRE(g.size() >= 4);
  CHECK(g.front() == doctest::Approx(-fx().blocks.window));
  CHECK(g.back() == doctest::Approx(fx().blocks.window));
  double inner = 0.0, outer = 0.0;
  for (size_t i = 1; i < g.size(); ++i) {
    double mid = 0.5 * (g[i] + g[i - 1]), h = g[i] - g[i - 1];
    CHECK(h > 0.0);
    if (std::abs(mid) < 2.0) inner = std::max(inner, h);
    if (std::abs(mid) > 0.8 * fx().blocks.window) outer = std::max(outer, h);
  }
  CHECK(inner < outer);
}

TEST_CASE("U solves the Riccati equation with small pointwise residual") {
  CHECK(riccati_residual_U(fx().blocks, fx().U, fx().grid) < 1e-7);
  CHECK(fx().U.sup_norm > 0.01);  // genuinely nontrivial coupling
}

TEST_CASE("A21 == 0 forces U == 0 (fixed point of the zero-inhomogeneity map)") {
  SlowFastBlocks b = fx().blocks;
  int n2 = b.n2, n1 = b.n1;
  b.A21 = [n2, n1](double) { return CMat::Zero(n2, n1); };
  BoundedSolution U0 = solve_riccati_U(b, fx().dich, 1e-11);
  CHECK(U0.sup_norm < 1e-9);
}

TEST_CASE("diagonalization: det H = 1 and block off-diagonals vanish") {
  BoundedSolution S = solve_riccati_S(fx().blocks, fx().U, 1e-11);
  DiagonalizedSystem diag = diagonalize(fx().blocks, fx().U, S, fx().grid);
  CHECK(diag.max_detH_error < 1e-10);
  CHECK(diag.max_offdiag_defect < 1e-6);
  // The decoupled fast system matches A22 - et U A12 at a sample point.
  CMat expect = fx().blocks.A22(0.3) -
                fx().blocks.eps_tilde * fx().U.at(0.3) * fx().blocks.A12(0.3);
  CHECK((diag.fast(0.3) - expect).norm() < 1e-12);
}

TEST_CASE("iteration info reports convergence by update norm") {
  RiccatiIterationInfo info;
  BoundedSolution U = solve_riccati_U(fx().blocks, fx().dich, 1e-9, &info);
  CHECK(info.iteration_count >= 1);
  CHECK(info.last_update < 1e-9);
  CHECK((U.at(0.0) - fx().U.at(0.0)).norm() < 1e-7);
}
