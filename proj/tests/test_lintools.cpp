// Linear machinery against independent oracles: matrix exponentials for
// evolution operators, -A^{-1}B for bounded solutions of constant-coefficient
// systems, and direct subspace geometry for openings and spectral splits.
#include "pulsespec/lintools.hpp"

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

using namespace pspec;

namespace {

// Random hyperbolic constant matrix with eigenvalue real parts bounded away
// from zero: A = S D S^{-1} with |Re d_i| in [0.7, 1.5] and a well-conditioned
// random similarity.
CMat random_hyperbolic(std::mt19937& rng, int k, int n_stable) {
  std::uniform_real_distribution<double> mag(0.7, 1.5), im(-1.0, 1.0), ent(-0.5, 0.5);
  CMat D = CMat::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    double re = mag(rng) * ((i < n_stable) ? -1.0 : 1.0);
    D(i, i) = Cplx(re, im(rng));
  }
  CMat S = CMat::Identity(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) S(i, j) += Cplx(ent(rng), ent(rng));
  return S * D * S.inverse();
}

}  // namespace

TEST_CASE("evolve matches the matrix exponential for constant coefficients") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 6; ++trial) {
    int k = 2 + trial % 3;
    CMat A = random_hyperbolic(rng, k, k / 2);
    CoeffFn coeffs = [&A](double) { return A; };
    double T = 0.8 + 0.1 * trial;
    TransferMatrix M = evolve(coeffs, 0.0, T, 1e-12);
    CMat oracle = (T * A).exp();
    CHECK(M.log_scale == 0.0);
    CHECK((M.matrix - oracle).norm() < 1e-10 * oracle.norm());
  }
}

TEST_CASE("evolve composes and inverts like a flow") {
  std::mt19937 rng(11);
  CMat A0 = random_hyperbolic(rng, 3, 1), A1 = random_hyperbolic(rng, 3, 2);
  CoeffFn coeffs = [&](double x) -> CMat {
    // Smooth interpolation between two matrices; non-autonomous on purpose.
    double s = 0.5 * (1.0 + std::tanh(x));
    return (1.0 - s) * A0 + s * A1;
  };
  TransferMatrix ab = evolve(coeffs, -1.0, 0.5, 1e-12);
  TransferMatrix bc = evolve(coeffs, 0.5, 1.5, 1e-12);
  TransferMatrix ac = evolve(coeffs, -1.0, 1.5, 1e-12);
  CHECK((bc.matrix * ab.matrix - ac.matrix).norm() < 1e-9 * ac.matrix.norm());
  TransferMatrix ca = evolve(coeffs, 1.5, -1.0, 1e-12);
  CHECK((ca.matrix * ac.matrix - CMat::Identity(3, 3)).norm() < 1e-9);
}

TEST_CASE("evolve_ledgered carries growth in the ledger, not the matrix") {
  std::mt19937 rng(23);
  CMat A = random_hyperbolic(rng, 2, 1);
  CoeffFn coeffs = [&A](double) { return A; };
  const double T = 12.0;
  TransferMatrix M = evolve_ledgered(coeffs, 0.0, T, 1e-12, 1.0);
  CHECK(M.matrix.norm() < 10.0);  // renormalized
  CMat oracle = (T * A).exp();
  CHECK((std::exp(M.log_scale) * M.matrix - oracle).norm() < 1e-8 * oracle.norm());
}

TEST_CASE("asymptotic_spectral_split yields complementary invariant projections") {
  std::mt19937 rng(31);
  CMat A = random_hyperbolic(rng, 4, 2);
  SpectralSplit sp = asymptotic_spectral_split(A);
  REQUIRE(sp.stable_basis.cols() == 2);
  REQUIRE(sp.unstable_basis.cols() == 2);
  CHECK((sp.stable_projection + sp.unstable_projection - CMat::Identity(4, 4)).norm() < 1e-10);
  CHECK((sp.stable_projection * sp.stable_projection - sp.stable_projection).norm() < 1e-10);
  // Invariance: A maps ran P_s into itself.
  CMat AP = A * sp.stable_projection;
  CHECK(((CMat::Identity(4, 4) - sp.stable_projection) * AP).norm() < 1e-9);
  CHECK(sp.gap > 0.5);
}

TEST_CASE("minimal_opening against direct subspace geometry") {
  CMat e1(3, 1), e2(3, 1), mix(3, 1);
  e1 << 1.0, 0.0, 0.0;
  e2 << 0.0, 1.0, 0.0;
  mix << 1.0, 1.0, 0.0;
  CHECK(minimal_opening(e1, e2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(minimal_opening(e1, mix) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-10));
  CMat plane(3, 2);
  plane << 1.0, 0.0, 0.0, 1.0, 0.0, 0.0;
  CHECK(minimal_opening(e1, plane) < 1e-12);  // e1 lies in the plane

  // Random pair of 2-planes in C^4 versus a grid-search oracle over unit
  // vectors of the first span.
  std::mt19937 rng(47);
  std::uniform_real_distribution<double> ent(-1.0, 1.0);
  CMat M(4, 2), N(4, 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) {
      M(i, j) = Cplx(ent(rng), ent(rng));
      N(i, j) = Cplx(ent(rng), ent(rng));
    }
  Eigen::HouseholderQR<CMat> qrm(M), qrn(N);
  CMat Qm = qrm.householderQ() * CMat::Identity(4, 2);
  CMat Qn = qrn.householderQ() * CMat::Identity(4, 2);
  CMat Pn = Qn * Qn.adjoint();
  double oracle = 2.0;
  const int nt = 180, np = 180;
  for (int it = 0; it <= nt; ++it)
    for (int ip = 0; ip < np; ++ip) {
      double t = 0.5 * pi * it / nt, phi = 2.0 * pi * ip / np;
      CMat u = std::cos(t) * Qm.col(0) + std::sin(t) * std::exp(Cplx(0.0, phi)) * Qm.col(1);
      oracle = std::min(oracle, (u - Pn * u).norm());
    }
  CHECK(minimal_opening(M, N) == doctest::Approx(oracle).epsilon(2e-4));
}

TEST_CASE("bounded_inhom_solution equals -A^{-1}B for constant coefficients") {
  std::mt19937 rng(59);
  for (int trial = 0; trial < 3; ++trial) {
    int k = 2 + trial;
    CMat A = random_hyperbolic(rng, k, (k + 1) / 2);
    CMat B(k, 1);
    for (int i = 0; i < k; ++i) B(i, 0) = Cplx(0.3 + 0.1 * i, -0.2);
    CoeffFn coeffs = [&A](double) { return A; };
    InhomFn inhom = [&B](double) { return B; };
    std::vector<double> grid;
    for (double x = -40.0; x <= 40.0 + 1e-9; x += 0.5) grid.push_back(x);
    LineDichotomy dich = build_line_dichotomy(coeffs, grid, 1e-12);
    CHECK(dich.min_opening > 1e-3);
    BoundedSolution sol = bounded_inhom_solution(coeffs, inhom, dich, 1e-12);
    CMat oracle = -A.inverse() * B;
    // Boundary layers decay like exp(-0.7 * 40); probe the bulk.
    for (double x : {-10.0, 0.0, 7.5}) CHECK((sol.at(x) - oracle).norm() < 1e-10);
  }
}

TEST_CASE("half-line dichotomy recovers the stable eigenspace at a constant tail") {
  std::mt19937 rng(67);
  CMat A = random_hyperbolic(rng, 4, 2);
  SpectralSplit sp = asymptotic_spectral_split(A);
  CoeffFn coeffs = [&A](double) { return A; };
  DichotomyFrame plus = dichotomy_halfline(coeffs, Side::plus, 20.0, 1e-11);
  REQUIRE(plus.stable_basis.cols() == 2);
  // Same span as the spectral stable eigenspace.
  CHECK(minimal_opening(plus.stable_basis, sp.stable_basis) < 1e-8);
  DichotomyFrame minus = dichotomy_halfline(coeffs, Side::minus, 20.0, 1e-11);
  PastingResult paste = dichotomy_line(plus, minus);
  CHECK(paste.accepted);
  CHECK(paste.opening > 0.01);
  CHECK((paste.projection * paste.projection - paste.projection).norm() < 1e-8);
}
