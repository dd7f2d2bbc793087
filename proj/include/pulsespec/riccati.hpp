// Riccati block-diagonalization of the slow-fast linear stability problem
//
//   phi_x = [ sqrt(eps) A11(x,lambda)   sqrt(eps) A12(x) ] phi
//           [ A21(x)                    A22(x,lambda)    ]
//
// The small parameter of the Riccati scaling is sqrt(eps) (the stability
// problem carries sqrt(eps) in front of the slow blocks, matching the
// Riccati normal form with eps replaced by sqrt(eps)).  U is constructed by
// Picard iteration on the integral fixed-point map (the ODE itself is
// unstable in forward time; the integral map is the stable formulation), S by
// the bounded solution of its Sylvester equation in vectorized form.
#pragma once

#include "pulsespec/lintools.hpp"
#include "pulsespec/model.hpp"
#include "pulsespec/profile.hpp"

namespace pspec {

struct SlowFastBlocks {
  double eps = 0.0;        // model epsilon
  double eps_tilde = 0.0;  // sqrt(eps): the Riccati small parameter
  int n1 = 2, n2 = 2;      // 2m and 2n
  CoeffFn A11, A12, A21, A22;
  double period = 0.0;  // 2 L_eps, or 0 when not periodic
  double window = 0.0;  // half-window [-window, window] on which coefficients are sampled
};

// Coefficient blocks of the linear stability problem along a pulse profile.
SlowFastBlocks make_stability_blocks(const ModelSpec& model, const PulseProfile& profile,
                                     Cplx lambda);

// Grid for Riccati solves: fine spacing inside the pulse region
// |x| <= eps^{-rho}, coarser outside, covering [-window, window].
std::vector<double> riccati_grid(double window, double eps, double rho = 0.25);

struct RiccatiIterationInfo {
  int iteration_count = 0;
  double contraction_ratio = 0.0;
  double last_update = 0.0;
};

// Picard iteration U_{k+1} = bounded solution of
//   U' = A22 U + [A21 - et U_k A11 - et U_k A12 U_k],   et = eps_tilde,
// seeded at the eps = 0 bounded solution (U_0 = Omega, the solution of the
// linear inhomogeneous equation); the fixed point solves the full Riccati
// equation.  dich is a line dichotomy of the A22 system on the same grid.
BoundedSolution solve_riccati_U(const SlowFastBlocks& blocks, const LineDichotomy& dich,
                                double tol, RiccatiIterationInfo* info = nullptr);

// Bounded solution of the Sylvester-Riccati equation
//   S' = et (A11 + A12 U) S - S (A22 - et U A12) - A12
// via the vectorized linear system (the coefficient matrix is hyperbolic with
// the fast gap, inherited from A22 by roughness).
BoundedSolution solve_riccati_S(const SlowFastBlocks& blocks, const BoundedSolution& U,
                                double tol);

// Decoupled coefficient functions and the defect report of the transform
// H = [[I, -et S],[U, I - et U S]]: det H = 1 analytically, and
// H^{-1}(A H - H') must be block diagonal.
struct DiagonalizedSystem {
  CoeffFn slow;  // x -> et (A11 + A12 U)(x),   size n1
  CoeffFn fast;  // x -> (A22 - et U A12)(x),   size n2
  double max_offdiag_defect = 0.0;
  double max_detH_error = 0.0;
};
DiagonalizedSystem diagonalize(const SlowFastBlocks& blocks, const BoundedSolution& U,
                               const BoundedSolution& S, const std::vector<double>& check_grid);

// Pointwise residual of the first Riccati equation for a computed U.
double riccati_residual_U(const SlowFastBlocks& blocks, const BoundedSolution& U,
                          const std::vector<double>& check_grid);

}  // namespace pspec
