// Linear non-autonomous ODE machinery with complex spectral parameter:
// evolution operators (with renormalization ledgers so determinants stay
// meaningful over long windows), exponential dichotomies on half-lines and on
// finite windows of the line, bounded solutions of inhomogeneous systems by
// the dichotomy-split variation-of-constants formula, and subspace geometry
// (minimal opening between subspaces).
#pragma once

#include "pulsespec/ode.hpp"
#include "pulsespec/types.hpp"

#include <functional>
#include <vector>

namespace pspec {

using CoeffFn = std::function<CMat(double)>;   // x -> A(x), complex k x k
using InhomFn = std::function<CMat(double)>;   // x -> f(x), complex k x r

// Evolution operator T(x1, x0) of phi' = A(x) phi.  The true operator is
// exp(log_scale) * matrix; log_scale is 0 unless the ledgered variant is used.
struct TransferMatrix {
  double x0 = 0.0, x1 = 0.0;
  CMat matrix;
  double log_scale = 0.0;
  double error_estimate = 0.0;
};

TransferMatrix evolve(const CoeffFn& coeffs, double x0, double x1, double tol);

// Same, but the product is renormalized (divided by its max-norm, log added
// to the ledger) every renorm_dx so windows of length ~1/eps cannot overflow.
TransferMatrix evolve_ledgered(const CoeffFn& coeffs, double x0, double x1, double tol,
                               double renorm_dx = 1.0);

// Spectral splitting of a hyperbolic constant matrix.
struct SpectralSplit {
  CMat stable_basis;    // k x s, orthonormal
  CMat unstable_basis;  // k x (k - s), orthonormal
  CMat stable_projection, unstable_projection;
  double gap = 0.0;  // min |Re eigenvalue|
};
SpectralSplit asymptotic_spectral_split(const CMat& A, double gap_tol = 1e-8);

// Stable/unstable bases and the associated projection at a base point, with
// empirical decay constants fitted from the construction.
struct DichotomyFrame {
  double x = 0.0;
  CMat stable_basis;    // k x s
  CMat unstable_basis;  // k x (k - s)
  CMat projection;      // onto stable along unstable
  double K = 1.0, mu = 0.0;
  double log_scale_s = 0.0, log_scale_u = 0.0;  // renormalization ledgers of the marches
};

enum class Side { plus, minus };

// Half-line dichotomy frame at x = 0 for coefficients converging to a
// hyperbolic matrix at x = +X (side plus) or x = -X (side minus).  The
// contract-bearing subspace (stable for plus, unstable for minus) is marched
// from the asymptotic spectral subspace with orthonormalization every
// renormalization step; the complementary basis is the orthogonal complement.
// prev, if given, fixes the basis phase by projection onto the previous frame
// (lambda-continuation).
DichotomyFrame dichotomy_halfline(const CoeffFn& coeffs, Side side, double X, double tol,
                                  const DichotomyFrame* prev = nullptr);

// Pasting of the two half-line frames at 0: accepted iff E^s_+(0) and
// E^u_-(0) are complementary with minimal opening above opening_tol; the
// returned projection maps onto E^s_+ along E^u_-.
struct PastingResult {
  bool accepted = false;
  double opening = 0.0;
  CMat projection;
};
PastingResult dichotomy_line(const DichotomyFrame& plus, const DichotomyFrame& minus,
                             double opening_tol = 1e-6);

// Discretized dichotomy along a window [x_0, x_N]: orthonormal stable and
// unstable bases at the grid nodes plus the contracting transfer coefficient
// matrices between neighbors,
//   T(x_{i+1}, x_i) Bs[i] = Bs[i+1] Rs[i],   T(x_i, x_{i+1}) Bu[i+1] = Bu[i] Ru[i],
// built by a forward sweep (unstable) and a backward sweep (stable) from the
// asymptotic spectral splits at the window ends.
struct LineDichotomy {
  std::vector<double> grid;
  std::vector<CMat> Bs, Bu;  // per node
  std::vector<CMat> Rs, Ru;  // per interval, both contracting by construction
  double min_opening = 0.0;  // smallest opening between Bs and Bu over the nodes
};
LineDichotomy build_line_dichotomy(const CoeffFn& coeffs, const std::vector<double>& grid,
                                   double tol);

// Unique bounded solution of Phi' = A(x) Phi + f(x) on the dichotomy window,
// by the node-split recursion: per-interval particular solutions are
// decomposed in the dichotomy frames and the stable (forward) / unstable
// (backward) coefficient recursions are both contractions, so no growing
// error enters.  Boundary closure takes zero incoming coefficients, which is
// exact for exponentially localized f.
struct BoundedSolution {
  HermiteTable<CMat> table;
  double sup_norm = 0.0;
  CMat at(double x) const { return table.eval(x); }
};
BoundedSolution bounded_inhom_solution(const CoeffFn& coeffs, const InhomFn& inhom,
                                       const LineDichotomy& dich, double tol);

// Minimal opening eta between the column spans of M and N: 0 iff they
// intersect nontrivially, 1 for orthogonal subspaces.
double minimal_opening(const CMat& M, const CMat& N);

}  // namespace pspec
