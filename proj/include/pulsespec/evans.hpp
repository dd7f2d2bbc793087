// Evans-type functions: the full Evans function E(lambda, gamma) of the
// periodic pulse (direct monodromy path and conditioning-safe factorized
// path via the Riccati diagonalization), the fast reduced Evans function,
// the Melnikov matrix G(lambda), the slow reduced Evans function, the
// reduced product, and the m = 1 trace criterion (general and reversible
// forms).
//
// Values carry a real log-renormalization ledger: the represented number is
// value * exp(ledger).  Since the ledger is real, arg(value) is the honest
// argument, so winding numbers and zero locations never need the raw
// (possibly astronomically large) magnitudes.
#pragma once

#include "pulsespec/lintools.hpp"
#include "pulsespec/model.hpp"
#include "pulsespec/profile.hpp"
#include "pulsespec/riccati.hpp"

namespace pspec {

enum class EvansKind { full, fast_reduced, slow_reduced, reduced_product };

struct EvansValue {
  Cplx lambda{0.0, 0.0};
  Cplx gamma{0.0, 0.0};
  Cplx value{0.0, 0.0};  // normalized: the represented number is value * exp(ledger)
  double ledger = 0.0;
  EvansKind kind = EvansKind::full;
};

// Coefficient/inhomogeneity of the fast limit problems along the homoclinic
// (frozen slow value u0): A_{22,0}(x,lambda), size 2n, and A_{21,0}(x), size
// 2n x 2m.
CoeffFn fast_limit_coeffs(const ModelSpec& model, const FastHomoclinic& hom, Cplx lambda);
InhomFn fast_inhom_coeffs(const ModelSpec& model, const FastHomoclinic& hom);

// Coefficient matrix of the slow limit problem along u_s (size 2m).
CoeffFn slow_limit_coeffs(const ModelSpec& model, const SlowSegment& slow, Cplx lambda);

// Fast reduced Evans function: det of the matched unstable (from -X) and
// stable (from +X) marched columns at 0.  The marching renormalizes by
// positive real scalars only, so the value stays analytic in lambda up to a
// positive real factor and its argument is directly usable for winding
// counts (n = 1; larger n uses dichotomy frames and is zero-bearing only).
EvansValue evans_fast_reduced(const ModelSpec& model, const FastHomoclinic& hom, Cplx lambda);

// Melnikov matrix G(lambda) and the bounded solution X_in of the
// inhomogeneous fast limit problem it is built from.
struct MelnikovResult {
  CMat G;              // m x m
  BoundedSolution X_in;  // 2n x 2m
  double opening = 0.0;  // dichotomy opening (pole proximity indicator)
};
MelnikovResult melnikov_G(const ModelSpec& model, const FastHomoclinic& hom, Cplx lambda,
                          double tol = 1e-11);

// Slow reduced Evans function E_s0(lambda, gamma) =
// det(Upsilon(lambda) T_s(2 L0, 0, lambda) - gamma I).
struct SlowReducedIngredients {
  CMat G_matrix;  // m x m
  CMat Upsilon;   // 2m x 2m
  CMat T_slow;    // 2m x 2m
};
SlowReducedIngredients make_slow_reduced_ingredients(const ModelSpec& model,
                                                     const SingularOrbit& orbit, Cplx lambda,
                                                     double tol = 1e-11);
EvansValue evans_slow_reduced(const ModelSpec& model, const SingularOrbit& orbit, Cplx lambda,
                              Cplx gamma);

// m = 1 trace criterion t(lambda) = Tr(Upsilon T_s); slow reduced spectrum is
// where t is real in [-2, 2].
struct TraceResult {
  Cplx t{0.0, 0.0};
  bool in_band = false;
};
TraceResult trace_criterion(const ModelSpec& model, const SingularOrbit& orbit, Cplx lambda);

// Reversible-symmetric form: t = (2/W)[(u+ u-)'(0) - G(lambda) u+(0) u-(0)]
// with u+/u- the solutions of the slow Sturm problem launched at L0 with
// data (1,0) (symmetric) and (0,1) (antisymmetric); W is their Wronskian.
TraceResult trace_criterion_reversible(const ModelSpec& model, const SingularOrbit& orbit,
                                       Cplx lambda);

// Reduced product E_0 = (-gamma)^n E_f0(lambda) E_s0(lambda, gamma).
EvansValue evans_reduced(const ModelSpec& model, const SingularOrbit& orbit, Cplx lambda,
                         Cplx gamma);

// Full Evans function.  The direct path computes the period monodromy with a
// renormalization ledger and evaluates det(M - gamma I) through logged LU
// pivots; it loses gamma-sensitivity once exp(-ledger) underflows, which the
// automatic path detects, switching to the factorized route: the Riccati
// transform splits E into a well-conditioned slow factor and a fast factor
// evaluated from the trace/determinant of the diagonalized fast monodromy.
enum class EvansPath { automatic, direct, factorized };
EvansValue evans_full(const ModelSpec& model, const PulseProfile& profile, Cplx lambda,
                      Cplx gamma, EvansPath path = EvansPath::automatic);

// Factorized evaluation with reusable per-lambda state (the Riccati solve is
// the expensive part and is gamma-independent).
struct FactorizedEvansState {
  Cplx lambda{0.0, 0.0};
  CMat T_slow_left, T_slow_right;  // T_sd(0, -L), T_sd(0, L)
  Cplx tr_fast_phase{0.0, 0.0};    // phase of tr M_f
  double tr_fast_log = 0.0;        // log |tr M_f|
  Cplx det_Mf{0.0, 0.0};           // det M_f = exp(int tr A_fd)
  Cplx det_T0L{0.0, 0.0};          // det T_fd(0, L)
  int n1 = 2;
};
FactorizedEvansState make_factorized_state(const ModelSpec& model, const PulseProfile& profile,
                                           Cplx lambda, double tol = 1e-10);
EvansValue evans_full_factorized(const FactorizedEvansState& state, Cplx gamma);

}  // namespace pspec
