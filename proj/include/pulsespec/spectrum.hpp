// Spectrum location and classification: argument-principle winding counts on
// contours, quadtree root finding with Newton polishing, gamma-eigenvalue
// curve tracing over the unit circle, zero-pole cancelation reports at fast
// eigenvalues, the explicit m = n = 1 instability criteria, and the
// full-versus-reduced convergence comparison over an epsilon ladder.
#pragma once

#include "pulsespec/evans.hpp"

#include <string>
#include <vector>

namespace pspec {

// A complex scalar in ledgered form: the represented number is
// value * exp(ledger) with a real ledger, so arguments are exact and
// magnitudes never overflow.
struct LedgeredScalar {
  Cplx value{0.0, 0.0};
  double ledger = 0.0;
};

using LedgeredFn = std::function<LedgeredScalar(Cplx)>;

// Wraps a plain complex function (no ledger) for the counting machinery.
LedgeredFn as_ledgered(std::function<Cplx(Cplx)> f);

inline LedgeredScalar to_ledgered(const EvansValue& ev) { return {ev.value, ev.ledger}; }

enum class ContourShape { circle, rectangle };

// Closed contour in the spectral plane, plus the admissible-region constants
// Lambda (left boundary), omega and varpi (sector truncation) used for the
// default search region Re(lambda) in (Lambda, omega), |arg(lambda - omega)|
// < pi - varpi.
struct ContourSpec {
  ContourShape shape = ContourShape::circle;
  Cplx center{0.0, 0.0};
  double radius = 1.0;                       // circle
  double half_width = 1.0, half_height = 1.0;  // rectangle
  int node_count = 64;
  double Lambda = -0.5;
  double omega = 10.0;
  double varpi = 3.0 * pi / 4.0;

  Cplx point(double s) const;  // s in [0, 1), counterclockwise
};

ContourSpec circle_contour(Cplx center, double radius, int node_count = 64);
ContourSpec rectangle_contour(Cplx center, double half_width, double half_height,
                              int node_count = 64);

// Winding number (zeros minus poles inside) of f along the contour, from
// accumulated argument increments with adaptive node insertion until each
// increment is below pi/2.  Throws a contour-degeneracy (precondition) error
// if f nearly vanishes on the contour relative to its neighbors.
int count_roots_contour(const LedgeredFn& f, const ContourSpec& contour);

struct Root {
  Cplx location{0.0, 0.0};
  int multiplicity = 1;
  bool resolved = true;  // false: unresolved cluster at subdivision-depth limit
};

// All roots of f in the axis-aligned box [corner_lo, corner_hi], by quadtree
// subdivision on boundary winding numbers and Newton polishing with a
// numerical logarithmic derivative; multiplicities come from winding counts
// of small circles around the polished roots.  Results sorted by position.
std::vector<Root> find_roots(const LedgeredFn& f, Cplx corner_lo, Cplx corner_hi, double tol);

// One branch lambda(theta) of the dispersion relation E(lambda, gamma) = 0,
// gamma = exp(i theta), traced over [0, 2 pi].
struct SpectrumCurve {
  int branch_id = 0;
  std::vector<double> theta;
  std::vector<Cplx> lambda;
  double closure_defect = 0.0;  // |lambda(2 pi) - lambda(0)|
};

// Traces every root of the selected Evans function found in the seed box at
// gamma = 1 around the unit circle of gamma values.  orbit is required for
// the reduced kinds, profile for the full kind.
std::vector<SpectrumCurve> trace_gamma_curves(EvansKind kind, const ModelSpec& model,
                                              const SingularOrbit* orbit,
                                              const PulseProfile* profile, int theta_count,
                                              Cplx seed_lo, Cplx seed_hi, double tol);

enum class CancelVerdict { cancels, persists };

// Zero-pole data of the slow reduced Evans function at a simple fast
// eigenvalue lambda_diamond (m = n = 1).  residue is the singular-part
// coefficient without the gamma factor,
//   residue = -u(2 L0, lambda_diamond) * ip_H2v * ip_Gu,
// where ip_H2v = int dH2/dv(u0, v_h) v and ip_Gu = int v* dG/du(u0, v_h, 0)
// with v the L2-normalized bounded fast eigenfunction.  A nonzero residue
// means the slow pole cancels the fast zero, so no spectrum survives near
// lambda_diamond; a (structurally) zero residue leaves the zero in place.
struct CancelationReport {
  Cplx lambda_diamond{0.0, 0.0};
  Cplx residue{0.0, 0.0};
  Cplx ip_H2v{0.0, 0.0};
  Cplx ip_Gu{0.0, 0.0};
  Cplx u_boundary{0.0, 0.0};  // u(2 L0, lambda_diamond), u(0) = 0, u'(0) = 1
  CancelVerdict verdict = CancelVerdict::persists;
};

CancelationReport residue_slow_at_fast_zero(const ModelSpec& model, const SingularOrbit& orbit,
                                            Cplx lambda_diamond, double cancel_tol = 1e-6);

// Winding counts of the reduced product on a guard circle around
// lambda_diamond, one per gamma sample, cross-validated against the residue
// verdict (0 everywhere iff cancels, 1 everywhere iff persists).
struct CancelationScan {
  CancelationReport report;
  double delta = 0.05;  // guard radius actually used (adaptive shrink)
  std::vector<Cplx> gamma;
  std::vector<int> winding;
  bool consistent = false;
};

CancelationScan cancelation_scan(const ModelSpec& model, const SingularOrbit& orbit,
                                 Cplx lambda_diamond, int gamma_count = 16, double delta = 0.05);

enum class InstabilityVerdict { unstable_by_I1, unstable_by_I2, inconclusive };

// Parity-based instability test (m = n = 1): I1 is the singular part of the
// slow trace at the largest fast eigenvalue lambda0; I2 reproduces t(0)/2 for
// segments symmetric about L0 through Rofe-Beketov's formula; G0 is the total
// u-derivative of int H2(u, v_h(x, u)) dx at u0, computed as twice the finite
// difference of the take-off integral over the u-family of homoclinics.
// Unstable if I1 <= 0, or if the segment is symmetric and I2 > -1.
struct InstabilityReport {
  double I1 = 0.0;
  double I2 = 0.0;
  double G0 = 0.0;
  double lambda0 = 0.0;
  InstabilityVerdict verdict = InstabilityVerdict::inconclusive;
};

InstabilityReport instability_criteria(const ModelSpec& model, const SingularOrbit& orbit);

// Per-epsilon comparison of full-Evans gamma-eigenvalues inside a contour
// against the roots of the reduced product.
struct ConvergenceRow {
  double eps = 0.0;
  double L_eps = 0.0;
  bool ok = false;
  std::string note;
  std::vector<Cplx> roots;
  int count = 0;                  // boundary winding count of the full Evans function
  double distance_to_reduced = 0.0;  // Hausdorff distance to the reduced roots
};

struct ConvergenceTable {
  std::vector<Cplx> reduced_roots;
  int expected_count = 0;  // winding count of the reduced product on the contour
  std::vector<ConvergenceRow> rows;
};

ConvergenceTable compare_convergence(const ModelSpec& model, const SingularOrbit& orbit,
                                     const std::vector<double>& eps_list,
                                     const ContourSpec& contour, Cplx gamma);

// Solves mu = lambda0 + (k pi / (2 L0(mu)))^2 for the slow-center family
// (H1 = -mu u): at such mu the boundary value u(2 L0, lambda0) vanishes, the
// residue at the fast eigenvalue is zero, and the cancelation fails.  params
// supplies the fast nonlinearities (its mu field is overwritten); the
// take-off value J is mu-independent and computed once.
double find_cancelation_failure_mu(GMParams params, double u0, double lambda0, int k = 1,
                                   double tol = 1e-10);

}  // namespace pspec
