// Model class of the reaction-diffusion systems under study:
//
//   u_t = D1 u_xx - H1(u,v,eps) - eps^{-1} H2(u,v),
//   v_t = eps^2 D2 v_xx - G(u,v,eps),
//
// with m slow components u and n fast components v, subject to
//   (S1)  H2(u,0) = 0 and G(u,0,eps) = 0,
//   (S2)  Re dG/dv(u,0,0) positive definite.
//
// Nonlinearities are evaluator callbacks returning values together with all
// six first partial-derivative blocks, so Jacobians stay analytic; the
// built-in generalized Gierer-Meinhardt family hard-codes its partials.
#pragma once

#include "pulsespec/types.hpp"

#include <functional>
#include <vector>

namespace pspec {

// Value + first partials of (H1, H2, G) at one point (u, v, eps).
struct NonlinearityValues {
  Vec H1;        // m
  Vec H2;        // m
  Vec G;         // n
  Mat dH1_du;    // m x m
  Mat dH1_dv;    // m x n
  Mat dH2_du;    // m x m
  Mat dH2_dv;    // m x n
  Mat dG_du;     // n x m
  Mat dG_dv;     // n x n
};

// Rectangular evaluable region in (u, v)-space; the paper works on open sets
// U x V, the implementation needs explicit bounds.
struct DomainBox {
  Vec u_lo, u_hi;  // m
  Vec v_lo, v_hi;  // n
  bool contains(const Vec& u, const Vec& v) const;
};

struct ModelSpec {
  int m = 1;
  int n = 1;
  Vec D1;  // diagonal of D1, strictly positive, length m
  Vec D2;  // diagonal of D2, strictly positive, length n
  std::function<NonlinearityValues(const Vec& u, const Vec& v, double eps)> eval;
  DomainBox domain_box;
  std::string name;
};

// Generalized Gierer-Meinhardt family (m = n = 1, D1 = D2 = 1):
//   H1(u,v,eps) = f(u),   H2(u,v) = -h2_scale * u^alpha1 v^beta1,
//   G(u,v,eps)  = v - u^alpha2 v^beta2.
// The slow nonlinearity f is mu*u (saddle), -mu*u (center), sin(u), or custom.
enum class GMSlowType { saddle, center, sine, custom };

struct GMParams {
  double alpha1 = 0.0;
  double alpha2 = 2.0;
  int beta1 = 2;
  int beta2 = 2;
  GMSlowType slow_type = GMSlowType::saddle;
  double mu = 1.0;
  std::function<double(double)> f;    // used when slow_type == custom
  std::function<double(double)> df;   // derivative of f
  double h2_scale = 1.0;              // 0 turns the semi-strong coupling off (H2 == 0)
};

ModelSpec make_gm_model(const GMParams& params);

// The center case in the eps-normalized slow frame: rescaling the small
// parameter (eps -> sqrt(mu)*eps, legitimate since D1 can be normalized that
// way) maps H1 = -mu*u to -u and H2 to H2/sqrt(mu).  In this frame the slow
// half-period quadrature reproduces the closed form
// L0(mu) = pi/2 + arcsin(u0 / sqrt(J(u0)^2/mu + u0^2)) without prefactor.
ModelSpec make_gm_center_normalized(GMParams params);

// Validate domain membership and finiteness, then evaluate.
NonlinearityValues eval_nonlinearities(const ModelSpec& model, const Vec& u, const Vec& v,
                                       double eps);

struct ModelViolation {
  std::string assumption;  // "S1", "S2", "D-positivity", "partials"
  std::string detail;
  Vec u, v;
};

struct ValidationReport {
  std::vector<ModelViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Deterministic sampling of domain_box: checks (S1), (S2), positivity of the
// diffusion diagonals, and finite-difference consistency of the partials.
ValidationReport validate_model(const ModelSpec& model, int sample_count);

}  // namespace pspec
