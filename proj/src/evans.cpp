#include "pulsespec/evans.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <memory>

namespace pspec {

namespace {
using GK = boost::math::quadrature::gauss_kronrod<double, 15>;

Cplx gk_complex(const std::function<Cplx(double)>& f, double a, double b) {
  double re = GK::integrate([&](double x) { return f(x).real(); }, a, b, 10, 1e-12);
  double im = GK::integrate([&](double x) { return f(x).imag(); }, a, b, 10, 1e-12);
  return {re, im};
}

// Folds the magnitude of v into the ledger, keeping |value| ~ 1.
void normalize(EvansValue& ev) {
  double a = std::abs(ev.value);
  if (a > 0.0 && (a > 1e3 || a < 1e-3) && std::isfinite(a)) {
    ev.ledger += std::log(a);
    ev.value /= a;
  }
}

// det(M - c I) through logged LU pivots: returns phase and log-magnitude so
// the determinant never overflows.
void logged_char_det(const CMat& M, Cplx c, Cplx& phase, double& logmag) {
  CMat A = M - c * CMat::Identity(M.rows(), M.cols());
  Eigen::PartialPivLU<CMat> lu(A);
  phase = Cplx(static_cast<double>(lu.permutationP().determinant()), 0.0);
  logmag = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    Cplx d = lu.matrixLU()(i, i);
    double ad = std::abs(d);
    if (ad == 0.0) {
      phase = 0.0;
      logmag = 0.0;
      return;
    }
    phase *= d / ad;
    logmag += std::log(ad);
  }
}

}  // namespace

CoeffFn fast_limit_coeffs(const ModelSpec& model, const FastHomoclinic& hom, Cplx lambda) {
  auto mod = std::make_shared<const ModelSpec>(model);
  auto h = std::make_shared<const FastHomoclinic>(hom);
  const int n = model.n;
  Vec D2 = model.D2;
  return [mod, h, n, lambda, D2](double x) -> CMat {
    NonlinearityValues nl = mod->eval(h->u0, h->v_at(x), 0.0);
    CMat A = CMat::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) A(i, n + i) = 1.0 / D2[i];
    A.block(n, 0, n, n) = nl.dG_dv.cast<Cplx>() + lambda * CMat::Identity(n, n);
    return A;
  };
}

InhomFn fast_inhom_coeffs(const ModelSpec& model, const FastHomoclinic& hom) {
  auto mod = std::make_shared<const ModelSpec>(model);
  auto h = std::make_shared<const FastHomoclinic>(hom);
  const int n = model.n, m = model.m;
  return [mod, h, n, m](double x) -> CMat {
    NonlinearityValues nl = mod->eval(h->u0, h->v_at(x), 0.0);
    CMat A = CMat::Zero(2 * n, 2 * m);
    A.block(n, 0, n, m) = nl.dG_du.cast<Cplx>();
    return A;
  };
}

CoeffFn slow_limit_coeffs(const ModelSpec& model, const SlowSegment& slow, Cplx lambda) {
  auto mod = std::make_shared<const ModelSpec>(model);
  auto s = std::make_shared<const SlowSegment>(slow);
  const int m = model.m;
  Vec D1 = model.D1;
  return [mod, s, m, lambda, D1](double xi) -> CMat {
    Vec u = Vec::Constant(m, s->u_at(xi));
    NonlinearityValues nl = mod->eval(u, Vec::Zero(mod->n), 0.0);
    CMat A = CMat::Zero(2 * m, 2 * m);
    for (int i = 0; i < m; ++i) A(i, m + i) = 1.0 / D1[i];
    A.block(m, 0, m, m) = nl.dH1_du.cast<Cplx>() + lambda * CMat::Identity(m, m);
    return A;
  };
}

EvansValue evans_fast_reduced(const ModelSpec& model, const FastHomoclinic& hom, Cplx lambda) {
  EvansValue ev;
  ev.lambda = lambda;
  ev.kind = EvansKind::fast_reduced;
  CoeffFn A = fast_limit_coeffs(model, hom, lambda);
  const double X = hom.X;

  if (model.n == 1) {
    // Asymptotic eigenvectors (1, +-sqrt((g0+lambda) d2)) are analytic in
    // lambda on the half plane right of -g0 (principal square root), and the
    // marching renormalizes by positive reals only, so arg(value) is the
    // honest analytic argument.
    NonlinearityValues at0 = model.eval(hom.u0, Vec::Zero(1), 0.0);
    const double g0 = at0.dG_dv(0, 0), d2 = model.D2[0];
    Cplx root = std::sqrt((g0 + lambda) * d2);
    if ((g0 + lambda).real() <= 1e-10 && std::abs((g0 + lambda).imag()) < 1e-10)
      throw Error(ErrorKind::domain,
                  "evans_fast_reduced: lambda left of the essential-spectrum edge of the fast "
                  "limit problem");

    auto march = [&](double from, Cplx q0, double& ledger) {
      CVec w(2);
      w << 1.0, q0;
      double nrm = w.norm();
      w /= nrm;
      ledger = std::log(nrm);
      auto rhs = [&](double xx, const CVec& y) -> CVec { return A(xx) * y; };
      OdeOptions opt;
      opt.rtol = 1e-9;
      opt.atol = 1e-12;
      const double dir = (from > 0.0) ? -1.0 : 1.0;
      double x = from;
      while (std::abs(x) > 1e-12) {
        double xn = (dir > 0.0) ? std::min(x + 1.0, 0.0) : std::max(x - 1.0, 0.0);
        w = integrate_ode(rhs, x, xn, w, opt);
        double s = w.norm();
        w /= s;
        ledger += std::log(s);
        x = xn;
      }
      return w;
    };

    double lu = 0.0, ls = 0.0;
    CVec wu = march(-X, +root, lu);   // unstable direction grows forward
    CVec ws = march(+X, -root, ls);   // stable direction grows backward
    ev.value = wu[0] * ws[1] - wu[1] * ws[0];
    ev.ledger = lu + ls;
    normalize(ev);
    return ev;
  }

  // General n: dichotomy frames; orthonormalization loses analyticity, so the
  // value is zero-bearing only (Theorem-level basis independence of zeros).
  DichotomyFrame plus = dichotomy_halfline(A, Side::plus, X, 1e-11);
  DichotomyFrame minus = dichotomy_halfline(A, Side::minus, X, 1e-11);
  CMat F(plus.stable_basis.rows(), plus.stable_basis.rows());
  F << minus.unstable_basis, plus.stable_basis;
  ev.value = F.determinant();
  ev.ledger = plus.log_scale_s + minus.log_scale_u;
  normalize(ev);
  return ev;
}

MelnikovResult melnikov_G(const ModelSpec& model, const FastHomoclinic& hom, Cplx lambda,
                          double tol) {
  const int m = model.m, n = model.n;
  const double X = hom.X;
  CoeffFn A = fast_limit_coeffs(model, hom, lambda);
  InhomFn B = fast_inhom_coeffs(model, hom);

  // The G quadrature integrates the cubic-Hermite interpolant of X_in, so
  // the node spacing bounds the achievable accuracy (O(h^4) interpolation
  // bias); 0.1 keeps that bias below ~1e-6 on unit-scale problems.
  std::vector<double> grid;
  for (double x = -X; x < X - 1e-9; x += 0.1) grid.push_back(x);
  grid.push_back(X);

  LineDichotomy dich = build_line_dichotomy(A, grid, tol);
  MelnikovResult out;
  out.opening = dich.min_opening;
  if (dich.min_opening < 1e-6) {
    // lambda sits on an eigenvalue of the fast limit problem, where G has at
    // most a simple pole.  The symmetric average over lambda +- delta cancels
    // the pole and every odd Taylor term exactly, leaving the regular part
    // with an O(delta^2) error that the two-step Richardson combination
    // removes; this is the correct value whenever the residue vanishes
    // (notably lambda = 0, where parity kills the residue).
    const double delta = 4e-4 * (1.0 + std::abs(lambda));
    MelnikovResult fine = melnikov_G(model, hom, lambda + 0.5 * delta, tol);
    CMat avg_fine = 0.5 * (fine.G + melnikov_G(model, hom, lambda - 0.5 * delta, tol).G);
    CMat avg_coarse = 0.5 * (melnikov_G(model, hom, lambda + delta, tol).G +
                             melnikov_G(model, hom, lambda - delta, tol).G);
    out.G = (4.0 * avg_fine - avg_coarse) / 3.0;
    out.X_in = std::move(fine.X_in);
    return out;
  }
  out.X_in = bounded_inhom_solution(A, B, dich, tol);

  auto Xin = std::make_shared<const BoundedSolution>(out.X_in);
  out.G = CMat::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      auto f = [&](double x) -> Cplx {
        NonlinearityValues nl = model.eval(hom.u0, hom.v_at(x), 0.0);
        CMat Vin = Xin->at(x).topLeftCorner(n, m);
        Cplx val = nl.dH2_du(i, j);
        for (int k = 0; k < n; ++k) val += nl.dH2_dv(i, k) * Vin(k, j);
        return val;
      };
      out.G(i, j) = gk_complex(f, -X, X);
    }
  return out;
}

SlowReducedIngredients make_slow_reduced_ingredients(const ModelSpec& model,
                                                     const SingularOrbit& orbit, Cplx lambda,
                                                     double tol) {
  const int m = model.m;
  SlowReducedIngredients ing;
  ing.G_matrix = melnikov_G(model, orbit.hom, lambda, tol).G;
  ing.T_slow =
      evolve(slow_limit_coeffs(model, orbit.slow, lambda), 0.0, 2.0 * orbit.slow.L0_check, tol)
          .matrix;
  ing.Upsilon = CMat::Identity(2 * m, 2 * m);
  ing.Upsilon.block(m, 0, m, m) = ing.G_matrix;
  return ing;
}

EvansValue evans_slow_reduced(const ModelSpec& model, const SingularOrbit& orbit, Cplx lambda,
                              Cplx gamma) {
  SlowReducedIngredients ing = make_slow_reduced_ingredients(model, orbit, lambda);
  const Eigen::Index k = ing.T_slow.rows();
  EvansValue ev;
  ev.lambda = lambda;
  ev.gamma = gamma;
  ev.kind = EvansKind::slow_reduced;
  ev.value = (ing.Upsilon * ing.T_slow - gamma * CMat::Identity(k, k)).determinant();
  normalize(ev);
  return ev;
}

TraceResult trace_criterion(const ModelSpec& model, const SingularOrbit& orbit, Cplx lambda) {
  if (model.m != 1)
    throw Error(ErrorKind::precondition, "trace_criterion: requires m = 1");
  SlowReducedIngredients ing = make_slow_reduced_ingredients(model, orbit, lambda);
  TraceResult out;
  out.t = (ing.Upsilon * ing.T_slow).trace();
  out.in_band = std::abs(out.t.imag()) < 1e-6 && out.t.real() >= -2.0 && out.t.real() <= 2.0;
  return out;
}

TraceResult trace_criterion_reversible(const ModelSpec& model, const SingularOrbit& orbit,
                                       Cplx lambda) {
  if (model.m != 1)
    throw Error(ErrorKind::precondition, "trace_criterion_reversible: requires m = 1");
  const double L0 = orbit.slow.L0_check;
  Cplx G = melnikov_G(model, orbit.hom, lambda).G(0, 0);

  // u'' = (dH1/du(u_s) + lambda) u / D1 launched at the symmetry point L0
  // with data (1,0) (symmetric solution) and (0,1) (antisymmetric).
  auto mod = std::make_shared<const ModelSpec>(model);
  auto seg = std::make_shared<const SlowSegment>(orbit.slow);
  auto rhs = [mod, seg, lambda](double xi, const CVec& y) -> CVec {
    Vec u = Vec::Constant(1, seg->u_at(xi));
    NonlinearityValues nl = mod->eval(u, Vec::Zero(mod->n), 0.0);
    CVec dy(2);
    dy[0] = y[1];
    dy[1] = (nl.dH1_du(0, 0) + lambda) * y[0] / mod->D1[0];
    return dy;
  };
  OdeOptions opt;
  opt.rtol = 1e-12;
  opt.atol = 1e-14;
  CVec up(2), um(2);
  up << 1.0, 0.0;
  um << 0.0, 1.0;
  up = integrate_ode(rhs, L0, 0.0, up, opt);
  um = integrate_ode(rhs, L0, 0.0, um, opt);

  const Cplx W = Cplx(1.0, 0.0);  // Wronskian, constant (trace-free), = 1 at L0
  TraceResult out;
  out.t = 2.0 / W * (up[1] * um[0] + up[0] * um[1] - G * up[0] * um[0]);
  out.in_band = std::abs(out.t.imag()) < 1e-6 && out.t.real() >= -2.0 && out.t.real() <= 2.0;
  return out;
}

EvansValue evans_reduced(const ModelSpec& model, const SingularOrbit& orbit, Cplx lambda,
                         Cplx gamma) {
  EvansValue ef = evans_fast_reduced(model, orbit.hom, lambda);
  EvansValue es = evans_slow_reduced(model, orbit, lambda, gamma);
  EvansValue ev;
  ev.lambda = lambda;
  ev.gamma = gamma;
  ev.kind = EvansKind::reduced_product;
  ev.value = std::pow(-gamma, model.n) * ef.value * es.value;
  ev.ledger = ef.ledger + es.ledger;
  normalize(ev);
  return ev;
}

FactorizedEvansState make_factorized_state(const ModelSpec& model, const PulseProfile& profile,
                                           Cplx lambda, double tol) {
  SlowFastBlocks blocks = make_stability_blocks(model, profile, lambda);
  if (blocks.n2 != 2)
    throw Error(ErrorKind::precondition,
                "evans_full (factorized): fast trace/determinant route implemented for n = 1");
  const double L = profile.L_eps;
  std::vector<double> grid = riccati_grid(L, profile.eps);
  LineDichotomy dich = build_line_dichotomy(blocks.A22, grid, tol);
  BoundedSolution U = solve_riccati_U(blocks, dich, std::min(tol, 1e-10));

  const double et = blocks.eps_tilde;
  auto Uc = std::make_shared<const BoundedSolution>(U);
  auto bl = std::make_shared<const SlowFastBlocks>(blocks);
  CoeffFn slow = [bl, Uc, et](double x) -> CMat {
    return et * (bl->A11(x) + bl->A12(x) * Uc->at(x));
  };
  CoeffFn fast = [bl, Uc, et](double x) -> CMat {
    return bl->A22(x) - et * Uc->at(x) * bl->A12(x);
  };

  FactorizedEvansState st;
  st.lambda = lambda;
  st.n1 = blocks.n1;
  st.T_slow_left = evolve(slow, -L, 0.0, tol).matrix;
  st.T_slow_right = evolve(slow, L, 0.0, tol).matrix;

  TransferMatrix Mf = evolve_ledgered(fast, -L, L, tol, 1.0);
  Cplx tr = Mf.matrix.trace();
  st.tr_fast_log = Mf.log_scale + std::log(std::abs(tr));
  st.tr_fast_phase = tr / std::abs(tr);

  // Liouville: det M_f = exp(int_{-L}^{L} tr A_fd), det T_fd(0,L) =
  // exp(-int_0^L tr A_fd); the trace is exponentially localized.
  auto trf = [&](double x) -> Cplx { return fast(x).trace(); };
  const double W0 = std::min(L, 45.0);
  Cplx int_left = gk_complex(trf, -L, -W0) + gk_complex(trf, -W0, 0.0);
  Cplx int_right = gk_complex(trf, 0.0, W0) + gk_complex(trf, W0, L);
  st.det_Mf = std::exp(int_left + int_right);
  st.det_T0L = std::exp(-int_right);
  return st;
}

EvansValue evans_full_factorized(const FactorizedEvansState& state, Cplx gamma) {
  EvansValue ev;
  ev.lambda = state.lambda;
  ev.gamma = gamma;
  ev.kind = EvansKind::full;

  Cplx Es = (state.T_slow_left - gamma * state.T_slow_right).determinant();

  // Fast factor det(T_fd(0,-L) - gamma T_fd(0,L)) = det T_fd(0,L) *
  // (gamma^2 - tr(M_f) gamma + det M_f), evaluated in log form because
  // tr(M_f) ~ e^{2 mu L}.
  Cplx ef;
  double ledger_f = 0.0;
  Cplx small = gamma * gamma + state.det_Mf;
  if (state.tr_fast_log > 25.0) {
    Cplx ratio = (std::abs(gamma) > 0.0)
                     ? small / gamma / state.tr_fast_phase * std::exp(-state.tr_fast_log)
                     : Cplx(0.0, 0.0);
    ef = -gamma * state.tr_fast_phase * (1.0 - ratio);
    ledger_f = state.tr_fast_log;
    if (std::abs(gamma) == 0.0) {  // det(M_f) alone
      ef = state.det_Mf;
      ledger_f = 0.0;
    }
  } else {
    Cplx T = state.tr_fast_phase * std::exp(state.tr_fast_log);
    ef = small - gamma * T;
  }
  ev.value = Es * state.det_T0L * ef;
  ev.ledger = ledger_f;
  normalize(ev);
  return ev;
}

namespace {

// Second compound (wedge) of a 4 x 4 matrix: the induced action on
// Lambda^2 C^4 in the ordered basis e_i ^ e_j, i < j, for the derivative
// rule d/dx (v ^ w) = Av ^ w + v ^ Aw.
CMat compound2(const CMat& A) {
  static const int I[6] = {0, 0, 0, 1, 1, 2};
  static const int J[6] = {1, 2, 3, 2, 3, 3};
  CMat B = CMat::Zero(6, 6);
  for (int c = 0; c < 6; ++c) {
    const int k = I[c], l = J[c];
    for (int r = 0; r < 6; ++r) {
      const int i = I[r], j = J[r];
      Cplx v(0.0, 0.0);
      if (j == l) v += A(i, k);
      if (i == l) v -= A(j, k);
      if (i == k) v += A(j, l);
      if (j == k) v -= A(i, l);
      B(r, c) = v;
    }
  }
  return B;
}

// Full Evans function from the Floquet multipliers, recovered through the
// second compound monodromy.  The slow-fast structure orders the four
// multipliers |rho_f-| << |rho_s+-| << |rho_f+|.  At large ledgers only the
// dominant part of a monodromy carries honest relative accuracy, so the
// small multipliers cannot be read off M directly; but the dominant
// eigenvalue of M gives rho_f+, the dominant pair of the wedge monodromy
// gives rho_f+ rho_s+-, and det M = 1 (trace-free coefficients) gives
// rho_f-.  E = prod_i (rho_i - gamma) = det(M - gamma I) exactly.
EvansValue evans_full_multipliers(const CoeffFn& A, const TransferMatrix& M, double L,
                                  double tol, Cplx lambda, Cplx gamma) {
  CoeffFn A2 = [&A](double x) -> CMat { return compound2(A(x)); };
  TransferMatrix M2 = evolve_ledgered(A2, -L, L, tol, 1.0);

  Eigen::ComplexEigenSolver<CMat> es1(M.matrix);
  Eigen::ComplexEigenSolver<CMat> es2(M2.matrix);
  if (es1.info() != Eigen::Success || es2.info() != Eigen::Success)
    throw Error(ErrorKind::solver, "evans_full: monodromy eigenvalue extraction failed");
  CVec mu = es1.eigenvalues();
  CVec nu = es2.eigenvalues();
  Eigen::Index imax = 0;
  for (Eigen::Index i = 1; i < mu.size(); ++i)
    if (std::abs(mu[i]) > std::abs(mu[imax])) imax = i;
  Cplx mu_max = mu[imax];
  std::sort(nu.data(), nu.data() + nu.size(),
            [](Cplx a, Cplx b) { return std::abs(a) > std::abs(b); });

  // rho_s+- = e^{sigma2 - sigma1} nu_{1,2} / mu_max; their sum/product feed
  // the slow quadratic factor, which stays accurate even when the pair is
  // nearly defective (band points rho_s+ = rho_s-).
  const double shift = M2.log_scale - M.log_scale;
  Cplx t_s = std::exp(shift) * (nu[0] + nu[1]) / mu_max;
  Cplx d_s = std::exp(2.0 * shift) * (nu[0] * nu[1]) / (mu_max * mu_max);

  const double lf = M.log_scale + std::log(std::abs(mu_max));
  const Cplx pf = mu_max / std::abs(mu_max);
  Cplx rho_f_minus = std::exp(-lf) / (pf * d_s);

  EvansValue ev;
  ev.lambda = lambda;
  ev.gamma = gamma;
  ev.kind = EvansKind::full;
  ev.value = pf * (1.0 - gamma * std::exp(-lf) / pf) * (gamma * gamma - gamma * t_s + d_s) *
             (rho_f_minus - gamma);
  ev.ledger = lf;
  normalize(ev);
  return ev;
}

}  // namespace

EvansValue evans_full(const ModelSpec& model, const PulseProfile& profile, Cplx lambda,
                      Cplx gamma, EvansPath path) {
  SlowFastBlocks blocks = make_stability_blocks(model, profile, lambda);
  const Eigen::Index k = blocks.n1 + blocks.n2;
  const double L = profile.L_eps;
  const double tol = 1e-11;

  bool try_direct = (path != EvansPath::factorized);
  if (try_direct) {
    auto bl = std::make_shared<const SlowFastBlocks>(blocks);
    const double et = blocks.eps_tilde;
    CoeffFn A = [bl, et, k](double x) -> CMat {
      CMat M(k, k);
      M.topLeftCorner(bl->n1, bl->n1) = et * bl->A11(x);
      M.topRightCorner(bl->n1, bl->n2) = et * bl->A12(x);
      M.bottomLeftCorner(bl->n2, bl->n1) = bl->A21(x);
      M.bottomRightCorner(bl->n2, bl->n2) = bl->A22(x);
      return M;
    };
    TransferMatrix M = evolve_ledgered(A, -L, L, tol, 1.0);

    // E = det(T(0,-L) - gamma T(0,L)) = det(M - gamma I) since det T = 1
    // (trace-free coefficients); with M = e^sigma Mtilde this is
    // e^{k sigma} det(Mtilde - gamma e^{-sigma} I).  The small pivots of
    // Mtilde - gamma e^{-sigma} sit a factor e^{-sigma} below its O(1)
    // entries, so once sigma exceeds the double-precision noise floor
    // (~e^{-36}) they are rounding noise and the determinant -- while finite
    // -- no longer tracks gamma or lambda.
    double log_c = std::log(std::max(std::abs(gamma), 1e-300)) - M.log_scale;
    bool conditioned = (M.log_scale < 20.0 && log_c > -250.0);
    if (!conditioned && path == EvansPath::direct)
      throw Error(ErrorKind::accuracy,
                  "evans_full: direct monodromy path lost gamma-sensitivity (ledger " +
                      std::to_string(M.log_scale) + "); use the factorized path");
    if (conditioned) {
      Cplx c = (std::abs(gamma) > 0.0) ? gamma / std::abs(gamma) * std::exp(log_c)
                                       : Cplx(0.0, 0.0);
      Cplx phase;
      double logmag;
      logged_char_det(M.matrix, c, phase, logmag);
      EvansValue ev;
      ev.lambda = lambda;
      ev.gamma = gamma;
      ev.kind = EvansKind::full;
      ev.value = phase;
      ev.ledger = (phase == Cplx(0.0, 0.0)) ? 0.0 : logmag + double(k) * M.log_scale;
      return ev;
    }
    if (path == EvansPath::automatic && k == 4)
      return evans_full_multipliers(A, M, L, tol, lambda, gamma);
  }
  FactorizedEvansState st = make_factorized_state(model, profile, lambda, tol);
  return evans_full_factorized(st, gamma);
}

}  // namespace pspec
