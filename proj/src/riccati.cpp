#include "pulsespec/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace pspec {

namespace {

CMat kron(const CMat& A, const CMat& B) {
  CMat K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

}  // namespace

SlowFastBlocks make_stability_blocks(const ModelSpec& model, const PulseProfile& profile,
                                     Cplx lambda) {
  auto prof = std::make_shared<const PulseProfile>(profile);
  auto mod = std::make_shared<const ModelSpec>(model);
  const int m = model.m, n = model.n;
  const double eps = profile.eps;

  auto nl_at = [prof, mod, eps](double x) {
    return mod->eval(prof->u_at(x), prof->v_at(x), eps);
  };

  SlowFastBlocks b;
  b.eps = eps;
  b.eps_tilde = std::sqrt(eps);
  b.n1 = 2 * m;
  b.n2 = 2 * n;
  b.period = 2.0 * profile.L_eps;
  b.window = profile.L_eps;

  Vec D1 = model.D1, D2 = model.D2;
  b.A11 = [nl_at, m, eps, lambda, D1](double x) -> CMat {
    NonlinearityValues nl = nl_at(x);
    CMat A = CMat::Zero(2 * m, 2 * m);
    for (int i = 0; i < m; ++i) A(i, m + i) = 1.0 / D1[i];
    A.block(m, 0, m, m) =
        eps * (nl.dH1_du.cast<Cplx>() + lambda * CMat::Identity(m, m)) + nl.dH2_du.cast<Cplx>();
    return A;
  };
  b.A12 = [nl_at, m, n, eps](double x) -> CMat {
    NonlinearityValues nl = nl_at(x);
    CMat A = CMat::Zero(2 * m, 2 * n);
    A.block(m, 0, m, n) = (eps * nl.dH1_dv + nl.dH2_dv).cast<Cplx>();
    return A;
  };
  b.A21 = [nl_at, m, n](double x) -> CMat {
    NonlinearityValues nl = nl_at(x);
    CMat A = CMat::Zero(2 * n, 2 * m);
    A.block(n, 0, n, m) = nl.dG_du.cast<Cplx>();
    return A;
  };
  b.A22 = [nl_at, n, lambda, D2](double x) -> CMat {
    NonlinearityValues nl = nl_at(x);
    CMat A = CMat::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) A(i, n + i) = 1.0 / D2[i];
    A.block(n, 0, n, n) = nl.dG_dv.cast<Cplx>() + lambda * CMat::Identity(n, n);
    return A;
  };
  return b;
}

std::vector<double> riccati_grid(double window, double eps, double rho) {
  // The pulse region needs the fine grid; its width is the larger of the
  // eps-power heuristic and the fast homoclinic support.
  double inner = std::min(window, std::max(std::pow(eps, -rho), 40.0));
  const double h_in = 0.2, h_out = 0.5;
  std::vector<double> right;
  double x = 0.0;
  while (x < window) {
    right.push_back(x);
    x += (x < inner) ? h_in : h_out;
  }
  right.push_back(window);
  std::vector<double> grid;
  for (size_t i = right.size(); i-- > 1;) grid.push_back(-right[i]);
  for (double v : right) grid.push_back(v);
  return grid;
}

BoundedSolution solve_riccati_U(const SlowFastBlocks& blocks, const LineDichotomy& dich,
                                double tol, RiccatiIterationInfo* info) {
  const double et = blocks.eps_tilde;
  BoundedSolution U = bounded_inhom_solution(blocks.A22, blocks.A21, dich, tol);

  double prev_update = 0.0;
  for (int it = 0; it < 60; ++it) {
    // f_k = A21 - et U_k A11 - et U_k A12 U_k; the bounded solution of
    // U' = A22 U + f_k is the next Picard iterate of the integral map.
    const BoundedSolution& Uk = U;
    auto f = [&](double x) -> CMat {
      CMat Ux = Uk.at(x);
      return blocks.A21(x) - et * Ux * (blocks.A11(x) + blocks.A12(x) * Ux);
    };
    BoundedSolution Unext = bounded_inhom_solution(blocks.A22, f, dich, tol);

    double update = 0.0;
    for (size_t i = 0; i < dich.grid.size(); ++i)
      update = std::max(update, (Unext.table.y[i] - U.table.y[i]).cwiseAbs().maxCoeff());
    double ratio = (prev_update > 0.0) ? update / prev_update : 0.0;
    prev_update = update;
    U = std::move(Unext);
    if (info) {
      info->iteration_count = it + 1;
      info->contraction_ratio = std::max(info->contraction_ratio, ratio);
      info->last_update = update;
    }
    if (update < tol * (1.0 + U.sup_norm)) return U;
    if (it > 2 && ratio >= 1.0) {
      // A stalled update at a small level is the roundoff floor of the
      // inhomogeneous solves, not a failure of the contraction.
      if (update < 1e-8 * (1.0 + U.sup_norm)) return U;
      throw Error(ErrorKind::solver,
                  "solve_riccati_U: Picard iteration not contracting (eps too large)");
    }
  }
  throw Error(ErrorKind::solver, "solve_riccati_U: iteration limit reached without convergence");
}

BoundedSolution solve_riccati_S(const SlowFastBlocks& blocks, const BoundedSolution& U,
                                double tol) {
  const double et = blocks.eps_tilde;
  const int n1 = blocks.n1, n2 = blocks.n2;

  // Vectorize S' = et (A11 + A12 U) S - S (A22 - et U A12) - A12 using
  // vec(AS) = (I (x) A) vec S and vec(SB) = (B^T (x) I) vec S.
  auto M = [&, et, n1, n2](double x) -> CMat {
    CMat Ux = U.at(x);
    CMat left = et * (blocks.A11(x) + blocks.A12(x) * Ux);
    CMat right = blocks.A22(x) - et * Ux * blocks.A12(x);
    return kron(CMat::Identity(n2, n2), left) -
           kron(right.transpose(), CMat::Identity(n1, n1));
  };
  auto f = [&, n1, n2](double x) -> CMat {
    CMat A12 = blocks.A12(x);
    CMat v(n1 * n2, 1);
    for (int j = 0; j < n2; ++j)
      for (int i = 0; i < n1; ++i) v(j * n1 + i, 0) = -A12(i, j);
    return v;
  };

  // The vectorized coefficient is hyperbolic with the fast gap (eigenvalues
  // et a_i - b_j with b_j the fast exponents), so the same grid carries a
  // line dichotomy.
  LineDichotomy dich = build_line_dichotomy(M, U.table.x, tol);
  BoundedSolution vecS = bounded_inhom_solution(M, f, dich, tol);

  // Reshape the vectorized samples back to n1 x n2 matrices.
  BoundedSolution S;
  S.table.x = vecS.table.x;
  S.sup_norm = vecS.sup_norm;
  auto reshape = [n1, n2](const CMat& v) {
    CMat out(n1, n2);
    for (int j = 0; j < n2; ++j)
      for (int i = 0; i < n1; ++i) out(i, j) = v(j * n1 + i, 0);
    return out;
  };
  for (size_t i = 0; i < vecS.table.x.size(); ++i) {
    S.table.y.push_back(reshape(vecS.table.y[i]));
    S.table.dy.push_back(reshape(vecS.table.dy[i]));
  }
  return S;
}

DiagonalizedSystem diagonalize(const SlowFastBlocks& blocks, const BoundedSolution& U,
                               const BoundedSolution& S, const std::vector<double>& check_grid) {
  const double et = blocks.eps_tilde;
  const int n1 = blocks.n1, n2 = blocks.n2;
  auto Uc = std::make_shared<const BoundedSolution>(U);

  DiagonalizedSystem out;
  out.slow = [blocks, Uc, et](double x) -> CMat {
    return et * (blocks.A11(x) + blocks.A12(x) * Uc->at(x));
  };
  out.fast = [blocks, Uc, et](double x) -> CMat {
    return blocks.A22(x) - et * Uc->at(x) * blocks.A12(x);
  };

  for (double x : check_grid) {
    CMat Ux = U.at(x), Sx = S.at(x);
    CMat dU = U.table.eval_derivative(x), dS = S.table.eval_derivative(x);
    CMat H = CMat::Zero(n1 + n2, n1 + n2);
    H.topLeftCorner(n1, n1) = CMat::Identity(n1, n1);
    H.topRightCorner(n1, n2) = -et * Sx;
    H.bottomLeftCorner(n2, n1) = Ux;
    H.bottomRightCorner(n2, n2) = CMat::Identity(n2, n2) - et * Ux * Sx;
    CMat Hx = CMat::Zero(n1 + n2, n1 + n2);
    Hx.topRightCorner(n1, n2) = -et * dS;
    Hx.bottomLeftCorner(n2, n1) = dU;
    Hx.bottomRightCorner(n2, n2) = -et * (dU * Sx + Ux * dS);
    CMat A = CMat::Zero(n1 + n2, n1 + n2);
    A.topLeftCorner(n1, n1) = et * blocks.A11(x);
    A.topRightCorner(n1, n2) = et * blocks.A12(x);
    A.bottomLeftCorner(n2, n1) = blocks.A21(x);
    A.bottomRightCorner(n2, n2) = blocks.A22(x);

    Eigen::FullPivLU<CMat> lu(H);
    if (!lu.isInvertible())
      throw Error(ErrorKind::solver, "diagonalize: transform H numerically singular");
    CMat B = lu.solve(A * H - Hx);
    double off = std::max(B.topRightCorner(n1, n2).cwiseAbs().maxCoeff(),
                          B.bottomLeftCorner(n2, n1).cwiseAbs().maxCoeff());
    out.max_offdiag_defect = std::max(out.max_offdiag_defect, off);
    out.max_detH_error = std::max(out.max_detH_error, std::abs(lu.determinant() - 1.0));
  }
  return out;
}

double riccati_residual_U(const SlowFastBlocks& blocks, const BoundedSolution& U,
                          const std::vector<double>& check_grid) {
  const double et = blocks.eps_tilde;
  double worst = 0.0;
  for (double x : check_grid) {
    CMat Ux = U.at(x);
    CMat dU = U.table.eval_derivative(x);
    CMat res = dU - (blocks.A22(x) * Ux - et * Ux * blocks.A11(x) -
                     et * Ux * blocks.A12(x) * Ux + blocks.A21(x));
    worst = std::max(worst, res.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace pspec
