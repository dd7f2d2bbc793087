#include "pulsespec/lintools.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace pspec {

namespace {

OdeOptions linear_opts(double tol) {
  OdeOptions opt;
  opt.rtol = std::max(1e-13, std::min(tol, 1e-8));
  opt.atol = 1e-13;
  return opt;
}

// Thin QR: M = Q C with Q orthonormal k x c and C upper triangular c x c.
void thin_qr(const CMat& M, CMat& Q, CMat& C) {
  const Eigen::Index k = M.rows(), c = M.cols();
  Eigen::HouseholderQR<CMat> qr(M);
  Q = qr.householderQ() * CMat::Identity(k, c);
  C = qr.matrixQR().topRows(c).template triangularView<Eigen::Upper>();
}

// Propagates the columns of B through phi' = A phi from x0 to x1.
CMat propagate(const CoeffFn& coeffs, double x0, double x1, CMat B, double tol) {
  auto rhs = [&](double x, const CMat& Y) -> CMat { return coeffs(x) * Y; };
  return integrate_ode(rhs, x0, x1, std::move(B), linear_opts(tol));
}

// Orthogonal complement of the column span of an orthonormal basis.
CMat orth_complement(const CMat& Q) {
  const Eigen::Index k = Q.rows(), c = Q.cols();
  Eigen::HouseholderQR<CMat> qr(Q);
  CMat full = qr.householderQ() * CMat::Identity(k, k);
  return full.rightCols(k - c);
}

}  // namespace

TransferMatrix evolve(const CoeffFn& coeffs, double x0, double x1, double tol) {
  const Eigen::Index k = coeffs(x0).rows();
  TransferMatrix T;
  T.x0 = x0;
  T.x1 = x1;
  OdeStats stats;
  auto rhs = [&](double x, const CMat& Y) -> CMat {
    CMat A = coeffs(x);
    if (!A.allFinite()) throw Error(ErrorKind::solver, "evolve: non-finite coefficient matrix");
    return A * Y;
  };
  CMat I = CMat::Identity(k, k);
  OdeOptions opt = linear_opts(tol);
  T.matrix = integrate_ode(rhs, x0, x1, std::move(I), opt, &stats);
  T.error_estimate = stats.error_estimate;
  return T;
}

TransferMatrix evolve_ledgered(const CoeffFn& coeffs, double x0, double x1, double tol,
                               double renorm_dx) {
  const Eigen::Index k = coeffs(x0).rows();
  TransferMatrix T;
  T.x0 = x0;
  T.x1 = x1;
  T.matrix = CMat::Identity(k, k);
  const double dir = (x1 >= x0) ? 1.0 : -1.0;
  double x = x0;
  auto rhs = [&](double xx, const CMat& Y) -> CMat { return coeffs(xx) * Y; };
  OdeOptions opt = linear_opts(tol);
  OdeStats stats;
  while (dir * (x1 - x) > 0.0) {
    double xn = x + dir * std::min(renorm_dx, std::abs(x1 - x));
    T.matrix = integrate_ode(rhs, x, xn, std::move(T.matrix), opt, &stats);
    double s = T.matrix.cwiseAbs().maxCoeff();
    if (s > 0.0) {
      T.matrix /= s;
      T.log_scale += std::log(s);
    }
    x = xn;
  }
  T.error_estimate = stats.error_estimate;
  return T;
}

SpectralSplit asymptotic_spectral_split(const CMat& A, double gap_tol) {
  const Eigen::Index k = A.rows();
  Eigen::ComplexEigenSolver<CMat> es(A);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::solver, "asymptotic_spectral_split: eigendecomposition failed");

  SpectralSplit out;
  out.gap = es.eigenvalues().real().cwiseAbs().minCoeff();
  if (out.gap < gap_tol)
    throw Error(ErrorKind::precondition,
                "asymptotic_spectral_split: matrix not hyperbolic (eigenvalue within " +
                    std::to_string(gap_tol) + " of the imaginary axis)");

  std::vector<Eigen::Index> si, ui;
  for (Eigen::Index i = 0; i < k; ++i)
    (es.eigenvalues()[i].real() < 0.0 ? si : ui).push_back(i);

  CMat Vs(k, (Eigen::Index)si.size()), Vu(k, (Eigen::Index)ui.size());
  for (size_t j = 0; j < si.size(); ++j) Vs.col(j) = es.eigenvectors().col(si[j]);
  for (size_t j = 0; j < ui.size(); ++j) Vu.col(j) = es.eigenvectors().col(ui[j]);

  // Spectral (generally oblique) projections from the full eigenvector matrix.
  CMat V = es.eigenvectors();
  CMat D = CMat::Zero(k, k);
  for (auto i : si) D(i, i) = 1.0;
  CMat Vinv = V.fullPivLu().inverse();
  out.stable_projection = V * D * Vinv;
  out.unstable_projection = CMat::Identity(k, k) - out.stable_projection;

  CMat C;
  if (Vs.cols() > 0) thin_qr(Vs, out.stable_basis, C);
  else out.stable_basis = CMat::Zero(k, 0);
  if (Vu.cols() > 0) thin_qr(Vu, out.unstable_basis, C);
  else out.unstable_basis = CMat::Zero(k, 0);
  return out;
}

DichotomyFrame dichotomy_halfline(const CoeffFn& coeffs, Side side, double X, double tol,
                                  const DichotomyFrame* prev) {
  const double sgn = (side == Side::plus) ? 1.0 : -1.0;
  SpectralSplit split = asymptotic_spectral_split(coeffs(sgn * X));

  // March the contract-bearing subspace toward 0: the stable one backward
  // from +X (it dominates in backward time), the unstable one forward from
  // -X (it dominates in forward time).  Either way the marched directions are
  // the growing ones for the direction of integration, so the computation is
  // self-correcting; orthonormalize each unit step and keep the log-ledger.
  CMat B = (side == Side::plus) ? split.stable_basis : split.unstable_basis;
  double ledger = 0.0;
  double x = sgn * X;
  while (std::abs(x) > 1e-12) {
    double xn = sgn * std::max(0.0, std::abs(x) - 1.0);
    B = propagate(coeffs, x, xn, std::move(B), tol);
    CMat Q, C;
    thin_qr(B, Q, C);
    double s = C.cwiseAbs().maxCoeff();
    ledger += std::log(std::max(s, 1e-300));
    B = Q;
    x = xn;
  }

  if (prev) {
    const CMat& ref =
        (side == Side::plus) ? prev->stable_basis : prev->unstable_basis;
    if (ref.cols() == B.cols() && ref.rows() == B.rows()) {
      CMat aligned = B * (B.adjoint() * ref);
      CMat Q, C;
      thin_qr(aligned, Q, C);
      B = Q;
    }
  }

  DichotomyFrame frame;
  frame.x = 0.0;
  if (side == Side::plus) {
    frame.stable_basis = B;
    frame.unstable_basis = orth_complement(B);
    frame.log_scale_s = ledger;
  } else {
    frame.unstable_basis = B;
    frame.stable_basis = orth_complement(B);
    frame.log_scale_u = ledger;
  }
  frame.projection = frame.stable_basis * frame.stable_basis.adjoint();
  frame.K = 1.0;
  frame.mu = (X > 0.0) ? std::abs(ledger) / X : 0.0;
  return frame;
}

PastingResult dichotomy_line(const DichotomyFrame& plus, const DichotomyFrame& minus,
                             double opening_tol) {
  PastingResult out;
  const CMat& Bs = plus.stable_basis;
  const CMat& Bu = minus.unstable_basis;
  out.opening = minimal_opening(Bs, Bu);
  if (out.opening <= opening_tol) {
    out.accepted = false;
    return out;
  }
  const Eigen::Index k = Bs.rows(), s = Bs.cols();
  if (s + Bu.cols() != k)
    throw Error(ErrorKind::precondition, "dichotomy_line: subspace dimensions do not add up");
  CMat F(k, k);
  F << Bs, Bu;
  CMat D = CMat::Zero(k, k);
  for (Eigen::Index i = 0; i < s; ++i) D(i, i) = 1.0;
  out.projection = F * D * F.fullPivLu().inverse();
  out.accepted = true;
  return out;
}

LineDichotomy build_line_dichotomy(const CoeffFn& coeffs, const std::vector<double>& grid,
                                   double tol) {
  if (grid.size() < 2)
    throw Error(ErrorKind::precondition, "build_line_dichotomy: grid needs >= 2 nodes");
  const size_t N = grid.size() - 1;
  const Eigen::Index k = coeffs(grid.front()).rows();

  SpectralSplit left = asymptotic_spectral_split(coeffs(grid.front()));
  SpectralSplit right = asymptotic_spectral_split(coeffs(grid.back()));
  const Eigen::Index u = left.unstable_basis.cols(), s = right.stable_basis.cols();
  if (s + u != k)
    throw Error(ErrorKind::precondition,
                "build_line_dichotomy: Morse indices at the window ends inconsistent");

  LineDichotomy out;
  out.grid = grid;
  out.Bs.resize(N + 1);
  out.Bu.resize(N + 1);
  out.Rs.resize(N);
  out.Ru.resize(N);

  // Forward sweep for the unstable family: T(x_{i+1},x_i) Bu[i] = Bu[i+1] C_i,
  // so Ru[i] = C_i^{-1} contracts (unstable directions grow forward).
  out.Bu[0] = left.unstable_basis;
  for (size_t i = 0; i < N; ++i) {
    CMat M = propagate(coeffs, grid[i], grid[i + 1], out.Bu[i], tol);
    CMat Q, C;
    thin_qr(M, Q, C);
    out.Bu[i + 1] = Q;
    out.Ru[i] = C.fullPivLu().inverse();
  }

  // Backward sweep for the stable family: T(x_i,x_{i+1}) Bs[i+1] = Bs[i] C_i,
  // hence T(x_{i+1},x_i) Bs[i] = Bs[i+1] C_i^{-1} =: Bs[i+1] Rs[i].
  out.Bs[N] = right.stable_basis;
  for (size_t i = N; i-- > 0;) {
    CMat M = propagate(coeffs, grid[i + 1], grid[i], out.Bs[i + 1], tol);
    CMat Q, C;
    thin_qr(M, Q, C);
    out.Bs[i] = Q;
    out.Rs[i] = C.fullPivLu().inverse();
  }

  out.min_opening = 1.0;
  for (size_t i = 0; i <= N; ++i)
    out.min_opening = std::min(out.min_opening, minimal_opening(out.Bs[i], out.Bu[i]));
  return out;
}

BoundedSolution bounded_inhom_solution(const CoeffFn& coeffs, const InhomFn& inhom,
                                       const LineDichotomy& dich, double tol) {
  const size_t N = dich.grid.size() - 1;
  const Eigen::Index k = dich.Bs[0].rows();
  const Eigen::Index s = dich.Bs[0].cols(), u = dich.Bu[0].cols();
  const Eigen::Index r = inhom(dich.grid.front()).cols();
  if (dich.min_opening < 1e-8)
    throw Error(ErrorKind::precondition,
                "bounded_inhom_solution: dichotomy frames nearly degenerate (lambda at or "
                "near an eigenvalue)");

  // Per-interval particular solutions Psi' = A Psi + f, Psi(x_i) = 0.
  std::vector<CMat> alpha(N), beta(N);
  for (size_t i = 0; i < N; ++i) {
    auto rhs = [&](double x, const CMat& Y) -> CMat { return coeffs(x) * Y + inhom(x); };
    CMat W = integrate_ode(rhs, dich.grid[i], dich.grid[i + 1], CMat(CMat::Zero(k, r)),
                           linear_opts(tol));
    CMat F(k, k);
    F << dich.Bs[i + 1], dich.Bu[i + 1];
    CMat coef = F.fullPivLu().solve(W);
    alpha[i] = coef.topRows(s);
    beta[i] = coef.bottomRows(u);
  }

  // Both coefficient recursions run in their contracting direction, so the
  // zero boundary closure (exact for localized f) cannot be amplified.
  std::vector<CMat> c(N + 1), d(N + 1);
  c[0] = CMat::Zero(s, r);
  for (size_t i = 0; i < N; ++i) c[i + 1] = dich.Rs[i] * c[i] + alpha[i];
  d[N] = CMat::Zero(u, r);
  for (size_t i = N; i-- > 0;) d[i] = dich.Ru[i] * (d[i + 1] - beta[i]);

  BoundedSolution out;
  out.table.x = dich.grid;
  out.table.y.resize(N + 1);
  out.table.dy.resize(N + 1);
  for (size_t i = 0; i <= N; ++i) {
    CMat phi = dich.Bs[i] * c[i] + dich.Bu[i] * d[i];
    out.table.y[i] = phi;
    out.table.dy[i] = coeffs(dich.grid[i]) * phi + inhom(dich.grid[i]);
    out.sup_norm = std::max(out.sup_norm, phi.cwiseAbs().maxCoeff());
  }
  return out;
}

double minimal_opening(const CMat& M, const CMat& N) {
  if (M.cols() == 0 || N.cols() == 0) return 1.0;
  auto orth = [](const CMat& B) {
    Eigen::ColPivHouseholderQR<CMat> rq(B);
    if (rq.rank() < B.cols())
      throw Error(ErrorKind::precondition, "minimal_opening: rank-deficient basis");
    Eigen::HouseholderQR<CMat> qr(B);
    return CMat(qr.householderQ() * CMat::Identity(B.rows(), B.cols()));
  };
  CMat Qm = orth(M), Qn = orth(N);
  Eigen::JacobiSVD<CMat> svd(Qm.adjoint() * Qn);
  double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  smax = std::min(smax, 1.0);
  return std::sqrt(std::max(0.0, 1.0 - smax * smax));
}

}  // namespace pspec
