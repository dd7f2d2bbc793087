#include "pulsespec/model.hpp"

#include <cmath>
#include <sstream>

namespace pspec {

bool DomainBox::contains(const Vec& u, const Vec& v) const {
  for (int i = 0; i < u.size(); ++i)
    if (u[i] < u_lo[i] || u[i] > u_hi[i]) return false;
  for (int i = 0; i < v.size(); ++i)
    if (v[i] < v_lo[i] || v[i] > v_hi[i]) return false;
  return true;
}

namespace {

// u^a with the convention used throughout the GM literature: exponents are
// either integers or the base is positive.  For negative base and non-integer
// exponent we refuse via a domain error at evaluation time.
double gm_pow(double base, double expo) {
  if (base == 0.0 && expo == 0.0) return 1.0;
  double r = std::pow(base, expo);
  return r;
}

}  // namespace

ModelSpec make_gm_model(const GMParams& gp) {
  ModelSpec model;
  model.m = 1;
  model.n = 1;
  model.D1 = Vec::Ones(1);
  model.D2 = Vec::Ones(1);
  model.name = "gm";

  std::function<double(double)> f, df;
  switch (gp.slow_type) {
    case GMSlowType::saddle:
      f = [mu = gp.mu](double u) { return mu * u; };
      df = [mu = gp.mu](double) { return mu; };
      model.name = "gm-saddle";
      break;
    case GMSlowType::center:
      f = [mu = gp.mu](double u) { return -mu * u; };
      df = [mu = gp.mu](double) { return -mu; };
      model.name = "gm-center";
      break;
    case GMSlowType::sine:
      f = [](double u) { return std::sin(u); };
      df = [](double u) { return std::cos(u); };
      model.name = "gm-sine";
      break;
    case GMSlowType::custom:
      if (!gp.f || !gp.df)
        throw Error(ErrorKind::config, "GMParams: custom slow nonlinearity requires f and df");
      f = gp.f;
      df = gp.df;
      model.name = "gm-custom";
      break;
  }
  if (gp.beta1 < 2 || gp.beta2 < 2)
    throw Error(ErrorKind::config, "GMParams: beta1, beta2 must be >= 2");

  const double a1 = gp.alpha1, a2 = gp.alpha2;
  const double b1 = gp.beta1, b2 = gp.beta2;
  const double c = gp.h2_scale;

  model.eval = [=](const Vec& u, const Vec& v, double /*eps*/) {
    NonlinearityValues out;
    const double U = u[0], V = v[0];
    out.H1 = Vec::Constant(1, f(U));
    out.dH1_du = Mat::Constant(1, 1, df(U));
    out.dH1_dv = Mat::Zero(1, 1);

    // H2 = -c u^a1 v^b1, with integer b1 >= 2 so H2(u,0) = 0 analytically.
    const double ua1 = gm_pow(U, a1);
    const double vb1 = gm_pow(V, b1);
    out.H2 = Vec::Constant(1, -c * ua1 * vb1);
    out.dH2_du = Mat::Constant(1, 1, (a1 == 0.0) ? 0.0 : -c * a1 * gm_pow(U, a1 - 1) * vb1);
    out.dH2_dv = Mat::Constant(1, 1, -c * ua1 * b1 * gm_pow(V, b1 - 1));

    // G = v - u^a2 v^b2.
    const double ua2 = gm_pow(U, a2);
    const double vb2 = gm_pow(V, b2);
    out.G = Vec::Constant(1, V - ua2 * vb2);
    out.dG_du = Mat::Constant(1, 1, (a2 == 0.0) ? 0.0 : -a2 * gm_pow(U, a2 - 1) * vb2);
    out.dG_dv = Mat::Constant(1, 1, 1.0 - ua2 * b2 * gm_pow(V, b2 - 1));
    return out;
  };

  model.domain_box.u_lo = Vec::Constant(1, -25.0);
  model.domain_box.u_hi = Vec::Constant(1, 25.0);
  model.domain_box.v_lo = Vec::Constant(1, -10.0);
  model.domain_box.v_hi = Vec::Constant(1, 25.0);
  // Non-integer u-exponents require u > 0.
  const bool frac = (a1 != std::floor(a1)) || (a2 != std::floor(a2));
  if (frac) model.domain_box.u_lo = Vec::Constant(1, 1e-8);
  return model;
}

ModelSpec make_gm_center_normalized(GMParams gp) {
  if (gp.mu <= 0.0)
    throw Error(ErrorKind::config, "normalized center frame requires mu > 0");
  const double mu = gp.mu;
  gp.slow_type = GMSlowType::custom;
  gp.f = [](double u) { return -u; };
  gp.df = [](double) { return -1.0; };
  gp.h2_scale = gp.h2_scale / std::sqrt(mu);
  ModelSpec model = make_gm_model(gp);
  model.name = "gm-center-normalized";
  return model;
}

NonlinearityValues eval_nonlinearities(const ModelSpec& model, const Vec& u, const Vec& v,
                                       double eps) {
  if (u.size() != model.m || v.size() != model.n)
    throw Error(ErrorKind::config, "eval_nonlinearities: dimension mismatch");
  if (eps < 0.0) throw Error(ErrorKind::domain, "eval_nonlinearities: eps must be >= 0");
  if (!model.domain_box.contains(u, v)) {
    std::ostringstream os;
    os << "eval_nonlinearities: point outside domain_box, u = " << u.transpose()
       << ", v = " << v.transpose();
    throw Error(ErrorKind::domain, os.str());
  }
  NonlinearityValues out = model.eval(u, v, eps);
  auto finite = [](const auto& M) { return M.allFinite(); };
  if (!finite(out.H1) || !finite(out.H2) || !finite(out.G) || !finite(out.dH1_du) ||
      !finite(out.dH1_dv) || !finite(out.dH2_du) || !finite(out.dH2_dv) || !finite(out.dG_du) ||
      !finite(out.dG_dv))
    throw Error(ErrorKind::solver, "eval_nonlinearities: non-finite nonlinearity value");
  return out;
}

ValidationReport validate_model(const ModelSpec& model, int sample_count) {
  if (sample_count < 1) throw Error(ErrorKind::config, "validate_model: sample_count >= 1");
  ValidationReport report;

  for (int i = 0; i < model.m; ++i)
    if (model.D1[i] <= 0.0)
      report.violations.push_back({"D-positivity", "D1 diagonal entry not positive",
                                   Vec::Zero(model.m), Vec::Zero(model.n)});
  for (int i = 0; i < model.n; ++i)
    if (model.D2[i] <= 0.0)
      report.violations.push_back({"D-positivity", "D2 diagonal entry not positive",
                                   Vec::Zero(model.m), Vec::Zero(model.n)});

  // Deterministic low-discrepancy sweep of domain_box (golden-ratio lattice);
  // reproducible without seeding concerns.
  const double phi = 0.6180339887498949;
  auto frac = [](double x) { return x - std::floor(x); };
  for (int k = 0; k < sample_count; ++k) {
    Vec u(model.m), v(model.n), v0 = Vec::Zero(model.n);
    for (int i = 0; i < model.m; ++i) {
      double t = frac(0.37 + (k + 1) * phi * (i + 1));
      u[i] = model.domain_box.u_lo[i] + t * (model.domain_box.u_hi[i] - model.domain_box.u_lo[i]);
    }
    for (int i = 0; i < model.n; ++i) {
      double t = frac(0.71 + (k + 1) * phi * (i + 2));
      v[i] = model.domain_box.v_lo[i] + t * (model.domain_box.v_hi[i] - model.domain_box.v_lo[i]);
    }

    // (S1): H2(u,0) = 0, G(u,0,eps) = 0 (checked at eps = 0 and a generic eps).
    for (double eps : {0.0, 0.01}) {
      NonlinearityValues at0 = model.eval(u, v0, eps);
      if (at0.H2.cwiseAbs().maxCoeff() > 1e-12)
        report.violations.push_back({"S1", "H2(u,0) != 0", u, v0});
      if (at0.G.cwiseAbs().maxCoeff() > 1e-12)
        report.violations.push_back({"S1", "G(u,0,eps) != 0", u, v0});
    }

    // (S2): Re dG/dv(u,0,0) positive definite, i.e. the symmetric part of the
    // real part has positive eigenvalues.
    NonlinearityValues at0 = model.eval(u, v0, 0.0);
    Mat sym = 0.5 * (at0.dG_dv + at0.dG_dv.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    if (es.eigenvalues().minCoeff() <= 0.0)
      report.violations.push_back({"S2", "Re dG/dv(u,0,0) not positive definite", u, v0});

    // Partials vs central finite differences at the interior sample.
    const double h = 1e-6;
    NonlinearityValues mid = model.eval(u, v, 0.01);
    auto check_fd = [&](const Mat& jac, int col_dim, bool wrt_u,
                        auto value_of, const char* what) {
      for (int j = 0; j < col_dim; ++j) {
        Vec up = u, um = u, vp = v, vm = v;
        if (wrt_u) { up[j] += h; um[j] -= h; } else { vp[j] += h; vm[j] -= h; }
        Vec fp = value_of(model.eval(up, vp, 0.01));
        Vec fm = value_of(model.eval(um, vm, 0.01));
        Vec fd = (fp - fm) / (2 * h);
        for (int i = 0; i < fd.size(); ++i) {
          double scale = 1.0 + std::abs(jac(i, j));
          if (std::abs(fd[i] - jac(i, j)) > 1e-4 * scale)
            report.violations.push_back({"partials", std::string(what) + " mismatch vs FD", u, v});
        }
      }
    };
    check_fd(mid.dH1_du, model.m, true, [](const NonlinearityValues& r) { return r.H1; }, "dH1/du");
    check_fd(mid.dH1_dv, model.n, false, [](const NonlinearityValues& r) { return r.H1; }, "dH1/dv");
    check_fd(mid.dH2_du, model.m, true, [](const NonlinearityValues& r) { return r.H2; }, "dH2/du");
    check_fd(mid.dH2_dv, model.n, false, [](const NonlinearityValues& r) { return r.H2; }, "dH2/dv");
    check_fd(mid.dG_du, model.m, true, [](const NonlinearityValues& r) { return r.G; }, "dG/du");
    check_fd(mid.dG_dv, model.n, false, [](const NonlinearityValues& r) { return r.G; }, "dG/dv");
  }
  return report;
}

}  // namespace pspec
