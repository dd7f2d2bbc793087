#include "pulsespec/spectrum.hpp"

#include "pulsespec/parallel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <utility>

namespace pspec {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 15>;

Cplx gk_complex(const std::function<Cplx(double)>& f, double a, double b) {
  double re = GK::integrate([&](double x) { return f(x).real(); }, a, b, 10, 1e-12);
  double im = GK::integrate([&](double x) { return f(x).imag(); }, a, b, 10, 1e-12);
  return {re, im};
}

double log_mag(const LedgeredScalar& v) { return v.ledger + std::log(std::abs(v.value)); }

void check_nonzero(const LedgeredScalar& v, double s) {
  if (!(std::abs(v.value) > 0.0) || !std::isfinite(std::abs(v.value)))
    throw Error(ErrorKind::precondition,
                "count_roots_contour: function vanishes or is non-finite on the contour (s = " +
                    std::to_string(s) + ")");
}

// Logarithmic derivative f'/f at z in the direction dir (|dir| = 1), by a
// central difference with the exp(ledger) factors cancelled against the
// center value.
Cplx log_deriv(const LedgeredFn& f, Cplx z, const LedgeredScalar& fz, Cplx dir, double h) {
  LedgeredScalar fp = f(z + h * dir), fm = f(z - h * dir);
  if (!(std::abs(fp.value) > 0.0) || !(std::abs(fm.value) > 0.0))
    return Cplx(std::numeric_limits<double>::infinity(), 0.0);
  Cplx der = (fp.value * std::exp(fp.ledger - fz.ledger) -
              fm.value * std::exp(fm.ledger - fz.ledger)) /
             (2.0 * h * dir);
  return der / fz.value;
}

// Argument increment of f over the contour parameter segment [s0, s1].
// The raw two-point increment arg(v1 / v0) is only defined modulo 2*pi: a
// true phase change near a multiple of 2*pi wraps into a small value and
// silently drops whole winding quanta, and with locally uniform phase
// velocity the midpoint increments alias the same way, so no amount of
// magnitude-of-increment checking can detect the loss.  The certificate used
// here predicts the full increment of log f over the segment from the
// midpoint logarithmic derivative, pred = (f'/f)(z_mid) * (z1 - z0), and
// accepts only when (a) Re(pred) matches the exactly measured (ledgered,
// wrap-free) magnitude increment and (b) Im(pred) matches the wrapped phase
// increment absolutely -- an alias shifts (b) by 2*pi and is caught, while a
// large but smoothly predicted magnitude drift passes without needless
// subdivision.
double refine_arg(const LedgeredFn& f, const ContourSpec& contour, double s0,
                  const LedgeredScalar& v0, double s1, const LedgeredScalar& v1, int depth) {
  if (depth <= 0 || (s1 - s0) < 1e-9)
    throw Error(ErrorKind::precondition,
                "count_roots_contour: argument increment does not resolve (near-zero of f on "
                "the contour); perturb the contour");
  double sm = 0.5 * (s0 + s1);
  Cplx zm = contour.point(sm);
  LedgeredScalar vm = f(zm);
  check_nonzero(vm, sm);
  // A deep magnitude dip between comparable endpoints is a zero crossing
  // the contour, not a fast phase rotation.
  if (log_mag(vm) < std::min(log_mag(v0), log_mag(v1)) - 34.0)
    throw Error(ErrorKind::precondition,
                "count_roots_contour: magnitude collapse on the contour (root on or near the "
                "contour); perturb the contour");
  double d0 = std::arg(vm.value / v0.value);
  double d1 = std::arg(v1.value / vm.value);
  if (std::abs(d0) < pi / 2.0 && std::abs(d1) < pi / 2.0) {
    Cplx dz = contour.point(s1) - contour.point(s0);
    double chord = std::abs(dz);
    if (chord > 0.0) {
      Cplx pred = log_deriv(f, zm, vm, dz / chord, chord / 32.0) * dz;
      double re_meas = log_mag(v1) - log_mag(v0);
      bool re_ok = std::abs(pred.real() - re_meas) < 0.5 + 0.1 * std::abs(re_meas);
      bool im_ok = std::abs(pred.imag() - (d0 + d1)) < 1.5;
      if (re_ok && im_ok) return d0 + d1;
    }
  }
  return refine_arg(f, contour, s0, v0, sm, vm, depth - 1) +
         refine_arg(f, contour, sm, vm, s1, v1, depth - 1);
}

bool newton_polish(const LedgeredFn& f, Cplx z0, double tol, double max_step, Cplx* out) {
  Cplx z = z0;
  for (int it = 0; it < 80; ++it) {
    double h = 1e-7 * (1.0 + std::abs(z));
    LedgeredScalar f0 = f(z);
    if (!(std::abs(f0.value) > 0.0)) {
      *out = z;
      return true;
    }
    LedgeredScalar fp = f(z + h), fm = f(z - h);
    // f / f' with the common exp(f0.ledger) factor canceled.
    Cplx der = (fp.value * std::exp(fp.ledger - f0.ledger) -
                fm.value * std::exp(fm.ledger - f0.ledger)) /
               (2.0 * h);
    if (!(std::abs(der) > 0.0) || !std::isfinite(std::abs(der))) return false;
    Cplx delta = -f0.value / der;
    if (std::abs(delta) > max_step) delta *= max_step / std::abs(delta);
    z += delta;
    if (std::abs(delta) < tol) {
      *out = z;
      return true;
    }
  }
  return false;
}

struct Box {
  double x0, x1, y0, y1;
  double diam() const { return std::hypot(x1 - x0, y1 - y0); }
  Cplx center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  bool contains(Cplx z, double slack) const {
    double mx = slack * (x1 - x0), my = slack * (y1 - y0);
    return z.real() >= x0 - mx && z.real() <= x1 + mx && z.imag() >= y0 - my &&
           z.imag() <= y1 + my;
  }
};

int box_winding(const LedgeredFn& f, const Box& b) {
  ContourSpec c = rectangle_contour(b.center(), 0.5 * (b.x1 - b.x0), 0.5 * (b.y1 - b.y0), 16);
  return count_roots_contour(f, c);
}

// Quadtree boxes share edges (between siblings, and with their parent), and
// adaptive bisection lands on the same dyadic points along a shared edge, so
// contour nodes repeat heavily across the subdivision tree.  Memoize on a
// quantized key; the 1e-13 quantum is far below any feature scale of the
// search (minimum segment length ~1e-8) and far above the ~1e-16 roundoff
// spread between two derivations of the same geometric point.
LedgeredFn memoized(const LedgeredFn& f) {
  auto cache = std::make_shared<std::map<std::pair<long long, long long>, LedgeredScalar>>();
  return [&f, cache](Cplx z) -> LedgeredScalar {
    std::pair<long long, long long> key{std::llround(z.real() * 1e13),
                                        std::llround(z.imag() * 1e13)};
    auto it = cache->find(key);
    if (it != cache->end()) return it->second;
    LedgeredScalar v = f(z);
    cache->emplace(key, v);
    return v;
  };
}

void handle_box(const LedgeredFn& f, const Box& b, int cnt, double tol, int depth,
                std::vector<Root>& out);

// Partition-preserving subdivision: the split lines are shared by all four
// children, so a root near a candidate line (detected as a contour
// degeneracy) moves the whole split rather than one child.
void subdivide(const LedgeredFn& f, const Box& b, int cnt, double tol, int depth,
               std::vector<Root>& out) {
  static const double fracs[] = {0.5, 0.53, 0.47, 0.59, 0.41};
  for (double fr : fracs) {
    double xs = b.x0 + fr * (b.x1 - b.x0);
    double ys = b.y0 + fr * (b.y1 - b.y0);
    Box kids[4] = {{b.x0, xs, b.y0, ys}, {xs, b.x1, b.y0, ys},
                   {b.x0, xs, ys, b.y1}, {xs, b.x1, ys, b.y1}};
    int w[4];
    bool okay = true;
    try {
      int sum = 0;
      for (int i = 0; i < 4; ++i) sum += (w[i] = box_winding(f, kids[i]));
      okay = (sum == cnt);  // otherwise an increment aliased; move the split
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::precondition) throw;
      okay = false;
    }
    if (!okay) continue;
    for (int i = 0; i < 4; ++i) handle_box(f, kids[i], w[i], tol, depth, out);
    return;
  }
  throw Error(ErrorKind::solver,
              "find_roots: no clean subdivision found (root cluster intersecting every "
              "candidate split line)");
}

void handle_box(const LedgeredFn& f, const Box& b, int cnt, double tol, int depth,
                std::vector<Root>& out) {
  if (cnt == 0) return;
  double d = b.diam();
  if (cnt < 0) {
    // Net pole content; this machinery only reports roots.  Isolate and drop.
    if (cnt == -1 || d < 1e-6 || depth == 0) return;
    subdivide(f, b, cnt, tol, depth - 1, out);
    return;
  }
  if (cnt == 1 || d < 1e-6) {
    Cplx z;
    if (newton_polish(f, b.center(), tol, d, &z) && b.contains(z, 0.1)) {
      out.push_back({z, cnt, true});
      return;
    }
    if (d < 1e-6) {
      out.push_back({b.center(), cnt, false});
      return;
    }
  }
  if (depth == 0) {
    out.push_back({b.center(), cnt, false});
    return;
  }
  subdivide(f, b, cnt, tol, depth - 1, out);
}

double set_distance(const std::vector<Cplx>& a, const std::vector<Cplx>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  auto one_sided = [](const std::vector<Cplx>& p, const std::vector<Cplx>& q) {
    double worst = 0.0;
    for (Cplx z : p) {
      double best = std::numeric_limits<double>::infinity();
      for (Cplx w : q) best = std::min(best, std::abs(z - w));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

bool inside_contour(const ContourSpec& c, Cplx z) {
  if (c.shape == ContourShape::circle) return std::abs(z - c.center) < c.radius;
  return std::abs(z.real() - c.center.real()) < c.half_width &&
         std::abs(z.imag() - c.center.imag()) < c.half_height;
}

}  // namespace

LedgeredFn as_ledgered(std::function<Cplx(Cplx)> f) {
  return [f = std::move(f)](Cplx z) -> LedgeredScalar { return {f(z), 0.0}; };
}

Cplx ContourSpec::point(double s) const {
  s -= std::floor(s);
  if (shape == ContourShape::circle)
    return center + radius * std::exp(Cplx(0.0, 2.0 * pi * s));
  double t = 4.0 * s;
  int edge = std::min(static_cast<int>(t), 3);
  double u = t - edge;
  const double w = half_width, h = half_height;
  switch (edge) {
    case 0: return center + Cplx(-w + 2.0 * w * u, -h);
    case 1: return center + Cplx(w, -h + 2.0 * h * u);
    case 2: return center + Cplx(w - 2.0 * w * u, h);
    default: return center + Cplx(-w, h - 2.0 * h * u);
  }
}

ContourSpec circle_contour(Cplx center, double radius, int node_count) {
  ContourSpec c;
  c.shape = ContourShape::circle;
  c.center = center;
  c.radius = radius;
  c.node_count = node_count;
  return c;
}

ContourSpec rectangle_contour(Cplx center, double half_width, double half_height,
                              int node_count) {
  ContourSpec c;
  c.shape = ContourShape::rectangle;
  c.center = center;
  c.half_width = half_width;
  c.half_height = half_height;
  c.node_count = node_count;
  return c;
}

std::vector<LedgeredScalar> evaluate_many(const LedgeredFn& f, const std::vector<Cplx>& points,
                                          bool parallel) {
  std::vector<LedgeredScalar> out(points.size());
  if (!parallel) {
    for (size_t i = 0; i < points.size(); ++i) out[i] = f(points[i]);
    return out;
  }
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(points.size()); ++i) {
    try {
      out[static_cast<size_t>(i)] = f(points[static_cast<size_t>(i)]);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

int count_roots_contour(const LedgeredFn& f, const ContourSpec& contour) {
  const int n0 = std::max(contour.node_count, 16);
  std::vector<double> s(n0);
  std::vector<Cplx> pts(n0);
  for (int i = 0; i < n0; ++i) {
    s[i] = static_cast<double>(i) / n0;
    pts[i] = contour.point(s[i]);
  }
  std::vector<LedgeredScalar> v = evaluate_many(f, pts);
  for (int i = 0; i < n0; ++i) check_nonzero(v[i], s[i]);

  double total = 0.0;
  for (int i = 0; i < n0; ++i) {
    double s1 = (i + 1 < n0) ? s[i + 1] : 1.0;
    const LedgeredScalar& v1 = (i + 1 < n0) ? v[i + 1] : v[0];
    total += refine_arg(f, contour, s[i], v[i], s1, v1, 28);
  }
  return static_cast<int>(std::lround(total / (2.0 * pi)));
}

std::vector<Root> find_roots(const LedgeredFn& f, Cplx corner_lo, Cplx corner_hi, double tol) {
  Box b{corner_lo.real(), corner_hi.real(), corner_lo.imag(), corner_hi.imag()};
  if (!(b.x1 > b.x0) || !(b.y1 > b.y0))
    throw Error(ErrorKind::precondition, "find_roots: degenerate search box");
  LedgeredFn fc = memoized(f);
  int cnt = box_winding(fc, b);
  std::vector<Root> out;
  handle_box(fc, b, cnt, tol, 40, out);
  std::sort(out.begin(), out.end(), [](const Root& a, const Root& c) {
    if (a.location.real() != c.location.real()) return a.location.real() < c.location.real();
    return a.location.imag() < c.location.imag();
  });
  return out;
}

std::vector<SpectrumCurve> trace_gamma_curves(EvansKind kind, const ModelSpec& model,
                                              const SingularOrbit* orbit,
                                              const PulseProfile* profile, int theta_count,
                                              Cplx seed_lo, Cplx seed_hi, double tol) {
  if ((kind == EvansKind::full && profile == nullptr) ||
      (kind != EvansKind::full && orbit == nullptr))
    throw Error(ErrorKind::precondition,
                "trace_gamma_curves: the full kind needs a profile, reduced kinds need a "
                "singular orbit");

  auto eval_at = [&, kind](Cplx gamma) -> LedgeredFn {
    return [&, kind, gamma](Cplx lam) -> LedgeredScalar {
      switch (kind) {
        case EvansKind::full:
          return to_ledgered(evans_full(model, *profile, lam, gamma));
        case EvansKind::fast_reduced:
          return to_ledgered(evans_fast_reduced(model, orbit->hom, lam));
        case EvansKind::slow_reduced:
          return to_ledgered(evans_slow_reduced(model, *orbit, lam, gamma));
        default:
          return to_ledgered(evans_reduced(model, *orbit, lam, gamma));
      }
    };
  };

  std::vector<Root> seeds = find_roots(eval_at(Cplx(1.0, 0.0)), seed_lo, seed_hi, tol);
  std::vector<SpectrumCurve> curves;
  int id = 0;
  for (const Root& seed : seeds) {
    if (!seed.resolved) continue;
    SpectrumCurve cv;
    cv.branch_id = id++;
    cv.theta.push_back(0.0);
    cv.lambda.push_back(seed.location);

    const double dth0 = 2.0 * pi / std::max(theta_count, 8);
    double th = 0.0;
    Cplx lam = seed.location;
    Cplx prev_step(0.0, 0.0);
    while (th < 2.0 * pi - 1e-12) {
      double step = std::min(dth0, 2.0 * pi - th);
      bool accepted = false;
      while (!accepted) {
        double thn = th + step;
        Cplx guess = lam + prev_step * (step / dth0);
        Cplx polished;
        bool converged =
            newton_polish(eval_at(std::exp(Cplx(0.0, thn))), guess, tol, 1.0, &polished);
        double jump_guard = std::max(0.2, 10.0 * std::abs(prev_step) + 1e-6);
        if (converged && std::abs(polished - lam) < jump_guard) {
          prev_step = (polished - lam) * (dth0 / step);
          lam = polished;
          th = thn;
          cv.theta.push_back(th);
          cv.lambda.push_back(lam);
          accepted = true;
        } else {
          step *= 0.5;
          if (step < dth0 / 256.0) {
            std::ostringstream msg;
            msg << "trace_gamma_curves: continuation stalled at theta = " << th
                << " (branch fold or collision); refine theta_grid";
            throw Error(ErrorKind::solver, msg.str());
          }
        }
      }
    }
    cv.closure_defect = std::abs(cv.lambda.back() - cv.lambda.front());
    curves.push_back(std::move(cv));
  }
  return curves;
}

CancelationReport residue_slow_at_fast_zero(const ModelSpec& model, const SingularOrbit& orbit,
                                            Cplx lambda_diamond, double cancel_tol) {
  if (model.m != 1 || model.n != 1)
    throw Error(ErrorKind::precondition, "residue_slow_at_fast_zero: requires m = n = 1");
  const FastHomoclinic& hom = orbit.hom;
  const double X = hom.X;
  CoeffFn A = fast_limit_coeffs(model, hom, lambda_diamond);

  NonlinearityValues at0 = model.eval(hom.u0, Vec::Zero(1), 0.0);
  const double g0 = at0.dG_dv(0, 0), d2 = model.D2[0];
  Cplx root = std::sqrt((g0 + lambda_diamond) * d2);

  // March the decaying directions toward 0, collecting Hermite data; the
  // bounded eigenfunction is the (unique up to scale) match of the two.
  auto march_table = [&](double from, Cplx q0) {
    std::vector<double> xs;
    std::vector<CVec> ys, dys;
    CVec w(2);
    w << 1.0, q0;
    w /= w.norm();
    auto rhs = [&](double x, const CVec& y) -> CVec { return A(x) * y; };
    OdeOptions opt;
    opt.rtol = 1e-12;
    opt.atol = 1e-14;
    std::function<void(double, const CVec&, const CVec&)> sink =
        [&](double x, const CVec& y, const CVec& dy) {
          xs.push_back(x);
          ys.push_back(y);
          dys.push_back(dy);
        };
    integrate_ode(rhs, from, 0.0, w, opt, nullptr, sink);
    return make_hermite_table(std::move(xs), std::move(ys), std::move(dys));
  };
  HermiteTable<CVec> left = march_table(-X, +root);
  HermiteTable<CVec> right = march_table(+X, -root);

  CVec wl = left.y.back(), wr = right.y.front();
  double det = std::abs(wl[0] * wr[1] - wl[1] * wr[0]);
  if (det > 1e-5 * wl.norm() * wr.norm())
    throw Error(ErrorKind::precondition,
                "residue_slow_at_fast_zero: lambda_diamond is not an eigenvalue of the fast "
                "limit problem (matched directions not parallel)");
  int idx = (std::abs(wl[0]) >= std::abs(wl[1])) ? 0 : 1;
  Cplx c = wl[idx] / wr[idx];  // scale of the right half relative to the left

  auto v_at = [&](double x) -> Cplx {
    return (x <= 0.0) ? left.eval(x)[0] : c * right.eval(x)[0];
  };
  double n2 = GK::integrate([&](double x) { return std::norm(v_at(x)); }, -X, 0.0, 10, 1e-12) +
              GK::integrate([&](double x) { return std::norm(v_at(x)); }, 0.0, X, 10, 1e-12);
  double nrm = std::sqrt(n2);

  CancelationReport rep;
  rep.lambda_diamond = lambda_diamond;
  auto ip = [&](const std::function<Cplx(double)>& g) {
    return (gk_complex(g, -X, 0.0) + gk_complex(g, 0.0, X)) / nrm;
  };
  rep.ip_H2v = ip([&](double x) -> Cplx {
    NonlinearityValues nl = model.eval(hom.u0, hom.v_at(x), 0.0);
    return nl.dH2_dv(0, 0) * v_at(x);
  });
  rep.ip_Gu = ip([&](double x) -> Cplx {
    NonlinearityValues nl = model.eval(hom.u0, hom.v_at(x), 0.0);
    return std::conj(v_at(x)) * nl.dG_du(0, 0);
  });

  // Boundary value u(2 L0, lambda_diamond), u(0) = 0, u'(0) = 1.
  auto mod = std::make_shared<const ModelSpec>(model);
  auto seg = std::make_shared<const SlowSegment>(orbit.slow);
  auto slow_rhs = [mod, seg, lambda_diamond](double xi, const CVec& y) -> CVec {
    Vec u = Vec::Constant(1, seg->u_at(xi));
    NonlinearityValues nl = mod->eval(u, Vec::Zero(1), 0.0);
    CVec dy(2);
    dy[0] = y[1];
    dy[1] = (nl.dH1_du(0, 0) + lambda_diamond) * y[0] / mod->D1[0];
    return dy;
  };
  OdeOptions opt;
  opt.rtol = 1e-12;
  opt.atol = 1e-14;
  CVec u0v(2);
  u0v << 0.0, 1.0;
  CVec uend = integrate_ode(slow_rhs, 0.0, 2.0 * orbit.slow.L0_check, u0v, opt);
  rep.u_boundary = uend[0];

  // Residue of the trace t at lambda_diamond; the Laurent coefficient of the
  // slow reduced Evans function E_s0(., gamma) there is -gamma * residue.
  rep.residue = rep.u_boundary * rep.ip_H2v * rep.ip_Gu;
  // A genuinely nonzero singular part means the slow pole annihilates the
  // fast zero; residues that are zero (structurally, e.g. by parity of one
  // integrand, or through u_boundary) leave the fast eigenvalue in the
  // spectrum.  The comparison scale uses L1 magnitude bounds of the factors
  // so that a single vanishing factor is detected relative to its own size,
  // not relative to the already-collapsed product.
  auto l1 = [&](const std::function<double(double)>& g) {
    return (GK::integrate(g, -X, 0.0, 10, 1e-12) + GK::integrate(g, 0.0, X, 10, 1e-12)) / nrm;
  };
  double S1 = l1([&](double x) {
    NonlinearityValues nl = model.eval(hom.u0, hom.v_at(x), 0.0);
    return std::abs(nl.dH2_dv(0, 0) * v_at(x));
  });
  double S2 = l1([&](double x) {
    NonlinearityValues nl = model.eval(hom.u0, hom.v_at(x), 0.0);
    return std::abs(v_at(x) * nl.dG_du(0, 0));
  });
  double scale = (1.0 + std::abs(rep.u_boundary)) * S1 * S2;
  rep.verdict = (scale > 1e-300 && std::abs(rep.residue) >= cancel_tol * scale)
                    ? CancelVerdict::cancels
                    : CancelVerdict::persists;
  return rep;
}

CancelationScan cancelation_scan(const ModelSpec& model, const SingularOrbit& orbit,
                                 Cplx lambda_diamond, int gamma_count, double delta) {
  CancelationScan scan;
  scan.report = residue_slow_at_fast_zero(model, orbit, lambda_diamond);

  for (int attempt = 0;; ++attempt) {
    scan.delta = delta;
    scan.gamma.clear();
    scan.winding.clear();
    try {
      for (int j = 0; j < gamma_count; ++j) {
        Cplx gamma = std::exp(Cplx(0.0, 2.0 * pi * j / gamma_count));
        LedgeredFn f = [&, gamma](Cplx lam) -> LedgeredScalar {
          return to_ledgered(evans_reduced(model, orbit, lam, gamma));
        };
        scan.gamma.push_back(gamma);
        scan.winding.push_back(count_roots_contour(f, circle_contour(lambda_diamond, delta)));
      }
      break;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::precondition || attempt >= 5) throw;
      delta *= 0.6;  // other spectrum on the guard circle: shrink and retry
    }
  }

  int expect = (scan.report.verdict == CancelVerdict::cancels) ? 0 : 1;
  scan.consistent = std::all_of(scan.winding.begin(), scan.winding.end(),
                                [expect](int w) { return w == expect; });
  return scan;
}

InstabilityReport instability_criteria(const ModelSpec& model, const SingularOrbit& orbit) {
  if (model.m != 1 || model.n != 1)
    throw Error(ErrorKind::precondition, "instability_criteria: requires m = n = 1");
  const SlowSegment& slow = orbit.slow;
  const double L0 = slow.L0_check;

  // Largest zero of the fast reduced Evans function.
  NonlinearityValues at0 = model.eval(orbit.hom.u0, Vec::Zero(1), 0.0);
  double re_lo = std::max(-0.45, -at0.dG_dv(0, 0) + 0.05);
  LedgeredFn ef = [&](Cplx lam) -> LedgeredScalar {
    return to_ledgered(evans_fast_reduced(model, orbit.hom, lam));
  };
  std::vector<Root> zeros = find_roots(ef, Cplx(re_lo, -0.6), Cplx(15.0, 0.6), 1e-9);
  if (zeros.empty())
    throw Error(ErrorKind::solver, "instability_criteria: no fast eigenvalue located");
  double lambda0 = zeros.front().location.real();
  for (const Root& r : zeros) lambda0 = std::max(lambda0, r.location.real());

  InstabilityReport rep;
  rep.lambda0 = lambda0;
  CancelationReport res = residue_slow_at_fast_zero(model, orbit, Cplx(lambda0, 0.0));
  rep.I1 = (res.u_boundary * res.ip_H2v * res.ip_Gu).real();

  // G0 = total u-derivative of int H2(u, v_h(x,u)) dx at u0 = 2 J'(u0)
  // (Richardson-extrapolated central differences over the homoclinic family).
  auto J_of = [&](double u) {
    FastHomoclinic h = solve_fast_homoclinic(model, Vec::Constant(1, u), orbit.hom.X, 1e-11);
    return takeoff_integral(model, h).J[0];
  };
  const double u0 = orbit.hom.u0[0];
  auto central = [&](double h) { return (J_of(u0 + h) - J_of(u0 - h)) / (2.0 * h); };
  double d1 = central(2e-4), d2 = central(1e-4);
  rep.G0 = 2.0 * (4.0 * d2 - d1) / 3.0;

  // I2: Rofe-Beketov integrand over [0, L0] plus the boundary term.
  const double D1 = model.D1[0];
  auto H1_at = [&](double xi) {
    return model.eval(Vec::Constant(1, slow.u_at(xi)), Vec::Zero(1), 0.0).H1[0];
  };
  auto dH1_at = [&](double xi) {
    return model.eval(Vec::Constant(1, slow.u_at(xi)), Vec::Zero(1), 0.0).dH1_du(0, 0);
  };
  auto us_prime = [&](double xi) { return slow.p_at(xi) / D1; };
  for (int i = 0; i <= 200; ++i) {
    double xi = L0 * i / 200.0;
    double den = us_prime(xi) * us_prime(xi) + H1_at(xi) * H1_at(xi);
    if (den < 1e-14)
      throw Error(ErrorKind::solver,
                  "instability_criteria: u_s' and H1 vanish simultaneously on the segment "
                  "(singular Rofe-Beketov integrand)");
  }
  double integral = GK::integrate(
      [&](double xi) {
        double up = us_prime(xi), h1 = H1_at(xi);
        double den = up * up + h1 * h1;
        return (dH1_at(xi) + 1.0) * (up * up - h1 * h1) / (den * den);
      },
      0.0, L0, 10, 1e-12);
  double up0 = us_prime(0.0), h10 = H1_at(0.0);
  // Orientation-consistent sign: the Rofe-Beketov companion solution that is
  // symmetric about L0 has Wronskian -1 against u_s' in the ordering of the
  // reversible trace formula, which flips the assembled expression relative
  // to a +1 normalization; with the sign below the identity t(0) = 2 I2
  // holds exactly (verified against the explicit center-case solutions).
  rep.I2 = -(up0 * (rep.G0 * up0 - 2.0 * h10) * integral +
             (up0 * up0 + rep.G0 * h10 * up0 - h10 * h10) / (up0 * up0 + h10 * h10));

  bool symmetric = true;
  for (int i = 0; i <= 40; ++i) {
    double xi = 2.0 * L0 * i / 40.0;
    if (std::abs(slow.u_at(xi) - slow.u_at(2.0 * L0 - xi)) > 1e-7) symmetric = false;
  }
  if (rep.I1 <= 1e-12)
    rep.verdict = InstabilityVerdict::unstable_by_I1;
  else if (symmetric && rep.I2 > -1.0)
    rep.verdict = InstabilityVerdict::unstable_by_I2;
  else
    rep.verdict = InstabilityVerdict::inconclusive;
  return rep;
}

ConvergenceTable compare_convergence(const ModelSpec& model, const SingularOrbit& orbit,
                                     const std::vector<double>& eps_list,
                                     const ContourSpec& contour, Cplx gamma) {
  for (size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1]))
      throw Error(ErrorKind::precondition, "compare_convergence: eps_list must be descending");

  // Bounding box of the contour for root listing.
  double hw = (contour.shape == ContourShape::circle) ? contour.radius : contour.half_width;
  double hh = (contour.shape == ContourShape::circle) ? contour.radius : contour.half_height;
  Cplx lo = contour.center - Cplx(hw, hh), hi = contour.center + Cplx(hw, hh);

  ConvergenceTable table;
  LedgeredFn f0 = [&](Cplx lam) -> LedgeredScalar {
    return to_ledgered(evans_reduced(model, orbit, lam, gamma));
  };
  table.expected_count = count_roots_contour(f0, contour);
  for (const Root& r : find_roots(f0, lo, hi, 1e-9))
    if (r.resolved && inside_contour(contour, r.location))
      for (int j = 0; j < r.multiplicity; ++j) table.reduced_roots.push_back(r.location);

  for (double eps : eps_list) {
    ConvergenceRow row;
    row.eps = eps;
    try {
      PulseProfile profile = shoot_periodic_orbit(model, eps, orbit, 1e-10);
      row.L_eps = profile.L_eps;
      LedgeredFn f = [&](Cplx lam) -> LedgeredScalar {
        return to_ledgered(evans_full(model, profile, lam, gamma));
      };
      row.count = count_roots_contour(f, contour);
      for (const Root& r : find_roots(f, lo, hi, 1e-8))
        if (r.resolved && inside_contour(contour, r.location))
          for (int j = 0; j < r.multiplicity; ++j) row.roots.push_back(r.location);
      row.distance_to_reduced = set_distance(row.roots, table.reduced_roots);
      row.ok = true;
    } catch (const Error& e) {
      row.ok = false;
      row.note = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

double find_cancelation_failure_mu(GMParams params, double u0, double lambda0, int k,
                                   double tol) {
  params.slow_type = GMSlowType::center;
  params.mu = 1.0;
  ModelSpec base = make_gm_model(params);
  FastHomoclinic hom = solve_fast_homoclinic(base, Vec::Constant(1, u0), 30.0, 1e-11);
  double J = takeoff_integral(base, hom).J[0];  // mu-independent: fast system has no mu

  auto L0_of = [&](double mu) {
    GMParams p = params;
    p.mu = mu;
    return solve_slow_segment(make_gm_model(p), u0, J, 1e-11).L0_check;
  };
  auto g = [&](double mu) {
    double l = L0_of(mu);
    return mu - lambda0 - std::pow(k * pi / (2.0 * l), 2);
  };

  double a = lambda0 + 1e-3;
  double ga = g(a);
  double b = lambda0 + 0.5;
  int tries = 0;
  while (g(b) * ga > 0.0 && ++tries < 60) b = lambda0 + (b - lambda0) * 1.6;
  if (g(b) * ga > 0.0)
    throw Error(ErrorKind::solver,
                "find_cancelation_failure_mu: no sign change bracketing the fixed point");

  boost::math::tools::eps_tolerance<double> stop(45);
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(g, std::min(a, b), std::max(a, b), stop, iters);
  double mu = 0.5 * (r.first + r.second);
  if (std::abs(g(mu)) > std::max(tol, 1e-9) * (1.0 + mu))
    throw Error(ErrorKind::accuracy, "find_cancelation_failure_mu: fixed point not resolved");
  return mu;
}

}  // namespace pspec
