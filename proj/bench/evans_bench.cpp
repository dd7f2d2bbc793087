// Timing comparison of serial versus OpenMP contour sweeps of the Evans
// functions on the Gierer-Meinhardt center case: the reduced product on a
// circle around the origin, and the full Evans function at small epsilon.
#include "pulsespec/parallel.hpp"
#include "pulsespec/spectrum.hpp"

#include <chrono>
#include <cstdio>

using namespace pspec;

namespace {

double wall_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

void sweep(const char* name, const LedgeredFn& f, const std::vector<Cplx>& nodes) {
  double t0 = wall_seconds();
  std::vector<LedgeredScalar> serial = evaluate_many(f, nodes, false);
  double t1 = wall_seconds();
  std::vector<LedgeredScalar> parallel = evaluate_many(f, nodes, true);
  double t2 = wall_seconds();

  double worst = 0.0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    double d = std::abs(serial[i].value - parallel[i].value) +
               std::abs(serial[i].ledger - parallel[i].ledger);
    worst = std::max(worst, d);
  }
  std::printf("%-28s nodes %3zu  serial %8.3f s  openmp %8.3f s  speedup %5.2fx  max dev %g\n",
              name, nodes.size(), t1 - t0, t2 - t1, (t1 - t0) / std::max(t2 - t1, 1e-9), worst);
}

}  // namespace

int main() {
  GMParams params;
  params.slow_type = GMSlowType::center;
  params.mu = 1.0;
  ModelSpec model = make_gm_model(params);

  FastHomoclinic hom = solve_fast_homoclinic(model, Vec::Constant(1, 1.0), 30.0, 1e-10);
  TakeoffResult tk = takeoff_integral(model, hom);
  SlowSegment slow = solve_slow_segment(model, 1.0, tk.J[0], 1e-10);
  SingularOrbit orbit = assemble_singular_orbit(model, hom, slow);
  std::printf("orbit: J = %.6f  L0 = %.6f\n", tk.J[0], slow.L0_check);

  ContourSpec circle = circle_contour(Cplx(0.1, 0.0), 0.35, 64);
  std::vector<Cplx> nodes;
  for (int i = 0; i < circle.node_count; ++i)
    nodes.push_back(circle.point(static_cast<double>(i) / circle.node_count));

  sweep("reduced product", [&](Cplx lam) -> LedgeredScalar {
    return to_ledgered(evans_reduced(model, orbit, lam, Cplx(1.0, 0.0)));
  }, nodes);

  const double eps = 0.02;
  PulseProfile profile = shoot_periodic_orbit(model, eps, orbit, 1e-10);
  std::printf("profile: eps = %g  L_eps = %.6f  residual = %g\n", eps, profile.L_eps,
              profile.shooting_residual);
  sweep("full Evans (eps = 0.02)", [&](Cplx lam) -> LedgeredScalar {
    return to_ledgered(evans_full(model, profile, lam, Cplx(1.0, 0.0)));
  }, nodes);
  return 0;
}
