#include "pulsespec/ode.hpp"

namespace pspec {

// The integrator and Hermite tables are header-only templates; this
// translation unit only hosts small shared helpers.

std::vector<double> uniform_grid(double a, double b, int count) {
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i) g[i] = a + (b - a) * i / double(count - 1);
  g.back() = b;
  return g;
}

}  // namespace pspec
