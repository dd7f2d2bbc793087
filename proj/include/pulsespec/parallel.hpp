// Batch evaluation of ledgered complex functions over many spectral points,
// serial or OpenMP-parallel.  Contour-node and gamma-sample evaluations are
// independent, so the parallel path needs no synchronization beyond error
// collection; results are returned in input order, keeping reports
// deterministic regardless of scheduling.
#pragma once

#include "pulsespec/spectrum.hpp"

#include <vector>

namespace pspec {

std::vector<LedgeredScalar> evaluate_many(const LedgeredFn& f, const std::vector<Cplx>& points,
                                          bool parallel = true);

}  // namespace pspec
