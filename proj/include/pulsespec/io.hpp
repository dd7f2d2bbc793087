// File formats and configuration: JSON run configuration (model, existence,
// spectrum, output sections), JSON round-trip serialization of singular
// orbits and pulse profiles (exact: doubles serialize shortest-roundtrip),
// CSV sample tables at 17 significant digits, and static SVG plots of curves
// in the complex plane.
#pragma once

#include "pulsespec/model.hpp"
#include "pulsespec/profile.hpp"

#include <string>
#include <vector>

namespace pspec {

struct ModelConfig {
  std::string family = "gm";
  double alpha1 = 0.0, alpha2 = 2.0;
  int beta1 = 2, beta2 = 2;
  std::string slow_type = "saddle";  // saddle | center | sine
  double mu = 1.0;
  double h2_scale = 1.0;
  bool normalized_center = false;  // use the eps-normalized center frame
};

struct ExistenceConfig {
  double u0 = 1.0;
  std::vector<double> eps_ladder;  // strictly decreasing
  double tol = 1e-10;
  double window = 30.0;  // fast homoclinic half-window X
};

struct SpectrumConfig {
  double re_lo = -0.45, re_hi = 4.0;  // search box in the spectral plane
  double im_lo = -1.0, im_hi = 1.0;
  int gamma_count = 16;
  int theta_count = 64;
  double guard_radius = 0.05;
  double root_tol = 1e-8;
};

struct OutputConfig {
  std::string directory = "out";
  bool csv = true, json = true, svg = false;
};

struct RunConfig {
  ModelConfig model;
  ExistenceConfig existence;
  SpectrumConfig spectrum;
  OutputConfig output;
};

// Parses and validates the config; field-level diagnostics carry the config
// error kind (CLI exit code 2).  A missing file is a missing-input error.
RunConfig load_run_config(const std::string& path);

ModelSpec build_model(const ModelConfig& config);

// Orbit/profile files round-trip exactly.
void save_orbit(const std::string& path, const SingularOrbit& orbit);
SingularOrbit load_orbit(const std::string& path);
void save_profile(const std::string& path, const PulseProfile& profile);
PulseProfile load_profile(const std::string& path);

// 17-significant-digit decimal rendering used by all CSV output.
std::string format_double(double v);
std::string format_complex(Cplx v);  // "re+imj" style: re and im columns preferred in CSV

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

// Static plot: polyline per series in a fixed palette, linear axes with
// tick labels, 800 x 600 viewport.
void write_svg_curves(const std::string& path, const std::string& title,
                      const std::vector<PlotSeries>& series);

}  // namespace pspec
