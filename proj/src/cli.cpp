#include "pulsespec/cli.hpp"

#include "pulsespec/parallel.hpp"
#include "pulsespec/spectrum.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <filesystem>
#include <fstream>
#include <iostream>

namespace pspec {

namespace {

using nlohmann::json;

std::string output_dir(const RunConfig& config, const CliOptions& options) {
  std::string dir = options.out_dir.empty() ? config.output.directory : options.out_dir;
  std::filesystem::create_directories(dir);
  return dir;
}

std::string orbit_path(const std::string& dir) { return dir + "/singular_orbit.json"; }

std::string profile_path(const std::string& dir, double eps) {
  return dir + "/profile_eps_" + format_double(eps) + ".json";
}

void write_report(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::solver, "cannot open output file: " + path);
  out << j.dump(1) << "\n";
}

SingularOrbit build_orbit(const ModelSpec& model, const ExistenceConfig& ex) {
  FastHomoclinic hom =
      solve_fast_homoclinic(model, Vec::Constant(model.m, ex.u0), ex.window, ex.tol);
  TakeoffResult tk = takeoff_integral(model, hom);
  SlowSegment slow = solve_slow_segment(model, ex.u0, tk.J[0], ex.tol);
  return assemble_singular_orbit(model, hom, slow);
}

json root_to_json(const Root& r) {
  json j;
  j["re"] = r.location.real();
  j["im"] = r.location.imag();
  j["multiplicity"] = r.multiplicity;
  j["resolved"] = r.resolved;
  return j;
}

void write_roots_outputs(const std::string& dir, const std::string& stem,
                         const std::vector<Root>& roots, const OutputConfig& out) {
  if (out.json) {
    json j;
    j["roots"] = json::array();
    for (const Root& r : roots) j["roots"].push_back(root_to_json(r));
    write_report(dir + "/" + stem + ".json", j);
  }
  if (out.csv) {
    std::vector<std::vector<std::string>> rows;
    for (const Root& r : roots)
      rows.push_back({format_double(r.location.real()), format_double(r.location.imag()),
                      std::to_string(r.multiplicity), r.resolved ? "1" : "0"});
    write_csv(dir + "/" + stem + ".csv", {"re", "im", "multiplicity", "resolved"}, rows);
  }
}

}  // namespace

int cmd_existence(const RunConfig& config, const CliOptions& options) {
  std::string dir = output_dir(config, options);
  ModelSpec model = build_model(config.model);
  if (config.model.h2_scale == 0.0 && model.n == 1)
    std::cerr << "warning: H2 == 0 (weak interaction): all periodic pulse patterns of this "
                 "model are spectrally unstable\n";

  SingularOrbit orbit = build_orbit(model, config.existence);
  std::cout << "singular orbit: u0 = " << format_double(orbit.slow.u0)
            << "  J = " << format_double(orbit.slow.J0)
            << "  u1 = " << format_double(orbit.slow.u1)
            << "  L0 = " << format_double(orbit.slow.L0_check) << "\n";
  save_orbit(orbit_path(dir), orbit);

  for (double eps : config.existence.eps_ladder) {
    PulseProfile profile = shoot_periodic_orbit(model, eps, orbit, config.existence.tol);
    std::cout << "profile eps = " << format_double(eps)
              << "  L_eps = " << format_double(profile.L_eps)
              << "  shooting_residual = " << format_double(profile.shooting_residual) << "\n";
    save_profile(profile_path(dir, eps), profile);
    if (config.output.csv) {
      std::vector<std::vector<std::string>> rows;
      for (size_t i = 0; i < profile.state.x.size(); ++i) {
        std::vector<std::string> row{format_double(profile.state.x[i])};
        for (Eigen::Index k = 0; k < profile.state.y[i].size(); ++k)
          row.push_back(format_double(profile.state.y[i][k]));
        rows.push_back(std::move(row));
      }
      std::vector<std::string> header{"x"};
      for (int k = 0; k < profile.m; ++k) header.push_back("u" + std::to_string(k));
      for (int k = 0; k < profile.m; ++k) header.push_back("p" + std::to_string(k));
      for (int k = 0; k < profile.n; ++k) header.push_back("v" + std::to_string(k));
      for (int k = 0; k < profile.n; ++k) header.push_back("q" + std::to_string(k));
      write_csv(dir + "/profile_eps_" + format_double(eps) + ".csv", header, rows);
    }
  }
  return 0;
}

int cmd_spectrum(const RunConfig& config, const CliOptions& options) {
  std::string dir = output_dir(config, options);
  ModelSpec model = build_model(config.model);
  const SpectrumConfig& sp = config.spectrum;
  Cplx lo(sp.re_lo, sp.im_lo), hi(sp.re_hi, sp.im_hi);

  if (options.mode == "full") {
    if (config.existence.eps_ladder.empty())
      throw Error(ErrorKind::config, "config field existence.eps_ladder: empty (mode full "
                                     "needs a profile)");
    PulseProfile profile =
        load_profile(profile_path(dir, config.existence.eps_ladder.back()));
    LedgeredFn f = [&](Cplx lam) -> LedgeredScalar {
      return to_ledgered(evans_full(model, profile, lam, Cplx(1.0, 0.0)));
    };
    std::vector<Root> roots = find_roots(f, lo, hi, sp.root_tol);
    write_roots_outputs(dir, "spectrum_full", roots, config.output);
    std::cout << "full Evans roots (gamma = 1): " << roots.size() << "\n";
    return 0;
  }

  SingularOrbit orbit = load_orbit(orbit_path(dir));

  if (options.mode == "fast") {
    NonlinearityValues at0 = model.eval(orbit.hom.u0, Vec::Zero(model.n), 0.0);
    double re_lo = std::max(sp.re_lo, -at0.dG_dv(0, 0) + 0.05);
    LedgeredFn f = [&](Cplx lam) -> LedgeredScalar {
      return to_ledgered(evans_fast_reduced(model, orbit.hom, lam));
    };
    std::vector<Root> roots = find_roots(f, Cplx(re_lo, sp.im_lo), hi, sp.root_tol);
    write_roots_outputs(dir, "spectrum_fast", roots, config.output);
    for (const Root& r : roots)
      std::cout << "fast zero: " << format_double(r.location.real()) << " + "
                << format_double(r.location.imag()) << "i  multiplicity " << r.multiplicity
                << "\n";
    return 0;
  }

  if (options.mode == "slow" || options.mode == "reduced") {
    bool reduced = (options.mode == "reduced");
    LedgeredFn f = [&](Cplx lam) -> LedgeredScalar {
      return reduced ? to_ledgered(evans_reduced(model, orbit, lam, Cplx(1.0, 0.0)))
                     : to_ledgered(evans_slow_reduced(model, orbit, lam, Cplx(1.0, 0.0)));
    };
    std::vector<Root> roots = find_roots(f, lo, hi, sp.root_tol);
    write_roots_outputs(dir, "spectrum_" + options.mode, roots, config.output);
    std::cout << options.mode << " Evans roots (gamma = 1): " << roots.size() << "\n";

    if (reduced && !roots.empty()) {
      EvansKind kind = EvansKind::reduced_product;
      std::vector<SpectrumCurve> curves = trace_gamma_curves(
          kind, model, &orbit, nullptr, sp.theta_count, lo, hi, sp.root_tol);
      if (config.output.json) {
        json j;
        j["curves"] = json::array();
        for (const SpectrumCurve& c : curves) {
          json jc;
          jc["branch_id"] = c.branch_id;
          jc["closure_defect"] = c.closure_defect;
          jc["theta"] = c.theta;
          jc["lambda_re"] = json::array();
          jc["lambda_im"] = json::array();
          for (Cplx z : c.lambda) {
            jc["lambda_re"].push_back(z.real());
            jc["lambda_im"].push_back(z.imag());
          }
          j["curves"].push_back(std::move(jc));
        }
        write_report(dir + "/spectrum_curves.json", j);
      }
      if (config.output.csv) {
        std::vector<std::vector<std::string>> rows;
        for (const SpectrumCurve& c : curves)
          for (size_t i = 0; i < c.theta.size(); ++i)
            rows.push_back({std::to_string(c.branch_id), format_double(c.theta[i]),
                            format_double(c.lambda[i].real()),
                            format_double(c.lambda[i].imag())});
        write_csv(dir + "/spectrum_curves.csv", {"branch", "theta", "lambda_re", "lambda_im"},
                  rows);
      }
      if (config.output.svg) {
        std::vector<PlotSeries> series;
        for (const SpectrumCurve& c : curves) {
          PlotSeries s;
          s.name = "branch " + std::to_string(c.branch_id);
          for (Cplx z : c.lambda) {
            s.x.push_back(z.real());
            s.y.push_back(z.imag());
          }
          series.push_back(std::move(s));
        }
        write_svg_curves(dir + "/spectrum_curves.svg", "gamma-eigenvalue curves", series);
      }
    }
    return 0;
  }

  if (options.mode == "trace-scan") {
    const int samples = 160;
    std::vector<std::vector<std::string>> rows;
    PlotSeries tre{"Re t", {}, {}};
    for (int i = 0; i <= samples; ++i) {
      double lam = sp.re_lo + (sp.re_hi - sp.re_lo) * i / samples;
      std::string t_re = "nan", t_im = "nan", band = "0";
      try {
        TraceResult t = trace_criterion(model, orbit, Cplx(lam, 0.0));
        t_re = format_double(t.t.real());
        t_im = format_double(t.t.imag());
        band = t.in_band ? "1" : "0";
        tre.x.push_back(lam);
        tre.y.push_back(t.t.real());
      } catch (const Error&) {
        // poles of the trace (fast eigenvalues) stay as gaps in the scan
      }
      rows.push_back({format_double(lam), t_re, t_im, band});
    }
    if (config.output.csv)
      write_csv(dir + "/trace_scan.csv", {"lambda", "t_re", "t_im", "in_band"}, rows);
    if (config.output.json) {
      json j;
      j["samples"] = json::array();
      for (const auto& r : rows)
        j["samples"].push_back({{"lambda", r[0]}, {"t_re", r[1]}, {"t_im", r[2]},
                                {"in_band", r[3]}});
      write_report(dir + "/trace_scan.json", j);
    }
    if (config.output.svg) {
      PlotSeries upper{"t = 2", {sp.re_lo, sp.re_hi}, {2.0, 2.0}};
      PlotSeries lower{"t = -2", {sp.re_lo, sp.re_hi}, {-2.0, -2.0}};
      write_svg_curves(dir + "/trace_scan.svg", "slow trace t(lambda)", {tre, upper, lower});
    }
    std::cout << "trace scan: " << rows.size() << " samples written\n";
    return 0;
  }

  throw Error(ErrorKind::config,
              "flag --mode: unknown mode '" + options.mode +
                  "' (expected fast, slow, full, reduced or trace-scan)");
}

int cmd_cancelation(const RunConfig& config, const CliOptions& options) {
  std::string dir = output_dir(config, options);
  ModelSpec model = build_model(config.model);
  SingularOrbit orbit = load_orbit(orbit_path(dir));
  const SpectrumConfig& sp = config.spectrum;

  NonlinearityValues at0 = model.eval(orbit.hom.u0, Vec::Zero(model.n), 0.0);
  double re_lo = std::max(sp.re_lo, -at0.dG_dv(0, 0) + 0.05);
  LedgeredFn f = [&](Cplx lam) -> LedgeredScalar {
    return to_ledgered(evans_fast_reduced(model, orbit.hom, lam));
  };
  std::vector<Root> zeros =
      find_roots(f, Cplx(re_lo, sp.im_lo), Cplx(sp.re_hi, sp.im_hi), sp.root_tol);

  json j;
  j["entries"] = json::array();
  for (const Root& z : zeros) {
    json entry;
    entry["lambda_re"] = z.location.real();
    entry["lambda_im"] = z.location.imag();
    if (z.multiplicity != 1 || !z.resolved) {
      entry["skipped"] = "unsupported multiplicity " + std::to_string(z.multiplicity);
      j["entries"].push_back(std::move(entry));
      continue;
    }
    CancelationScan scan =
        cancelation_scan(model, orbit, z.location, sp.gamma_count, sp.guard_radius);
    entry["residue_re"] = scan.report.residue.real();
    entry["residue_im"] = scan.report.residue.imag();
    entry["ip_H2v_re"] = scan.report.ip_H2v.real();
    entry["ip_H2v_im"] = scan.report.ip_H2v.imag();
    entry["ip_Gu_re"] = scan.report.ip_Gu.real();
    entry["ip_Gu_im"] = scan.report.ip_Gu.imag();
    entry["u_boundary_re"] = scan.report.u_boundary.real();
    entry["u_boundary_im"] = scan.report.u_boundary.imag();
    entry["verdict"] = scan.report.verdict == CancelVerdict::cancels ? "cancels" : "persists";
    entry["guard_radius"] = scan.delta;
    entry["winding"] = scan.winding;
    entry["consistent"] = scan.consistent;
    std::cout << "fast zero " << format_double(z.location.real()) << ": "
              << entry["verdict"].get<std::string>() << "\n";
    j["entries"].push_back(std::move(entry));
  }
  write_report(dir + "/cancelation.json", j);
  return 0;
}

int cmd_instability(const RunConfig& config, const CliOptions& options) {
  std::string dir = output_dir(config, options);
  ModelSpec model = build_model(config.model);
  SingularOrbit orbit = load_orbit(orbit_path(dir));
  InstabilityReport rep = instability_criteria(model, orbit);

  json j;
  j["I1"] = rep.I1;
  j["I2"] = rep.I2;
  j["G0"] = rep.G0;
  j["lambda0"] = rep.lambda0;
  j["verdict"] = rep.verdict == InstabilityVerdict::unstable_by_I1   ? "unstable_by_I1"
                 : rep.verdict == InstabilityVerdict::unstable_by_I2 ? "unstable_by_I2"
                                                                     : "inconclusive";
  write_report(dir + "/instability.json", j);
  std::cout << "I1 = " << format_double(rep.I1) << "  I2 = " << format_double(rep.I2)
            << "  G0 = " << format_double(rep.G0) << "  verdict: "
            << j["verdict"].get<std::string>() << "\n";
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"critical spectra of singularly perturbed periodic pulse solutions"};
  app.require_subcommand(1);
  CliOptions opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "run configuration file (JSON)")->required();
    sub->add_option("--out", opt.out_dir, "output directory (overrides config)");
    sub->add_option("--workers", opt.workers, "parallel worker count (0: default)");
    sub->add_flag("--verbose", opt.verbose, "chatty progress output");
  };
  CLI::App* ex = app.add_subcommand("existence", "singular orbit and periodic pulse profiles");
  CLI::App* spct = app.add_subcommand("spectrum", "Evans-function spectrum reports");
  spct->add_option("--mode", opt.mode, "fast | slow | full | reduced | trace-scan");
  CLI::App* canc = app.add_subcommand("cancelation", "zero-pole cancelation reports");
  CLI::App* inst = app.add_subcommand("instability", "I1/I2/G0 instability criteria");
  for (CLI::App* sub : {ex, spct, canc, inst}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

#ifdef _OPENMP
  if (opt.workers > 0) omp_set_num_threads(opt.workers);
#endif

  try {
    RunConfig config = load_run_config(opt.config_path);
    if (ex->parsed()) return cmd_existence(config, opt);
    if (spct->parsed()) return cmd_spectrum(config, opt);
    if (canc->parsed()) return cmd_cancelation(config, opt);
    return cmd_instability(config, opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace pspec
