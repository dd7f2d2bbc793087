#include "pulsespec/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pspec {

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::missing_input, "cannot open input file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, "malformed JSON in " + path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::solver, "cannot open output file: " + path);
  out << text;
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& a) {
  Vec v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json table_to_json(const HermiteTable<Vec>& t) {
  json j;
  j["x"] = t.x;
  json y = json::array(), dy = json::array();
  for (const Vec& v : t.y) y.push_back(vec_to_json(v));
  for (const Vec& v : t.dy) dy.push_back(vec_to_json(v));
  j["y"] = std::move(y);
  j["dy"] = std::move(dy);
  return j;
}

HermiteTable<Vec> table_from_json(const json& j) {
  HermiteTable<Vec> t;
  t.x = j.at("x").get<std::vector<double>>();
  for (const json& v : j.at("y")) t.y.push_back(vec_from_json(v));
  for (const json& v : j.at("dy")) t.dy.push_back(vec_from_json(v));
  if (t.x.size() != t.y.size() || t.x.size() != t.dy.size())
    throw Error(ErrorKind::config, "inconsistent table lengths in input file");
  return t;
}

template <class T>
T get_field(const json& j, const std::string& section, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::config, "config field " + section + "." + key + " has the wrong type");
  }
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  json j = read_json_file(path);
  RunConfig c;

  json jm = j.value("model", json::object());
  c.model.family = get_field<std::string>(jm, "model", "family", "gm");
  c.model.alpha1 = get_field<double>(jm, "model", "alpha1", c.model.alpha1);
  c.model.alpha2 = get_field<double>(jm, "model", "alpha2", c.model.alpha2);
  c.model.beta1 = get_field<int>(jm, "model", "beta1", c.model.beta1);
  c.model.beta2 = get_field<int>(jm, "model", "beta2", c.model.beta2);
  c.model.slow_type = get_field<std::string>(jm, "model", "slow_type", c.model.slow_type);
  c.model.mu = get_field<double>(jm, "model", "mu", c.model.mu);
  c.model.h2_scale = get_field<double>(jm, "model", "h2_scale", c.model.h2_scale);
  c.model.normalized_center =
      get_field<bool>(jm, "model", "normalized_center", c.model.normalized_center);
  if (c.model.family != "gm")
    throw Error(ErrorKind::config, "config field model.family: unknown family '" +
                                       c.model.family + "' (supported: gm)");
  if (c.model.slow_type != "saddle" && c.model.slow_type != "center" &&
      c.model.slow_type != "sine")
    throw Error(ErrorKind::config, "config field model.slow_type: must be saddle, center or sine");
  if (!(c.model.mu > 0.0))
    throw Error(ErrorKind::config, "config field model.mu: must be positive");

  json je = j.value("existence", json::object());
  c.existence.u0 = get_field<double>(je, "existence", "u0", c.existence.u0);
  c.existence.eps_ladder =
      get_field<std::vector<double>>(je, "existence", "eps_ladder", c.existence.eps_ladder);
  c.existence.tol = get_field<double>(je, "existence", "tol", c.existence.tol);
  c.existence.window = get_field<double>(je, "existence", "window", c.existence.window);
  if (!(c.existence.tol > 0.0))
    throw Error(ErrorKind::config, "config field existence.tol: must be positive");
  if (!(c.existence.window > 0.0))
    throw Error(ErrorKind::config, "config field existence.window: must be positive");
  for (size_t i = 0; i < c.existence.eps_ladder.size(); ++i) {
    if (!(c.existence.eps_ladder[i] > 0.0))
      throw Error(ErrorKind::config, "config field existence.eps_ladder: entries must be positive");
    if (i > 0 && !(c.existence.eps_ladder[i] < c.existence.eps_ladder[i - 1]))
      throw Error(ErrorKind::config,
                  "config field existence.eps_ladder: must be strictly decreasing");
  }

  json js = j.value("spectrum", json::object());
  c.spectrum.re_lo = get_field<double>(js, "spectrum", "re_lo", c.spectrum.re_lo);
  c.spectrum.re_hi = get_field<double>(js, "spectrum", "re_hi", c.spectrum.re_hi);
  c.spectrum.im_lo = get_field<double>(js, "spectrum", "im_lo", c.spectrum.im_lo);
  c.spectrum.im_hi = get_field<double>(js, "spectrum", "im_hi", c.spectrum.im_hi);
  c.spectrum.gamma_count = get_field<int>(js, "spectrum", "gamma_count", c.spectrum.gamma_count);
  c.spectrum.theta_count = get_field<int>(js, "spectrum", "theta_count", c.spectrum.theta_count);
  c.spectrum.guard_radius =
      get_field<double>(js, "spectrum", "guard_radius", c.spectrum.guard_radius);
  c.spectrum.root_tol = get_field<double>(js, "spectrum", "root_tol", c.spectrum.root_tol);
  if (!(c.spectrum.re_lo < c.spectrum.re_hi) || !(c.spectrum.im_lo < c.spectrum.im_hi))
    throw Error(ErrorKind::config, "config field spectrum.re_lo/re_hi/im_lo/im_hi: empty region");
  if (c.spectrum.gamma_count < 1 || c.spectrum.theta_count < 8)
    throw Error(ErrorKind::config,
                "config field spectrum.gamma_count/theta_count: too few samples");
  if (!(c.spectrum.guard_radius > 0.0) || !(c.spectrum.root_tol > 0.0))
    throw Error(ErrorKind::config,
                "config field spectrum.guard_radius/root_tol: must be positive");

  json jo = j.value("output", json::object());
  c.output.directory = get_field<std::string>(jo, "output", "directory", c.output.directory);
  if (jo.contains("formats")) {
    c.output.csv = c.output.json = c.output.svg = false;
    for (const json& f : jo.at("formats")) {
      std::string s = f.get<std::string>();
      if (s == "csv")
        c.output.csv = true;
      else if (s == "json")
        c.output.json = true;
      else if (s == "svg")
        c.output.svg = true;
      else
        throw Error(ErrorKind::config, "config field output.formats: unknown format '" + s + "'");
    }
  }
  return c;
}

ModelSpec build_model(const ModelConfig& config) {
  GMParams p;
  p.alpha1 = config.alpha1;
  p.alpha2 = config.alpha2;
  p.beta1 = config.beta1;
  p.beta2 = config.beta2;
  p.mu = config.mu;
  p.h2_scale = config.h2_scale;
  if (config.slow_type == "saddle")
    p.slow_type = GMSlowType::saddle;
  else if (config.slow_type == "center")
    p.slow_type = GMSlowType::center;
  else
    p.slow_type = GMSlowType::sine;
  if (config.normalized_center) {
    if (p.slow_type != GMSlowType::center)
      throw Error(ErrorKind::config,
                  "config field model.normalized_center: requires slow_type center");
    return make_gm_center_normalized(p);
  }
  return make_gm_model(p);
}

void save_orbit(const std::string& path, const SingularOrbit& orbit) {
  json j;
  j["hom"]["u0"] = vec_to_json(orbit.hom.u0);
  j["hom"]["n"] = orbit.hom.n;
  j["hom"]["X"] = orbit.hom.X;
  j["hom"]["decay_rate"] = orbit.hom.decay_rate;
  j["hom"]["state"] = table_to_json(orbit.hom.state);
  j["slow"]["u1"] = orbit.slow.u1;
  j["slow"]["L0"] = orbit.slow.L0_check;
  j["slow"]["J0"] = orbit.slow.J0;
  j["slow"]["u0"] = orbit.slow.u0;
  j["slow"]["state"] = table_to_json(orbit.slow.state);
  j["p0"] = vec_to_json(orbit.p0);
  write_text_file(path, j.dump(1));
}

SingularOrbit load_orbit(const std::string& path) {
  json j = read_json_file(path);
  try {
    SingularOrbit o;
    o.hom.u0 = vec_from_json(j.at("hom").at("u0"));
    o.hom.n = j.at("hom").at("n").get<int>();
    o.hom.X = j.at("hom").at("X").get<double>();
    o.hom.decay_rate = j.at("hom").at("decay_rate").get<double>();
    o.hom.state = table_from_json(j.at("hom").at("state"));
    o.slow.u1 = j.at("slow").at("u1").get<double>();
    o.slow.L0_check = j.at("slow").at("L0").get<double>();
    o.slow.J0 = j.at("slow").at("J0").get<double>();
    o.slow.u0 = j.at("slow").at("u0").get<double>();
    o.slow.state = table_from_json(j.at("slow").at("state"));
    o.p0 = vec_from_json(j.at("p0"));
    return o;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, "malformed orbit file " + path + ": " + e.what());
  }
}

void save_profile(const std::string& path, const PulseProfile& profile) {
  json j;
  j["eps"] = profile.eps;
  j["L_eps"] = profile.L_eps;
  j["shooting_residual"] = profile.shooting_residual;
  j["m"] = profile.m;
  j["n"] = profile.n;
  j["state"] = table_to_json(profile.state);
  write_text_file(path, j.dump(1));
}

PulseProfile load_profile(const std::string& path) {
  json j = read_json_file(path);
  try {
    PulseProfile p;
    p.eps = j.at("eps").get<double>();
    p.L_eps = j.at("L_eps").get<double>();
    p.shooting_residual = j.at("shooting_residual").get<double>();
    p.m = j.at("m").get<int>();
    p.n = j.at("n").get<int>();
    p.state = table_from_json(j.at("state"));
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, "malformed profile file " + path + ": " + e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_complex(Cplx v) {
  return format_double(v.real()) + (v.imag() < 0 ? "" : "+") + format_double(v.imag()) + "j";
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  write_text_file(path, out.str());
}

void write_svg_curves(const std::string& path, const std::string& title,
                      const std::vector<PlotSeries>& series) {
  const double W = 800, H = 600, ml = 70, mr = 20, mt = 40, mb = 50;
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  bool first = true;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xlo = xhi = s.x[i];
        ylo = yhi = s.y[i];
        first = false;
      }
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  if (xhi - xlo < 1e-12) xhi = xlo + 1.0;
  if (yhi - ylo < 1e-12) yhi = ylo + 1.0;
  auto px = [&](double x) { return ml + (x - xlo) / (xhi - xlo) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ylo) / (yhi - ylo) * (H - mt - mb); };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
      << "</text>\n";
  svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\""
      << H - mt - mb << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    double xv = xlo + (xhi - xlo) * t / 4.0, yv = ylo + (yhi - ylo) * t / 4.0;
    svg << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << format_double(xv).substr(0, 8)
        << "</text>\n";
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(yv).substr(0, 8)
        << "</text>\n";
  }
  int idx = 0;
  for (const auto& s : series) {
    const char* color = palette[idx % 8];
    if (s.x.size() == 1) {
      svg << "<circle cx=\"" << px(s.x[0]) << "\" cy=\"" << py(s.y[0])
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    } else {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < s.x.size(); ++i)
        svg << px(s.x[i]) << "," << py(s.y[i]) << (i + 1 < s.x.size() ? " " : "");
      svg << "\"/>\n";
    }
    svg << "<text x=\"" << W - mr - 8 << "\" y=\"" << mt + 16 + 14 * idx
        << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << color << "\">" << s.name
        << "</text>\n";
    ++idx;
  }
  svg << "</svg>\n";
  write_text_file(path, svg.str());
}

}  // namespace pspec
