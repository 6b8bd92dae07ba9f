#pragma once

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ktraffic/diagrams.hpp"
#include "ktraffic/dynamics.hpp"
#include "ktraffic/equilibrium.hpp"
#include "ktraffic/error.hpp"
#include "ktraffic/format.hpp"

namespace ktraffic {

class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline nlohmann::json number_array(const std::vector<double>& values) {
  auto arr = nlohmann::json::array();
  for (double v : values) arr.push_back(round_significant(v));
  return arr;
}

}  // namespace detail

inline nlohmann::json branch_to_json(const BranchRecord& b) {
  return {{"j", b.j},
          {"a", round_significant(b.a)},
          {"b", round_significant(b.b)},
          {"c", round_significant(b.c)},
          {"discriminant", round_significant(b.discriminant)},
          {"root", round_significant(b.root)},
          {"larger_root", b.larger_root}};
}

/// {n, rho, f_inf[], q, u, phase, stable, branch_data[]}
inline nlohmann::json equilibrium_to_json(const EquilibriumResult& eq) {
  const Observables obs = observables(eq.f_inf, SpeedLattice(eq.n));
  auto branches = nlohmann::json::array();
  for (const auto& b : eq.branch_data) branches.push_back(branch_to_json(b));
  return {{"n", eq.n},
          {"rho", round_significant(eq.rho)},
          {"f_inf", detail::number_array(eq.f_inf)},
          {"q", round_significant(obs.q)},
          {"u", round_significant(obs.u)},
          {"phase", to_string(eq.phase)},
          {"stable", eq.stable},
          {"branch_data", branches}};
}

inline nlohmann::json stability_to_json(const StabilityReport& s) {
  nlohmann::json j = {{"verdict", to_string(s.verdict)},
                      {"jacobian_eigen_real_parts", detail::number_array(s.jacobian_eigen_real_parts)},
                      {"zero_mode_index", s.zero_mode_index},
                      {"restricted_real_parts", detail::number_array(s.restricted_real_parts)}};
  if (!s.note.empty()) j["note"] = s.note;
  return j;
}

/// Header `rho,q,u,phase`, one row per point.
inline void write_diagram_csv(std::ostream& out, const Diagram& d) {
  out << "rho,q,u,phase\n";
  for (const auto& p : d.points)
    out << format_number(p.rho) << ',' << format_number(p.q) << ',' << format_number(p.u) << ',' << to_string(p.phase)
        << '\n';
}

/// {n, method, sigma, q_max, points:[...]}
inline nlohmann::json diagram_to_json(const Diagram& d) {
  auto pts = nlohmann::json::array();
  for (const auto& p : d.points) {
    nlohmann::json jp = {{"rho", round_significant(p.rho)},
                         {"q", round_significant(p.q)},
                         {"u", round_significant(p.u)},
                         {"phase", to_string(p.phase)}};
    if (!p.converged) jp["converged"] = false;
    pts.push_back(std::move(jp));
  }
  return {{"n", d.n},
          {"method", to_string(d.method)},
          {"sigma", round_significant(d.sigma)},
          {"q_max", round_significant(d.q_max)},
          {"points", pts}};
}

namespace detail {

struct Panel {
  double x0, y0, width, height;
  double xmax, ymax;
  double px(double x) const { return x0 + width * (x / xmax); }
  double py(double y) const { return y0 + height - height * (y / ymax); }
};

inline void svg_axes(std::ostream& out, const Panel& p, const std::string& xlabel, const std::string& ylabel) {
  out << "<rect x=\"" << p.x0 << "\" y=\"" << p.y0 << "\" width=\"" << p.width << "\" height=\"" << p.height
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = p.xmax * i / 4.0;
    const double fy = p.ymax * i / 4.0;
    out << "<line x1=\"" << format_number(p.px(fx)) << "\" y1=\"" << p.y0 + p.height << "\" x2=\""
        << format_number(p.px(fx)) << "\" y2=\"" << p.y0 + p.height + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << format_number(p.px(fx)) << "\" y=\"" << p.y0 + p.height + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << format_number(fx) << "</text>\n";
    out << "<line x1=\"" << p.x0 - 5 << "\" y1=\"" << format_number(p.py(fy)) << "\" x2=\"" << p.x0 << "\" y2=\""
        << format_number(p.py(fy)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << p.x0 - 8 << "\" y=\"" << format_number(p.py(fy) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << format_number(fy) << "</text>\n";
  }
  out << "<text x=\"" << p.x0 + p.width / 2 << "\" y=\"" << p.y0 + p.height + 34
      << "\" font-size=\"12\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  out << "<text x=\"" << p.x0 - 48 << "\" y=\"" << p.y0 + p.height / 2 << "\" font-size=\"12\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 " << p.x0 - 48 << ' ' << p.y0 + p.height / 2 << ")\">" << ylabel << "</text>\n";
}

template <typename Value>
void svg_polyline(std::ostream& out, const Panel& p, const Diagram& d, Value value) {
  out << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    if (i) out << ' ';
    out << format_number(p.px(d.points[i].rho)) << ',' << format_number(p.py(value(d.points[i])));
  }
  out << "\"/>\n";
}

}  // namespace detail

/// Two stacked panels: flux over density on top, mean speed over density below.
inline void write_diagram_svg(std::ostream& out, const Diagram& d, const ModelParams& params) {
  const bool physical = d.units == Units::Physical;
  const double rho_top = physical ? params.rho_max : 1.0;
  const double u_top = physical ? params.v_max : 1.0;
  double q_top = physical ? 0.5 * params.rho_max * params.v_max : 0.5;
  q_top = std::max(q_top, d.q_max);
  const std::string rho_label = physical ? "density [vehicles/km]" : "density (dimensionless)";
  const std::string q_label = physical ? "flux [vehicles/h]" : "flux (dimensionless)";
  const std::string u_label = physical ? "mean speed [km/h]" : "mean speed (dimensionless)";

  const detail::Panel top{80, 40, 420, 240, rho_top, q_top};
  const detail::Panel bottom{80, 360, 420, 240, rho_top, u_top};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"560\" height=\"660\" viewBox=\"0 0 560 660\">\n";
  out << "<rect width=\"560\" height=\"660\" fill=\"white\"/>\n";
  out << "<text x=\"290\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">n = " << d.n << " speed classes ("
      << to_string(d.method) << "), sigma = " << format_number(d.sigma) << "</text>\n";
  detail::svg_axes(out, top, rho_label, q_label);
  detail::svg_polyline(out, top, d, [](const DiagramPoint& p) { return p.q; });
  detail::svg_axes(out, bottom, rho_label, u_label);
  detail::svg_polyline(out, bottom, d, [](const DiagramPoint& p) { return p.u; });
  out << "</svg>\n";
}

/// Opens `path` for writing; the error message carries the path.
inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file '" + path + "' for writing");
  return out;
}

inline void finish_output(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("failed writing output file '" + path + "'");
}

}  // namespace ktraffic
