#include "pisonet/svg.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace pisonet {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double x) { return format_double(x); }

void arrow(std::ostringstream& os, double x, double y, double dx, double dy, const char* cls) {
  if (std::hypot(dx, dy) < 1e-12) return;
  os << "    <line class=\"" << cls << "\" x1=\"" << num(x) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x + dx)
     << "\" y2=\"" << num(y + dy) << "\" marker-end=\"url(#head-" << cls << ")\"/>\n";
}

}  // namespace

std::string render_svg(const TrajectoryTable& table, const EnvironmentSpec& env, const SvgOptions& opt) {
  if (env.domain.min_corner.size() < 2 || env.domain.max_corner.size() < 2)
    throw DomainError("render_svg: domain needs at least two dimensions");
  if (opt.width_px < 1 || opt.arrows < 0) throw DomainError("render_svg: invalid options");
  const double x0 = env.domain.min_corner[0], y0 = env.domain.min_corner[1];
  const double w = env.domain.max_corner[0] - x0, h = env.domain.max_corner[1] - y0;
  if (!(w > 0.0) || !(h > 0.0)) throw DomainError("render_svg: empty domain");
  const int height_px = std::max(1, static_cast<int>(std::lround(opt.width_px * h / w)));
  const bool projected = env.spatial_dim > 2 || table.spatial_dim > 2;
  const double stroke = w / 300.0;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width_px << "\" height=\"" << height_px
     << "\" viewBox=\"" << num(x0) << ' ' << num(y0) << ' ' << num(w) << ' ' << num(h) << "\">\n";
  os << "  <defs>\n";
  for (const char* cls : {"velocity", "control"}) {
    const char* color = cls[0] == 'v' ? "#1f4fd8" : "#c0392b";
    os << "    <marker id=\"head-" << cls << "\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"5\" "
       << "markerHeight=\"5\" orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"" << color << "\"/></marker>\n";
  }
  os << "  </defs>\n";
  os << "  <style>.domain{fill:#ffffff;stroke:#000000;stroke-width:" << num(stroke)
     << "}.obstacle{fill:#9e9e9e;stroke:none}.wall{stroke:#9e9e9e;stroke-linecap:round}"
     << ".path{fill:none;stroke-width:" << num(stroke) << "}.velocity{stroke:#1f4fd8;stroke-width:" << num(stroke)
     << "}.control{stroke:#c0392b;stroke-width:" << num(stroke) << "}</style>\n";
  os << "  <g id=\"world\" transform=\"matrix(1 0 0 -1 0 " << num(2.0 * y0 + h) << ")\">\n";
  os << "    <rect class=\"domain\" x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(w) << "\" height=\""
     << num(h) << "\"/>\n";
  for (const auto& ob : env.obstacles) {
    if (const auto* c = std::get_if<Circle>(&ob)) {
      os << "    <circle class=\"obstacle\" cx=\"" << num(c->center[0]) << "\" cy=\"" << num(c->center[1]) << "\" r=\""
         << num(c->radius) << "\"/>\n";
    } else if (const auto* b = std::get_if<AxisBox>(&ob)) {
      os << "    <rect class=\"obstacle\" x=\"" << num(b->min_corner[0]) << "\" y=\"" << num(b->min_corner[1])
         << "\" width=\"" << num(b->max_corner[0] - b->min_corner[0]) << "\" height=\""
         << num(b->max_corner[1] - b->min_corner[1]) << "\"/>\n";
    } else if (const auto* s = std::get_if<SegmentWall>(&ob)) {
      os << "    <line class=\"wall\" x1=\"" << num(s->a[0]) << "\" y1=\"" << num(s->a[1]) << "\" x2=\"" << num(s->b[0])
         << "\" y2=\"" << num(s->b[1]) << "\" stroke-width=\"" << num(2.0 * s->half_width) << "\"/>\n";
    }
  }
  const int Nt = table.traj.grid.size();
  const int d = table.spatial_dim, dx = 2 * d;
  for (int i = 0; i < table.num_agents && Nt > 0; ++i) {
    const char* color = kPalette[i % 10];
    os << "    <polyline class=\"path\" stroke=\"" << color << "\" points=\"";
    for (int j = 0; j < Nt; ++j) {
      if (j > 0) os << ' ';
      os << num(table.traj.x(j, i * dx)) << ',' << num(table.traj.x(j, i * dx + 1));
    }
    os << "\"/>\n";
    const double r = 2.0 * stroke;
    os << "    <circle class=\"start\" cx=\"" << num(table.traj.x(0, i * dx)) << "\" cy=\""
       << num(table.traj.x(0, i * dx + 1)) << "\" r=\"" << num(r) << "\" fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"" << num(stroke) << "\"/>\n";
    os << "    <circle class=\"terminal\" cx=\"" << num(table.traj.x(Nt - 1, i * dx)) << "\" cy=\""
       << num(table.traj.x(Nt - 1, i * dx + 1)) << "\" r=\"" << num(r) << "\" fill=\"" << color << "\"/>\n";
    for (int k = 0; k < opt.arrows && Nt > 1; ++k) {
      const int j = opt.arrows == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(k) * (Nt - 1) / (opt.arrows - 1)));
      const double px = table.traj.x(j, i * dx), py = table.traj.x(j, i * dx + 1);
      if (opt.velocity_arrows)
        arrow(os, px, py, opt.arrow_scale * table.traj.x(j, i * dx + d), opt.arrow_scale * table.traj.x(j, i * dx + d + 1),
              "velocity");
      if (opt.control_arrows && table.controls.rows() == Nt)
        arrow(os, px, py, opt.arrow_scale * table.controls(j, i * d), opt.arrow_scale * table.controls(j, i * d + 1),
              "control");
    }
  }
  os << "  </g>\n";
  if (projected)
    os << "  <text class=\"warning\" x=\"" << num(x0 + 0.02 * w) << "\" y=\"" << num(y0 + 0.05 * h)
       << "\" font-size=\"" << num(0.04 * h) << "\" fill=\"#c0392b\">warning: 3D input, showing the (x, y) projection</text>\n";
  os << "</svg>\n";
  return os.str();
}

bool write_svg(const std::filesystem::path& path, const TrajectoryTable& table, const EnvironmentSpec& env,
               const SvgOptions& opt) {
  const std::string doc = render_svg(table, env, opt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc;
  if (!out) throw IoError("write failed for " + path.string());
  return env.spatial_dim > 2 || table.spatial_dim > 2;
}

}  // namespace pisonet
