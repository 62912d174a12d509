#pragma once

// Static SVG plots of decoded trajectories over their environment.

#include "pisonet/io.hpp"

#include <filesystem>
#include <string>

namespace pisonet {

struct SvgOptions {
  int width_px = 640;
  int arrows = 0;              // K arrow glyphs per agent, evenly spaced in time
  bool velocity_arrows = true;
  bool control_arrows = false;
  double arrow_scale = 1.0;    // world units per unit of v or u
};

/// World coordinates are kept: viewBox spans the domain box and a single
/// group carries the y-flip matrix(1 0 0 -1 0 ymin+ymax). 3D input is drawn
/// as its (x, y) projection with a warning annotation.
std::string render_svg(const TrajectoryTable& table, const EnvironmentSpec& env, const SvgOptions& opt = {});

/// Writes render_svg to path. Returns true when a projection warning was emitted.
bool write_svg(const std::filesystem::path& path, const TrajectoryTable& table, const EnvironmentSpec& env,
               const SvgOptions& opt = {});

}  // namespace pisonet
