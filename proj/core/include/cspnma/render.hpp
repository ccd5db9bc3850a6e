#pragma once

#include <string>

#include "cspnma/report.hpp"

namespace cspnma {

// Deterministic SVG renderers. Each is a pure function of the figure
// JSON produced by report.hpp: fixed viewport, named font families only,
// no timestamps, two-decimal coordinates.
std::string render_forest_svg(const Json& forest_report);
std::string render_tension_svg(const Json& tension_report);
std::string render_paths_svg(const Json& path_figure_report);

}  // namespace cspnma
