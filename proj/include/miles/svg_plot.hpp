#ifndef MILES_SVG_PLOT_HPP
#define MILES_SVG_PLOT_HPP

#include <filesystem>
#include <string>

#include "miles/experiment.hpp"

namespace miles {

/// Geometry shared by the renderer and tests that map coordinates back.
struct PlotLayout {
  static constexpr double width = 760.0;
  static constexpr double panel_height = 200.0;
  static constexpr double margin_left = 80.0;
  static constexpr double margin_right = 150.0;
  static constexpr double margin_top = 30.0;
  static constexpr double panel_gap = 60.0;

  static constexpr double plot_width() { return width - margin_left - margin_right; }
  static constexpr double height() { return margin_top + 3 * (panel_height + panel_gap); }
};

/// Three stacked panels sharing the epoch axis: utilization (u_A, u_B,
/// delta), per-group learning rates as step lines, and validation metric of
/// the fused and unimodal heads. Each series is one <polyline>.
/// Throws InputError on an empty log.
std::string render_svg(const RunLog& log);

/// Throws IoError when `path` cannot be written.
void plot(const RunLog& log, const std::filesystem::path& path);

}  // namespace miles

#endif  // MILES_SVG_PLOT_HPP
