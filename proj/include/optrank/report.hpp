#pragma once

#include <string>

#include "optrank/harness.hpp"

namespace optrank {

// SVG heatmap of the mean test error over (row, sample size), colored on a
// log10 scale clamped to [-10, 1] (red = near zero, blue = order one), with
// dashed yellow markers at each row's optimistic sample size and a legend
// documenting the scale.
std::string render_heatmap_svg(const SweepGrid& grid);

// Plain-text transition table for terminal output.
std::string format_transition_table(const TransitionReport& report);

}  // namespace optrank
