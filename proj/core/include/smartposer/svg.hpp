#pragma once

// Minimal deterministic SVG renderings of evaluation results. Output bytes
// depend only on the input values.

#include <string>
#include <utility>
#include <vector>

#include "smartposer/eval.hpp"
#include "smartposer/matrix.hpp"
#include "smartposer/report_io.hpp"

namespace smartposer::svg {

// Step curves, one per named series. Throws InvalidInput if there are no
// series or a series is empty.
std::string cdf_plot(const std::vector<std::pair<std::string, eval::CdfCurve>>& curves,
                     const std::string& title = "Joint error CDF");

struct HeatmapPanel {
  std::string title;
  MatrixD cells;  // row 0 drawn at the bottom
  std::string x_label;
  std::string y_label;
};

// Panels laid out left to right with a shared color scale. Throws
// InvalidInput if there are no panels.
std::string heatmap_plot(const std::vector<HeatmapPanel>& panels, double lo, double hi,
                         const std::string& title = "Maximum UWB error");

// Raw, corrected (when present) and true distance against time. Throws
// InvalidInput on an empty trace or series of different lengths.
std::string uwb_trace_plot(const io::UwbTrace& trace, const std::string& title = "UWB distance");

}  // namespace smartposer::svg
