#pragma once

// JSON/CSV serialization of evaluation results and the plot data embedded in
// report files.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartposer/eval.hpp"

namespace smartposer::io {

nlohmann::json metrics_to_json(const eval::MetricsReport& r);

// One row per joint plus one row per subject and joint:
// scope,joint,frames,median_cm,mpjpe_cm,mae_cm
std::string metrics_csv(const eval::MetricsReport& r);

// At most `max_points` order statistics, always including the maximum.
eval::CdfCurve downsample_cdf(const eval::CdfCurve& c, std::size_t max_points);

nlohmann::json cdf_to_json(const eval::CdfCurve& c);
eval::CdfCurve cdf_from_json(const nlohmann::json& j);
// joint,value_cm,fraction
std::string cdf_csv(const std::vector<std::pair<std::string, eval::CdfCurve>>& curves);

// Grid config and the three max projections.
nlohmann::json heatmap_to_json(const eval::HeatmapGrid& g);
// projection,row,col,max_error_m (only non-empty cells)
std::string heatmap_csv(const eval::HeatmapGrid& g);

struct UwbTrace {
  std::vector<double> t;
  std::vector<double> raw;
  std::vector<double> corrected;  // empty for IMU-only models
  std::vector<double> truth;
};

nlohmann::json trace_to_json(const UwbTrace& t);
UwbTrace trace_from_json(const nlohmann::json& j);

// Full evaluation report: metrics, CDFs of elbow/wrist error, UWB error
// heatmaps and a UWB trace excerpt of the first session.
nlohmann::json eval_report_json(const eval::EvalResult& r, std::size_t trace_frames = 500);

nlohmann::json loso_to_json(const eval::LosoResult& r);
nlohmann::json ablation_to_json(const eval::AblationResult& r);

}  // namespace smartposer::io
