#pragma once

// Whole-session feature extraction: calibrate, fuse, normalize. Produces the
// model inputs plus the normalized regression targets used for training and
// the metric-unit ground truth used for evaluation.

#include <string>
#include <vector>

#include "smartposer/calibration.hpp"
#include "smartposer/kinematics.hpp"
#include "smartposer/matrix.hpp"
#include "smartposer/pipeline.hpp"
#include "smartposer/simulator.hpp"

namespace smartposer::pipeline {

struct SessionFeatures {
  std::string subject_id;
  double arm_span = 0.0;
  std::vector<double> timestamps;
  MatrixD features;                 // N x kFeatureDim
  std::vector<double> uwb_true_norm;  // N, corrector target
  MatrixD pose_target;              // N x 9, normalized shoulder-frame joints
  std::vector<double> uwb_raw_m;    // N, meters
  std::vector<double> uwb_true_m;   // N, meters
  std::vector<ArmPose> gt_pose;     // N, meters
  bool has_ground_truth = true;

  std::size_t frames() const { return timestamps.size(); }
  FusedFrame frame(std::size_t i) const;
};

// Calibrates, fuses and normalizes one recorded frame.
FusedFrame fuse_frame(const sim::SessionFrame& frame, const calib::CalibrationState& state, double arm_span);

SessionFeatures session_features(const sim::SessionRecording& rec,
                                 const calib::CalibrationState& state);

// Calibrates from the recording's own capture first.
SessionFeatures session_features(const sim::SessionRecording& rec);

// Rows [start, start + len) as a window matrix.
MatrixD window_rows(const MatrixD& m, std::size_t start, std::size_t len);

}  // namespace smartposer::pipeline
