#include "smartposer/session_features.hpp"

#include "smartposer/error.hpp"

namespace smartposer::pipeline {

FusedFrame SessionFeatures::frame(std::size_t i) const {
  FusedFrame f;
  f.timestamp = timestamps.at(i);
  for (std::size_t j = 0; j < kFeatureDim; ++j) {
    f.features[j] = features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return f;
}

FusedFrame fuse_frame(const sim::SessionFrame& f, const calib::CalibrationState& state, double arm_span) {
  const calib::CalibratedImu imu =
      calib::apply_calibration(state, f.watch_orient, f.watch_accel, f.phone_orient, f.phone_accel);
  return assemble_frame(f.timestamp, imu.watch_orient, imu.phone_orient, imu.watch_accel, imu.phone_accel,
                        normalize_uwb(f.uwb_raw, arm_span));
}

SessionFeatures session_features(const sim::SessionRecording& rec,
                                 const calib::CalibrationState& state) {
  calib::validate(state);
  const double span = rec.subject.arm_model.arm_span;
  const std::size_t n = rec.frames.size();

  SessionFeatures out;
  out.subject_id = rec.subject.id;
  out.arm_span = span;
  out.has_ground_truth = rec.has_ground_truth;
  out.timestamps.resize(n);
  out.features.resize(static_cast<Eigen::Index>(n), kFeatureDim);
  out.uwb_true_norm.resize(n);
  out.pose_target.resize(static_cast<Eigen::Index>(n), 9);
  out.uwb_raw_m.resize(n);
  out.uwb_true_m.resize(n);
  out.gt_pose.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const sim::SessionFrame& f = rec.frames[i];
    const FusedFrame fused = fuse_frame(f, state, span);
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      out.features(row, static_cast<Eigen::Index>(j)) = fused.features[j];
    }
    out.timestamps[i] = f.timestamp;
    out.uwb_true_norm[i] = normalize_uwb(f.uwb_true, span);
    const PoseVector p = normalize_pose(f.gt_pose, span);
    for (int j = 0; j < 9; ++j) out.pose_target(row, j) = p[static_cast<std::size_t>(j)];
    out.uwb_raw_m[i] = f.uwb_raw;
    out.uwb_true_m[i] = f.uwb_true;
    out.gt_pose[i] = f.gt_pose;
  }
  return out;
}

SessionFeatures session_features(const sim::SessionRecording& rec) {
  return session_features(rec, calib::calibrate(rec.calibration));
}

MatrixD window_rows(const MatrixD& m, std::size_t start, std::size_t len) {
  if (start + len > static_cast<std::size_t>(m.rows())) {
    throw InvalidInput("window_rows: window exceeds sequence");
  }
  return m.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len));
}

}  // namespace smartposer::pipeline
