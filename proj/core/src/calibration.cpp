#include "smartposer/calibration.hpp"

#include <numbers>

#include "smartposer/error.hpp"

namespace smartposer::calib {

Rot3 canonical_tpose_watch() { return Rot3::about_z(std::numbers::pi); }

Rot3 canonical_phone_rest() { return Rot3::identity(); }

Rot3 align_side_by_side(const Rot3& phone_orient, const Rot3& watch_orient) {
  return watch_orient * phone_orient.transpose();
}

MountRotations tpose_calibrate(const Rot3& aligned_watch, const Rot3& aligned_phone,
                               const Rot3& canonical_tpose_watch) {
  return {aligned_watch.transpose() * canonical_tpose_watch,
          aligned_phone.transpose() * canonical_phone_rest()};
}

CalibrationState calibrate(const sim::CalibrationCapture& capture) {
  if (capture.side_by_side_phone.empty() || capture.side_by_side_watch.empty() ||
      capture.tpose_phone.empty() || capture.tpose_watch.empty()) {
    throw InvalidInput("calibrate: missing calibration samples");
  }
  auto summarize = [](std::span<const Rot3> samples) {
    return samples.size() == 1 ? samples.front() : mean_rotation(samples);
  };
  CalibrationState state;
  state.frame_align = align_side_by_side(summarize(capture.side_by_side_phone),
                                         summarize(capture.side_by_side_watch));
  const Rot3 tpose_phone = state.frame_align * summarize(capture.tpose_phone);
  const MountRotations mounts =
      tpose_calibrate(summarize(capture.tpose_watch), tpose_phone, canonical_tpose_watch());
  state.watch_mount = mounts.watch_mount;
  state.phone_mount = mounts.phone_mount;
  return state;
}

CalibratedImu apply_calibration(const CalibrationState& state, const Rot3& raw_watch,
                                const Vec3& watch_accel, const Rot3& raw_phone,
                                const Vec3& phone_accel) {
  const Rot3 aligned_phone = state.frame_align * raw_phone;
  return {raw_watch * state.watch_mount, aligned_phone * state.phone_mount, raw_watch * watch_accel,
          aligned_phone * phone_accel};
}

void validate(const CalibrationState& state) {
  if (!is_rotation(state.frame_align, 1e-6) || !is_rotation(state.watch_mount, 1e-6) ||
      !is_rotation(state.phone_mount, 1e-6)) {
    throw InvalidInput("CalibrationState: members must be rotations");
  }
}

}  // namespace smartposer::calib
