#pragma once

// Two-step device calibration.
//
// 1. Side by side: with phone and watch co-oriented, find the fixed rotation
//    A mapping the phone's reference frame into the watch's (A * phone =
//    watch). A is then left-multiplied onto every phone orientation.
// 2. T-pose (arm horizontal, palm down): each device's mounting rotation is
//    observed^T * canonical, and is right-multiplied onto every raw
//    orientation from then on.

#include <span>

#include "smartposer/math.hpp"
#include "smartposer/simulator.hpp"

namespace smartposer::calib {

struct CalibrationState {
  Rot3 frame_align;
  Rot3 watch_mount;
  Rot3 phone_mount;
};

struct MountRotations {
  Rot3 watch_mount;
  Rot3 phone_mount;
};

// Watch x along the arm pointing away from the body, face normal up.
Rot3 canonical_tpose_watch();
// Phone resting in the pocket with axes aligned to the body frame.
Rot3 canonical_phone_rest();

Rot3 align_side_by_side(const Rot3& phone_orient, const Rot3& watch_orient);

MountRotations tpose_calibrate(const Rot3& aligned_watch, const Rot3& aligned_phone,
                               const Rot3& canonical_tpose_watch);

// Runs both steps on captured samples. A single sample is used as-is; longer
// captures are averaged (quaternion mean) first.
CalibrationState calibrate(const sim::CalibrationCapture& capture);

struct CalibratedImu {
  Rot3 watch_orient;  // mount-corrected, global frame
  Rot3 phone_orient;  // aligned and mount-corrected, global frame
  Vec3 watch_accel;   // global frame
  Vec3 phone_accel;   // global frame
};

// Device-frame accelerations are rotated by the (aligned) raw orientation,
// i.e. the physical device attitude, before mount correction.
CalibratedImu apply_calibration(const CalibrationState& state, const Rot3& raw_watch,
                                const Vec3& watch_accel, const Rot3& raw_phone,
                                const Vec3& phone_accel);

void validate(const CalibrationState& state);

}  // namespace smartposer::calib
