#include <doctest.h>

#include <numbers>

#include "oracles.hpp"
#include "smartposer/calibration.hpp"
#include "smartposer/error.hpp"
#include "smartposer/random.hpp"
#include "smartposer/simulator.hpp"

using namespace smartposer;
using namespace smartposer::calib;
using std::numbers::pi;

TEST_CASE("side-by-side alignment") {
  Rng rng(1);
  const Rot3 r = rng.random_rotation();
  CHECK(max_abs_diff(align_side_by_side(r, r), Rot3::identity()) < 1e-12);

  // Phone turned 90 degrees about z relative to the watch.
  const Rot3 watch = rng.random_rotation();
  const Rot3 phone = Rot3::about_z(-pi / 2) * watch;
  const Rot3 a = align_side_by_side(phone, watch);
  CHECK(max_abs_diff(a, Rot3::about_z(pi / 2)) < 1e-12);
  CHECK(max_abs_diff(a * phone, watch) < 1e-9);

  for (int i = 0; i < 200; ++i) {
    const Rot3 p = rng.random_rotation();
    const Rot3 w = rng.random_rotation();
    CHECK(max_abs_diff(align_side_by_side(p, w) * p, w) < 1e-9);
  }
}

TEST_CASE("canonical orientations") {
  // Watch x along the arm away from the body (-x for the left arm), face up.
  const Rot3 w = canonical_tpose_watch();
  CHECK(std::abs(w.column(0).x + 1.0) < 1e-12);
  CHECK(std::abs(w.column(2).z - 1.0) < 1e-12);
  CHECK(max_abs_diff(canonical_phone_rest(), Rot3::identity()) == 0.0);
  // The ideal mounting reproduces the canonical reading in the T-pose.
  const ArmState t = forward_kinematics_full(ArmModel{}, tpose_angles());
  CHECK(max_abs_diff(t.forearm_rot * watch_on_forearm(), w) < 1e-12);
}

TEST_CASE("T-pose mounting rotations") {
  const Rot3 canon = canonical_tpose_watch();
  const MountRotations same = tpose_calibrate(canon, canonical_phone_rest(), canon);
  CHECK(max_abs_diff(same.watch_mount, Rot3::identity()) < 1e-12);
  CHECK(max_abs_diff(same.phone_mount, Rot3::identity()) < 1e-12);

  // Strap rotated 30 degrees about the forearm (device x) axis.
  const Rot3 observed = canon * Rot3::about_x(pi / 6);
  const MountRotations m = tpose_calibrate(observed, canonical_phone_rest(), canon);
  CHECK(std::abs(rotation_angle(m.watch_mount) - pi / 6) < 1e-9);
  CHECK(max_abs_diff(observed * m.watch_mount, canon) < 1e-9);

  const auto expect = oracle::matmul(
      oracle::transpose(oracle::matmul(oracle::rz(pi), oracle::rx(pi / 6))), oracle::rz(pi));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(m.watch_mount(i, j) - expect[i][j]) < 1e-12);
}

TEST_CASE("simulated subject: mounts invert the pocket placement") {
  const sim::SyntheticSubject s = sim::make_subject(3, 77);
  const sim::SessionRecording rec = sim::generate_session(s, sim::SensorNoiseConfig::zero(), 2.0, 4);
  const CalibrationState st = calibrate(rec.calibration);
  CHECK_NOTHROW(validate(st));
  CHECK(max_abs_diff(st.phone_mount, s.phone_mount_rot.transpose()) < 1e-6);
  CHECK(max_abs_diff(st.watch_mount, s.watch_mount_rot.transpose()) < 1e-6);
  CHECK(max_abs_diff(st.frame_align, Rot3::about_z(-s.phone_reference_yaw)) < 1e-6);
}

TEST_CASE("noise-free calibration recovers segment orientations for the whole session") {
  sim::SyntheticSubject s = sim::make_subject(6, 77);
  s.imu_yaw_drift_rate = 0.0;
  const sim::SessionRecording rec = sim::generate_session(s, sim::SensorNoiseConfig::zero(), 60.0, 9);
  const CalibrationState st = calibrate(rec.calibration);
  for (const sim::SessionFrame& f : rec.frames) {
    const CalibratedImu c = apply_calibration(st, f.watch_orient, f.watch_accel, f.phone_orient, f.phone_accel);
    // Ground truth: the forearm segment orientation carrying the ideally
    // mounted device, i.e. the raw reading with the true strap offset removed.
    const Rot3 truth = f.watch_orient * s.watch_mount_rot.transpose();
    REQUIRE(max_abs_diff(c.watch_orient, truth) < 1e-6);
    // Device x of the ideally mounted watch runs along the forearm, elbow to wrist.
    const Vec3 along = c.watch_orient * Vec3{1, 0, 0};
    const Vec3 gt = (f.gt_pose.wrist - f.gt_pose.elbow) / s.arm_model.forearm_len;
    REQUIRE(distance(along, gt) < 1e-6);
    REQUIRE(max_abs_diff(c.phone_orient, Rot3::identity()) < 1e-6);
  }
}

TEST_CASE("calibrate needs samples in every capture") {
  sim::CalibrationCapture cap;
  CHECK_THROWS_AS(calibrate(cap), InvalidInput);
  cap.side_by_side_phone.push_back(Rot3::identity());
  cap.side_by_side_watch.push_back(Rot3::identity());
  cap.tpose_phone.push_back(Rot3::identity());
  CHECK_THROWS_AS(calibrate(cap), InvalidInput);
  cap.tpose_watch.push_back(canonical_tpose_watch());
  const CalibrationState st = calibrate(cap);
  CHECK(max_abs_diff(st.watch_mount, Rot3::identity()) < 1e-12);
}

TEST_CASE("noisy calibration averages the capture") {
  const sim::SyntheticSubject s = sim::make_subject(2, 5);
  const sim::SessionRecording rec = sim::generate_session(s, {}, 2.0, 4);
  const CalibrationState st = calibrate(rec.calibration);
  // 25 samples at 1.5 degrees each: the averaged mount is well within a
  // degree of the truth.
  CHECK(rotation_angle(rot_relative(st.phone_mount, s.phone_mount_rot.transpose())) < 1.0 * pi / 180);
}

TEST_CASE("accelerations are rotated into the global frame") {
  CalibrationState st;
  st.frame_align = Rot3::about_z(0.4);
  st.watch_mount = Rot3::about_x(0.3);
  st.phone_mount = Rot3::about_y(0.2);
  const Rot3 rw = Rot3::about_y(1.0);
  const Rot3 rp = Rot3::about_x(-0.5);
  const CalibratedImu c = apply_calibration(st, rw, {1, 0, 0}, rp, {0, 1, 0});
  CHECK(max_abs_diff(c.watch_orient, rw * st.watch_mount) < 1e-15);
  CHECK(max_abs_diff(c.phone_orient, st.frame_align * rp * st.phone_mount) < 1e-15);
  CHECK(distance(c.watch_accel, rw * Vec3{1, 0, 0}) < 1e-15);
  CHECK(distance(c.phone_accel, st.frame_align * rp * Vec3{0, 1, 0}) < 1e-15);

  CalibrationState bad;
  bad.watch_mount(0, 0) = 2.0;
  CHECK_THROWS_AS(validate(bad), InvalidInput);
}
