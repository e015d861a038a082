#pragma once

// Synthetic recording sessions: arm motion between random terminal poses,
// watch/phone IMU streams, occlusion-corrupted 5 Hz UWB ranging and
// shoulder-frame ground truth.
//
// Accelerations are gravity-removed "user acceleration" in the device frame.
// Device orientations are reported in each device's own reference frame: the
// watch's reference coincides with the shoulder frame, the phone's is rotated
// by an unknown heading (removed by side-by-side alignment).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smartposer/kinematics.hpp"
#include "smartposer/math.hpp"
#include "smartposer/random.hpp"

namespace smartposer::sim {

inline constexpr double kImuRateHz = 25.0;
inline constexpr double kUwbRateHz = 5.0;
inline constexpr int kFramesPerUwbSample = 5;
inline constexpr int kCalibrationSamples = 25;

struct SyntheticSubject {
  std::string id;
  ArmModel arm_model;
  Rot3 phone_mount_rot;          // pocket placement, phone device -> body
  Rot3 watch_mount_rot;          // strap misalignment, right-multiplied
  double imu_yaw_drift_rate = 0.0;  // rad/s, watch reference heading drift
  double phone_reference_yaw = 0.0;  // phone reference heading vs. watch reference
  Vec3 watch_offset{};           // forearm frame
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct SensorNoiseConfig {
  double imu_orient_noise_deg = 1.5;
  double imu_accel_noise = 0.05;
  double uwb_los_noise = 0.03;
  double uwb_nlos_bias_mean = 0.30;
  double uwb_nlos_bias_sigma = 0.10;
  double uwb_ar1_coeff = 0.95;
  double phone_sway_deg = 1.0;

  static SensorNoiseConfig zero();
  void validate() const;
  bool is_zero() const;
};

struct TorsoCapsule {
  Vec3 top{0.20, -0.02, 0.0};
  Vec3 bottom{0.20, -0.02, -0.55};
  double radius = 0.15;
};

struct SessionFrame {
  double timestamp = 0.0;
  Rot3 watch_orient;
  Vec3 watch_accel;
  Rot3 phone_orient;
  Vec3 phone_accel;
  double uwb_raw = 0.0;
  double uwb_true = 0.0;
  ArmPose gt_pose;
};

// Raw device orientations captured during the two calibration steps.
struct CalibrationCapture {
  std::vector<Rot3> side_by_side_phone;
  std::vector<Rot3> side_by_side_watch;
  std::vector<Rot3> tpose_phone;
  std::vector<Rot3> tpose_watch;
};

struct SessionRecording {
  SyntheticSubject subject;
  SensorNoiseConfig noise;
  std::uint64_t seed = 0;
  double imu_rate = kImuRateHz;
  double uwb_rate = kUwbRateHz;
  std::vector<SessionFrame> frames;
  CalibrationCapture calibration;
  // Per-frame line-of-sight state of the UWB sample being held. Diagnostic
  // only; not persisted in session files.
  std::vector<std::uint8_t> nlos;
  // False for recordings loaded without the uwb_true/gt_* channels.
  bool has_ground_truth = true;

  // Throws InvalidInput if timestamps are not spaced 1/25 s or uwb_raw < 0.
  void validate() const;
};

struct ImuSample {
  Rot3 orient;
  Vec3 accel;
};

// 10 t^3 - 15 t^4 + 6 t^5. Throws InvalidInput outside [0, 1].
double minimum_jerk(double tau);

// Random anthropometry and device placement for subject `index`.
SyntheticSubject make_subject(std::size_t index, std::uint64_t seed);

// Trajectory of arm states at 25 Hz starting at `t0`, at least 3 frames.
// Accelerations are central second differences of wrist position, endpoint
// frames reuse their neighbour's value.
std::vector<ImuSample> synth_watch_imu(std::span<const ArmState> trajectory, double t0,
                                       const SyntheticSubject& subject,
                                       const SensorNoiseConfig& noise, Rng& rng);

// Raw ranging from true distances and per-sample occlusion. NLOS bias follows
// an AR(1) process with the configured stationary mean and sigma.
std::vector<double> synth_uwb(std::span<const double> true_distance,
                              std::span<const std::uint8_t> occluded,
                              const SensorNoiseConfig& noise, std::uint64_t seed);

// Closest distance between segments [p0, p1] and [q0, q1].
double segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1);

// True iff the watch-phone segment comes within the capsule radius
// (boundary inclusive).
bool occlusion_test(const Vec3& watch_pos, const Vec3& phone_pos, const TorsoCapsule& torso);

SessionRecording generate_session(const SyntheticSubject& subject, const SensorNoiseConfig& noise,
                                  double duration_s, std::uint64_t seed,
                                  const TorsoCapsule& torso = {});

}  // namespace smartposer::sim
