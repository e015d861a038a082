#include "smartposer/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "smartposer/error.hpp"
#include "smartposer/pipeline.hpp"

namespace smartposer::sim {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kFrameDt = 1.0 / kImuRateHz;

// Streams for derive_seed so that each noise source is independent of how
// many draws the others make.
enum Stream : std::uint64_t {
  kTrajectoryStream = 1,
  kWatchImuStream = 2,
  kPhoneImuStream = 3,
  kUwbStream = 4,
  kCalibrationStream = 5,
};

// Per-joint-angle state interpolated by the trajectory generator.
struct AngleKeyframe {
  double azimuth = 0.0;
  double elevation = 0.0;
  double twist = 0.0;
  double flexion = 0.0;
  double pronation = 0.0;
};

AngleKeyframe sample_keyframe(Rng& rng) {
  AngleKeyframe k;
  k.azimuth = rng.uniform(-std::numbers::pi / 3.0, std::numbers::pi);
  k.elevation = rng.uniform(0.0, 2.8);
  k.twist = rng.uniform(-std::numbers::pi / 2.0, std::numbers::pi / 2.0);
  k.flexion = rng.uniform(0.0, kMaxElbowFlexion);
  k.pronation = rng.uniform(-kMaxPronation, kMaxPronation);
  return k;
}

AngleKeyframe lerp(const AngleKeyframe& a, const AngleKeyframe& b, double s) {
  return {a.azimuth + (b.azimuth - a.azimuth) * s, a.elevation + (b.elevation - a.elevation) * s,
          a.twist + (b.twist - a.twist) * s, a.flexion + (b.flexion - a.flexion) * s,
          a.pronation + (b.pronation - a.pronation) * s};
}

JointAngles to_joint_angles(const AngleKeyframe& k) {
  JointAngles a;
  a.shoulder_rot = shoulder_rotation(k.azimuth, k.elevation, k.twist);
  a.elbow_flexion = std::clamp(k.flexion, 0.0, kMaxElbowFlexion);
  a.forearm_pronation = std::clamp(k.pronation, -kMaxPronation, kMaxPronation);
  return a;
}

// Joint angles at `count` frames spaced kFrameDt starting at t0, moving
// between random terminal poses with 1-3 s minimum-jerk transitions.
std::vector<JointAngles> sample_trajectory(std::size_t count, double t0, Rng& rng) {
  std::vector<JointAngles> out;
  out.reserve(count);
  AngleKeyframe from = sample_keyframe(rng);
  AngleKeyframe to = sample_keyframe(rng);
  double seg_start = t0;
  double seg_len = rng.uniform(1.0, 3.0);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = t0 + static_cast<double>(k) * kFrameDt;
    while (t > seg_start + seg_len) {
      seg_start += seg_len;
      seg_len = rng.uniform(1.0, 3.0);
      from = to;
      to = sample_keyframe(rng);
    }
    const double tau = std::clamp((t - seg_start) / seg_len, 0.0, 1.0);
    out.push_back(to_joint_angles(lerp(from, to, minimum_jerk(tau))));
  }
  return out;
}

Rot3 orientation_noise(Rng& rng, double sigma_deg) {
  if (sigma_deg == 0.0) return Rot3::identity();
  return rot_from_rotvec(rng.normal_vec3(sigma_deg * kDegToRad));
}

}  // namespace

void SyntheticSubject::validate() const {
  arm_model.validate();
  if (!(imu_yaw_drift_rate >= 0.0)) throw InvalidInput("SyntheticSubject: negative drift rate");
  if (!is_rotation(phone_mount_rot, 1e-6) || !is_rotation(watch_mount_rot, 1e-6)) {
    throw InvalidInput("SyntheticSubject: mount is not a rotation");
  }
}

SensorNoiseConfig SensorNoiseConfig::zero() {
  SensorNoiseConfig z;
  z.imu_orient_noise_deg = 0.0;
  z.imu_accel_noise = 0.0;
  z.uwb_los_noise = 0.0;
  z.uwb_nlos_bias_mean = 0.0;
  z.uwb_nlos_bias_sigma = 0.0;
  z.uwb_ar1_coeff = 0.0;
  z.phone_sway_deg = 0.0;
  return z;
}

void SensorNoiseConfig::validate() const {
  const double sigmas[] = {imu_orient_noise_deg, imu_accel_noise, uwb_los_noise,
                           uwb_nlos_bias_sigma, phone_sway_deg};
  for (double s : sigmas) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidInput("SensorNoiseConfig: sigma must be >= 0");
  }
  if (!std::isfinite(uwb_nlos_bias_mean)) throw InvalidInput("SensorNoiseConfig: non-finite bias mean");
  if (!(uwb_ar1_coeff >= 0.0 && uwb_ar1_coeff < 1.0)) {
    throw InvalidInput("SensorNoiseConfig: uwb_ar1_coeff must be in [0, 1)");
  }
}

bool SensorNoiseConfig::is_zero() const {
  return imu_orient_noise_deg == 0.0 && imu_accel_noise == 0.0 && uwb_los_noise == 0.0 &&
         uwb_nlos_bias_mean == 0.0 && uwb_nlos_bias_sigma == 0.0 && phone_sway_deg == 0.0;
}

void SessionRecording::validate() const {
  const double dt = 1.0 / imu_rate;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!(frames[i].uwb_raw >= 0.0)) throw InvalidInput("SessionRecording: negative uwb_raw");
    if (i > 0 && std::abs(frames[i].timestamp - frames[i - 1].timestamp - dt) > 1e-9) {
      throw InvalidInput("SessionRecording: frame spacing is not 1/25 s at frame " + std::to_string(i));
    }
  }
}

double minimum_jerk(double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("minimum_jerk: tau outside [0, 1]");
  const double t3 = tau * tau * tau;
  return t3 * (10.0 + tau * (-15.0 + 6.0 * tau));
}

SyntheticSubject make_subject(std::size_t index, std::uint64_t seed) {
  Rng rng(derive_seed(seed, index), 0);
  SyntheticSubject s;
  s.id = "S" + std::string(index < 10 ? "0" : "") + std::to_string(index);
  s.arm_model.upper_arm_len = rng.uniform(0.27, 0.33);
  s.arm_model.forearm_len = rng.uniform(0.23, 0.29);
  s.arm_model.arm_span = (s.arm_model.upper_arm_len + s.arm_model.forearm_len) * rng.uniform(2.95, 3.12);
  const double body_scale = s.arm_model.arm_span / ArmModel{}.arm_span;
  s.arm_model.phone_anchor = ArmModel{}.phone_anchor * body_scale + Vec3{rng.uniform(-0.02, 0.02),
                                                                         rng.uniform(-0.02, 0.02),
                                                                         rng.uniform(-0.02, 0.02)};
  s.phone_mount_rot = rng.random_rotation();
  s.watch_mount_rot = Rot3::about_x(rng.uniform(-10.0, 10.0) * kDegToRad) *
                      Rot3::about_y(rng.uniform(-3.0, 3.0) * kDegToRad);
  s.imu_yaw_drift_rate = rng.uniform(0.0, 1.0) * kDegToRad / 60.0;
  s.phone_reference_yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
  s.rng_seed = rng.next_u64();
  return s;
}

std::vector<ImuSample> synth_watch_imu(std::span<const ArmState> trajectory, double t0,
                                       const SyntheticSubject& subject,
                                       const SensorNoiseConfig& noise, Rng& rng) {
  const std::size_t n = trajectory.size();
  if (n < 3) throw InvalidInput("synth_watch_imu: need at least 3 trajectory frames");

  std::vector<Vec3> accel_world(n);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    accel_world[k] = (trajectory[k + 1].pose.wrist - trajectory[k].pose.wrist * 2.0 +
                      trajectory[k - 1].pose.wrist) /
                     (kFrameDt * kFrameDt);
  }
  accel_world.front() = accel_world[1];
  accel_world.back() = accel_world[n - 2];

  const Rot3 mount = watch_on_forearm() * subject.watch_mount_rot;
  std::vector<ImuSample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + static_cast<double>(k) * kFrameDt;
    const Rot3 device = trajectory[k].forearm_rot * mount;
    ImuSample s;
    s.accel = device.transpose() * accel_world[k];
    if (noise.imu_accel_noise > 0.0) s.accel += rng.normal_vec3(noise.imu_accel_noise);
    s.orient = Rot3::about_z(subject.imu_yaw_drift_rate * t) * device *
               orientation_noise(rng, noise.imu_orient_noise_deg);
    out.push_back(s);
  }
  return out;
}

std::vector<double> synth_uwb(std::span<const double> true_distance,
                              std::span<const std::uint8_t> occluded,
                              const SensorNoiseConfig& noise, std::uint64_t seed) {
  if (true_distance.size() != occluded.size()) {
    throw InvalidInput("synth_uwb: distance and occlusion sequences differ in length");
  }
  Rng rng(seed, kUwbStream);
  const double a = noise.uwb_ar1_coeff;
  const double innovation = std::sqrt(1.0 - a * a) * noise.uwb_nlos_bias_sigma;
  std::vector<double> out(true_distance.size());
  double bias = noise.uwb_nlos_bias_mean + noise.uwb_nlos_bias_sigma * rng.normal();
  for (std::size_t i = 0; i < true_distance.size(); ++i) {
    if (i > 0) bias = a * bias + (1.0 - a) * noise.uwb_nlos_bias_mean + innovation * rng.normal();
    const double los_noise = noise.uwb_los_noise * rng.normal();
    const double d = true_distance[i] + (occluded[i] ? bias : 0.0) + los_noise;
    out[i] = std::max(0.0, d);
  }
  return out;
}

double segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1) {
  // Closest points of two segments (Ericson, Real-Time Collision Detection 5.1.9).
  const Vec3 d1 = p1 - p0;
  const Vec3 d2 = q1 - q0;
  const Vec3 r = p0 - q0;
  const double a = dot(d1, d1);
  const double e = dot(d2, d2);
  const double f = dot(d2, r);
  constexpr double kEps = 1e-15;
  double s = 0.0, t = 0.0;
  if (a <= kEps && e <= kEps) return distance(p0, q0);
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = dot(d1, r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = dot(d1, d2);
      const double denom = a * e - b * b;
      s = denom > kEps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return distance(p0 + d1 * s, q0 + d2 * t);
}

bool occlusion_test(const Vec3& watch_pos, const Vec3& phone_pos, const TorsoCapsule& torso) {
  return segment_distance(watch_pos, phone_pos, torso.top, torso.bottom) <= torso.radius;
}

SessionRecording generate_session(const SyntheticSubject& subject, const SensorNoiseConfig& noise,
                                  double duration_s, std::uint64_t seed, const TorsoCapsule& torso) {
  if (!(duration_s > 0.0)) throw InvalidInput("generate_session: duration must be positive");
  subject.validate();
  noise.validate();

  const auto n = static_cast<std::size_t>(std::llround(duration_s * kImuRateHz));
  SessionRecording rec;
  rec.subject = subject;
  rec.noise = noise;
  rec.seed = seed;

  // One padding frame on each side so every output frame has a central
  // acceleration difference.
  Rng traj_rng(seed, kTrajectoryStream);
  const std::vector<JointAngles> angles = sample_trajectory(n + 2, -kFrameDt, traj_rng);
  std::vector<ArmState> states;
  states.reserve(angles.size());
  for (const JointAngles& a : angles) states.push_back(forward_kinematics_full(subject.arm_model, a));

  Rng watch_rng(seed, kWatchImuStream);
  const std::vector<ImuSample> watch = synth_watch_imu(states, -kFrameDt, subject, noise, watch_rng);

  const Rot3 phone_reference = Rot3::about_z(subject.phone_reference_yaw);
  Rng phone_rng(seed, kPhoneImuStream);
  Vec3 sway{};
  const double sway_ar = 0.98;
  const double sway_innov = std::sqrt(1.0 - sway_ar * sway_ar) * noise.phone_sway_deg * kDegToRad;

  std::vector<double> frame_times(n);
  std::vector<double> true_distance(n);
  std::vector<Vec3> watch_pos(n);
  rec.frames.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const ArmState& st = states[k + 1];
    SessionFrame& f = rec.frames[k];
    f.timestamp = static_cast<double>(k) / kImuRateHz;
    frame_times[k] = f.timestamp;
    f.watch_orient = watch[k + 1].orient;
    f.watch_accel = watch[k + 1].accel;

    sway = sway * sway_ar + phone_rng.normal_vec3(sway_innov);
    f.phone_orient = phone_reference * rot_from_rotvec(sway) * subject.phone_mount_rot *
                     orientation_noise(phone_rng, noise.imu_orient_noise_deg);
    f.phone_accel = noise.imu_accel_noise > 0.0 ? phone_rng.normal_vec3(noise.imu_accel_noise) : Vec3{};

    f.gt_pose = st.pose;
    watch_pos[k] = watch_position(st.pose, st.forearm_rot, subject.watch_offset);
    true_distance[k] = distance(watch_pos[k], subject.arm_model.phone_anchor);
  }

  // 5 Hz ranging, held onto the 25 Hz frames.
  std::vector<double> event_truth;
  std::vector<std::uint8_t> event_nlos;
  std::vector<double> event_times;
  for (std::size_t k = 0; k < n; k += kFramesPerUwbSample) {
    event_truth.push_back(true_distance[k]);
    event_nlos.push_back(occlusion_test(watch_pos[k], subject.arm_model.phone_anchor, torso) ? 1 : 0);
    event_times.push_back(frame_times[k]);
  }
  const std::vector<double> ranged = synth_uwb(event_truth, event_nlos, noise, seed);
  std::vector<pipeline::UwbEvent> events(ranged.size());
  for (std::size_t i = 0; i < ranged.size(); ++i) events[i] = {event_times[i], ranged[i]};
  const std::vector<double> held = pipeline::hold_upsample_uwb(events, frame_times);
  // uwb_true is the true range of the sample being held, so it is the
  // error-free counterpart of uwb_raw frame by frame.
  for (std::size_t i = 0; i < ranged.size(); ++i) events[i].meters = event_truth[i];
  const std::vector<double> held_truth = pipeline::hold_upsample_uwb(events, frame_times);
  rec.nlos.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    rec.frames[k].uwb_raw = held[k];
    rec.frames[k].uwb_true = held_truth[k];
    rec.nlos[k] = event_nlos[k / kFramesPerUwbSample];
  }

  // Calibration captures: devices side by side on a table, then a T-pose.
  Rng cal_rng(seed, kCalibrationStream);
  const Rot3 table = Rot3::about_z(cal_rng.uniform(-std::numbers::pi, std::numbers::pi));
  const ArmState tpose = forward_kinematics_full(subject.arm_model, tpose_angles());
  const Rot3 watch_device_tpose = tpose.forearm_rot * watch_on_forearm() * subject.watch_mount_rot;
  auto& cal = rec.calibration;
  for (int i = 0; i < kCalibrationSamples; ++i) {
    cal.side_by_side_watch.push_back(table * orientation_noise(cal_rng, noise.imu_orient_noise_deg));
    cal.side_by_side_phone.push_back(phone_reference * table *
                                     orientation_noise(cal_rng, noise.imu_orient_noise_deg));
    cal.tpose_watch.push_back(watch_device_tpose * orientation_noise(cal_rng, noise.imu_orient_noise_deg));
    cal.tpose_phone.push_back(phone_reference * subject.phone_mount_rot *
                              orientation_noise(cal_rng, noise.imu_orient_noise_deg));
  }
  return rec;
}

}  // namespace smartposer::sim
