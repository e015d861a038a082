#pragma once

// Left-arm model in the shoulder-anchored frame.
//
// Frame: origin at the tracked (left) shoulder, x = rightward, y = forward,
// z = up. In the reference posture the arm hangs straight down (-z) and both
// segment frames equal the shoulder frame.
//
// Chain: shoulder_rot (3 DOF) -> elbow flexion about the upper-arm x axis ->
// forearm pronation about the forearm long axis.

#include <array>
#include <span>

#include "smartposer/math.hpp"

namespace smartposer {

inline constexpr double kMaxElbowFlexion = 2.6;
inline constexpr double kMaxPronation = 1.5707963267948966;

struct ArmModel {
  double upper_arm_len = 0.30;
  double forearm_len = 0.26;
  double arm_span = 1.70;
  Vec3 shoulder_origin{};
  // Left front pocket.
  Vec3 phone_anchor{0.10, 0.05, -0.75};

  // Throws InvalidInput when a length is non-positive or the span is shorter
  // than the arm itself.
  void validate() const;
};

struct JointAngles {
  Rot3 shoulder_rot = Rot3::identity();
  double elbow_flexion = 0.0;      // [0, kMaxElbowFlexion]
  double forearm_pronation = 0.0;  // [-kMaxPronation, kMaxPronation]

  void validate() const;
};

struct ArmPose {
  Vec3 shoulder;
  Vec3 elbow;
  Vec3 wrist;
};

// FK output including segment orientations (segment frame -> shoulder frame).
struct ArmState {
  ArmPose pose;
  Rot3 upper_arm_rot;
  Rot3 forearm_rot;
};

using PoseVector = std::array<double, 9>;

ArmPose forward_kinematics(const ArmModel& model, const JointAngles& angles);
ArmState forward_kinematics_full(const ArmModel& model, const JointAngles& angles);

// Swing-twist shoulder parameterization used by the simulator:
// Rz(azimuth) * Rx(elevation) * Rz(twist). Elevation lifts the arm forward
// from hanging; azimuth = +pi/2 swings it out to the left side.
Rot3 shoulder_rotation(double azimuth, double elevation, double twist);

// Arm horizontal, pointing left (-x), palm down.
JointAngles tpose_angles();

// Fixed mounting of an ideally worn watch on the forearm segment: device x
// along the forearm pointing to the hand, device z out of the watch face.
Rot3 watch_on_forearm();

// [shoulder, elbow, wrist] flattened and divided by arm_span.
PoseVector normalize_pose(const ArmPose& pose, double arm_span);
ArmPose denormalize_pose(std::span<const double, 9> normalized, double arm_span);

// Watch position: wrist plus an offset given in the forearm segment frame.
Vec3 watch_position(const ArmPose& pose, const Rot3& forearm_rot, const Vec3& watch_offset);

// Distance between the worn watch and the pocketed phone.
double device_distance(const ArmPose& pose, const Rot3& forearm_rot, const Vec3& watch_offset,
                       const ArmModel& model);

}  // namespace smartposer
