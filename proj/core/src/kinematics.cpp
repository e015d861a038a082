#include "smartposer/kinematics.hpp"

#include <cmath>
#include <numbers>

#include "smartposer/error.hpp"

namespace smartposer {

void ArmModel::validate() const {
  if (!(upper_arm_len > 0.0) || !(forearm_len > 0.0) || !(arm_span > 0.0)) {
    throw InvalidInput("ArmModel: lengths must be positive");
  }
  if (arm_span < upper_arm_len + forearm_len) {
    throw InvalidInput("ArmModel: arm_span shorter than upper arm + forearm");
  }
  if (!shoulder_origin.is_finite() || !phone_anchor.is_finite()) {
    throw InvalidInput("ArmModel: non-finite anchor");
  }
}

void JointAngles::validate() const {
  if (!is_rotation(shoulder_rot, 1e-6)) {
    throw InvalidInput("JointAngles: shoulder_rot is not a rotation");
  }
  if (!(elbow_flexion >= 0.0 && elbow_flexion <= kMaxElbowFlexion)) {
    throw InvalidInput("JointAngles: elbow_flexion out of [0, 2.6]");
  }
  if (!(std::abs(forearm_pronation) <= kMaxPronation)) {
    throw InvalidInput("JointAngles: forearm_pronation out of [-pi/2, pi/2]");
  }
}

ArmState forward_kinematics_full(const ArmModel& model, const JointAngles& angles) {
  const Vec3 down{0.0, 0.0, -1.0};
  ArmState s;
  s.upper_arm_rot = angles.shoulder_rot;
  s.forearm_rot = angles.shoulder_rot * Rot3::about_x(angles.elbow_flexion) *
                  Rot3::about_z(angles.forearm_pronation);
  s.pose.shoulder = model.shoulder_origin;
  s.pose.elbow = s.pose.shoulder + s.upper_arm_rot * (down * model.upper_arm_len);
  s.pose.wrist = s.pose.elbow + s.forearm_rot * (down * model.forearm_len);
  return s;
}

ArmPose forward_kinematics(const ArmModel& model, const JointAngles& angles) {
  return forward_kinematics_full(model, angles).pose;
}

Rot3 shoulder_rotation(double azimuth, double elevation, double twist) {
  return Rot3::about_z(azimuth) * Rot3::about_x(elevation) * Rot3::about_z(twist);
}

JointAngles tpose_angles() {
  JointAngles a;
  a.shoulder_rot = Rot3::about_y(std::numbers::pi / 2.0);
  return a;
}

Rot3 watch_on_forearm() {
  // In the T-pose the forearm frame is Ry(pi/2) and the watch must read
  // Rz(pi): x pointing left along the arm, face up.
  return Rot3::about_y(std::numbers::pi / 2.0).transpose() * Rot3::about_z(std::numbers::pi);
}

PoseVector normalize_pose(const ArmPose& pose, double arm_span) {
  if (!(arm_span > 0.0)) {
    throw InvalidInput("normalize_pose: arm_span must be positive");
  }
  const Vec3 s = pose.shoulder / arm_span;
  const Vec3 e = pose.elbow / arm_span;
  const Vec3 w = pose.wrist / arm_span;
  return {s.x, s.y, s.z, e.x, e.y, e.z, w.x, w.y, w.z};
}

ArmPose denormalize_pose(std::span<const double, 9> n, double arm_span) {
  if (!(arm_span > 0.0)) {
    throw InvalidInput("denormalize_pose: arm_span must be positive");
  }
  return {Vec3{n[0], n[1], n[2]} * arm_span, Vec3{n[3], n[4], n[5]} * arm_span,
          Vec3{n[6], n[7], n[8]} * arm_span};
}

Vec3 watch_position(const ArmPose& pose, const Rot3& forearm_rot, const Vec3& watch_offset) {
  return pose.wrist + forearm_rot * watch_offset;
}

double device_distance(const ArmPose& pose, const Rot3& forearm_rot, const Vec3& watch_offset,
                       const ArmModel& model) {
  return distance(watch_position(pose, forearm_rot, watch_offset), model.phone_anchor);
}

}  // namespace smartposer
