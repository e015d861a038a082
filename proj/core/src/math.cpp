#include "smartposer/math.hpp"

#include <algorithm>

#include "smartposer/error.hpp"

namespace smartposer {

UnitQuaternion UnitQuaternion::from_wxyz(double w, double x, double y, double z) {
  if (!std::isfinite(w) || !std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
    throw InvalidInput("quaternion has non-finite components");
  }
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (n == 0.0) {
    throw InvalidInput("quaternion has zero norm");
  }
  return {w / n, x / n, y / n, z / n};
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!std::isfinite(n) || n == 0.0 || !std::isfinite(angle)) {
    throw InvalidInput("axis-angle requires a finite non-zero axis");
  }
  const double s = std::sin(0.5 * angle) / n;
  return from_wxyz(std::cos(0.5 * angle), axis.x * s, axis.y * s, axis.z * s);
}

UnitQuaternion UnitQuaternion::conjugate() const { return {w_, -x_, -y_, -z_}; }

UnitQuaternion UnitQuaternion::operator*(const UnitQuaternion& o) const {
  return from_wxyz(w_ * o.w_ - x_ * o.x_ - y_ * o.y_ - z_ * o.z_,
                   w_ * o.x_ + x_ * o.w_ + y_ * o.z_ - z_ * o.y_,
                   w_ * o.y_ - x_ * o.z_ + y_ * o.w_ + z_ * o.x_,
                   w_ * o.z_ + x_ * o.y_ - y_ * o.x_ + z_ * o.w_);
}

Rot3 Rot3::about_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{1, 0, 0, 0, c, -s, 0, s, c}};
}

Rot3 Rot3::about_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{c, 0, s, 0, 1, 0, -s, 0, c}};
}

Rot3 Rot3::about_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{c, -s, 0, s, c, 0, 0, 0, 1}};
}

Rot3 Rot3::from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
  return {{c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z}};
}

Rot3 Rot3::transpose() const {
  return {{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
}

Rot3 Rot3::operator*(const Rot3& o) const {
  Rot3 r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      r(i, j) = (*this)(i, 0) * o(0, j) + (*this)(i, 1) * o(1, j) + (*this)(i, 2) * o(2, j);
    }
  }
  return r;
}

Vec3 Rot3::operator*(const Vec3& v) const {
  return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
          m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

bool is_rotation(const Rot3& r, double tol) {
  for (double v : r.m) {
    if (!std::isfinite(v)) return false;
  }
  const Rot3 rtr = r.transpose() * r;
  if (max_abs_diff(rtr, Rot3::identity()) > tol) return false;
  const double det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                     r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                     r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
  return std::abs(det - 1.0) <= tol;
}

double max_abs_diff(const Rot3& a, const Rot3& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < 9; ++i) d = std::max(d, std::abs(a.m[i] - b.m[i]));
  return d;
}

Rot3 quat_to_rot(const UnitQuaternion& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  if (!std::isfinite(w) || !std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
    throw InvalidInput("quat_to_rot: non-finite quaternion");
  }
  return {{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
           2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
           2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
}

UnitQuaternion rot_to_quat(const Rot3& r) {
  // Shepperd's method: branch on the largest diagonal term for stability.
  const double trace = r(0, 0) + r(1, 1) + r(2, 2);
  double w, x, y, z;
  if (trace > 0.0) {
    const double s = 2.0 * std::sqrt(1.0 + trace);
    w = 0.25 * s;
    x = (r(2, 1) - r(1, 2)) / s;
    y = (r(0, 2) - r(2, 0)) / s;
    z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    w = (r(2, 1) - r(1, 2)) / s;
    x = 0.25 * s;
    y = (r(0, 1) + r(1, 0)) / s;
    z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    w = (r(0, 2) - r(2, 0)) / s;
    x = (r(0, 1) + r(1, 0)) / s;
    y = 0.25 * s;
    z = (r(1, 2) + r(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    w = (r(1, 0) - r(0, 1)) / s;
    x = (r(0, 2) + r(2, 0)) / s;
    y = (r(1, 2) + r(2, 1)) / s;
    z = 0.25 * s;
  }
  if (w < 0.0) {
    w = -w;
    x = -x;
    y = -y;
    z = -z;
  }
  return UnitQuaternion::from_wxyz(w, x, y, z);
}

Rot3 rot_relative(const Rot3& reference, const Rot3& target) {
  return reference.transpose() * target;
}

Vec3 rotate_vec(const Rot3& r, const Vec3& v) { return r * v; }

Rot3 rot_from_rotvec(const Vec3& omega) {
  const double angle = omega.norm();
  if (angle < 1e-12) {
    // First-order expansion; re-orthonormalize through the quaternion path.
    return quat_to_rot(UnitQuaternion::from_wxyz(1.0, 0.5 * omega.x, 0.5 * omega.y, 0.5 * omega.z));
  }
  return quat_to_rot(UnitQuaternion::from_axis_angle(omega, angle));
}

double rotation_angle(const Rot3& r) {
  const double c = std::clamp(0.5 * (r(0, 0) + r(1, 1) + r(2, 2) - 1.0), -1.0, 1.0);
  return std::acos(c);
}

Rot3 mean_rotation(std::span<const Rot3> rotations) {
  if (rotations.empty()) {
    throw InvalidInput("mean_rotation: empty input");
  }
  const UnitQuaternion first = rot_to_quat(rotations.front());
  double w = 0, x = 0, y = 0, z = 0;
  for (const Rot3& r : rotations) {
    const UnitQuaternion q = rot_to_quat(r);
    const double sign =
        (q.w() * first.w() + q.x() * first.x() + q.y() * first.y() + q.z() * first.z()) < 0.0 ? -1.0 : 1.0;
    w += sign * q.w();
    x += sign * q.x();
    y += sign * q.y();
    z += sign * q.z();
  }
  return quat_to_rot(UnitQuaternion::from_wxyz(w, x, y, z));
}

}  // namespace smartposer
