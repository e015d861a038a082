#pragma once

// Rotation, quaternion and small-vector primitives.
//
// Conventions used throughout the project:
//   * Rot3 is stored row-major and acts on column vectors: y = R * x.
//   * Quaternions are Hamilton, scalar first (w, x, y, z).
//   * A device orientation R maps device-frame vectors into its reference
//     frame, so a device-frame vector v is R * v in the reference frame.

#include <array>
#include <cmath>
#include <span>

namespace smartposer {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  bool is_finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

// Unit quaternion. Every construction path normalizes, so the norm is within
// rounding of 1.
class UnitQuaternion {
 public:
  UnitQuaternion() = default;

  // Throws InvalidInput on non-finite or zero-norm input.
  static UnitQuaternion from_wxyz(double w, double x, double y, double z);
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle);

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }
  double norm() const { return std::sqrt(w_ * w_ + x_ * x_ + y_ * y_ + z_ * z_); }

  UnitQuaternion conjugate() const;
  UnitQuaternion operator*(const UnitQuaternion& o) const;

 private:
  UnitQuaternion(double w, double x, double y, double z) : w_(w), x_(x), y_(y), z_(z) {}

  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

// 3x3 rotation matrix, row-major.
struct Rot3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Rot3 identity() { return {}; }
  static Rot3 about_x(double angle);
  static Rot3 about_y(double angle);
  static Rot3 about_z(double angle);
  static Rot3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2);

  double operator()(int row, int col) const { return m[static_cast<std::size_t>(row * 3 + col)]; }
  double& operator()(int row, int col) { return m[static_cast<std::size_t>(row * 3 + col)]; }

  Vec3 column(int c) const { return {(*this)(0, c), (*this)(1, c), (*this)(2, c)}; }
  Rot3 transpose() const;
  Rot3 operator*(const Rot3& o) const;
  Vec3 operator*(const Vec3& v) const;
  bool operator==(const Rot3&) const = default;

  std::span<const double, 9> flat() const { return std::span<const double, 9>(m); }
};

// True when R^T R = I and det(R) = +1 within `tol`, with finite entries.
bool is_rotation(const Rot3& r, double tol = 1e-9);

// Largest absolute elementwise difference.
double max_abs_diff(const Rot3& a, const Rot3& b);

Rot3 quat_to_rot(const UnitQuaternion& q);
UnitQuaternion rot_to_quat(const Rot3& r);

// reference^T * target: the orientation of `target` expressed in the frame of
// `reference`. reference * rot_relative(reference, target) == target.
Rot3 rot_relative(const Rot3& reference, const Rot3& target);

Vec3 rotate_vec(const Rot3& r, const Vec3& v);

// Exponential map of a rotation vector (axis * angle).
Rot3 rot_from_rotvec(const Vec3& omega);

// Rotation angle in [0, pi].
double rotation_angle(const Rot3& r);

// Chordal mean via sign-aligned quaternion averaging. Throws InvalidInput on
// an empty input.
Rot3 mean_rotation(std::span<const Rot3> rotations);

}  // namespace smartposer
