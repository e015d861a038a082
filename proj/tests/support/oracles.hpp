#pragma once

// Small reference implementations used as test oracles. They deliberately
// avoid the library so that a shared bug cannot hide on both sides.

#include <array>
#include <cmath>
#include <numbers>

namespace oracle {

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Mat3 transpose(const Mat3& a) {
  Mat3 t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = a[j][i];
  return t;
}

inline Mat3 rx(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
}
inline Mat3 ry(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
}
inline Mat3 rz(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

// Textbook Hamilton quaternion to matrix formula.
inline Mat3 quat_matrix(double w, double x, double y, double z) {
  return Mat3{{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
               {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
               {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

inline std::array<double, 3> apply(const Mat3& m, std::array<double, 3> v) {
  std::array<double, 3> r{};
  for (int i = 0; i < 3; ++i) r[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
  return r;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace oracle
