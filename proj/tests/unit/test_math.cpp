#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "smartposer/error.hpp"
#include "smartposer/math.hpp"
#include "smartposer/random.hpp"

using namespace smartposer;
using std::numbers::pi;

namespace {

oracle::Mat3 to_mat(const Rot3& r) {
  oracle::Mat3 m{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[i][j] = r(i, j);
  return m;
}

double mat_diff(const Rot3& r, const oracle::Mat3& m) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d = std::max(d, std::abs(r(i, j) - m[i][j]));
  return d;
}

}  // namespace

TEST_CASE("quat_to_rot identity and half turn") {
  CHECK(max_abs_diff(quat_to_rot(UnitQuaternion::from_wxyz(1, 0, 0, 0)), Rot3::identity()) == 0.0);
  const Rot3 half = quat_to_rot(UnitQuaternion::from_wxyz(0, 0, 0, 1));
  CHECK(mat_diff(half, oracle::Mat3{{{-1, 0, 0}, {0, -1, 0}, {0, 0, 1}}}) < 1e-15);
}

TEST_CASE("quat_to_rot quarter turn about z matches closed form") {
  const double c = std::cos(pi / 4), s = std::sin(pi / 4);
  const Rot3 r = quat_to_rot(UnitQuaternion::from_wxyz(c, 0, 0, s));
  CHECK(mat_diff(r, oracle::quat_matrix(c, 0, 0, s)) < 1e-12);
  CHECK(mat_diff(r, oracle::rz(pi / 2)) < 1e-12);
  // Columns are the images of the basis vectors.
  CHECK(std::abs(r.column(0).y - 1.0) < 1e-12);
  CHECK(std::abs(r.column(1).x + 1.0) < 1e-12);
}

TEST_CASE("quat_to_rot rejects non-finite and zero quaternions") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(UnitQuaternion::from_wxyz(nan, 0, 0, 0), InvalidInput);
  CHECK_THROWS_AS(UnitQuaternion::from_wxyz(0, std::numeric_limits<double>::infinity(), 0, 0), InvalidInput);
  CHECK_THROWS_AS(UnitQuaternion::from_wxyz(0, 0, 0, 0), InvalidInput);
}

TEST_CASE("quaternions are normalized on construction") {
  const auto q = UnitQuaternion::from_wxyz(3, 4, 0, 12);
  CHECK(std::abs(q.norm() - 1.0) < 1e-12);
  const auto p = UnitQuaternion::from_axis_angle({0, 2, 0}, 0.7);
  CHECK(std::abs(p.norm() - 1.0) < 1e-12);
  CHECK(std::abs((q * p).norm() - 1.0) < 1e-12);
}

TEST_CASE("quat_to_rot property over random unit quaternions") {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const double w = rng.normal(), x = rng.normal(), y = rng.normal(), z = rng.normal();
    const auto q = UnitQuaternion::from_wxyz(w, x, y, z);
    const Rot3 r = quat_to_rot(q);
    REQUIRE(is_rotation(r, 1e-9));
    CHECK(mat_diff(r, oracle::quat_matrix(q.w(), q.x(), q.y(), q.z())) < 1e-12);
    // Round trip through the matrix recovers q up to sign.
    const auto back = rot_to_quat(r);
    const double sign = (back.w() * q.w() + back.x() * q.x() + back.y() * q.y() + back.z() * q.z()) < 0 ? -1 : 1;
    CHECK(std::abs(sign * back.w() - q.w()) < 1e-9);
    CHECK(std::abs(sign * back.z() - q.z()) < 1e-9);
  }
}

TEST_CASE("quaternion product composes rotations") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto a = UnitQuaternion::from_wxyz(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    const auto b = UnitQuaternion::from_wxyz(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    const oracle::Mat3 expect = oracle::matmul(to_mat(quat_to_rot(a)), to_mat(quat_to_rot(b)));
    CHECK(mat_diff(quat_to_rot(a * b), expect) < 1e-12);
    CHECK(mat_diff(quat_to_rot(a.conjugate()), oracle::transpose(to_mat(quat_to_rot(a)))) < 1e-12);
  }
}

TEST_CASE("rot_relative examples") {
  Rng rng(5);
  const Rot3 r = rng.random_rotation();
  CHECK(max_abs_diff(rot_relative(r, r), Rot3::identity()) < 1e-12);
  CHECK(max_abs_diff(rot_relative(Rot3::identity(), r), r) < 1e-15);

  const Rot3 z90 = Rot3::about_z(pi / 2);
  const Rot3 composed = z90 * Rot3::about_x(pi / 6);
  CHECK(mat_diff(composed, oracle::matmul(oracle::rz(pi / 2), oracle::rx(pi / 6))) < 1e-12);
  CHECK(mat_diff(rot_relative(z90, composed), oracle::rx(pi / 6)) < 1e-12);
}

TEST_CASE("rot_relative round trip property") {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const Rot3 a = rng.random_rotation();
    const Rot3 b = rng.random_rotation();
    const Rot3 rel = rot_relative(a, b);
    CHECK(is_rotation(rel));
    CHECK(max_abs_diff(a * rel, b) < 1e-9);
    CHECK(mat_diff(rel, oracle::matmul(oracle::transpose(to_mat(a)), to_mat(b))) < 1e-12);
  }
}

TEST_CASE("rotate_vec examples") {
  const Vec3 v{1, 2, 3};
  CHECK(rotate_vec(Rot3::identity(), v) == v);
  const Vec3 flipped = rotate_vec(Rot3::about_z(pi), {1, 0, 0});
  CHECK(std::abs(flipped.x + 1.0) < 1e-12);
  CHECK(std::abs(flipped.y) < 1e-12);
  const Vec3 quarter = rotate_vec(Rot3::about_z(pi / 2), {1, 0, 0});
  CHECK(std::abs(quarter.x) < 1e-12);
  CHECK(std::abs(quarter.y - 1.0) < 1e-12);
  CHECK(std::abs(quarter.z) < 1e-12);
}

TEST_CASE("rotate_vec preserves norms and inner products") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Rot3 r = rng.random_rotation();
    const Vec3 a = rng.normal_vec3(2.0);
    const Vec3 b = rng.normal_vec3(0.5);
    const Vec3 ra = rotate_vec(r, a);
    const Vec3 rb = rotate_vec(r, b);
    CHECK(std::abs(ra.norm() - a.norm()) < 1e-9);
    CHECK(std::abs(dot(ra, rb) - dot(a, b)) < 1e-9);
    const auto o = oracle::apply(to_mat(r), {a.x, a.y, a.z});
    CHECK(std::abs(ra.x - o[0]) + std::abs(ra.y - o[1]) + std::abs(ra.z - o[2]) < 1e-12);
  }
}

TEST_CASE("elementary rotations match closed forms") {
  for (double a : {-2.0, -0.3, 0.0, 0.9, 3.0}) {
    CHECK(mat_diff(Rot3::about_x(a), oracle::rx(a)) < 1e-15);
    CHECK(mat_diff(Rot3::about_y(a), oracle::ry(a)) < 1e-15);
    CHECK(mat_diff(Rot3::about_z(a), oracle::rz(a)) < 1e-15);
  }
}

TEST_CASE("is_rotation rejects reflections, scaling and NaN") {
  Rot3 reflect = Rot3::identity();
  reflect(2, 2) = -1.0;
  CHECK_FALSE(is_rotation(reflect));
  Rot3 scaled = Rot3::identity();
  scaled(0, 0) = 1.001;
  CHECK_FALSE(is_rotation(scaled));
  Rot3 bad = Rot3::identity();
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(is_rotation(bad));
  CHECK(is_rotation(Rot3::about_y(1.0)));
}

TEST_CASE("rotvec exponential and rotation angle") {
  const Vec3 axis{0, 0, 1};
  CHECK(mat_diff(rot_from_rotvec(axis * 0.4), oracle::rz(0.4)) < 1e-12);
  CHECK(max_abs_diff(rot_from_rotvec({0, 0, 0}), Rot3::identity()) < 1e-15);
  CHECK(std::abs(rotation_angle(Rot3::about_x(2.5)) - 2.5) < 1e-9);
  CHECK(std::abs(rotation_angle(Rot3::about_y(pi)) - pi) < 1e-7);
  CHECK(rotation_angle(Rot3::identity()) == doctest::Approx(0.0));
}

TEST_CASE("mean_rotation") {
  CHECK_THROWS_AS(mean_rotation(std::span<const Rot3>{}), InvalidInput);
  const std::vector<Rot3> pair{Rot3::about_z(0.2), Rot3::about_z(0.6)};
  CHECK(max_abs_diff(mean_rotation(pair), Rot3::about_z(0.4)) < 1e-9);
  Rng rng(9);
  const Rot3 r = rng.random_rotation();
  const std::vector<Rot3> same(5, r);
  CHECK(max_abs_diff(mean_rotation(same), r) < 1e-9);
}
