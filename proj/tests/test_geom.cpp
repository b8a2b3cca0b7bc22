#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Geometry>
#include <unsupported/Eigen/MatrixFunctions>

#include "demoforge/geom.hpp"
#include "demoforge/rng.hpp"

using namespace demoforge;
using geom::Pose;
using geom::Quat;
using geom::Vec3;

namespace {

Quat random_unit_quat(rnd::Rng& rng) {
  for (;;) {
    const Quat q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double n = q.norm();
    if (n > 0.1 && n <= 1.0) return q.normalized();
  }
}

Pose random_pose(rnd::Rng& rng) {
  return Pose{Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)), random_unit_quat(rng)};
}

// Independent rotation route: the matrix exponential of the skew form.
geom::Mat3 rotation_matrix_exponential(const Vec3& axis, double angle) {
  geom::Mat3 skew;
  skew << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  return (angle * skew).exp();
}

}  // namespace

TEST_CASE("slerp endpoints and midpoint", "[geom]") {
  rnd::Rng rng(11);
  const Quat q0 = random_unit_quat(rng);
  const Quat q1 = random_unit_quat(rng);

  CHECK(geom::geodesic_angle(geom::quat_slerp(q0, q1, 0.0), q0) < 1e-12);
  CHECK(geom::geodesic_angle(geom::quat_slerp(q0, q1, 1.0), q1) < 1e-12);

  // Halfway between identity and a 90 degree z rotation is 45 degrees about
  // z; expected value frozen from the matrix-exponential oracle.
  const Quat half = geom::quat_slerp(Quat::identity(), Quat::from_axis_angle(Vec3::UnitZ(), M_PI / 2), 0.5);
  CHECK(half.w == Catch::Approx(0.923879532511287).margin(1e-12));
  CHECK(half.x == Catch::Approx(0.0).margin(1e-12));
  CHECK(half.y == Catch::Approx(0.0).margin(1e-12));
  CHECK(half.z == Catch::Approx(0.382683432365090).margin(1e-12));
  const geom::Mat3 expected = rotation_matrix_exponential(Vec3::UnitZ(), M_PI / 4);
  CHECK((half.to_rotation_matrix() - expected).norm() < 1e-12);
}

TEST_CASE("slerp has constant angular velocity", "[geom]") {
  rnd::Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Quat q0 = random_unit_quat(rng);
    const Quat q1 = random_unit_quat(rng);
    const int n = 16;
    std::vector<Quat> samples;
    for (int k = 0; k <= n; ++k) samples.push_back(geom::quat_slerp(q0, q1, double(k) / n));
    const double step0 = geom::geodesic_angle(samples[0], samples[1]);
    for (int k = 1; k < n; ++k) {
      CHECK(geom::geodesic_angle(samples[k], samples[k + 1]) == Catch::Approx(step0).margin(1e-9));
    }
    // Shortest arc: total distance equals the geodesic distance.
    CHECK(double(n) * step0 == Catch::Approx(geom::geodesic_angle(q0, q1)).margin(1e-9));
  }
}

TEST_CASE("slerp outputs stay unit and canonical", "[geom]") {
  rnd::Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const Quat q = geom::quat_slerp(random_unit_quat(rng), random_unit_quat(rng), rng.uniform());
    CHECK(std::abs(q.norm() - 1.0) < 1e-9);
    CHECK(q.w >= 0.0);
  }
}

TEST_CASE("slerp near-antipodal fallback stays finite", "[geom]") {
  const Quat q0 = Quat::identity();
  const Quat q1 = Quat::from_axis_angle(Vec3::UnitX(), M_PI);  // dot(q0, q1) == 0
  for (double s : {0.0, 0.25, 0.5, 1.0}) {
    const Quat q = geom::quat_slerp(q0, q1, s);
    CHECK(std::abs(q.norm() - 1.0) < 1e-9);
  }
  CHECK(geom::geodesic_angle(geom::quat_slerp(q0, q1, 1.0), q1) < 1e-9);
}

TEST_CASE("hamilton product matches Eigen", "[geom]") {
  rnd::Rng rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const Quat a = random_unit_quat(rng);
    const Quat b = random_unit_quat(rng);
    const Quat ab = a * b;
    const Eigen::Quaterniond ea(a.w, a.x, a.y, a.z);
    const Eigen::Quaterniond eb(b.w, b.x, b.y, b.z);
    const Eigen::Quaterniond eab = ea * eb;
    CHECK(std::abs(std::abs(ab.w * eab.w() + ab.x * eab.x() + ab.y * eab.y() + ab.z * eab.z()) - 1.0) < 1e-12);

    const Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    CHECK((a.rotate(v) - ea.toRotationMatrix() * v).norm() < 1e-12);
    CHECK((a.to_rotation_matrix() - ea.toRotationMatrix()).norm() < 1e-12);
  }
}

TEST_CASE("rotation matrix round trip", "[geom]") {
  rnd::Rng rng(15);
  for (int trial = 0; trial < 500; ++trial) {
    const Quat q = random_unit_quat(rng);
    const Quat back = Quat::from_rotation_matrix(q.to_rotation_matrix());
    CHECK(geom::geodesic_angle(q, back) < 1e-9);
  }
}

TEST_CASE("pose composition basics", "[geom]") {
  const Pose p{Vec3(0.3, -0.2, 1.0), Quat::from_axis_angle(Vec3::UnitY(), 0.7)};
  auto [dp, da] = geom::pose_error(Pose::identity() * p, p);
  CHECK(dp < 1e-12);
  CHECK(da < 1e-12);

  auto [ip, ia] = geom::pose_error(p * p.inverse(), Pose::identity());
  CHECK(ip < 1e-9);
  CHECK(ia < 1e-9);

  // translate(1,0,0) composed with [rot90z then translate(0,1,0)]: the
  // homogeneous-matrix product puts the point at (1,1,0)... worked by hand:
  // T1 * (R * x + t2) with T1=(1,0,0), R=rot90z, t2=(0,1,0).
  const Pose t1{Vec3(1, 0, 0), Quat::identity()};
  const Pose rt{Vec3(0, 1, 0), geom::yaw_rotation(M_PI / 2)};
  const Pose c = t1 * rt;
  CHECK((c.position - Vec3(1, 1, 0)).norm() < 1e-12);
  CHECK(geom::geodesic_angle(c.orientation, geom::yaw_rotation(M_PI / 2)) < 1e-12);
}

TEST_CASE("pose compose matches homogeneous matrices", "[geom]") {
  rnd::Rng rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    Eigen::Matrix4d ma = Eigen::Matrix4d::Identity(), mb = Eigen::Matrix4d::Identity();
    ma.block<3, 3>(0, 0) = a.orientation.to_rotation_matrix();
    ma.block<3, 1>(0, 3) = a.position;
    mb.block<3, 3>(0, 0) = b.orientation.to_rotation_matrix();
    mb.block<3, 1>(0, 3) = b.position;
    const Eigen::Matrix4d mab = ma * mb;
    const Pose ab = a * b;
    CHECK((ab.position - mab.block<3, 1>(0, 3)).norm() < 1e-12);
    CHECK((ab.orientation.to_rotation_matrix() - mab.block<3, 3>(0, 0)).norm() < 1e-12);
  }
}

TEST_CASE("compose and inverse round trip 10k poses", "[geom]") {
  rnd::Rng rng(17);
  double worst_pos = 0.0, worst_ang = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Pose p = random_pose(rng);
    const auto [dp, da] = geom::pose_error(p * p.inverse(), Pose::identity());
    worst_pos = std::max(worst_pos, dp);
    worst_ang = std::max(worst_ang, da);
  }
  CHECK(worst_pos < 1e-9);
  CHECK(worst_ang < 1e-9);
}

TEST_CASE("geodesic angle definition and double cover", "[geom]") {
  const Quat q = Quat::from_axis_angle(Vec3(0.6, 0.8, 0.0).normalized(), 1.1);
  CHECK(geom::geodesic_angle(q, q) == 0.0);
  CHECK(geom::geodesic_angle(Quat::identity(), geom::yaw_rotation(M_PI / 2)) == Catch::Approx(M_PI / 2).margin(1e-12));
  const Quat neg{-q.w, -q.x, -q.y, -q.z};
  CHECK(geom::geodesic_angle(q, neg) < 1e-9);

  rnd::Rng rng(18);
  for (int trial = 0; trial < 200; ++trial) {
    const Quat a = random_unit_quat(rng);
    const Quat b = random_unit_quat(rng);
    CHECK(geom::geodesic_angle(a, b) == Catch::Approx(geom::geodesic_angle(b, a)));
    CHECK(geom::geodesic_angle(a, b) <= M_PI + 1e-12);
  }
}

TEST_CASE("serialization order is x y z qw qx qy qz", "[geom]") {
  const Pose p{Vec3(1, 2, 3), Quat::from_axis_angle(Vec3::UnitZ(), 0.5)};
  const auto a = p.to_array();
  CHECK(a[0] == 1.0);
  CHECK(a[1] == 2.0);
  CHECK(a[2] == 3.0);
  CHECK(a[3] == Catch::Approx(std::cos(0.25)));
  CHECK(a[6] == Catch::Approx(std::sin(0.25)));
  const Pose back = Pose::from_array(a);
  auto [dp, da] = geom::pose_error(back, p);
  CHECK(dp == 0.0);
  CHECK(da < 1e-12);
}
