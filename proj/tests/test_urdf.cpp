#include <catch2/catch_amalgamated.hpp>

#include "demoforge/urdf.hpp"
#include "helpers.hpp"

using namespace demoforge;
using geom::Pose;
using geom::Quat;
using geom::Vec3;

namespace {

const char* kFixedTwoLink = R"(
<robot name="fixed2">
  <link name="base"/>
  <link name="lid"/>
  <joint name="weld" type="fixed">
    <parent link="base"/>
    <child link="lid"/>
    <origin xyz="0.1 0 0.2" rpy="0 0 0"/>
  </joint>
</robot>)";

const char* kOneRevolute = R"(
<robot name="rev1">
  <link name="base"/>
  <link name="arm"/>
  <link name="tip"/>
  <joint name="shoulder" type="revolute">
    <parent link="base"/>
    <child link="arm"/>
    <axis xyz="0 0 1"/>
    <limit lower="-3.14159265358979" upper="3.14159265358979" velocity="2.0"/>
  </joint>
  <joint name="mount" type="fixed">
    <parent link="arm"/>
    <child link="tip"/>
    <origin xyz="1 0 0"/>
  </joint>
</robot>)";

const char* kPlanar2 = R"(
<robot name="planar2">
  <link name="base"/>
  <link name="l1"/>
  <link name="l2"/>
  <link name="tip"/>
  <joint name="q1" type="revolute">
    <parent link="base"/>
    <child link="l1"/>
    <axis xyz="0 0 1"/>
    <limit lower="-3.2" upper="3.2" velocity="50"/>
  </joint>
  <joint name="q2" type="revolute">
    <parent link="l1"/>
    <child link="l2"/>
    <origin xyz="1 0 0"/>
    <axis xyz="0 0 1"/>
    <limit lower="-3.2" upper="3.2" velocity="50"/>
  </joint>
  <joint name="tip_mount" type="fixed">
    <parent link="l2"/>
    <child link="tip"/>
    <origin xyz="1 0 0"/>
  </joint>
</robot>)";

}  // namespace

TEST_CASE("fixed two-link model has no actuated joints", "[urdf]") {
  const auto model = kin::parse_urdf(kFixedTwoLink);
  CHECK(model.dof() == 0);
  CHECK(model.root == "base");
  const auto poses = kin::forward_kinematics_map(model, kin::JointConfig(0));
  CHECK((poses.at("lid").position - Vec3(0.1, 0, 0.2)).norm() < 1e-15);
  CHECK((poses.at("base").position).norm() == 0.0);
}

TEST_CASE("single revolute joint echoes its limits", "[urdf]") {
  const auto model = kin::parse_urdf(kOneRevolute);
  REQUIRE(model.dof() == 1);
  const kin::Joint& j = model.actuated_joint(0);
  CHECK(j.lower == -3.14159265358979);
  CHECK(j.upper == 3.14159265358979);
  CHECK(j.velocity == 2.0);
  CHECK((j.axis - Vec3::UnitZ()).norm() == 0.0);
}

TEST_CASE("kinematic loop is rejected", "[urdf]") {
  const char* looped = R"(
<robot name="loop">
  <link name="a"/>
  <link name="b"/>
  <joint name="ab" type="fixed"><parent link="a"/><child link="b"/></joint>
  <joint name="ba" type="fixed"><parent link="b"/><child link="a"/></joint>
</robot>)";
  try {
    kin::parse_urdf(looped);
    FAIL("expected KinematicLoop");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::KinematicLoop);
  }
}

TEST_CASE("parse error kinds", "[urdf]") {
  auto kind_of = [](const char* doc) {
    try {
      kin::parse_urdf(doc);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidArgument;
  };
  CHECK(kind_of("<robot><link name=") == ErrorKind::MalformedXml);
  CHECK(kind_of("<robot name=\"x\"><link name=\"a\"/><link name=\"b\"/>"
                "<joint name=\"j\" type=\"planar\"><parent link=\"a\"/><child link=\"b\"/></joint></robot>") ==
        ErrorKind::UnsupportedJointType);
  CHECK(kind_of("<robot name=\"x\"><link name=\"a\"/><link name=\"b\"/>"
                "<joint name=\"j\" type=\"revolute\"><parent link=\"a\"/><child link=\"b\"/>"
                "<axis xyz=\"0 0 1\"/></joint></robot>") == ErrorKind::MissingLimit);
  // Two disconnected roots.
  CHECK(kind_of("<robot name=\"x\"><link name=\"a\"/><link name=\"b\"/><link name=\"c\"/>"
                "<joint name=\"j\" type=\"fixed\"><parent link=\"a\"/><child link=\"b\"/></joint></robot>") ==
        ErrorKind::MalformedXml);
}

TEST_CASE("continuous joints become wide revolutes", "[urdf]") {
  const char* doc = R"(
<robot name="c">
  <link name="a"/><link name="b"/>
  <joint name="spin" type="continuous">
    <parent link="a"/><child link="b"/>
    <axis xyz="0 1 0"/>
  </joint>
</robot>)";
  const auto model = kin::parse_urdf(doc);
  REQUIRE(model.dof() == 1);
  CHECK(model.actuated_joint(0).lower == Catch::Approx(-4 * M_PI));
  CHECK(model.actuated_joint(0).upper == Catch::Approx(4 * M_PI));
}

TEST_CASE("unsupported elements are warned about, meshes retained", "[urdf]") {
  const char* doc = R"(
<robot name="w">
  <link name="a">
    <visual><geometry><mesh filename="meshes/a.obj"/></geometry></visual>
    <inertial><mass value="1"/></inertial>
  </link>
  <link name="b"><collision><geometry><box size="1 1 1"/></geometry></collision></link>
  <joint name="j" type="fixed"><parent link="a"/><child link="b"/></joint>
  <transmission name="t"/>
</robot>)";
  const auto model = kin::parse_urdf(doc);
  CHECK(model.link_meshes.at("a") == "meshes/a.obj");
  CHECK(model.warnings.size() == 3);  // inertial, collision, transmission
}

TEST_CASE("fk of planar arm matches hand computation", "[urdf]") {
  const auto model = kin::parse_urdf(kPlanar2);
  kin::JointConfig q(2);
  q << M_PI / 2, -M_PI / 2;
  const auto poses = kin::forward_kinematics_map(model, q);
  CHECK((poses.at("tip").position - Vec3(1, 1, 0)).norm() < 1e-12);

  q << 0, 0;
  CHECK((kin::forward_kinematics_map(model, q).at("tip").position - Vec3(2, 0, 0)).norm() < 1e-15);
}

TEST_CASE("fk rotates the child offset", "[urdf]") {
  const auto model = kin::parse_urdf(kOneRevolute);
  kin::JointConfig q(1);
  q << M_PI / 2;
  const auto poses = kin::forward_kinematics_map(model, q);
  CHECK((poses.at("tip").position - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK(geom::geodesic_angle(poses.at("tip").orientation, geom::yaw_rotation(M_PI / 2)) < 1e-12);
}

TEST_CASE("fk validates dimensions and limits", "[urdf]") {
  const auto model = kin::parse_urdf(kOneRevolute);
  kin::FkResult fk;
  CHECK_THROWS_AS(kin::forward_kinematics(model, kin::JointConfig(3), fk), Error);
  kin::JointConfig q(1);
  q << 10.0;  // outside the +-pi limits
  CHECK_THROWS_AS(kin::forward_kinematics(model, q, fk), Error);
  CHECK_NOTHROW(kin::forward_kinematics(model, q, fk, false));
}

TEST_CASE("fk is bitwise reproducible", "[urdf]") {
  rnd::Rng rng(31);
  const auto model = testutil::random_chain_model(rng, 7);
  const auto q = testutil::random_config(rng, model);
  const Pose a = kin::link_pose(model, q, "tool");
  const Pose b = kin::link_pose(model, q, "tool");
  CHECK(a.position.x() == b.position.x());
  CHECK(a.position.y() == b.position.y());
  CHECK(a.position.z() == b.position.z());
  CHECK(a.orientation.w == b.orientation.w);
  CHECK(a.orientation.x == b.orientation.x);
  CHECK(a.orientation.y == b.orientation.y);
  CHECK(a.orientation.z == b.orientation.z);
}

TEST_CASE("jacobian of the root frame is zero", "[urdf]") {
  const auto model = kin::parse_urdf(kPlanar2);
  kin::JointConfig q(2);
  q << 0.3, -0.7;
  CHECK(kin::jacobian(model, q, "base").norm() == 0.0);
}

TEST_CASE("jacobian single revolute column by hand", "[urdf]") {
  const auto model = kin::parse_urdf(kOneRevolute);
  kin::JointConfig q(1);
  q << 0.0;
  const auto J = kin::jacobian(model, q, "tip");
  Eigen::Matrix<double, 6, 1> expected;
  expected << 0, 1, 0, 0, 0, 1;  // omega x r with omega=z, r=(1,0,0)
  CHECK((J.col(0) - expected).norm() < 1e-12);
}

TEST_CASE("unknown frame raises", "[urdf]") {
  const auto model = kin::parse_urdf(kPlanar2);
  kin::JointConfig q(2);
  q << 0, 0;
  try {
    kin::jacobian(model, q, "nope");
    FAIL("expected UnknownFrame");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownFrame);
  }
}

TEST_CASE("jacobian matches finite differences on random chains", "[urdf]") {
  rnd::Rng rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_index(7));
    const auto model = testutil::random_chain_model(rng, n);
    for (int rep = 0; rep < 3; ++rep) {
      const auto q = testutil::random_config(rng, model);
      const auto J = kin::jacobian(model, q, "tool");
      const auto J_fd = testutil::finite_difference_jacobian(model, q, "tool");
      const double rel = (J - J_fd).cwiseAbs().maxCoeff() / std::max(1.0, J.cwiseAbs().maxCoeff());
      CHECK(rel < 1e-5);
    }
  }
}

TEST_CASE("mimic joints couple and fold into the jacobian", "[urdf]") {
  rnd::Rng rng(33);
  const auto model = testutil::random_chain_model(rng, 4, /*with_mimic=*/true);
  // The mimicking finger is not an actuated slot.
  CHECK(model.dof() == 5);

  auto q = testutil::random_config(rng, model);
  const auto poses = kin::forward_kinematics_map(model, q);
  // finger_b mimics finger_a along the opposite axis: opposite displacement
  // in the tool frame.
  const Pose tool = poses.at("tool");
  const Vec3 a_local = tool.inverse().apply(poses.at("finger_a").position);
  const Vec3 b_local = tool.inverse().apply(poses.at("finger_b").position);
  CHECK((a_local + b_local).norm() < 1e-12);

  const auto J = kin::jacobian(model, q, "finger_b");
  const auto J_fd = testutil::finite_difference_jacobian(model, q, "finger_b");
  CHECK((J - J_fd).cwiseAbs().maxCoeff() / std::max(1.0, J.cwiseAbs().maxCoeff()) < 1e-5);
}

TEST_CASE("parse serialize parse is a fixpoint", "[urdf]") {
  rnd::Rng rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    const auto model = testutil::random_chain_model(rng, 3 + static_cast<int>(rng.uniform_index(5)), trial % 2 == 0);
    const std::string doc1 = kin::serialize_urdf(model);
    const auto parsed1 = kin::parse_urdf(doc1);
    CHECK(testutil::models_equal(model, parsed1, 1e-9));
    const std::string doc2 = kin::serialize_urdf(parsed1);
    const auto parsed2 = kin::parse_urdf(doc2);
    CHECK(testutil::models_equal(parsed1, parsed2, 1e-12));
    // After one round trip the text itself is stable.
    CHECK(doc2 == kin::serialize_urdf(parsed2));
  }
}
