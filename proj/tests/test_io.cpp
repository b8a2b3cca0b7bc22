#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "demoforge/io.hpp"

using namespace demoforge;

TEST_CASE("ascii ply round trip", "[io]") {
  io::PointSet ps;
  ps.points = {{0.0, 1.5, -2.0}, {0.25, 0.5, 0.75}};
  ps.normals = {{0, 0, 1}, {1, 0, 0}};
  const std::string text = io::write_ply_ascii(ps);
  const io::PointSet back = io::parse_ply(text, "test");
  REQUIRE(back.points.size() == 2);
  REQUIRE(back.normals.size() == 2);
  CHECK((back.points[0] - ps.points[0]).norm() == 0.0);
  CHECK((back.normals[1] - ps.normals[1]).norm() == 0.0);
}

TEST_CASE("binary little endian ply", "[io]") {
  std::string data =
      "ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
      "property float x\nproperty float y\nproperty float z\nend_header\n";
  const float values[6] = {1.0f, 2.0f, 3.0f, -4.0f, 5.5f, 0.25f};
  data.append(reinterpret_cast<const char*>(values), sizeof(values));
  const io::PointSet ps = io::parse_ply(data, "test");
  REQUIRE(ps.points.size() == 2);
  CHECK(ps.points[0].x() == 1.0);
  CHECK(ps.points[1].z() == 0.25);
  CHECK(ps.normals.empty());
}

TEST_CASE("truncated binary ply is rejected", "[io]") {
  std::string data =
      "ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
      "property float x\nproperty float y\nproperty float z\nend_header\n";
  const float values[3] = {1.0f, 2.0f, 3.0f};  // one vertex short
  data.append(reinterpret_cast<const char*>(values), sizeof(values));
  CHECK_THROWS_AS(io::parse_ply(data, "test"), Error);
}

TEST_CASE("obj vertices", "[io]") {
  const std::string text = "# comment\nv 1 2 3\nvn 0 0 1\nv -1 0.5 0\nf 1 2\n";
  const io::PointSet ps = io::parse_obj(text, "test");
  REQUIRE(ps.points.size() == 2);
  CHECK(ps.points[1].x() == -1.0);
}

TEST_CASE("trajectory json round trip", "[io]") {
  retarget::PartTrajectory traj;
  traj.part_id = "mug";
  traj.waypoints = {{0.0, geom::Pose{geom::Vec3(0.1, 0.2, 0.3), geom::yaw_rotation(0.4)}},
                    {0.5, geom::Pose{geom::Vec3(0.4, 0.5, 0.6), geom::yaw_rotation(-0.2)}}};
  const std::string text = io::trajectory_to_json(traj);
  const retarget::PartTrajectory back = io::parse_trajectory_json(text, "test");
  CHECK(back.part_id == "mug");
  REQUIRE(back.size() == 2);
  CHECK(back.waypoints[1].t == 0.5);
  const auto [dp, da] = geom::pose_error(back.waypoints[1].pose, traj.waypoints[1].pose);
  CHECK(dp == 0.0);
  CHECK(da < 1e-15);
}

TEST_CASE("hand track json grouping", "[io]") {
  const std::string text = R"([
    {"t": 0.0, "index_tip": [0.1, 0, 0], "thumb_tip": [0.1, 0.02, 0], "hand": "right"},
    {"t": 0.1, "index_tip": [0.2, 0, 0], "thumb_tip": [0.2, 0.02, 0], "hand": "right"},
    {"t": 0.0, "index_tip": [0.5, 0, 0], "thumb_tip": [0.5, 0.02, 0], "hand": "left"}
  ])";
  const auto tracks = io::parse_hand_tracks_json(text, "test");
  REQUIRE(tracks.size() == 2);
  CHECK(tracks.at("right").frames.size() == 2);
  CHECK(tracks.at("left").frames.size() == 1);
  CHECK(tracks.at("right").frames[1].index_tip.x() == 0.2);
  CHECK_THROWS_AS(io::parse_hand_tracks_json(R"([{"t":0,"index_tip":[0,0,0],"thumb_tip":[0,0,0],"hand":"up"}])", "t"),
                  Error);
}
