#include <catch2/catch_amalgamated.hpp>

#include "demoforge/error.hpp"
#include "demoforge/toml.hpp"

using namespace demoforge;

TEST_CASE("toml scalars tables and arrays", "[toml]") {
  const std::string text = R"(
# demo config
name = "tiger_pick"
n_demos = 100
interpolate = true
rate = 0.5
exp = 1e-3

[robot]
urdf = "arm.urdf"
q0 = [0.0, -0.5, 0.25]

[robot.extra]
note = "nested"

[[assets]]
part_id = "tiger"

[[assets]]
part_id = "table"
pose = [0, 0, 0,
        1, 0, 0, 0]
)";
  const toml::Table root = toml::parse(text);
  CHECK(toml::get_string(root, "name", "") == "tiger_pick");
  CHECK(toml::get_integer(root, "n_demos", 0) == 100);
  CHECK(toml::get_bool(root, "interpolate", false));
  CHECK(toml::get_number(root, "rate", 0) == 0.5);
  CHECK(toml::get_number(root, "exp", 0) == Catch::Approx(1e-3));

  const auto& robot = toml::find(root, "robot")->table();
  CHECK(toml::get_string(robot, "urdf", "") == "arm.urdf");
  CHECK(toml::find(robot, "q0")->array().size() == 3);
  CHECK(toml::find(robot, "q0")->array()[1].number() == -0.5);
  CHECK(toml::get_string(toml::find(robot, "extra")->table(), "note", "") == "nested");

  const auto& assets = toml::find(root, "assets")->array();
  REQUIRE(assets.size() == 2);
  CHECK(toml::get_string(assets[0].table(), "part_id", "") == "tiger");
  CHECK(toml::find(assets[1].table(), "pose")->array().size() == 7);
}

TEST_CASE("toml string escapes", "[toml]") {
  const toml::Table root = toml::parse("s = \"a\\nb\\\"c\\\\d\"\n");
  CHECK(toml::get_string(root, "s", "") == "a\nb\"c\\d");
}

TEST_CASE("toml parse errors carry line info", "[toml]") {
  CHECK_THROWS_MATCHES(toml::parse("key = \n"), Error, Catch::Matchers::MessageMatches(
                                                           Catch::Matchers::ContainsSubstring("line 1")));
  CHECK_THROWS_AS(toml::parse("a = 1\na = 2\n"), Error);
  CHECK_THROWS_AS(toml::parse("a.b = 1\n"), Error);
  CHECK_THROWS_AS(toml::parse("a = {x = 1}\n"), Error);
  CHECK_THROWS_AS(toml::parse("a = [1, 2\n"), Error);
  CHECK_THROWS_AS(toml::parse("a = zzz\n"), Error);
  try {
    toml::parse("ok = 1\nbad = oops\n");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
  }
}
