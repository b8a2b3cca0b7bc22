#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "demoforge/diffik.hpp"
#include "demoforge/error.hpp"
#include "demoforge/geom.hpp"
#include "demoforge/grasp.hpp"
#include "demoforge/io.hpp"
#include "demoforge/randomize.hpp"
#include "demoforge/retarget.hpp"
#include "demoforge/toml.hpp"
#include "demoforge/urdf.hpp"

namespace demoforge::pipeline {

enum class GoalSemantics { single_object, object_to_goal, articulated, bimanual };

inline const char* to_string(GoalSemantics g) {
  switch (g) {
    case GoalSemantics::single_object: return "single_object";
    case GoalSemantics::object_to_goal: return "object_to_goal";
    case GoalSemantics::articulated: return "articulated";
    case GoalSemantics::bimanual: return "bimanual";
  }
  return "?";
}

struct AssetSpec {
  std::string part_id;
  std::string points_path;   // PLY/OBJ point set for grasp sampling
  std::string mesh_ref;      // opaque render-asset reference
  double rest_z_offset = 0.0;
  geom::Pose pose;           // placement when the part is not the tracked one
};

struct ArticulationSpec {
  std::string part_id;
  kin::JointType type = kin::JointType::prismatic;  // prismatic or revolute
  geom::Vec3 axis = geom::Vec3::UnitX();            // part frame
  geom::Vec3 origin = geom::Vec3::Zero();           // part frame
  std::array<double, 2> init_range{0.0, 0.0};       // randomized initial joint value
};

struct CameraSpec {
  std::string name;
  geom::Pose pose;
};

struct RobotSpec {
  std::string urdf_path;
  geom::Pose base_pose;
  std::vector<std::string> arms;            // end-effector frame names
  std::vector<std::string> arm_hands;       // demo hand per arm ("left"/"right")
  std::vector<std::string> gripper_joints;  // optional URDF joint per arm
  std::vector<double> q0;                   // nominal config; empty = limit midpoints
};

struct GraspParams {
  double friction = 0.5;
  int samples = 256;
  int retries = 3;  // grasp candidates tried after a tracking failure
  grasp::SurfaceParams surface;
  grasp::GraspWindowParams window;
};

struct TaskSpec {
  std::string name = "task";
  RobotSpec robot;
  std::vector<AssetSpec> assets;
  std::string trajectory_path;
  std::vector<std::string> hand_track_paths;
  GoalSemantics goal = GoalSemantics::single_object;
  std::optional<ArticulationSpec> articulation;
  rnd::RandomizationConfig randomization;
  grasp::GripperSpec gripper;
  diffik::SolverConfig solver;
  diffik::PhaseParams phases;
  GraspParams grasp;
  std::vector<CameraSpec> cameras;
  int n_demos = 100;
  std::array<std::int64_t, 2> image_size{640, 480};
  double min_success_rate = 0.5;  // below this, generation exits with code 3
  bool interpolate = true;
  std::string base_dir;  // directory relative asset paths resolve against
};

namespace detail {

inline geom::Pose pose_from_toml(const toml::Value& v, const std::string& what) {
  const auto& arr = v.array();
  if (arr.size() != 7) throw Error(ErrorKind::ParseError, what + ": pose must be [x y z qw qx qy qz]");
  std::array<double, 7> a;
  for (int i = 0; i < 7; ++i) a[i] = arr[i].number();
  return geom::Pose::from_array(a);
}

inline geom::Vec3 vec3_from_toml(const toml::Value& v, const std::string& what) {
  const auto& arr = v.array();
  if (arr.size() != 3) throw Error(ErrorKind::ParseError, what + ": expected [x y z]");
  return geom::Vec3(arr[0].number(), arr[1].number(), arr[2].number());
}

template <typename T, std::size_t N>
std::array<T, N> range_from_toml(const toml::Value& v, const std::string& what) {
  const auto& arr = v.array();
  if (arr.size() != N) throw Error(ErrorKind::ParseError, what + ": expected " + std::to_string(N) + " values");
  std::array<T, N> out;
  for (std::size_t i = 0; i < N; ++i) {
    if constexpr (std::is_integral_v<T>) {
      out[i] = static_cast<T>(arr[i].integer());
    } else {
      out[i] = static_cast<T>(arr[i].number());
    }
  }
  return out;
}

inline std::vector<std::string> strings_from_toml(const toml::Value& v) {
  std::vector<std::string> out;
  for (const auto& item : v.array()) out.push_back(item.str());
  return out;
}

inline std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

}  // namespace detail

/// The default-initialized spec rendered as TOML; also what
/// `--print-defaults` prints.
inline std::string default_task_toml() {
  TaskSpec d;
  std::ostringstream out;
  out.precision(15);
  auto pose7 = [](const geom::Pose& p) {
    const auto a = p.to_array();
    std::ostringstream s;
    s.precision(15);
    s << '[' << a[0];
    for (int i = 1; i < 7; ++i) s << ", " << a[i];
    s << ']';
    return s.str();
  };
  out << "name = \"" << d.name << "\"\n";
  out << "n_demos = " << d.n_demos << "\n";
  out << "interpolate = " << (d.interpolate ? "true" : "false") << "\n";
  out << "min_success_rate = " << d.min_success_rate << "\n";
  out << "image_size = [" << d.image_size[0] << ", " << d.image_size[1] << "]\n\n";
  out << "[robot]\n";
  out << "urdf = \"robot.urdf\"            # required\n";
  out << "base_pose = " << pose7(d.robot.base_pose) << "\n";
  out << "arms = [\"ee\"]                   # required: end-effector frame names\n";
  out << "arm_hands = [\"right\"]           # demo hand per arm\n";
  out << "gripper_joints = []             # optional URDF joint per arm\n";
  out << "q0 = []                         # empty: limit midpoints\n\n";
  out << "[[assets]]\n";
  out << "part_id = \"part\"                # required\n";
  out << "points = \"part.ply\"             # required\n";
  out << "mesh = \"part_mesh\"\n";
  out << "rest_z_offset = 0.0\n";
  out << "pose = " << pose7(geom::Pose::identity()) << "   # placement when static\n\n";
  out << "[trajectory]\n";
  out << "demo = \"demo_traj.json\"         # required\n";
  out << "hand_tracks = []\n\n";
  out << "[task]\n";
  out << "goal = \"single_object\"          # single_object | object_to_goal | articulated | bimanual\n\n";
  out << "[workspace]\n";
  const auto& ws = d.randomization.workspace;
  out << "aabb_min = [" << ws.aabb_min.x() << ", " << ws.aabb_min.y() << ", " << ws.aabb_min.z() << "]\n";
  out << "aabb_max = [" << ws.aabb_max.x() << ", " << ws.aabb_max.y() << ", " << ws.aabb_max.z() << "]\n";
  out << "table_height = " << ws.table_height << "\n";
  out << "yaw_range = " << ws.yaw_range << "          # sampled yaw is uniform in +-yaw_range\n\n";
  out << "[randomization]\n";
  out << "master_seed = " << d.randomization.master_seed << "\n";
  out << "cam_trans_max = " << d.randomization.cam_trans_max << "\n";
  out << "cam_rot_max = " << d.randomization.cam_rot_max << "\n";
  out << "light_count = [" << d.randomization.light_count[0] << ", " << d.randomization.light_count[1] << "]\n";
  out << "light_intensity = [" << d.randomization.light_intensity[0] << ", " << d.randomization.light_intensity[1]
      << "]\n";
  out << "light_color_temp = [" << d.randomization.light_color_temp[0] << ", " << d.randomization.light_color_temp[1]
      << "]\n";
  out << "light_radius = [" << d.randomization.light_radius[0] << ", " << d.randomization.light_radius[1] << "]\n";
  out << "d_min = " << d.randomization.d_min << "\n";
  out << "q0_perturbation = " << d.randomization.q0_perturbation << "\n\n";
  out << "[gripper]\n";
  out << "max_opening = " << d.gripper.max_opening << "\n";
  out << "min_opening = " << d.gripper.min_opening << "\n";
  out << "finger_depth = " << d.gripper.finger_depth << "\n";
  out << "tcp_from_grasp = " << pose7(d.gripper.tcp_from_grasp) << "\n\n";
  out << "[solver]\n";
  out << "damping = " << d.solver.damping << "\n";
  out << "w_smooth = " << d.solver.w_smooth << "\n";
  out << "pos_tol = " << d.solver.pos_tol << "\n";
  out << "rot_tol = " << d.solver.rot_tol << "\n";
  out << "max_iters = " << d.solver.max_iters << "\n";
  out << "dt = " << d.solver.dt << "\n";
  out << "limit_margin = " << d.solver.limit_margin << "\n\n";
  out << "[phases]\n";
  out << "standoff = " << d.phases.standoff << "\n";
  out << "approach_duration = " << d.phases.approach_duration << "\n";
  out << "retreat = " << d.phases.retreat << "\n";
  out << "close_duration = " << d.phases.close_duration << "\n";
  out << "release_duration = " << d.phases.release_duration << "\n";
  out << "retreat_duration = " << d.phases.retreat_duration << "\n\n";
  out << "[grasp]\n";
  out << "friction = " << d.grasp.friction << "\n";
  out << "samples = " << d.grasp.samples << "\n";
  out << "retries = " << d.grasp.retries << "\n";
  out << "voxel = " << d.grasp.surface.voxel << "\n";
  out << "normal_k = " << d.grasp.surface.normal_k << "\n";
  out << "smoothing_iters = " << d.grasp.surface.smoothing_iters << "\n";
  out << "v_eps = " << d.grasp.window.v_eps << "\n";
  out << "pad = " << d.grasp.window.pad << "\n\n";
  out << "# [articulation]   # articulated tasks\n";
  out << "# part_id = \"part\"\n";
  out << "# type = \"prismatic\"            # prismatic | revolute\n";
  out << "# axis = [1, 0, 0]               # part frame\n";
  out << "# origin = [0, 0, 0]             # part frame\n";
  out << "# init_range = [0.0, 0.0]\n\n";
  out << "# [[cameras]]\n";
  out << "# name = \"front\"\n";
  out << "# pose = [0.9, 0.0, 0.7, 0.924, 0.0, 0.383, 0.0]\n";
  return out.str();
}

/// Parses and validates a task config. Referenced files must exist; the
/// arms/hand-tracks pairing is enforced for bimanual tasks; every numeric
/// default comes from the structs above and is echoed by resolved_toml().
inline TaskSpec parse_task_config(const std::string& text, const std::string& base_dir) {
  const toml::Table root = toml::parse(text);
  TaskSpec spec;
  spec.base_dir = base_dir;
  spec.name = toml::get_string(root, "name", spec.name);
  spec.n_demos = static_cast<int>(toml::get_integer(root, "n_demos", spec.n_demos));
  spec.interpolate = toml::get_bool(root, "interpolate", spec.interpolate);
  spec.min_success_rate = toml::get_number(root, "min_success_rate", spec.min_success_rate);
  if (const auto* v = toml::find(root, "image_size")) {
    spec.image_size = detail::range_from_toml<std::int64_t, 2>(*v, "image_size");
  }
  if (spec.n_demos < 0) throw Error(ErrorKind::InvariantViolation, "n_demos must be >= 0");

  if (const auto* robot = toml::find(root, "robot")) {
    const auto& t = robot->table();
    spec.robot.urdf_path = detail::resolve(base_dir, toml::get_string(t, "urdf", ""));
    if (const auto* v = toml::find(t, "base_pose")) spec.robot.base_pose = detail::pose_from_toml(*v, "robot.base_pose");
    if (const auto* v = toml::find(t, "arms")) spec.robot.arms = detail::strings_from_toml(*v);
    if (const auto* v = toml::find(t, "arm_hands")) spec.robot.arm_hands = detail::strings_from_toml(*v);
    if (const auto* v = toml::find(t, "gripper_joints")) spec.robot.gripper_joints = detail::strings_from_toml(*v);
    if (const auto* v = toml::find(t, "q0")) {
      for (const auto& item : v->array()) spec.robot.q0.push_back(item.number());
    }
  }
  if (spec.robot.urdf_path.empty()) throw Error(ErrorKind::ParseError, "missing robot.urdf");
  if (spec.robot.arms.empty()) throw Error(ErrorKind::ParseError, "missing robot.arms");
  if (spec.robot.arm_hands.empty()) {
    spec.robot.arm_hands = spec.robot.arms.size() == 2 ? std::vector<std::string>{"left", "right"}
                                                       : std::vector<std::string>{"right"};
  }
  if (spec.robot.arm_hands.size() != spec.robot.arms.size()) {
    throw Error(ErrorKind::InvariantViolation, "robot.arm_hands must match robot.arms in length");
  }

  if (const auto* assets = toml::find(root, "assets")) {
    for (const auto& item : assets->array()) {
      const auto& t = item.table();
      AssetSpec a;
      a.part_id = toml::get_string(t, "part_id", "");
      a.points_path = detail::resolve(base_dir, toml::get_string(t, "points", ""));
      a.mesh_ref = toml::get_string(t, "mesh", a.part_id);
      a.rest_z_offset = toml::get_number(t, "rest_z_offset", 0.0);
      if (const auto* v = toml::find(t, "pose")) a.pose = detail::pose_from_toml(*v, "assets.pose");
      if (a.part_id.empty() || a.points_path.empty()) {
        throw Error(ErrorKind::ParseError, "every [[assets]] entry needs part_id and points");
      }
      spec.assets.push_back(std::move(a));
    }
  }
  if (spec.assets.empty()) throw Error(ErrorKind::ParseError, "at least one [[assets]] entry is required");

  if (const auto* traj = toml::find(root, "trajectory")) {
    const auto& t = traj->table();
    spec.trajectory_path = detail::resolve(base_dir, toml::get_string(t, "demo", ""));
    if (const auto* v = toml::find(t, "hand_tracks")) {
      for (const auto& p : detail::strings_from_toml(*v)) {
        spec.hand_track_paths.push_back(detail::resolve(base_dir, p));
      }
    }
  }
  if (spec.trajectory_path.empty()) throw Error(ErrorKind::ParseError, "missing trajectory.demo");

  if (const auto* task = toml::find(root, "task")) {
    const std::string goal = toml::get_string(task->table(), "goal", "single_object");
    if (goal == "single_object") {
      spec.goal = GoalSemantics::single_object;
    } else if (goal == "object_to_goal") {
      spec.goal = GoalSemantics::object_to_goal;
    } else if (goal == "articulated") {
      spec.goal = GoalSemantics::articulated;
    } else if (goal == "bimanual") {
      spec.goal = GoalSemantics::bimanual;
    } else {
      throw Error(ErrorKind::ParseError, "unknown task.goal '" + goal + "'");
    }
  }

  if (const auto* art = toml::find(root, "articulation")) {
    const auto& t = art->table();
    ArticulationSpec a;
    a.part_id = toml::get_string(t, "part_id", "");
    const std::string type = toml::get_string(t, "type", "prismatic");
    if (type == "prismatic") {
      a.type = kin::JointType::prismatic;
    } else if (type == "revolute") {
      a.type = kin::JointType::revolute;
    } else {
      throw Error(ErrorKind::ParseError, "articulation.type must be prismatic or revolute");
    }
    if (const auto* v = toml::find(t, "axis")) a.axis = detail::vec3_from_toml(*v, "articulation.axis").normalized();
    if (const auto* v = toml::find(t, "origin")) a.origin = detail::vec3_from_toml(*v, "articulation.origin");
    if (const auto* v = toml::find(t, "init_range")) a.init_range = detail::range_from_toml<double, 2>(*v, "init_range");
    spec.articulation = a;
  }

  if (const auto* ws = toml::find(root, "workspace")) {
    const auto& t = ws->table();
    auto& w = spec.randomization.workspace;
    if (const auto* v = toml::find(t, "aabb_min")) w.aabb_min = detail::vec3_from_toml(*v, "workspace.aabb_min");
    if (const auto* v = toml::find(t, "aabb_max")) w.aabb_max = detail::vec3_from_toml(*v, "workspace.aabb_max");
    w.table_height = toml::get_number(t, "table_height", w.table_height);
    w.yaw_range = toml::get_number(t, "yaw_range", w.yaw_range);
  }

  if (const auto* random = toml::find(root, "randomization")) {
    const auto& t = random->table();
    auto& r = spec.randomization;
    r.master_seed = static_cast<std::uint64_t>(toml::get_integer(t, "master_seed", 0));
    r.cam_trans_max = toml::get_number(t, "cam_trans_max", r.cam_trans_max);
    r.cam_rot_max = toml::get_number(t, "cam_rot_max", r.cam_rot_max);
    if (const auto* v = toml::find(t, "light_count")) {
      r.light_count = detail::range_from_toml<std::int64_t, 2>(*v, "light_count");
    }
    if (const auto* v = toml::find(t, "light_intensity")) {
      r.light_intensity = detail::range_from_toml<double, 2>(*v, "light_intensity");
    }
    if (const auto* v = toml::find(t, "light_color_temp")) {
      r.light_color_temp = detail::range_from_toml<double, 2>(*v, "light_color_temp");
    }
    if (const auto* v = toml::find(t, "light_radius")) {
      r.light_radius = detail::range_from_toml<double, 2>(*v, "light_radius");
    }
    r.d_min = toml::get_number(t, "d_min", r.d_min);
    r.q0_perturbation = toml::get_number(t, "q0_perturbation", r.q0_perturbation);
  }

  if (const auto* gripper = toml::find(root, "gripper")) {
    const auto& t = gripper->table();
    auto& g = spec.gripper;
    g.max_opening = toml::get_number(t, "max_opening", g.max_opening);
    g.min_opening = toml::get_number(t, "min_opening", g.min_opening);
    g.finger_depth = toml::get_number(t, "finger_depth", g.finger_depth);
    if (const auto* v = toml::find(t, "tcp_from_grasp")) {
      g.tcp_from_grasp = detail::pose_from_toml(*v, "gripper.tcp_from_grasp");
    }
  }

  if (const auto* solver = toml::find(root, "solver")) {
    const auto& t = solver->table();
    auto& s = spec.solver;
    s.damping = toml::get_number(t, "damping", s.damping);
    s.w_smooth = toml::get_number(t, "w_smooth", s.w_smooth);
    s.pos_tol = toml::get_number(t, "pos_tol", s.pos_tol);
    s.rot_tol = toml::get_number(t, "rot_tol", s.rot_tol);
    s.max_iters = static_cast<int>(toml::get_integer(t, "max_iters", s.max_iters));
    s.dt = toml::get_number(t, "dt", s.dt);
    s.limit_margin = toml::get_number(t, "limit_margin", s.limit_margin);
  }

  if (const auto* phases = toml::find(root, "phases")) {
    const auto& t = phases->table();
    auto& p = spec.phases;
    p.standoff = toml::get_number(t, "standoff", p.standoff);
    p.approach_duration = toml::get_number(t, "approach_duration", p.approach_duration);
    p.retreat = toml::get_number(t, "retreat", p.retreat);
    p.close_duration = toml::get_number(t, "close_duration", p.close_duration);
    p.release_duration = toml::get_number(t, "release_duration", p.release_duration);
    p.retreat_duration = toml::get_number(t, "retreat_duration", p.retreat_duration);
  }

  if (const auto* g = toml::find(root, "grasp")) {
    const auto& t = g->table();
    spec.grasp.friction = toml::get_number(t, "friction", spec.grasp.friction);
    spec.grasp.samples = static_cast<int>(toml::get_integer(t, "samples", spec.grasp.samples));
    spec.grasp.retries = static_cast<int>(toml::get_integer(t, "retries", spec.grasp.retries));
    spec.grasp.surface.voxel = toml::get_number(t, "voxel", spec.grasp.surface.voxel);
    spec.grasp.surface.normal_k = static_cast<int>(toml::get_integer(t, "normal_k", spec.grasp.surface.normal_k));
    spec.grasp.surface.smoothing_iters =
        static_cast<int>(toml::get_integer(t, "smoothing_iters", spec.grasp.surface.smoothing_iters));
    spec.grasp.window.v_eps = toml::get_number(t, "v_eps", spec.grasp.window.v_eps);
    spec.grasp.window.pad = static_cast<int>(toml::get_integer(t, "pad", spec.grasp.window.pad));
  }

  if (const auto* cams = toml::find(root, "cameras")) {
    for (const auto& item : cams->array()) {
      const auto& t = item.table();
      CameraSpec c;
      c.name = toml::get_string(t, "name", "cam" + std::to_string(spec.cameras.size()));
      if (const auto* v = toml::find(t, "pose")) c.pose = detail::pose_from_toml(*v, "cameras.pose");
      spec.cameras.push_back(std::move(c));
    }
  }
  if (spec.cameras.empty()) {
    // One static three-quarter view so records always carry a camera.
    CameraSpec c;
    c.name = "front";
    c.pose = geom::Pose{geom::Vec3(0.9, 0.0, 0.7),
                        geom::Quat::from_axis_angle(geom::Vec3::UnitY(), 0.6 * M_PI)};
    spec.cameras.push_back(std::move(c));
  }

  // Cross-field invariants.
  if (spec.goal == GoalSemantics::bimanual) {
    if (spec.robot.arms.size() != 2) {
      throw Error(ErrorKind::InvariantViolation, "bimanual tasks need exactly two robot.arms");
    }
    if (spec.hand_track_paths.size() != spec.robot.arms.size()) {
      throw Error(ErrorKind::InvariantViolation,
                  "bimanual tasks need one hand track per arm (" + std::to_string(spec.robot.arms.size()) +
                      " arms, " + std::to_string(spec.hand_track_paths.size()) + " hand tracks)");
    }
  }
  if (spec.goal == GoalSemantics::articulated && !spec.articulation) {
    throw Error(ErrorKind::InvariantViolation, "articulated tasks need an [articulation] block");
  }
  if (!spec.robot.gripper_joints.empty() && spec.robot.gripper_joints.size() != spec.robot.arms.size()) {
    throw Error(ErrorKind::InvariantViolation, "robot.gripper_joints must match robot.arms in length");
  }

  for (const std::string& path : {spec.robot.urdf_path, spec.trajectory_path}) {
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::MissingAsset, "missing file: " + path);
  }
  for (const auto& a : spec.assets) {
    if (!std::filesystem::exists(a.points_path)) {
      throw Error(ErrorKind::MissingAsset, "missing file: " + a.points_path);
    }
  }
  for (const auto& p : spec.hand_track_paths) {
    if (!std::filesystem::exists(p)) throw Error(ErrorKind::MissingAsset, "missing file: " + p);
  }

  spec.gripper.validate();
  spec.solver.validate();
  spec.randomization.validate();
  return spec;
}

inline TaskSpec load_task_config(const std::string& path) {
  const std::string text = io::read_file(path);
  return parse_task_config(text, std::filesystem::path(path).parent_path().string());
}

/// Resolved-config echo: the spec rendered back as TOML with every default
/// filled in.
inline std::string resolved_toml(const TaskSpec& spec) {
  std::ostringstream out;
  out.precision(15);
  auto pose7 = [](const geom::Pose& p) {
    const auto a = p.to_array();
    std::ostringstream s;
    s.precision(15);
    s << '[' << a[0];
    for (int i = 1; i < 7; ++i) s << ", " << a[i];
    s << ']';
    return s.str();
  };
  auto quoted_list = [](const std::vector<std::string>& items) {
    std::string s = "[";
    for (std::size_t i = 0; i < items.size(); ++i) s += (i ? ", \"" : "\"") + items[i] + "\"";
    return s + "]";
  };
  out << "name = \"" << spec.name << "\"\n";
  out << "n_demos = " << spec.n_demos << "\n";
  out << "interpolate = " << (spec.interpolate ? "true" : "false") << "\n";
  out << "min_success_rate = " << spec.min_success_rate << "\n";
  out << "image_size = [" << spec.image_size[0] << ", " << spec.image_size[1] << "]\n\n";
  out << "[robot]\n";
  out << "urdf = \"" << spec.robot.urdf_path << "\"\n";
  out << "base_pose = " << pose7(spec.robot.base_pose) << "\n";
  out << "arms = " << quoted_list(spec.robot.arms) << "\n";
  out << "arm_hands = " << quoted_list(spec.robot.arm_hands) << "\n";
  if (!spec.robot.gripper_joints.empty()) out << "gripper_joints = " << quoted_list(spec.robot.gripper_joints) << "\n";
  if (!spec.robot.q0.empty()) {
    out << "q0 = [";
    for (std::size_t i = 0; i < spec.robot.q0.size(); ++i) out << (i ? ", " : "") << spec.robot.q0[i];
    out << "]\n";
  }
  out << "\n";
  for (const auto& a : spec.assets) {
    out << "[[assets]]\n";
    out << "part_id = \"" << a.part_id << "\"\n";
    out << "points = \"" << a.points_path << "\"\n";
    out << "mesh = \"" << a.mesh_ref << "\"\n";
    out << "rest_z_offset = " << a.rest_z_offset << "\n";
    out << "pose = " << pose7(a.pose) << "\n\n";
  }
  out << "[trajectory]\n";
  out << "demo = \"" << spec.trajectory_path << "\"\n";
  out << "hand_tracks = " << (spec.hand_track_paths.empty() ? "[]" : quoted_list(spec.hand_track_paths)) << "\n\n";
  out << "[task]\ngoal = \"" << to_string(spec.goal) << "\"\n\n";
  if (spec.articulation) {
    const auto& a = *spec.articulation;
    out << "[articulation]\n";
    out << "part_id = \"" << a.part_id << "\"\n";
    out << "type = \"" << (a.type == kin::JointType::prismatic ? "prismatic" : "revolute") << "\"\n";
    out << "axis = [" << a.axis.x() << ", " << a.axis.y() << ", " << a.axis.z() << "]\n";
    out << "origin = [" << a.origin.x() << ", " << a.origin.y() << ", " << a.origin.z() << "]\n";
    out << "init_range = [" << a.init_range[0] << ", " << a.init_range[1] << "]\n\n";
  }
  const auto& ws = spec.randomization.workspace;
  out << "[workspace]\n";
  out << "aabb_min = [" << ws.aabb_min.x() << ", " << ws.aabb_min.y() << ", " << ws.aabb_min.z() << "]\n";
  out << "aabb_max = [" << ws.aabb_max.x() << ", " << ws.aabb_max.y() << ", " << ws.aabb_max.z() << "]\n";
  out << "table_height = " << ws.table_height << "\n";
  out << "yaw_range = " << ws.yaw_range << "\n\n";
  const auto& r = spec.randomization;
  out << "[randomization]\n";
  out << "master_seed = " << r.master_seed << "\n";
  out << "cam_trans_max = " << r.cam_trans_max << "\n";
  out << "cam_rot_max = " << r.cam_rot_max << "\n";
  out << "light_count = [" << r.light_count[0] << ", " << r.light_count[1] << "]\n";
  out << "light_intensity = [" << r.light_intensity[0] << ", " << r.light_intensity[1] << "]\n";
  out << "light_color_temp = [" << r.light_color_temp[0] << ", " << r.light_color_temp[1] << "]\n";
  out << "light_radius = [" << r.light_radius[0] << ", " << r.light_radius[1] << "]\n";
  out << "d_min = " << r.d_min << "\n";
  out << "q0_perturbation = " << r.q0_perturbation << "\n\n";
  out << "[gripper]\n";
  out << "max_opening = " << spec.gripper.max_opening << "\n";
  out << "min_opening = " << spec.gripper.min_opening << "\n";
  out << "finger_depth = " << spec.gripper.finger_depth << "\n";
  out << "tcp_from_grasp = " << pose7(spec.gripper.tcp_from_grasp) << "\n\n";
  out << "[solver]\n";
  out << "damping = " << spec.solver.damping << "\n";
  out << "w_smooth = " << spec.solver.w_smooth << "\n";
  out << "pos_tol = " << spec.solver.pos_tol << "\n";
  out << "rot_tol = " << spec.solver.rot_tol << "\n";
  out << "max_iters = " << spec.solver.max_iters << "\n";
  out << "dt = " << spec.solver.dt << "\n";
  out << "limit_margin = " << spec.solver.limit_margin << "\n\n";
  out << "[phases]\n";
  out << "standoff = " << spec.phases.standoff << "\n";
  out << "approach_duration = " << spec.phases.approach_duration << "\n";
  out << "retreat = " << spec.phases.retreat << "\n";
  out << "close_duration = " << spec.phases.close_duration << "\n";
  out << "release_duration = " << spec.phases.release_duration << "\n";
  out << "retreat_duration = " << spec.phases.retreat_duration << "\n\n";
  out << "[grasp]\n";
  out << "friction = " << spec.grasp.friction << "\n";
  out << "samples = " << spec.grasp.samples << "\n";
  out << "retries = " << spec.grasp.retries << "\n";
  out << "voxel = " << spec.grasp.surface.voxel << "\n";
  out << "normal_k = " << spec.grasp.surface.normal_k << "\n";
  out << "smoothing_iters = " << spec.grasp.surface.smoothing_iters << "\n";
  out << "v_eps = " << spec.grasp.window.v_eps << "\n";
  out << "pad = " << spec.grasp.window.pad << "\n\n";
  for (const auto& c : spec.cameras) {
    out << "[[cameras]]\n";
    out << "name = \"" << c.name << "\"\n";
    out << "pose = " << pose7(c.pose) << "\n\n";
  }
  return out.str();
}

}  // namespace demoforge::pipeline
