#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "demoforge/diffik.hpp"
#include "demoforge/error.hpp"
#include "demoforge/geom.hpp"
#include "demoforge/grasp.hpp"
#include "demoforge/io.hpp"
#include "demoforge/randomize.hpp"
#include "demoforge/retarget.hpp"
#include "demoforge/rng.hpp"
#include "demoforge/task.hpp"
#include "demoforge/urdf.hpp"

namespace demoforge::pipeline {

using nlohmann::json;

/// Everything loaded and precomputed once per task: model, chains, the
/// demo trajectory resampled onto the solver grid, contact surfaces, the
/// per-part grasp candidate lists, and the per-arm part associations.
struct TaskContext {
  TaskSpec spec;
  kin::KinematicModel model;
  std::vector<diffik::ArmChain> chains;
  std::vector<int> gripper_slots;  // per arm; -1 when the arm has none
  kin::JointConfig nominal_q0;

  retarget::PartTrajectory demo;      // tracked part, resampled at solver dt
  retarget::PartTrajectory demo_raw;  // as loaded
  std::string moving_part;
  geom::Pose goal_pose;  // demo end pose of the tracked part

  std::map<std::string, grasp::ContactSurface> surfaces;
  std::vector<std::pair<std::string, geom::Pose>> static_parts;  // pinned placements
  std::vector<retarget::OccupiedDisk> occupied;
  std::map<std::string, std::vector<grasp::GraspCandidate>> candidates;  // per part, quality-sorted
  std::vector<std::string> arm_part;  // part grasped by each arm
  std::vector<geom::Pose> nominal_cameras;

  struct Articulation {
    geom::Vec3 world_axis;    // fixed in the table frame (the base is static)
    geom::Vec3 world_origin;
    bool prismatic = true;
    std::vector<double> profile;  // demo joint values per resampled waypoint
    geom::Pose start_pose;        // demo start pose of the part
  };
  std::optional<Articulation> articulation;
};

namespace detail {

/// Pose of the articulated part at joint value theta, as a screw about the
/// fixed world axis applied to the demo start pose.
inline geom::Pose articulated_pose(const TaskContext::Articulation& art, double theta) {
  if (art.prismatic) {
    return geom::Pose{theta * art.world_axis, geom::Quat::identity()} * art.start_pose;
  }
  const geom::Quat rot = geom::Quat::from_axis_angle(art.world_axis, theta);
  const geom::Pose screw{art.world_origin - rot.rotate(art.world_origin), rot};
  return screw * art.start_pose;
}

inline double articulated_value(const TaskContext::Articulation& art, const geom::Pose& start,
                                const geom::Pose& pose) {
  if (art.prismatic) {
    return (pose.position - start.position).dot(art.world_axis);
  }
  const geom::Quat delta = (pose.orientation * start.orientation.inverse()).normalized();
  return delta.rotation_vector().dot(art.world_axis);
}

}  // namespace detail

/// Loads every referenced file, builds surfaces and candidate grasps, and
/// resolves which part each arm grasps. Read-only afterwards; shared
/// across workers.
inline TaskContext prepare_task(const TaskSpec& spec) {
  TaskContext ctx;
  ctx.spec = spec;
  ctx.model = kin::parse_urdf(io::read_file(spec.robot.urdf_path));

  for (const auto& arm : spec.robot.arms) {
    ctx.chains.push_back(diffik::make_chain(ctx.model, arm));
    if (ctx.chains.back().slots.empty()) {
      throw Error(ErrorKind::InvariantViolation, "arm '" + arm + "' has no actuated joints on its chain");
    }
  }
  for (std::size_t a = 0; a < spec.robot.arms.size(); ++a) {
    int slot = -1;
    if (a < spec.robot.gripper_joints.size() && !spec.robot.gripper_joints[a].empty()) {
      const auto it = ctx.model.joint_index.find(spec.robot.gripper_joints[a]);
      if (it == ctx.model.joint_index.end() || ctx.model.slot_of_joint[it->second] < 0) {
        throw Error(ErrorKind::InvariantViolation,
                    "gripper joint '" + spec.robot.gripper_joints[a] + "' is not an actuated joint");
      }
      slot = ctx.model.slot_of_joint[it->second];
    }
    ctx.gripper_slots.push_back(slot);
  }

  ctx.nominal_q0.resize(ctx.model.dof());
  if (!spec.robot.q0.empty()) {
    if (static_cast<int>(spec.robot.q0.size()) != ctx.model.dof()) {
      throw Error(ErrorKind::InvariantViolation,
                  "robot.q0 has " + std::to_string(spec.robot.q0.size()) + " values, model has " +
                      std::to_string(ctx.model.dof()));
    }
    for (int s = 0; s < ctx.model.dof(); ++s) ctx.nominal_q0[s] = spec.robot.q0[s];
    ctx.nominal_q0 = ctx.model.clamped(ctx.nominal_q0);
  } else {
    for (int s = 0; s < ctx.model.dof(); ++s) {
      const kin::Joint& j = ctx.model.actuated_joint(s);
      ctx.nominal_q0[s] = 0.5 * (j.lower + j.upper);
    }
  }

  ctx.demo_raw = io::load_trajectory(spec.trajectory_path);
  ctx.moving_part = ctx.demo_raw.part_id;
  const double span = ctx.demo_raw.t_last() - ctx.demo_raw.t_first();
  const std::size_t frames = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(span / spec.solver.dt)) + 1);
  ctx.demo = retarget::resample_uniform(ctx.demo_raw, frames);
  // Snap the grid spacing to exactly cfg.dt (resampling keeps the span,
  // which may be off by a fraction of a frame).
  for (std::size_t i = 0; i < ctx.demo.size(); ++i) {
    ctx.demo.waypoints[i].t = ctx.demo_raw.t_first() + static_cast<double>(i) * spec.solver.dt;
  }
  ctx.goal_pose = ctx.demo.waypoints.back().pose;

  bool moving_found = false;
  for (const auto& asset : spec.assets) {
    const io::PointSet points = io::load_point_set(asset.points_path);
    ctx.surfaces[asset.part_id] = grasp::build_surface(points.points, spec.grasp.surface);
    if (asset.part_id == ctx.moving_part) {
      moving_found = true;
    } else {
      ctx.static_parts.emplace_back(asset.part_id, asset.pose);
      retarget::OccupiedDisk disk;
      disk.pose = asset.pose;
      disk.radius = ctx.surfaces[asset.part_id].bounding_radius();
      ctx.occupied.push_back(disk);
    }
  }
  if (!moving_found) {
    throw Error(ErrorKind::InvariantViolation,
                "trajectory part '" + ctx.moving_part + "' has no [[assets]] entry");
  }

  // Hand-to-part association on the raw demo data.
  std::map<std::string, grasp::HandTrack> hands;
  for (const auto& path : spec.hand_track_paths) {
    for (auto& [hand, track] : io::load_hand_tracks(path)) {
      auto [it, inserted] = hands.emplace(hand, std::move(track));
      if (!inserted) {
        throw Error(ErrorKind::InvariantViolation, "duplicate hand track for hand '" + hand + "'");
      }
    }
  }
  std::map<std::string, grasp::CentroidTrack> centroid_tracks;
  {
    grasp::CentroidTrack moving;
    const geom::Vec3 local_centroid = ctx.surfaces[ctx.moving_part].centroid();
    for (const auto& w : ctx.demo_raw.waypoints) {
      moving.samples.emplace_back(w.t, w.pose.apply(local_centroid));
    }
    centroid_tracks[ctx.moving_part] = std::move(moving);
    for (const auto& [part, pose] : ctx.static_parts) {
      grasp::CentroidTrack track;
      const geom::Vec3 c = pose.apply(ctx.surfaces[part].centroid());
      track.samples.emplace_back(ctx.demo_raw.t_first(), c);
      track.samples.emplace_back(ctx.demo_raw.t_last(), c);
      centroid_tracks[part] = std::move(track);
    }
  }
  for (std::size_t a = 0; a < spec.robot.arms.size(); ++a) {
    const std::string& hand_id = spec.robot.arm_hands[a];
    auto it = hands.find(hand_id);
    if (it != hands.end()) {
      ctx.arm_part.push_back(grasp::associate_grasped_part(it->second, centroid_tracks).part_id);
    } else {
      ctx.arm_part.push_back(ctx.moving_part);  // no track: grasp the tracked part
    }
  }

  // Candidate grasps per distinct grasped part, one seeded pass per batch.
  for (const auto& part : ctx.arm_part) {
    if (ctx.candidates.count(part)) continue;
    rnd::Rng rng(rnd::derive_seed(spec.randomization.master_seed, 0xA11CE5ULL));
    ctx.candidates[part] =
        grasp::sample_antipodal(ctx.surfaces.at(part), spec.gripper, spec.grasp.friction, spec.grasp.samples, rng);
  }

  for (const auto& cam : spec.cameras) ctx.nominal_cameras.push_back(cam.pose);

  if (spec.goal == GoalSemantics::articulated) {
    const auto& art_spec = *spec.articulation;
    if (art_spec.part_id != ctx.moving_part) {
      throw Error(ErrorKind::InvariantViolation, "articulation.part_id must be the tracked part");
    }
    TaskContext::Articulation art;
    art.prismatic = art_spec.type == kin::JointType::prismatic;
    art.start_pose = ctx.demo.waypoints.front().pose;
    art.world_axis = art.start_pose.orientation.rotate(art_spec.axis);
    art.world_origin = art.start_pose.apply(art_spec.origin);
    art.profile.reserve(ctx.demo.size());
    for (const auto& w : ctx.demo.waypoints) {
      art.profile.push_back(detail::articulated_value(art, art.start_pose, w.pose));
    }
    if (std::abs(art.profile.back() - art.profile.front()) < 1e-9) {
      throw Error(ErrorKind::InvariantViolation, "articulated demo does not move the declared joint");
    }
    ctx.articulation = art;
  }
  return ctx;
}

// --- demo records ---------------------------------------------------------

struct ArmFrame {
  Eigen::VectorXd q;  // chain joint values, root-to-tip order
  double gripper = 1.0;
  geom::Pose ee_pose;  // world frame
  diffik::Phase phase = diffik::Phase::pregrasp;
};

struct Frame {
  double t = 0.0;
  std::vector<ArmFrame> arms;
  std::vector<std::pair<std::string, geom::Pose>> parts;  // world frame
  std::vector<geom::Pose> cameras;
};

struct GraspBlock {
  std::string arm;
  std::string part_id;
  geom::Pose grasp_pose;  // part frame
  double width = 0.0;
  double quality = 0.0;
  geom::Pose tcp_from_grasp;
};

struct DemoRecord {
  std::string task;
  int demo_index = 0;
  std::uint64_t seed = 0;
  bool success = false;
  std::string failure_reason;  // ErrorKind name
  std::string failure_detail;
  std::string failure_arm;
  double dt = 0.0;
  std::vector<std::string> arm_names;
  rnd::SceneDraw scene;
  std::vector<GraspBlock> grasps;
  std::vector<std::vector<diffik::StepResidual>> residuals;  // per arm
  std::vector<Frame> frames;
};

struct BatchStats {
  int attempted = 0;
  int succeeded = 0;
  std::map<std::string, int> failure_counts;
  double wall_time_s = 0.0;
  double demos_per_min = 0.0;
  int workers = 1;
};

namespace detail {

inline kin::JointConfig assemble_config(const TaskContext& ctx, const rnd::SceneDraw& scene,
                                        const std::vector<diffik::ArmSolution>& arms, std::size_t frame,
                                        const std::vector<double>& gripper_fractions) {
  kin::JointConfig q = scene.q0;
  for (std::size_t a = 0; a < arms.size(); ++a) {
    if (frame < arms[a].configs.size()) {
      for (int slot : ctx.chains[a].slots) q[slot] = arms[a].configs[frame][slot];
    }
    const int gs = ctx.gripper_slots[a];
    if (gs >= 0 && a < gripper_fractions.size()) {
      const kin::Joint& j = ctx.model.actuated_joint(gs);
      q[gs] = j.lower + gripper_fractions[a] * (j.upper - j.lower);
    }
  }
  return q;
}

}  // namespace detail

/// Runs the full synthesis chain for one demo index: scene draw ->
/// trajectory adaptation -> grasp window -> grasp selection -> phase plan
/// -> differential IK -> record assembly. Any stage failure yields a
/// success=false record with the machine-readable reason; it never throws.
inline DemoRecord generate_demo(const TaskContext& ctx, int demo_index) {
  const TaskSpec& spec = ctx.spec;
  DemoRecord record;
  record.task = spec.name;
  record.demo_index = demo_index;
  record.seed = rnd::derive_seed(spec.randomization.master_seed, static_cast<std::uint64_t>(demo_index));
  record.dt = spec.solver.dt;
  record.arm_names = spec.robot.arms;

  try {
    // Scene randomization. The tracked part's pose is resampled only when
    // interpolation is on and the task is not articulated (those randomize
    // along the declared joint instead).
    std::vector<rnd::ObjectInitSpec> moving;
    if (spec.interpolate && spec.goal != GoalSemantics::articulated) {
      rnd::ObjectInitSpec init;
      init.part_id = ctx.moving_part;
      init.base_orientation = ctx.demo.waypoints.front().pose.orientation;
      for (const auto& asset : spec.assets) {
        if (asset.part_id == ctx.moving_part) init.rest_z_offset = asset.rest_z_offset;
      }
      moving.push_back(init);
    }
    record.scene = rnd::draw_scene(spec.randomization, ctx.nominal_cameras, ctx.goal_pose, ctx.occupied,
                                   static_cast<std::uint64_t>(demo_index), ctx.model, ctx.nominal_q0, moving,
                                   ctx.static_parts);

    // Adapted object trajectory.
    retarget::PartTrajectory traj;
    if (spec.goal == GoalSemantics::articulated) {
      const auto& art = *ctx.articulation;
      double theta0 = art.profile.front();
      if (spec.interpolate) {
        rnd::Rng joint_rng = rnd::Rng(record.seed).split(rnd::stream::kObjects);
        theta0 = joint_rng.uniform(spec.articulation->init_range[0], spec.articulation->init_range[1]);
      }
      const double theta_end = art.profile.back();
      const double demo_span = theta_end - art.profile.front();
      traj = ctx.demo;
      for (std::size_t i = 0; i < traj.size(); ++i) {
        const double u = (art.profile[i] - art.profile.front()) / demo_span;
        const double theta = theta0 + u * (theta_end - theta0);
        traj.waypoints[i].pose = detail::articulated_pose(art, theta);
      }
      record.scene.object_inits.emplace_back(ctx.moving_part, traj.waypoints.front().pose);
    } else if (!spec.interpolate) {
      traj = ctx.demo;  // dense replay of the tracked motion
      record.scene.object_inits.emplace_back(ctx.moving_part, traj.waypoints.front().pose);
    } else {
      geom::Pose new_start;
      bool found = false;
      for (const auto& [part, pose] : record.scene.object_inits) {
        if (part == ctx.moving_part) {
          new_start = pose;
          found = true;
        }
      }
      if (!found) throw Error(ErrorKind::InvariantViolation, "scene draw lacks the tracked part init");
      geom::Pose new_end;
      if (spec.goal == GoalSemantics::object_to_goal) {
        new_end = ctx.goal_pose;  // the goal stays where the demo ended
      } else {
        // Rigid replay from the sampled start.
        const geom::Pose start = ctx.demo.waypoints.front().pose;
        new_end = new_start * (start.inverse() * ctx.goal_pose);
      }
      traj = retarget::retarget_trajectory(ctx.demo, new_start, new_end);
    }

    const auto window = grasp::detect_grasp_window(traj, spec.grasp.window);

    // Grasp selection and solving, with candidate fallback after tracking
    // failures.
    const geom::Pose world_from_base = spec.robot.base_pose;
    const geom::Pose base_from_world = world_from_base.inverse();
    std::vector<std::size_t> cursor(ctx.chains.size(), 0);
    std::vector<diffik::ArmSolution> solutions;
    std::vector<diffik::PhasePlan> plans;
    std::vector<grasp::GraspCandidate> chosen(ctx.chains.size());

    for (int attempt = 0;; ++attempt) {
      plans.assign(ctx.chains.size(), diffik::PhasePlan{});
      solutions.clear();

      // The object trajectory is in the table frame; solve in base frame.
      retarget::PartTrajectory traj_base = traj;
      for (auto& w : traj_base.waypoints) w.pose = base_from_world * w.pose;

      for (std::size_t a = 0; a < ctx.chains.size(); ++a) {
        const auto& all = ctx.candidates.at(ctx.arm_part[a]);
        if (cursor[a] >= all.size()) {
          throw Error(ErrorKind::NoFeasibleGrasp, "candidate list exhausted for arm '" + ctx.chains[a].frame + "'");
        }
        const std::vector<grasp::GraspCandidate> remaining(all.begin() + cursor[a], all.end());
        const auto probe = diffik::make_feasibility_probe(ctx.model, ctx.chains[a], record.scene.q0,
                                                          spec.gripper.tcp_from_grasp, spec.solver);
        std::size_t picked = 0;
        chosen[a] = grasp::select_grasp(remaining, traj_base, probe, &picked);
        cursor[a] += picked;
        plans[a] = diffik::plan_phases(traj_base, chosen[a], spec.gripper.tcp_from_grasp, window, spec.phases);
      }

      try {
        if (ctx.chains.size() == 1) {
          solutions.push_back(diffik::solve_trajectory(ctx.model, ctx.chains[0], record.scene.q0, plans[0], spec.solver));
        } else {
          std::vector<std::pair<diffik::ArmChain, diffik::PhasePlan>> arm_plans;
          for (std::size_t a = 0; a < ctx.chains.size(); ++a) arm_plans.emplace_back(ctx.chains[a], plans[a]);
          solutions = diffik::solve_bimanual(ctx.model, arm_plans, record.scene.q0, spec.solver);
        }
        break;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::TrackingFailure || attempt + 1 >= spec.grasp.retries) throw;
        for (std::size_t a = 0; a < ctx.chains.size(); ++a) {
          if (ctx.chains[a].frame == e.arm) cursor[a] += 1;  // skip the grasp that failed
        }
      }
    }

    for (std::size_t a = 0; a < ctx.chains.size(); ++a) {
      GraspBlock block;
      block.arm = ctx.chains[a].frame;
      block.part_id = ctx.arm_part[a];
      block.grasp_pose = chosen[a].grasp_pose;
      block.width = chosen[a].width;
      block.quality = chosen[a].quality;
      block.tcp_from_grasp = spec.gripper.tcp_from_grasp;
      record.grasps.push_back(block);
      record.residuals.push_back(solutions[a].residuals);
    }

    // Frame assembly over the longest plan grid.
    std::size_t n_frames = 0;
    for (const auto& plan : plans) n_frames = std::max(n_frames, plan.size());
    const double t0 = traj.t_first();
    kin::FkResult fk;
    for (std::size_t k = 0; k < n_frames; ++k) {
      Frame frame;
      frame.t = t0 + static_cast<double>(k) * spec.solver.dt;

      std::vector<double> fractions(ctx.chains.size(), 1.0);
      for (std::size_t a = 0; a < ctx.chains.size(); ++a) {
        if (!plans[a].empty()) fractions[a] = plans[a].steps[std::min(k, plans[a].size() - 1)].gripper;
      }
      const kin::JointConfig q = detail::assemble_config(ctx, record.scene, solutions, k, fractions);
      kin::forward_kinematics(ctx.model, q, fk, false);

      for (std::size_t a = 0; a < ctx.chains.size(); ++a) {
        ArmFrame arm;
        arm.q.resize(static_cast<int>(ctx.chains[a].slots.size()));
        for (std::size_t c = 0; c < ctx.chains[a].slots.size(); ++c) arm.q[c] = q[ctx.chains[a].slots[c]];
        arm.gripper = fractions[a];
        arm.phase = plans[a].empty() ? diffik::Phase::pregrasp
                                     : plans[a].steps[std::min(k, plans[a].size() - 1)].phase;
        arm.ee_pose = world_from_base * fk.link_pose[ctx.model.link_id(ctx.chains[a].frame)];
        frame.arms.push_back(std::move(arm));
      }

      const geom::Pose part_pose = k < traj.size() ? traj.waypoints[k].pose : traj.waypoints.back().pose;
      frame.parts.emplace_back(ctx.moving_part, part_pose);
      for (const auto& pinned : ctx.static_parts) frame.parts.push_back(pinned);
      frame.cameras = record.scene.camera_poses;
      record.frames.push_back(std::move(frame));
    }
    record.success = true;
  } catch (const Error& e) {
    record.success = false;
    record.failure_reason = to_string(e.kind());
    record.failure_detail = e.what();
    record.failure_arm = e.arm;
    record.frames.clear();
  } catch (const std::exception& e) {
    record.success = false;
    record.failure_reason = "InternalError";
    record.failure_detail = e.what();
    record.frames.clear();
  }
  return record;
}

// --- record serialization ---------------------------------------------------

namespace detail {

inline json scene_to_json(const rnd::SceneDraw& scene) {
  json j;
  json cams = json::array();
  for (const auto& c : scene.camera_poses) cams.push_back(io::pose_to_json(c));
  j["cameras"] = std::move(cams);
  json lights = json::array();
  for (const auto& l : scene.lights) {
    lights.push_back({{"position", {l.position.x(), l.position.y(), l.position.z()}},
                      {"intensity", l.intensity},
                      {"color_temp", l.color_temp}});
  }
  j["lights"] = std::move(lights);
  json inits = json::object();
  for (const auto& [part, pose] : scene.object_inits) inits[part] = io::pose_to_json(pose);
  j["object_inits"] = std::move(inits);
  j["q0"] = std::vector<double>(scene.q0.data(), scene.q0.data() + scene.q0.size());
  j["seed"] = scene.seed;
  return j;
}

inline rnd::SceneDraw scene_from_json(const json& j) {
  rnd::SceneDraw scene;
  for (const auto& c : j.at("cameras")) scene.camera_poses.push_back(io::pose_from_json(c, "scene.cameras"));
  for (const auto& l : j.at("lights")) {
    rnd::Light light;
    light.position = io::vec3_from_json(l.at("position"), "scene.lights");
    light.intensity = l.at("intensity").get<double>();
    light.color_temp = l.at("color_temp").get<double>();
    scene.lights.push_back(light);
  }
  for (const auto& [part, pose] : j.at("object_inits").items()) {
    scene.object_inits.emplace_back(part, io::pose_from_json(pose, "scene.object_inits"));
  }
  const auto q0 = j.at("q0").get<std::vector<double>>();
  scene.q0 = Eigen::Map<const Eigen::VectorXd>(q0.data(), static_cast<int>(q0.size()));
  scene.seed = j.at("seed").get<std::uint64_t>();
  return scene;
}

}  // namespace detail

/// One demo file: a header line followed by one frame per line (JSONL).
inline std::string record_to_jsonl(const DemoRecord& record) {
  json header;
  header["type"] = "demo_header";
  header["task"] = record.task;
  header["demo_index"] = record.demo_index;
  header["seed"] = record.seed;
  header["success"] = record.success;
  if (!record.success) {
    header["failure_reason"] = record.failure_reason;
    header["failure_detail"] = record.failure_detail;
    if (!record.failure_arm.empty()) header["failure_arm"] = record.failure_arm;
  }
  header["dt"] = record.dt;
  header["arms"] = record.arm_names;
  header["scene"] = detail::scene_to_json(record.scene);
  json grasps = json::array();
  for (const auto& g : record.grasps) {
    grasps.push_back({{"arm", g.arm},
                      {"part_id", g.part_id},
                      {"grasp_pose", io::pose_to_json(g.grasp_pose)},
                      {"width", g.width},
                      {"quality", g.quality},
                      {"tcp_from_grasp", io::pose_to_json(g.tcp_from_grasp)}});
  }
  header["grasps"] = std::move(grasps);
  json residuals = json::array();
  for (const auto& arm : record.residuals) {
    json rs = json::array();
    for (const auto& r : arm) {
      rs.push_back({{"step", r.step},
                    {"phase", diffik::to_string(r.phase)},
                    {"pos_err_m", r.pos_err},
                    {"rot_err_rad", r.rot_err}});
    }
    residuals.push_back(std::move(rs));
  }
  header["residuals"] = std::move(residuals);

  std::string out = header.dump();
  out += '\n';
  for (const auto& frame : record.frames) {
    json f;
    f["type"] = "frame";
    f["t"] = frame.t;
    json arms = json::array();
    for (const auto& arm : frame.arms) {
      arms.push_back({{"q", std::vector<double>(arm.q.data(), arm.q.data() + arm.q.size())},
                      {"gripper", arm.gripper},
                      {"ee_pose", io::pose_to_json(arm.ee_pose)},
                      {"phase", diffik::to_string(arm.phase)}});
    }
    f["arms"] = std::move(arms);
    json parts = json::object();
    for (const auto& [part, pose] : frame.parts) parts[part] = io::pose_to_json(pose);
    f["parts"] = std::move(parts);
    json cams = json::array();
    for (const auto& c : frame.cameras) cams.push_back(io::pose_to_json(c));
    f["cameras"] = std::move(cams);
    out += f.dump();
    out += '\n';
  }
  return out;
}

inline DemoRecord record_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "empty demo record");
  const json header = io::parse_json(line, "demo header");
  if (header.value("type", "") != "demo_header") {
    throw Error(ErrorKind::ParseError, "first line is not a demo header");
  }

  DemoRecord record;
  record.task = header.at("task").get<std::string>();
  record.demo_index = header.at("demo_index").get<int>();
  record.seed = header.at("seed").get<std::uint64_t>();
  record.success = header.at("success").get<bool>();
  record.failure_reason = header.value("failure_reason", "");
  record.failure_detail = header.value("failure_detail", "");
  record.failure_arm = header.value("failure_arm", "");
  record.dt = header.at("dt").get<double>();
  record.arm_names = header.at("arms").get<std::vector<std::string>>();
  record.scene = detail::scene_from_json(header.at("scene"));
  for (const auto& g : header.at("grasps")) {
    GraspBlock block;
    block.arm = g.at("arm").get<std::string>();
    block.part_id = g.at("part_id").get<std::string>();
    block.grasp_pose = io::pose_from_json(g.at("grasp_pose"), "grasp_pose");
    block.width = g.at("width").get<double>();
    block.quality = g.at("quality").get<double>();
    block.tcp_from_grasp = io::pose_from_json(g.at("tcp_from_grasp"), "tcp_from_grasp");
    record.grasps.push_back(block);
  }
  for (const auto& arm : header.at("residuals")) {
    std::vector<diffik::StepResidual> rs;
    for (const auto& r : arm) {
      diffik::StepResidual res;
      res.step = r.at("step").get<int>();
      res.phase = diffik::phase_from_string(r.at("phase").get<std::string>()).value();
      res.pos_err = r.at("pos_err_m").get<double>();
      res.rot_err = r.at("rot_err_rad").get<double>();
      rs.push_back(res);
    }
    record.residuals.push_back(std::move(rs));
  }

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json f = io::parse_json(line, "demo frame");
    Frame frame;
    frame.t = f.at("t").get<double>();
    for (const auto& a : f.at("arms")) {
      ArmFrame arm;
      const auto q = a.at("q").get<std::vector<double>>();
      arm.q = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<int>(q.size()));
      arm.gripper = a.at("gripper").get<double>();
      arm.ee_pose = io::pose_from_json(a.at("ee_pose"), "ee_pose");
      const auto phase = diffik::phase_from_string(a.at("phase").get<std::string>());
      if (!phase) throw Error(ErrorKind::ParseError, "unknown phase label");
      arm.phase = *phase;
      frame.arms.push_back(std::move(arm));
    }
    for (const auto& [part, pose] : f.at("parts").items()) {
      frame.parts.emplace_back(part, io::pose_from_json(pose, "parts"));
    }
    for (const auto& c : f.at("cameras")) frame.cameras.push_back(io::pose_from_json(c, "cameras"));
    record.frames.push_back(std::move(frame));
  }
  return record;
}

// --- actions ---------------------------------------------------------------

enum class ActionFormat { delta_ee_6d, delta_joint };

inline ActionFormat action_format_from_string(const std::string& s) {
  if (s == "delta_ee_6d") return ActionFormat::delta_ee_6d;
  if (s == "delta_joint") return ActionFormat::delta_joint;
  throw Error(ErrorKind::InvalidArgument, "unknown action format '" + s + "'");
}

/// Per-frame action vectors, arm blocks concatenated in arm order.
/// delta_ee_6d: EE position delta (3) + the delta rotation's first two
/// rotation-matrix columns (6) + absolute gripper (1) per arm.
/// delta_joint: joint deltas + absolute gripper per arm. The final frame
/// carries a zero-motion action so the count matches the frame count.
inline std::vector<Eigen::VectorXd> emit_actions(const DemoRecord& record, ActionFormat format) {
  if (!record.success) {
    throw Error(ErrorKind::FormatUnavailable, "actions are only defined for success records");
  }
  const std::size_t n_frames = record.frames.size();
  const std::size_t n_arms = record.frames.front().arms.size();

  std::vector<Eigen::VectorXd> actions;
  actions.reserve(n_frames);
  for (std::size_t k = 0; k < n_frames; ++k) {
    const Frame& cur = record.frames[k];
    const Frame& next = record.frames[std::min(k + 1, n_frames - 1)];
    std::vector<double> row;
    for (std::size_t a = 0; a < n_arms; ++a) {
      if (format == ActionFormat::delta_ee_6d) {
        const geom::Vec3 dp = next.arms[a].ee_pose.position - cur.arms[a].ee_pose.position;
        const geom::Quat dq =
            (next.arms[a].ee_pose.orientation * cur.arms[a].ee_pose.orientation.inverse()).normalized();
        const geom::Mat3 rot = dq.to_rotation_matrix();
        row.insert(row.end(), {dp.x(), dp.y(), dp.z()});
        row.insert(row.end(), {rot(0, 0), rot(1, 0), rot(2, 0), rot(0, 1), rot(1, 1), rot(2, 1)});
      } else {
        for (int c = 0; c < cur.arms[a].q.size(); ++c) row.push_back(next.arms[a].q[c] - cur.arms[a].q[c]);
      }
      row.push_back(next.arms[a].gripper);
    }
    actions.push_back(Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<int>(row.size())));
  }
  return actions;
}

// --- render manifest --------------------------------------------------------

/// Everything a kinematic-replay renderer needs for one demo; no physics,
/// all bodies posed explicitly per frame.
struct RenderManifest {
  std::string task;
  int demo_index = 0;
  std::array<std::int64_t, 2> image_size{640, 480};
  std::map<std::string, std::string> assets;        // part -> mesh reference
  std::map<std::string, std::string> robot_meshes;  // link -> mesh reference
  std::vector<rnd::Light> lights;
  struct Frame {
    double t = 0.0;
    std::map<std::string, geom::Pose> links;
    std::map<std::string, geom::Pose> parts;
    std::vector<geom::Pose> cameras;
  };
  std::vector<Frame> frames;

  void validate() const {
    for (const auto& frame : frames) {
      for (const auto& [part, pose] : frame.parts) {
        (void)pose;
        if (!assets.count(part)) {
          throw Error(ErrorKind::InvariantViolation, "part '" + part + "' missing from the asset table");
        }
      }
    }
  }
};

/// Builds the manifest from a success record: robot link poses recomputed
/// by FK from the stored joints (scene q0 overlaid with per-frame arm and
/// gripper values), parts and cameras copied per frame.
inline RenderManifest export_render_manifest(const DemoRecord& record, const TaskContext& ctx) {
  if (!record.success) {
    throw Error(ErrorKind::FormatUnavailable, "render manifests are only defined for success records");
  }
  RenderManifest manifest;
  manifest.task = record.task;
  manifest.demo_index = record.demo_index;
  manifest.image_size = ctx.spec.image_size;
  for (const auto& asset : ctx.spec.assets) manifest.assets[asset.part_id] = asset.mesh_ref;
  manifest.robot_meshes = std::map<std::string, std::string>(ctx.model.link_meshes.begin(),
                                                             ctx.model.link_meshes.end());
  manifest.lights = record.scene.lights;

  kin::FkResult fk;
  for (const Frame& frame : record.frames) {
    RenderManifest::Frame out;
    out.t = frame.t;
    kin::JointConfig q = record.scene.q0;
    for (std::size_t a = 0; a < frame.arms.size(); ++a) {
      const auto& chain = ctx.chains[a];
      for (std::size_t c = 0; c < chain.slots.size(); ++c) q[chain.slots[c]] = frame.arms[a].q[c];
      const int gs = ctx.gripper_slots[a];
      if (gs >= 0) {
        const kin::Joint& j = ctx.model.actuated_joint(gs);
        q[gs] = j.lower + frame.arms[a].gripper * (j.upper - j.lower);
      }
    }
    kin::forward_kinematics(ctx.model, q, fk, false);
    for (std::size_t l = 0; l < ctx.model.links.size(); ++l) {
      out.links[ctx.model.links[l]] = ctx.spec.robot.base_pose * fk.link_pose[l];
    }
    for (const auto& [part, pose] : frame.parts) out.parts[part] = pose;
    out.cameras = frame.cameras;
    manifest.frames.push_back(std::move(out));
  }
  manifest.validate();
  return manifest;
}

inline std::string render_manifest_to_json(const RenderManifest& manifest) {
  json j;
  j["format"] = "demoforge.render/1";
  j["task"] = manifest.task;
  j["demo_index"] = manifest.demo_index;
  j["image_size"] = {manifest.image_size[0], manifest.image_size[1]};
  j["assets"] = manifest.assets;
  j["robot_meshes"] = manifest.robot_meshes;
  json lights = json::array();
  for (const auto& l : manifest.lights) {
    lights.push_back({{"position", {l.position.x(), l.position.y(), l.position.z()}},
                      {"intensity", l.intensity},
                      {"color_temp", l.color_temp}});
  }
  j["lights"] = std::move(lights);
  json frames = json::array();
  for (const auto& frame : manifest.frames) {
    json f;
    f["t"] = frame.t;
    json links = json::object();
    for (const auto& [link, pose] : frame.links) links[link] = io::pose_to_json(pose);
    f["links"] = std::move(links);
    json parts = json::object();
    for (const auto& [part, pose] : frame.parts) parts[part] = io::pose_to_json(pose);
    f["parts"] = std::move(parts);
    json cams = json::array();
    for (const auto& c : frame.cameras) cams.push_back(io::pose_to_json(c));
    f["cameras"] = std::move(cams);
    frames.push_back(std::move(f));
  }
  j["frames"] = std::move(frames);
  return j.dump(1) + "\n";
}

inline RenderManifest parse_render_manifest(const std::string& text) {
  const json j = io::parse_json(text, "render manifest");
  if (j.value("format", "") != "demoforge.render/1") {
    throw Error(ErrorKind::ParseError, "not a demoforge render manifest");
  }
  RenderManifest manifest;
  manifest.task = j.at("task").get<std::string>();
  manifest.demo_index = j.at("demo_index").get<int>();
  manifest.image_size = {j.at("image_size")[0].get<std::int64_t>(), j.at("image_size")[1].get<std::int64_t>()};
  manifest.assets = j.at("assets").get<std::map<std::string, std::string>>();
  manifest.robot_meshes = j.at("robot_meshes").get<std::map<std::string, std::string>>();
  for (const auto& l : j.at("lights")) {
    rnd::Light light;
    light.position = io::vec3_from_json(l.at("position"), "lights");
    light.intensity = l.at("intensity").get<double>();
    light.color_temp = l.at("color_temp").get<double>();
    manifest.lights.push_back(light);
  }
  for (const auto& f : j.at("frames")) {
    RenderManifest::Frame frame;
    frame.t = f.at("t").get<double>();
    for (const auto& [link, pose] : f.at("links").items()) {
      frame.links[link] = io::pose_from_json(pose, "links");
    }
    for (const auto& [part, pose] : f.at("parts").items()) {
      frame.parts[part] = io::pose_from_json(pose, "parts");
    }
    for (const auto& c : f.at("cameras")) frame.cameras.push_back(io::pose_from_json(c, "cameras"));
    manifest.frames.push_back(std::move(frame));
  }
  manifest.validate();
  return manifest;
}

// --- audits ------------------------------------------------------------------

struct AuditResult {
  int transport_frames = 0;
  double max_pos_err = 0.0;
  double max_rot_err = 0.0;
};

/// Re-derives the object pose from the stored joints alone on every
/// transport frame (FK -> EE -> invert grasp and TCP offsets) and compares
/// it against the stored part pose. The checkable form of the
/// rigid-attachment assumption.
inline AuditResult audit_rigid_attachment(const DemoRecord& record, const TaskContext& ctx) {
  if (!record.success) throw Error(ErrorKind::FormatUnavailable, "audit applies to success records");
  AuditResult result;
  kin::FkResult fk;
  for (const Frame& frame : record.frames) {
    kin::JointConfig q = record.scene.q0;
    for (std::size_t a = 0; a < frame.arms.size(); ++a) {
      for (std::size_t c = 0; c < ctx.chains[a].slots.size(); ++c) {
        q[ctx.chains[a].slots[c]] = frame.arms[a].q[c];
      }
    }
    bool fk_done = false;
    for (std::size_t a = 0; a < frame.arms.size(); ++a) {
      if (frame.arms[a].phase != diffik::Phase::transport) continue;
      if (!fk_done) {
        kin::forward_kinematics(ctx.model, q, fk, false);
        fk_done = true;
      }
      const GraspBlock& g = record.grasps[a];
      const geom::Pose ee_world = ctx.spec.robot.base_pose * fk.link_pose[ctx.model.link_id(ctx.chains[a].frame)];
      const geom::Pose object_check = ee_world * g.tcp_from_grasp.inverse() * g.grasp_pose.inverse();
      for (const auto& [part, pose] : frame.parts) {
        if (part != g.part_id) continue;
        const auto [pos_err, rot_err] = geom::pose_error(object_check, pose);
        result.max_pos_err = std::max(result.max_pos_err, pos_err);
        result.max_rot_err = std::max(result.max_rot_err, rot_err);
        result.transport_frames += 1;
      }
    }
  }
  return result;
}

// --- batch generation ---------------------------------------------------------

inline std::string demo_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "demo_%06d.jsonl", index);
  return buf;
}

inline std::string render_file_name(int index) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "demo_%06d.render.json", index);
  return buf;
}

/// Generates demos with a worker pool until n_demos successes exist in the
/// index prefix (capped at 10x attempts), then writes the dataset:
/// manifest.json, demo_*.jsonl, demo_*.render.json, stats.json. Outcomes
/// are pure functions of (spec, index), and the emitted prefix is decided
/// deterministically, so dataset content is byte-identical for any worker
/// count; only stats.json (timing) varies.
inline BatchStats generate_batch(const TaskContext& ctx, const std::string& out_dir, int workers,
                                 bool only_success = false) {
  if (workers < 1) throw Error(ErrorKind::InvalidArgument, "workers must be >= 1");
  const auto start_time = std::chrono::steady_clock::now();

  const int target = ctx.spec.n_demos;
  const int max_attempts = target == 0 ? 0 : std::max(10 * target, 64);

  std::vector<std::optional<DemoRecord>> results(static_cast<std::size_t>(max_attempts));
  std::atomic<int> next{0};
  std::atomic<bool> stop{false};
  std::mutex frontier_mutex;
  int frontier = 0;
  int frontier_successes = 0;

  auto worker_loop = [&]() {
    for (;;) {
      if (stop.load(std::memory_order_relaxed)) return;
      const int index = next.fetch_add(1);
      if (index >= max_attempts) return;
      DemoRecord record = generate_demo(ctx, index);

      std::lock_guard<std::mutex> lock(frontier_mutex);
      results[static_cast<std::size_t>(index)] = std::move(record);
      while (frontier < max_attempts && results[static_cast<std::size_t>(frontier)].has_value()) {
        if (results[static_cast<std::size_t>(frontier)]->success) ++frontier_successes;
        ++frontier;
        if (frontier_successes >= target) {
          stop.store(true, std::memory_order_relaxed);
          return;
        }
      }
    }
  };

  if (max_attempts > 0) {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_loop);
    for (auto& t : pool) t.join();
  }

  // The emitted prefix: smallest N whose records contain `target`
  // successes, else everything attempted.
  int n_emit = 0;
  int successes = 0;
  while (n_emit < max_attempts && results[static_cast<std::size_t>(n_emit)].has_value()) {
    if (results[static_cast<std::size_t>(n_emit)]->success) ++successes;
    ++n_emit;
    if (successes >= target) break;
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create '" + out_dir + "': " + ec.message());

  BatchStats stats;
  stats.workers = workers;
  stats.attempted = n_emit;
  for (int i = 0; i < n_emit; ++i) {
    const DemoRecord& record = *results[static_cast<std::size_t>(i)];
    if (record.success) {
      stats.succeeded += 1;
    } else {
      stats.failure_counts[record.failure_reason] += 1;
    }
    if (only_success && !record.success) continue;
    const auto path = std::filesystem::path(out_dir) / demo_file_name(i);
    io::write_file_atomic(path.string(), record_to_jsonl(record));
    if (record.success) {
      const auto render_path = std::filesystem::path(out_dir) / render_file_name(i);
      io::write_file_atomic(render_path.string(), render_manifest_to_json(export_render_manifest(record, ctx)));
    }
  }

  json manifest;
  manifest["format"] = "demoforge.dataset/1";
  manifest["task"] = ctx.spec.name;
  manifest["n_demos"] = target;
  manifest["attempted"] = stats.attempted;
  manifest["succeeded"] = stats.succeeded;
  manifest["failure_counts"] = stats.failure_counts;
  manifest["only_success"] = only_success;
  manifest["resolved_config"] = resolved_toml(ctx.spec);
  io::write_file_atomic((std::filesystem::path(out_dir) / "manifest.json").string(), manifest.dump(1) + "\n");

  const auto end_time = std::chrono::steady_clock::now();
  stats.wall_time_s = std::chrono::duration<double>(end_time - start_time).count();
  stats.demos_per_min = stats.wall_time_s > 0.0 ? 60.0 * stats.succeeded / stats.wall_time_s : 0.0;

  json stats_json;
  stats_json["wall_time_s"] = stats.wall_time_s;
  stats_json["demos_per_min"] = stats.demos_per_min;
  stats_json["workers"] = workers;
  io::write_file_atomic((std::filesystem::path(out_dir) / "stats.json").string(), stats_json.dump(1) + "\n");
  return stats;
}

}  // namespace demoforge::pipeline
