#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "demoforge/error.hpp"
#include "demoforge/geom.hpp"
#include "demoforge/retarget.hpp"
#include "demoforge/rng.hpp"
#include "demoforge/urdf.hpp"

namespace demoforge::rnd {

/// Bounds for every randomized scene parameter. Ranges are inclusive
/// [lo, hi]; maxima are hard caps the draws never exceed.
struct RandomizationConfig {
  double cam_trans_max = 0.02;    // m
  double cam_rot_max = 0.0873;    // rad, ~5 deg
  std::array<std::int64_t, 2> light_count{1, 3};
  std::array<double, 2> light_intensity{600.0, 1800.0};    // arbitrary units
  std::array<double, 2> light_color_temp{3500.0, 6500.0};  // Kelvin
  std::array<double, 2> light_radius{0.8, 1.6};            // m from the workspace center
  retarget::Workspace workspace;                           // object initialization region
  double d_min = 0.10;            // min start-to-goal horizontal distance, m
  double q0_perturbation = 0.05;  // rad/m, per-joint uniform half-width
  std::uint64_t master_seed = 0;

  void validate() const {
    auto range_ok = [](auto lo, auto hi) { return lo <= hi; };
    if (cam_trans_max < 0.0 || cam_rot_max < 0.0 || q0_perturbation < 0.0 ||
        !range_ok(light_count[0], light_count[1]) || light_count[0] < 0 ||
        !range_ok(light_intensity[0], light_intensity[1]) ||
        !range_ok(light_color_temp[0], light_color_temp[1]) ||
        !range_ok(light_radius[0], light_radius[1])) {
      throw Error(ErrorKind::InvalidArgument, "randomization ranges must satisfy lo <= hi with maxima >= 0");
    }
    workspace.validate();
  }
};

struct Light {
  geom::Vec3 position = geom::Vec3::Zero();
  double intensity = 0.0;
  double color_temp = 0.0;
};

/// All randomized parameters for one demo, fully determined by
/// (config, demo_index).
struct SceneDraw {
  std::vector<geom::Pose> camera_poses;
  std::vector<Light> lights;
  std::vector<std::pair<std::string, geom::Pose>> object_inits;
  kin::JointConfig q0;
  std::uint64_t seed = 0;
};

/// Perturbs a nominal camera pose: translation uniform in the ball of
/// radius cam_trans_max, rotation with uniform axis and angle uniform in
/// [0, cam_rot_max]. Zero maxima return the nominal pose bit-exactly.
inline geom::Pose sample_camera_perturbation(Rng& rng, const geom::Pose& nominal, const RandomizationConfig& cfg) {
  geom::Pose out = nominal;
  if (cfg.cam_trans_max > 0.0) {
    out.position += rng.in_ball(cfg.cam_trans_max);
  }
  if (cfg.cam_rot_max > 0.0) {
    out.orientation = (rng.rotation_in_cone(cfg.cam_rot_max) * nominal.orientation).normalized();
  }
  return out;
}

/// The moving part whose initial pose gets resampled; static parts keep
/// their pinned poses.
struct ObjectInitSpec {
  std::string part_id;
  geom::Quat base_orientation;  // demo start orientation the yaw composes onto
  double rest_z_offset = 0.0;
};

// Sub-stream ids; draws stay reproducible if one category adds more draws.
namespace stream {
constexpr std::uint64_t kCameras = 0x11;
constexpr std::uint64_t kLights = 0x22;
constexpr std::uint64_t kObjects = 0x33;
constexpr std::uint64_t kJoints = 0x44;
}  // namespace stream

/// Draws every randomized parameter for one demo. Deterministic in
/// (cfg.master_seed, demo_index) and independent of worker scheduling:
/// each category uses its own counter-based sub-stream.
inline SceneDraw draw_scene(const RandomizationConfig& cfg, const std::vector<geom::Pose>& nominal_cameras,
                            const geom::Pose& goal_pose, const std::vector<retarget::OccupiedDisk>& occupied,
                            std::uint64_t demo_index, const kin::KinematicModel& model,
                            const kin::JointConfig& nominal_q0, const std::vector<ObjectInitSpec>& moving_parts,
                            const std::vector<std::pair<std::string, geom::Pose>>& static_parts) {
  cfg.validate();
  SceneDraw draw;
  draw.seed = derive_seed(cfg.master_seed, demo_index);
  const Rng base(draw.seed);

  Rng cam_rng = base.split(stream::kCameras);
  draw.camera_poses.reserve(nominal_cameras.size());
  for (const geom::Pose& nominal : nominal_cameras) {
    draw.camera_poses.push_back(sample_camera_perturbation(cam_rng, nominal, cfg));
  }

  Rng light_rng = base.split(stream::kLights);
  const std::int64_t n_lights = light_rng.uniform_int(cfg.light_count[0], cfg.light_count[1]);
  const geom::Vec3 scene_center(cfg.workspace.center().x(), cfg.workspace.center().y(), cfg.workspace.table_height);
  for (std::int64_t i = 0; i < n_lights; ++i) {
    Light light;
    geom::Vec3 dir = light_rng.unit_vector();
    if (dir.z() < 0.0) dir.z() = -dir.z();  // upper hemisphere
    light.position = scene_center + light_rng.uniform(cfg.light_radius[0], cfg.light_radius[1]) * dir;
    light.intensity = light_rng.uniform(cfg.light_intensity[0], cfg.light_intensity[1]);
    light.color_temp = light_rng.uniform(cfg.light_color_temp[0], cfg.light_color_temp[1]);
    draw.lights.push_back(light);
  }

  Rng object_rng = base.split(stream::kObjects);
  for (const ObjectInitSpec& part : moving_parts) {
    retarget::InitialPoseParams params;
    params.d_min = cfg.d_min;
    params.rest_z_offset = part.rest_z_offset;
    params.base_orientation = part.base_orientation;
    draw.object_inits.emplace_back(
        part.part_id, retarget::sample_initial_pose(cfg.workspace, goal_pose, occupied, object_rng, params));
  }
  for (const auto& pinned : static_parts) draw.object_inits.push_back(pinned);

  Rng joint_rng = base.split(stream::kJoints);
  draw.q0 = nominal_q0;
  for (int s = 0; s < model.dof(); ++s) {
    const kin::Joint& j = model.actuated_joint(s);
    const double perturbed = draw.q0[s] + joint_rng.uniform(-cfg.q0_perturbation, cfg.q0_perturbation);
    draw.q0[s] = std::clamp(perturbed, j.lower, j.upper);
  }
  return draw;
}

}  // namespace demoforge::rnd
