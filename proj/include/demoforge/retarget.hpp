#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "demoforge/error.hpp"
#include "demoforge/geom.hpp"
#include "demoforge/rng.hpp"

namespace demoforge::retarget {

struct Waypoint {
  double t = 0.0;  // seconds
  geom::Pose pose;
};

/// Timestamped pose track of one rigid object part.
struct PartTrajectory {
  std::string part_id;
  std::vector<Waypoint> waypoints;

  std::size_t size() const { return waypoints.size(); }
  double t_first() const { return waypoints.front().t; }
  double t_last() const { return waypoints.back().t; }

  void validate() const {
    if (waypoints.size() < 2) {
      throw Error(ErrorKind::InvalidArgument, "trajectory '" + part_id + "' needs at least 2 waypoints");
    }
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
      if (waypoints[i].t <= waypoints[i - 1].t) {
        throw Error(ErrorKind::InvalidArgument, "trajectory '" + part_id + "' timestamps not strictly increasing");
      }
    }
  }

  /// Pose at time t: piecewise-linear position, per-segment slerp
  /// orientation, clamped at the ends.
  geom::Pose sample(double t) const {
    if (t <= waypoints.front().t) return waypoints.front().pose;
    if (t >= waypoints.back().t) return waypoints.back().pose;
    auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                               [](double v, const Waypoint& w) { return v < w.t; });
    const Waypoint& hi = *it;
    const Waypoint& lo = *(it - 1);
    const double s = (t - lo.t) / (hi.t - lo.t);
    return geom::pose_interpolate(lo.pose, hi.pose, s);
  }
};

/// Axis-aligned sampling region on the table, in the table frame.
struct Workspace {
  geom::Vec3 aabb_min = geom::Vec3(0.2, -0.3, 0.0);
  geom::Vec3 aabb_max = geom::Vec3(0.7, 0.3, 0.4);
  double table_height = 0.0;
  double yaw_range = M_PI;  // half-width; sampled yaw is uniform in +-yaw_range

  void validate() const {
    if (!(aabb_min.x() < aabb_max.x() && aabb_min.y() < aabb_max.y() && aabb_min.z() < aabb_max.z())) {
      throw Error(ErrorKind::InvalidArgument, "workspace aabb min must be below max componentwise");
    }
  }

  double diagonal() const { return (aabb_max - aabb_min).norm(); }
  geom::Vec3 center() const { return 0.5 * (aabb_min + aabb_max); }
};

/// Resamples onto T_out uniformly spaced timestamps over the same span.
/// Endpoint waypoints are copied, not interpolated.
inline PartTrajectory resample_uniform(const PartTrajectory& traj, std::size_t t_out) {
  traj.validate();
  if (t_out < 2) throw Error(ErrorKind::InvalidArgument, "resample needs T_out >= 2");
  PartTrajectory out;
  out.part_id = traj.part_id;
  out.waypoints.reserve(t_out);
  const double t0 = traj.t_first();
  const double span = traj.t_last() - t0;
  for (std::size_t k = 0; k < t_out; ++k) {
    if (k == 0) {
      out.waypoints.push_back(traj.waypoints.front());
      continue;
    }
    if (k == t_out - 1) {
      Waypoint w = traj.waypoints.back();
      w.t = t0 + span;
      out.waypoints.push_back(w);
      continue;
    }
    const double t = t0 + span * static_cast<double>(k) / static_cast<double>(t_out - 1);
    out.waypoints.push_back(Waypoint{t, traj.sample(t)});
  }
  return out;
}

/// Adapts the demonstrated trajectory to new endpoint poses.
///
/// Translation: the track is split into a straight baseline between the
/// endpoints and residuals around it; residuals transfer to the new
/// baseline through a yaw-plus-horizontal-scale similarity that aligns the
/// horizontal endpoint displacement, with z residuals kept as-is (tabletop
/// tasks; gravity stays vertical). Orientation: the start and end delta
/// rotations are slerped over normalized time and composed onto the
/// original keyframes, so interior orientation detail survives.
/// Identity endpoints reproduce the input.
inline PartTrajectory retarget_trajectory(const PartTrajectory& traj, const geom::Pose& new_start,
                                          const geom::Pose& new_end) {
  traj.validate();
  constexpr double kCoincident = 1e-6;

  const geom::Vec3 p0 = traj.waypoints.front().pose.position;
  const geom::Vec3 pN = traj.waypoints.back().pose.position;
  const geom::Vec3 d = pN - p0;
  const geom::Vec3 d_new = new_end.position - new_start.position;

  if (d.norm() <= kCoincident && d_new.norm() > kCoincident) {
    throw Error(ErrorKind::DegenerateEndpoints,
                "original endpoints coincide; cannot map onto separated targets");
  }

  // Horizontal residual similarity. Degenerate horizontal displacement
  // (pure vertical motion) falls back to the identity mapping.
  double yaw = 0.0;
  double scale = 1.0;
  const Eigen::Vector2d dxy(d.x(), d.y());
  const Eigen::Vector2d dxy_new(d_new.x(), d_new.y());
  if (dxy.norm() > kCoincident && dxy_new.norm() > kCoincident) {
    yaw = std::atan2(dxy_new.y(), dxy_new.x()) - std::atan2(dxy.y(), dxy.x());
    scale = dxy_new.norm() / dxy.norm();
  }
  const double cy = std::cos(yaw);
  const double sy = std::sin(yaw);

  const geom::Quat q0 = traj.waypoints.front().pose.orientation;
  const geom::Quat qN = traj.waypoints.back().pose.orientation;
  const geom::Quat delta_start = (new_start.orientation * q0.inverse()).normalized();
  const geom::Quat delta_end = (new_end.orientation * qN.inverse()).normalized();

  const double t0 = traj.t_first();
  const double span = traj.t_last() - t0;

  PartTrajectory out;
  out.part_id = traj.part_id;
  out.waypoints.reserve(traj.size());
  for (const Waypoint& w : traj.waypoints) {
    const double s = (w.t - t0) / span;
    const geom::Vec3 baseline = p0 + s * d;
    const geom::Vec3 r = w.pose.position - baseline;
    const geom::Vec3 r_mapped(scale * (cy * r.x() - sy * r.y()), scale * (sy * r.x() + cy * r.y()), r.z());
    const geom::Vec3 p = new_start.position + s * d_new + r_mapped;
    const geom::Quat q = (geom::quat_slerp(delta_start, delta_end, s) * w.pose.orientation).normalized();
    out.waypoints.push_back(Waypoint{w.t, geom::Pose{p, q}});
  }
  return out;
}

struct InitialPoseParams {
  double d_min = 0.0;        // min horizontal distance to the goal, m
  int max_tries = 10000;
  double rest_z_offset = 0.0;  // object rest height above the table
  geom::Quat base_orientation; // sampled yaw composes onto this
};

/// A placement blocker: disk of the given radius around a pose, table plane.
struct OccupiedDisk {
  geom::Pose pose;
  double radius = 0.0;
};

namespace detail {

/// Distance from 2D segment ab to point c.
inline double segment_point_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-18) return (c - a).norm();
  const double u = std::clamp((c - a).dot(ab) / len2, 0.0, 1.0);
  return (c - (a + u * ab)).norm();
}

}  // namespace detail

/// Rejection-samples an initial object pose: position uniform in the
/// workspace box, z pinned to the table plus the rest offset, yaw uniform
/// in +-yaw_range; rejects draws whose horizontal distance to the goal is
/// under d_min or whose straight start->goal segment cuts an occupied disk.
/// The distance bias keeps starts away from the goal so the adapted path
/// is unlikely to begin behind it.
inline geom::Pose sample_initial_pose(const Workspace& ws, const geom::Pose& goal,
                                      const std::vector<OccupiedDisk>& occupied, rnd::Rng& rng,
                                      const InitialPoseParams& params) {
  ws.validate();
  if (params.d_min >= ws.diagonal()) {
    throw Error(ErrorKind::SamplingExhausted, "d_min exceeds the workspace diagonal");
  }
  const Eigen::Vector2d goal_xy(goal.position.x(), goal.position.y());
  for (int attempt = 0; attempt < params.max_tries; ++attempt) {
    const double x = rng.uniform(ws.aabb_min.x(), ws.aabb_max.x());
    const double y = rng.uniform(ws.aabb_min.y(), ws.aabb_max.y());
    const double yaw = rng.uniform(-ws.yaw_range, ws.yaw_range);

    const Eigen::Vector2d start_xy(x, y);
    if ((start_xy - goal_xy).norm() < params.d_min) continue;

    bool blocked = false;
    for (const OccupiedDisk& disk : occupied) {
      const Eigen::Vector2d c(disk.pose.position.x(), disk.pose.position.y());
      if (detail::segment_point_distance(start_xy, goal_xy, c) < disk.radius) {
        blocked = true;
        break;
      }
    }
    if (blocked) continue;

    return geom::Pose{geom::Vec3(x, y, ws.table_height + params.rest_z_offset),
                      (geom::yaw_rotation(yaw) * params.base_orientation).normalized()};
  }
  throw Error(ErrorKind::SamplingExhausted,
              "no valid initial pose after " + std::to_string(params.max_tries) + " tries");
}

/// Total polyline length of the position track.
inline double path_length(const PartTrajectory& traj) {
  double len = 0.0;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    len += (traj.waypoints[i].pose.position - traj.waypoints[i - 1].pose.position).norm();
  }
  return len;
}

}  // namespace demoforge::retarget
