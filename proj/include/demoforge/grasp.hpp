#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "demoforge/error.hpp"
#include "demoforge/geom.hpp"
#include "demoforge/retarget.hpp"
#include "demoforge/rng.hpp"

namespace demoforge::grasp {

/// Oriented point set standing in for the object surface, part frame.
/// Normals point outward. contact_radius is the cylinder radius used when
/// searching for opposing contacts (the voxel size the surface was built at).
struct ContactSurface {
  std::vector<geom::Vec3> points;
  std::vector<geom::Vec3> normals;
  double contact_radius = 0.005;

  std::size_t size() const { return points.size(); }

  geom::Vec3 centroid() const {
    geom::Vec3 c = geom::Vec3::Zero();
    for (const auto& p : points) c += p;
    return c / static_cast<double>(points.size());
  }

  /// Radius of the bounding sphere around the centroid; used as the
  /// occupancy footprint of static parts.
  double bounding_radius() const {
    const geom::Vec3 c = centroid();
    double r = 0.0;
    for (const auto& p : points) r = std::max(r, (p - c).norm());
    return r;
  }
};

struct GripperSpec {
  double max_opening = 0.08;  // m
  double min_opening = 0.0;
  double finger_depth = 0.04;
  geom::Pose tcp_from_grasp;  // grasp frame -> end-effector target

  void validate() const {
    if (!(min_opening >= 0.0 && min_opening < max_opening)) {
      throw Error(ErrorKind::InvalidArgument, "gripper openings must satisfy 0 <= min < max");
    }
  }
};

/// Parallel-jaw grasp: two contacts, the jaw axis between them, and a
/// right-handed frame with x along the axis and z the approach direction.
struct GraspCandidate {
  geom::Vec3 c1 = geom::Vec3::Zero();
  geom::Vec3 c2 = geom::Vec3::Zero();
  geom::Vec3 axis = geom::Vec3::UnitX();
  double width = 0.0;
  geom::Pose grasp_pose;  // part frame
  double quality = 0.0;   // normalized friction-cone margin in [0, 1]
};

struct HandFrame {
  double t = 0.0;
  geom::Vec3 index_tip = geom::Vec3::Zero();
  geom::Vec3 thumb_tip = geom::Vec3::Zero();
};

struct HandTrack {
  std::string hand_id;  // "left" or "right"
  std::vector<HandFrame> frames;

  void validate() const {
    if (frames.empty()) throw Error(ErrorKind::InvalidArgument, "hand track '" + hand_id + "' is empty");
    for (std::size_t i = 1; i < frames.size(); ++i) {
      if (frames[i].t <= frames[i - 1].t) {
        throw Error(ErrorKind::InvalidArgument, "hand track '" + hand_id + "' timestamps not strictly increasing");
      }
    }
  }
};

struct SurfaceParams {
  int normal_k = 12;        // neighbors for the local plane fit
  double voxel = 0.0;       // downsampling cell edge, m; 0 keeps all points
  int smoothing_iters = 0;  // neighborhood-mean smoothing passes
};

namespace detail {

inline std::vector<int> k_nearest(const std::vector<geom::Vec3>& pts, int self, int k) {
  std::vector<std::pair<double, int>> dist;
  dist.reserve(pts.size() - 1);
  for (int j = 0; j < static_cast<int>(pts.size()); ++j) {
    if (j == self) continue;
    dist.emplace_back((pts[j] - pts[self]).squaredNorm(), j);
  }
  const int take = std::min<int>(k, static_cast<int>(dist.size()));
  std::partial_sort(dist.begin(), dist.begin() + take, dist.end());
  std::vector<int> out(take);
  for (int i = 0; i < take; ++i) out[i] = dist[i].second;
  return out;
}

}  // namespace detail

/// Builds an oriented contact surface from a raw point set: voxel
/// downsampling, optional neighborhood smoothing, PCA plane-fit normals
/// over normal_k neighbors, oriented outward from the centroid. Points
/// whose neighborhood is rank-deficient are dropped; if that leaves
/// nothing, the cloud is degenerate.
inline ContactSurface build_surface(const std::vector<geom::Vec3>& raw, const SurfaceParams& params) {
  if (static_cast<int>(raw.size()) < params.normal_k + 1) {
    throw Error(ErrorKind::InvalidArgument, "need at least normal_k + 1 points");
  }

  std::vector<geom::Vec3> pts;
  if (params.voxel > 0.0) {
    // Cell-centroid downsampling; cells ordered lexicographically so the
    // result does not depend on input order.
    std::map<std::array<std::int64_t, 3>, std::pair<geom::Vec3, int>> cells;
    for (const auto& p : raw) {
      const std::array<std::int64_t, 3> key = {static_cast<std::int64_t>(std::floor(p.x() / params.voxel)),
                                               static_cast<std::int64_t>(std::floor(p.y() / params.voxel)),
                                               static_cast<std::int64_t>(std::floor(p.z() / params.voxel))};
      auto& cell = cells[key];
      cell.first += p;
      cell.second += 1;
    }
    pts.reserve(cells.size());
    for (const auto& [key, cell] : cells) {
      (void)key;
      pts.push_back(cell.first / static_cast<double>(cell.second));
    }
  } else {
    pts = raw;
  }

  const int k = std::min<int>(params.normal_k, static_cast<int>(pts.size()) - 1);
  if (k < 2) throw Error(ErrorKind::DegenerateCloud, "too few points after downsampling");

  std::vector<std::vector<int>> neighbors(pts.size());
  for (int i = 0; i < static_cast<int>(pts.size()); ++i) neighbors[i] = detail::k_nearest(pts, i, k);

  for (int iter = 0; iter < params.smoothing_iters; ++iter) {
    std::vector<geom::Vec3> smoothed(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      geom::Vec3 acc = pts[i];
      for (int j : neighbors[i]) acc += pts[j];
      smoothed[i] = acc / static_cast<double>(neighbors[i].size() + 1);
    }
    pts.swap(smoothed);
  }

  geom::Vec3 centroid = geom::Vec3::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());

  ContactSurface surface;
  surface.contact_radius = params.voxel > 0.0 ? params.voxel : 0.005;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    geom::Vec3 mean = pts[i];
    for (int j : neighbors[i]) mean += pts[j];
    mean /= static_cast<double>(neighbors[i].size() + 1);

    geom::Mat3 cov = geom::Mat3::Zero();
    {
      geom::Vec3 d = pts[i] - mean;
      cov += d * d.transpose();
    }
    for (int j : neighbors[i]) {
      geom::Vec3 d = pts[j] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<geom::Mat3> eig(cov);
    const geom::Vec3 evals = eig.eigenvalues();  // ascending
    // rank < 2: the neighborhood is a point or a line, no plane to fit.
    if (evals[2] <= 0.0 || evals[1] <= 1e-9 * evals[2]) continue;

    geom::Vec3 n = eig.eigenvectors().col(0);
    const double outward = n.dot(pts[i] - centroid);
    if (outward < -1e-12) {
      n = -n;
    } else if (outward <= 1e-12) {
      // On-centroid tie (e.g. a flat sheet): pick the canonical sign so
      // the whole surface agrees.
      if (n.z() < 0.0 || (n.z() == 0.0 && (n.y() < 0.0 || (n.y() == 0.0 && n.x() < 0.0)))) n = -n;
    }
    surface.points.push_back(pts[i]);
    surface.normals.push_back(n.normalized());
  }
  if (surface.points.empty()) {
    throw Error(ErrorKind::DegenerateCloud, "every local neighborhood has rank < 2");
  }
  return surface;
}

/// Friction-cone angles of a contact pair: the grasp axis measured against
/// the inward (grasping force) direction at each contact, i.e. angle(-n1,
/// c2-c1) and angle(-n2, c1-c2). Both within atan(mu) means force closure
/// for a parallel jaw. Symmetric under swapping the contacts.
inline std::pair<double, double> antipodal_angles(const geom::Vec3& c1, const geom::Vec3& n1, const geom::Vec3& c2,
                                                  const geom::Vec3& n2) {
  const geom::Vec3 axis = (c2 - c1).normalized();
  auto angle_between = [](const geom::Vec3& a, const geom::Vec3& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
  };
  return {angle_between(-n1, axis), angle_between(-n2, -axis)};
}

inline bool is_antipodal(const geom::Vec3& c1, const geom::Vec3& n1, const geom::Vec3& c2, const geom::Vec3& n2,
                         double mu) {
  const auto [a1, a2] = antipodal_angles(c1, n1, c2, n2);
  return std::max(a1, a2) <= std::atan(mu);
}

/// One sampler decision, for auditing against a brute-force predicate.
struct SampleDecision {
  int i1 = -1;       // sampled surface point
  int i2 = -1;       // opposing point found by the ray march, -1 if none
  bool accepted = false;
};

namespace detail {

/// Grasp frame: x along the jaw axis, z the approach direction chosen
/// closest to straight-down (tabletop top grasp), horizontal fallback when
/// the axis itself is vertical.
inline geom::Pose make_grasp_frame(const geom::Vec3& c1, const geom::Vec3& c2) {
  const geom::Vec3 x = (c2 - c1).normalized();
  geom::Vec3 z;
  const geom::Vec3 down(0.0, 0.0, -1.0);
  geom::Vec3 proj = down - down.dot(x) * x;
  if (proj.norm() > 1e-6) {
    z = proj.normalized();
  } else {
    proj = geom::Vec3::UnitX() - geom::Vec3::UnitX().dot(x) * x;
    if (proj.norm() <= 1e-6) proj = geom::Vec3::UnitY() - geom::Vec3::UnitY().dot(x) * x;
    z = proj.normalized();
  }
  const geom::Vec3 y = z.cross(x);
  geom::Mat3 rot;
  rot.col(0) = x;
  rot.col(1) = y;
  rot.col(2) = z;
  return geom::Pose{0.5 * (c1 + c2), geom::Quat::from_rotation_matrix(rot)};
}

}  // namespace detail

/// Analytic antipodal sampling over the contact surface: draw a contact,
/// march a thin cylinder along its inward normal to the farthest opposing
/// point, keep pairs that satisfy the friction-cone test and the jaw
/// limits. Quality is 1 - max(angle)/atan(mu). Result is sorted by quality,
/// stable, deduplicated by contact pair; `decisions` (optional) records
/// every evaluated pair for oracle comparison.
inline std::vector<GraspCandidate> sample_antipodal(const ContactSurface& surface, const GripperSpec& gripper,
                                                    double mu, int n_samples, rnd::Rng& rng,
                                                    std::vector<SampleDecision>* decisions = nullptr) {
  gripper.validate();
  if (mu <= 0.0) throw Error(ErrorKind::InvalidArgument, "friction coefficient must be positive");
  if (n_samples < 1) throw Error(ErrorKind::InvalidArgument, "n_samples must be >= 1");
  if (surface.points.empty()) return {};

  const double cone = std::atan(mu);
  const double r_cyl = surface.contact_radius;
  std::vector<GraspCandidate> out;
  std::set<std::pair<int, int>> seen;

  for (int s = 0; s < n_samples; ++s) {
    const int i1 = static_cast<int>(rng.uniform_index(surface.size()));
    const geom::Vec3& p1 = surface.points[i1];
    const geom::Vec3 dir = -surface.normals[i1];  // march into the object

    int best = -1;
    double best_depth = 2.0 * r_cyl;  // opposing contact must clear the fingertip pad
    for (int j = 0; j < static_cast<int>(surface.size()); ++j) {
      if (j == i1) continue;
      const geom::Vec3 v = surface.points[j] - p1;
      const double depth = v.dot(dir);
      if (depth <= best_depth) continue;
      if ((v - depth * dir).norm() > r_cyl) continue;
      best = j;
      best_depth = depth;
    }

    SampleDecision dec;
    dec.i1 = i1;
    dec.i2 = best;
    if (best >= 0) {
      const geom::Vec3& p2 = surface.points[best];
      const double width = (p2 - p1).norm();
      const auto [a1, a2] = antipodal_angles(p1, surface.normals[i1], p2, surface.normals[best]);
      dec.accepted = width >= gripper.min_opening && width <= gripper.max_opening && std::max(a1, a2) <= cone;
      if (dec.accepted) {
        const auto key = std::minmax(i1, best);
        if (seen.insert({key.first, key.second}).second) {
          GraspCandidate cand;
          cand.c1 = p1;
          cand.c2 = p2;
          cand.axis = (p2 - p1) / width;
          cand.width = width;
          cand.quality = 1.0 - std::max(a1, a2) / cone;
          cand.grasp_pose = detail::make_grasp_frame(p1, p2);
          out.push_back(cand);
        }
      }
    }
    if (decisions) decisions->push_back(dec);
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const GraspCandidate& a, const GraspCandidate& b) { return a.quality > b.quality; });
  return out;
}

/// Centroid track of one part over time.
struct CentroidTrack {
  std::vector<std::pair<double, geom::Vec3>> samples;  // (t, centroid)

  geom::Vec3 at(double t) const {
    if (t <= samples.front().first) return samples.front().second;
    if (t >= samples.back().first) return samples.back().second;
    auto it = std::upper_bound(samples.begin(), samples.end(), t,
                               [](double v, const auto& s) { return v < s.first; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double u = (t - lo.first) / (hi.first - lo.first);
    return lo.second + u * (hi.second - lo.second);
  }
};

struct Association {
  std::string part_id;
  double aggregate_distance = 0.0;
  bool tie = false;  // argmin shared by several parts; lexicographic winner kept
};

/// Picks the part a hand is grasping: the one with the minimum aggregate
/// fingertip-to-centroid distance over the hand's frames (sum over frames
/// of the mean of the two fingertip distances, centroids interpolated at
/// the hand timestamps). Ties go to the lexicographically first part id.
inline Association associate_grasped_part(const HandTrack& hand,
                                          const std::map<std::string, CentroidTrack>& part_centroids) {
  hand.validate();
  if (part_centroids.empty()) throw Error(ErrorKind::InvalidArgument, "no part centroid tracks given");

  double t_lo = hand.frames.front().t;
  double t_hi = hand.frames.back().t;
  for (const auto& [id, track] : part_centroids) {
    (void)id;
    t_lo = std::max(t_lo, track.samples.front().first);
    t_hi = std::min(t_hi, track.samples.back().first);
  }
  std::vector<const HandFrame*> overlap;
  for (const HandFrame& f : hand.frames) {
    if (f.t >= t_lo - 1e-12 && f.t <= t_hi + 1e-12) overlap.push_back(&f);
  }
  if (overlap.empty()) {
    throw Error(ErrorKind::NoTemporalOverlap, "hand track and part centroids share no time range");
  }

  Association best;
  bool first = true;
  for (const auto& [id, track] : part_centroids) {
    double aggregate = 0.0;
    for (const HandFrame* f : overlap) {
      const geom::Vec3 c = track.at(f->t);
      aggregate += 0.5 * ((f->index_tip - c).norm() + (f->thumb_tip - c).norm());
    }
    if (first || aggregate < best.aggregate_distance) {
      best.part_id = id;
      best.aggregate_distance = aggregate;
      best.tie = false;
      first = false;
    } else if (aggregate == best.aggregate_distance) {
      best.tie = true;  // map iteration is ordered, so the first id wins
    }
  }
  return best;
}

struct GraspWindowParams {
  double v_eps = 0.005;  // m/s; below this the part counts as static
  int pad = 2;           // frames of slack on both sides
};

/// Finds when the part is being moved: forward-difference speeds crossing
/// v_eps, padded and clamped to the trajectory range. The object must hold
/// still before t_grasp and after t_release aside from the pad slack.
inline std::pair<double, double> detect_grasp_window(const retarget::PartTrajectory& traj,
                                                     const GraspWindowParams& params) {
  traj.validate();
  if (traj.size() < 3) throw Error(ErrorKind::InvalidArgument, "grasp window needs at least 3 waypoints");

  int first = -1, last = -1;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const double dt = traj.waypoints[i + 1].t - traj.waypoints[i].t;
    const double speed = (traj.waypoints[i + 1].pose.position - traj.waypoints[i].pose.position).norm() / dt;
    if (speed > params.v_eps) {
      if (first < 0) first = static_cast<int>(i);
      last = static_cast<int>(i);
    }
  }
  if (first < 0) throw Error(ErrorKind::NoMotionDetected, "part never exceeds v_eps");

  const int n = static_cast<int>(traj.size());
  const int i_grasp = std::max(0, first - params.pad);
  const int i_release = std::min(n - 1, last + 1 + params.pad);
  return {traj.waypoints[i_grasp].t, traj.waypoints[i_release].t};
}

/// Reachability check for one grasp at one object pose; wired up by the
/// solver module so grasp selection stays solver-agnostic here.
using FeasibilityProbe = std::function<bool(const GraspCandidate&, const geom::Pose& object_pose)>;

/// Highest-quality candidate whose grasp frame is reachable at the start,
/// middle, and end of the object trajectory.
inline GraspCandidate select_grasp(const std::vector<GraspCandidate>& candidates,
                                   const retarget::PartTrajectory& object_traj, const FeasibilityProbe& probe,
                                   std::size_t* picked_index = nullptr) {
  if (candidates.empty()) throw Error(ErrorKind::NoFeasibleGrasp, "no grasp candidates to select from");
  object_traj.validate();
  const geom::Pose start = object_traj.waypoints.front().pose;
  const geom::Pose mid = object_traj.waypoints[object_traj.size() / 2].pose;
  const geom::Pose end = object_traj.waypoints.back().pose;

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const GraspCandidate& cand = candidates[i];
    if (probe(cand, start) && probe(cand, mid) && probe(cand, end)) {
      if (picked_index) *picked_index = i;
      return cand;
    }
  }
  throw Error(ErrorKind::NoFeasibleGrasp, "no candidate passed the reachability probes");
}

}  // namespace demoforge::grasp
