#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <map>
#include <string>
#include <vector>

#include "demoforge/geom.hpp"
#include "demoforge/rng.hpp"
#include "demoforge/urdf.hpp"

namespace testutil {

using namespace demoforge;

/// Serial chain with randomized joint types, axes, and origins; 'tool'
/// is a fixed tip link past the last joint.
inline kin::KinematicModel random_chain_model(rnd::Rng& rng, int n_joints, bool with_mimic = false) {
  kin::KinematicModel model;
  model.links.push_back("base");
  for (int i = 0; i < n_joints; ++i) model.links.push_back("link" + std::to_string(i + 1));
  model.links.push_back("tool");

  for (int i = 0; i < n_joints; ++i) {
    kin::Joint j;
    j.name = "j" + std::to_string(i + 1);
    j.parent = model.links[i];
    j.child = model.links[i + 1];
    j.type = rng.uniform() < 0.25 ? kin::JointType::prismatic : kin::JointType::revolute;
    j.origin.position = geom::Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(0.05, 0.3));
    j.origin.orientation = geom::Quat::from_axis_angle(rng.unit_vector(), rng.uniform(-M_PI, M_PI));
    j.axis = rng.unit_vector();
    if (j.type == kin::JointType::prismatic) {
      j.lower = -0.4;
      j.upper = 0.4;
      j.velocity = 1.0;
    } else {
      j.lower = -2.8;
      j.upper = 2.8;
      j.velocity = 3.0;
    }
    model.joints.push_back(j);
  }
  {
    kin::Joint tip;
    tip.name = "tool_mount";
    tip.parent = model.links[n_joints];
    tip.child = "tool";
    tip.type = kin::JointType::fixed;
    tip.origin.position = geom::Vec3(0.05, 0.0, 0.12);
    model.joints.push_back(tip);
  }
  if (with_mimic) {
    model.links.push_back("finger_a");
    model.links.push_back("finger_b");
    kin::Joint fa;
    fa.name = "finger_a_joint";
    fa.parent = "tool";
    fa.child = "finger_a";
    fa.type = kin::JointType::prismatic;
    fa.axis = geom::Vec3::UnitY();
    fa.lower = 0.0;
    fa.upper = 0.04;
    fa.velocity = 0.1;
    model.joints.push_back(fa);
    kin::Joint fb = fa;
    fb.name = "finger_b_joint";
    fb.child = "finger_b";
    fb.axis = -geom::Vec3::UnitY();
    fb.mimic = kin::Mimic{"finger_a_joint", 1.0, 0.0};
    model.joints.push_back(fb);
  }
  model.finalize();
  return model;
}

inline kin::JointConfig random_config(rnd::Rng& rng, const kin::KinematicModel& model, double shrink = 0.9) {
  kin::JointConfig q(model.dof());
  for (int s = 0; s < model.dof(); ++s) {
    const kin::Joint& j = model.actuated_joint(s);
    const double mid = 0.5 * (j.lower + j.upper);
    const double half = 0.5 * (j.upper - j.lower) * shrink;
    q[s] = rng.uniform(mid - half, mid + half);
  }
  return q;
}

/// Central finite differences of FK, the independent route the analytic
/// Jacobian is checked against.
inline Eigen::MatrixXd finite_difference_jacobian(const kin::KinematicModel& model, const kin::JointConfig& q,
                                                  const std::string& frame, double h = 1e-6) {
  Eigen::MatrixXd J(6, model.dof());
  for (int s = 0; s < model.dof(); ++s) {
    kin::JointConfig qp = q, qm = q;
    qp[s] += h;
    qm[s] -= h;
    const geom::Pose pp = kin::link_pose(model, qp, frame, false);
    const geom::Pose pm = kin::link_pose(model, qm, frame, false);
    J.block<3, 1>(0, s) = (pp.position - pm.position) / (2.0 * h);
    const geom::Quat dq = (pp.orientation * pm.orientation.inverse()).normalized();
    J.block<3, 1>(3, s) = dq.rotation_vector() / (2.0 * h);
  }
  return J;
}

/// Unit icosphere by subdivision; level 3 gives 642 vertices.
inline std::vector<geom::Vec3> icosphere(int level) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<geom::Vec3> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi},  {0, 1, phi},
      {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                           {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                           {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                           {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back(((verts[a] + verts[b]) * 0.5).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces.swap(next);
  }
  return verts;
}

inline bool models_equal(const kin::KinematicModel& a, const kin::KinematicModel& b, double tol = 1e-12) {
  if (a.links != b.links || a.joints.size() != b.joints.size() || a.root != b.root) return false;
  for (std::size_t i = 0; i < a.joints.size(); ++i) {
    const auto& ja = a.joints[i];
    const auto& jb = b.joints[i];
    if (ja.name != jb.name || ja.type != jb.type || ja.parent != jb.parent || ja.child != jb.child) return false;
    const auto [dp, da] = geom::pose_error(ja.origin, jb.origin);
    if (dp > tol || da > 1e-9) return false;
    if ((ja.axis - jb.axis).norm() > tol) return false;
    if (std::abs(ja.lower - jb.lower) > tol || std::abs(ja.upper - jb.upper) > tol) return false;
    if (std::isfinite(ja.velocity) != std::isfinite(jb.velocity)) return false;
    if (std::isfinite(ja.velocity) && std::abs(ja.velocity - jb.velocity) > tol) return false;
    if (ja.mimic.has_value() != jb.mimic.has_value()) return false;
    if (ja.mimic && (ja.mimic->joint != jb.mimic->joint || std::abs(ja.mimic->multiplier - jb.mimic->multiplier) > tol ||
                     std::abs(ja.mimic->offset - jb.mimic->offset) > tol)) {
      return false;
    }
  }
  return true;
}

}  // namespace testutil
