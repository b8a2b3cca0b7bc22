#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "demoforge/error.hpp"
#include "demoforge/geom.hpp"
#include "demoforge/grasp.hpp"
#include "demoforge/retarget.hpp"
#include "demoforge/urdf.hpp"

namespace demoforge::diffik {

struct SolverConfig {
  double damping = 1e-2;    // Levenberg lambda on JtJ
  double w_smooth = 1e-3;   // pull toward the previous configuration
  double pos_tol = 1e-3;    // m
  double rot_tol = 8.7e-3;  // rad (0.5 deg)
  int max_iters = 64;
  double dt = 1.0 / 15.0;   // s, demo frame spacing
  double limit_margin = 0.05;  // rad/m; quadratic penalty engages inside this band

  void validate() const {
    if (damping <= 0.0 || dt <= 0.0 || pos_tol <= 0.0 || rot_tol <= 0.0 || max_iters < 1) {
      throw Error(ErrorKind::InvalidArgument, "solver config values must be positive");
    }
  }
};

enum class Phase { pregrasp, grasp_close, transport, release, retreat };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::pregrasp: return "pregrasp";
    case Phase::grasp_close: return "grasp_close";
    case Phase::transport: return "transport";
    case Phase::release: return "release";
    case Phase::retreat: return "retreat";
  }
  return "?";
}

inline std::optional<Phase> phase_from_string(const std::string& s) {
  for (Phase p : {Phase::pregrasp, Phase::grasp_close, Phase::transport, Phase::release, Phase::retreat}) {
    if (s == to_string(p)) return p;
  }
  return std::nullopt;
}

struct PhaseStep {
  double t = 0.0;
  geom::Pose ee_target;
  double gripper = 1.0;  // opening fraction, 1 open .. 0 closed
  Phase phase = Phase::pregrasp;
};

/// End-effector schedule for one arm over a uniform time grid.
struct PhasePlan {
  std::vector<PhaseStep> steps;

  bool empty() const { return steps.empty(); }
  std::size_t size() const { return steps.size(); }
};

struct PhaseParams {
  double standoff = 0.08;          // m, backed off along -approach
  double approach_duration = 1.0;  // s
  double retreat = 0.10;           // m lifted back along the approach axis
  double close_duration = 0.15;    // s of gripper closing dwell
  double release_duration = 0.15;  // s of gripper opening dwell
  double retreat_duration = 0.6;   // s
};

namespace detail {

inline geom::Pose grasp_target(const geom::Pose& object_pose, const grasp::GraspCandidate& g,
                               const geom::Pose& tcp_from_grasp, double back_off) {
  // Back-off is a translation along -z of the grasp frame (the approach
  // axis), applied before the TCP offset.
  const geom::Pose offset{geom::Vec3(0.0, 0.0, -back_off), geom::Quat::identity()};
  return object_pose * g.grasp_pose * offset * tcp_from_grasp;
}

}  // namespace detail

/// Expands (object trajectory, grasp, grasp window) into per-frame EE
/// targets, gripper schedule, and phase labels on the trajectory's uniform
/// grid. The approach interpolates standoff -> grasp pose ending at the
/// window start; a short closing dwell follows (fully closed before the
/// first transport step); from there targets obey the rigid-attachment
/// equation object_pose(t) * grasp_pose * tcp. Release and retreat frames
/// are appended past the trajectory end if the demo stops at t_release.
inline PhasePlan plan_phases(const retarget::PartTrajectory& object_traj, const grasp::GraspCandidate& g,
                             const geom::Pose& tcp_from_grasp, std::pair<double, double> window,
                             const PhaseParams& params) {
  object_traj.validate();
  const auto [t_grasp, t_release] = window;
  if (t_grasp < object_traj.t_first() - 1e-9 || t_release > object_traj.t_last() + 1e-9 || t_grasp >= t_release) {
    throw Error(ErrorKind::WindowOutOfRange, "grasp window must lie inside the trajectory time range");
  }

  const std::size_t n = object_traj.size();
  const double dt = (object_traj.t_last() - object_traj.t_first()) / static_cast<double>(n - 1);
  const double t0 = object_traj.t_first();
  auto index_of = [&](double t) {
    return static_cast<int>(std::clamp<long>(std::lround((t - t0) / dt), 0, static_cast<long>(n - 1)));
  };

  const int i_grasp = index_of(t_grasp);
  const int i_release = index_of(t_release);
  const int n_approach = std::max(1, static_cast<int>(std::lround(params.approach_duration / dt)));
  const int n_close = std::max(1, static_cast<int>(std::lround(params.close_duration / dt)));
  const int n_open = std::max(1, static_cast<int>(std::lround(params.release_duration / dt)));
  const int n_retreat = std::max(1, static_cast<int>(std::lround(params.retreat_duration / dt)));
  const int i_closed = i_grasp + n_close;  // gripper reaches 0 here
  const int i_approach0 = std::max(0, i_grasp - n_approach);

  const geom::Pose grasp_at_ig = detail::grasp_target(object_traj.waypoints[i_grasp].pose, g, tcp_from_grasp, 0.0);
  const geom::Pose standoff_at_ig =
      detail::grasp_target(object_traj.waypoints[i_grasp].pose, g, tcp_from_grasp, params.standoff);

  const int total = std::max<int>(static_cast<int>(n), i_release + n_open + n_retreat + 1);
  const geom::Pose object_final = object_traj.waypoints.back().pose;

  PhasePlan plan;
  plan.steps.reserve(total);
  for (int i = 0; i < total; ++i) {
    PhaseStep step;
    step.t = t0 + dt * i;
    const geom::Pose object_pose = i < static_cast<int>(n) ? object_traj.waypoints[i].pose : object_final;

    if (i <= i_grasp) {
      step.phase = Phase::pregrasp;
      step.gripper = 1.0;
      if (i < i_approach0) {
        step.ee_target = standoff_at_ig;
      } else {
        const double u = i_grasp == i_approach0
                             ? 1.0
                             : static_cast<double>(i - i_approach0) / static_cast<double>(i_grasp - i_approach0);
        step.ee_target = geom::pose_interpolate(standoff_at_ig, grasp_at_ig, u);
      }
    } else if (i <= i_closed && i <= i_release) {
      step.phase = Phase::grasp_close;
      step.gripper = 1.0 - static_cast<double>(i - i_grasp) / static_cast<double>(n_close);
      step.ee_target = detail::grasp_target(object_pose, g, tcp_from_grasp, 0.0);
    } else if (i <= i_release) {
      step.phase = Phase::transport;
      step.gripper = 0.0;
      step.ee_target = detail::grasp_target(object_pose, g, tcp_from_grasp, 0.0);
    } else if (i <= i_release + n_open) {
      step.phase = Phase::release;
      step.gripper = static_cast<double>(i - i_release) / static_cast<double>(n_open);
      step.ee_target = detail::grasp_target(object_pose, g, tcp_from_grasp, 0.0);
    } else {
      step.phase = Phase::retreat;
      step.gripper = 1.0;
      const double u = std::min(1.0, static_cast<double>(i - i_release - n_open) / static_cast<double>(n_retreat));
      step.ee_target = detail::grasp_target(object_pose, g, tcp_from_grasp, u * params.retreat);
    }
    plan.steps.push_back(step);
  }
  return plan;
}

/// One arm of the robot: the end-effector frame plus the actuated config
/// slots on the root -> frame path. Only those slots move when solving.
struct ArmChain {
  std::string frame;
  std::vector<int> slots;
};

inline ArmChain make_chain(const kin::KinematicModel& model, const std::string& frame) {
  ArmChain chain;
  chain.frame = frame;
  for (int ji : kin::chain_to_link(model, frame)) {
    const int slot = model.slot_of_joint[ji];
    if (slot >= 0) chain.slots.push_back(slot);
  }
  return chain;
}

namespace detail {

struct StepOutcome {
  kin::JointConfig q;
  double pos_err = 0.0;
  double rot_err = 0.0;
  int iters = 0;
};

constexpr double kLimitPenaltyWeight = 10.0;

inline double limit_violation(double q, double lo, double hi, double margin) {
  // Signed margin-band intrusion: negative near the lower bound, positive
  // near the upper one, zero in the interior.
  const double v_lo = (lo + margin) - q;
  if (v_lo > 0.0) return -v_lo;
  const double v_up = q - (hi - margin);
  if (v_up > 0.0) return v_up;
  return 0.0;
}

inline StepOutcome solve_step_impl(const kin::KinematicModel& model, const ArmChain& chain,
                                   const kin::JointConfig& q_prev, const geom::Pose& target,
                                   const SolverConfig& cfg) {
  cfg.validate();
  if (q_prev.size() != model.dof()) {
    throw Error(ErrorKind::DimensionMismatch, "q_prev does not match the model's actuated joint count");
  }
  const int n = static_cast<int>(chain.slots.size());
  if (n == 0) {
    throw Error(ErrorKind::InvalidArgument, "arm chain has no actuated joints");
  }

  Eigen::VectorXd lo(n), hi(n), vel(n);
  for (int c = 0; c < n; ++c) {
    const kin::Joint& j = model.actuated_joint(chain.slots[c]);
    lo[c] = j.lower;
    hi[c] = j.upper;
    vel[c] = j.velocity;
  }

  kin::FkResult fk;
  auto ee_error = [&](const kin::JointConfig& q, geom::Vec3& e_pos, geom::Vec3& e_rot) {
    kin::forward_kinematics(model, q, fk, false);
    const geom::Pose& ee = fk.link_pose[model.link_id(chain.frame)];
    e_pos = target.position - ee.position;
    e_rot = (target.orientation * ee.orientation.inverse()).normalized().rotation_vector();
  };

  geom::Vec3 e_pos, e_rot;
  ee_error(q_prev, e_pos, e_rot);
  if (e_pos.norm() <= cfg.pos_tol && e_rot.norm() <= cfg.rot_tol) {
    return {q_prev, e_pos.norm(), e_rot.norm(), 0};  // zero-error short circuit
  }

  auto cost_of = [&](const kin::JointConfig& q, const geom::Vec3& ep, const geom::Vec3& er) {
    double c = ep.squaredNorm() + er.squaredNorm();
    for (int ci = 0; ci < n; ++ci) {
      const double dq = q[chain.slots[ci]] - q_prev[chain.slots[ci]];
      c += cfg.w_smooth * dq * dq;
      const double v = limit_violation(q[chain.slots[ci]], lo[ci], hi[ci], cfg.limit_margin);
      c += kLimitPenaltyWeight * v * v;
    }
    return c;
  };

  kin::JointConfig q = q_prev;
  kin::JointConfig best_q = q_prev;
  geom::Vec3 best_pos = e_pos, best_rot = e_rot;
  double best_cost = cost_of(q, e_pos, e_rot);
  double prev_cost = best_cost;
  int rising = 0;
  int iters = 0;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    iters = iter + 1;
    const Eigen::Matrix<double, 6, Eigen::Dynamic> J_full = kin::jacobian(model, q, chain.frame, &fk);
    Eigen::MatrixXd J(6, n);
    for (int c = 0; c < n; ++c) J.col(c) = J_full.col(chain.slots[c]);

    Eigen::Matrix<double, 6, 1> e;
    e << e_pos, e_rot;

    Eigen::MatrixXd H = J.transpose() * J;
    Eigen::VectorXd grad = J.transpose() * e;
    for (int c = 0; c < n; ++c) {
      H(c, c) += cfg.w_smooth + cfg.damping;
      grad[c] -= cfg.w_smooth * (q[chain.slots[c]] - q_prev[chain.slots[c]]);
      const double v = limit_violation(q[chain.slots[c]], lo[c], hi[c], cfg.limit_margin);
      if (v != 0.0) {
        H(c, c) += detail::kLimitPenaltyWeight;
        grad[c] -= detail::kLimitPenaltyWeight * v;
      }
    }
    const Eigen::VectorXd delta = H.ldlt().solve(grad);

    double moved = 0.0;
    for (int c = 0; c < n; ++c) {
      const int slot = chain.slots[c];
      double next = q[slot] + delta[c];
      next = std::clamp(next, lo[c], hi[c]);
      // Per-step motion stays inside the joint's velocity budget.
      const double max_step = vel[c] * cfg.dt;
      next = std::clamp(next, q_prev[slot] - max_step, q_prev[slot] + max_step);
      moved = std::max(moved, std::abs(next - q[slot]));
      q[slot] = next;
    }
    if (moved < 1e-15) break;  // pinned by the clamps; best effort

    ee_error(q, e_pos, e_rot);
    const double cost = cost_of(q, e_pos, e_rot);
    if (cost < best_cost) {
      best_cost = cost;
      best_q = q;
      best_pos = e_pos;
      best_rot = e_rot;
    }
    if (e_pos.norm() <= cfg.pos_tol && e_rot.norm() <= cfg.rot_tol) {
      return {q, e_pos.norm(), e_rot.norm(), iters};
    }
    if (cost > prev_cost) {
      if (++rising >= 5) throw Error(ErrorKind::Diverged, "cost increased for 5 consecutive iterations");
    } else {
      rising = 0;
    }
    prev_cost = cost;
  }
  return {best_q, best_pos.norm(), best_rot.norm(), iters};
}

}  // namespace detail

/// One damped Gauss-Newton tracking step from q_prev toward the target
/// pose. The return is hard-clamped to position limits and to
/// velocity_limit * dt around q_prev; joints off the chain pass through.
inline kin::JointConfig solve_step(const kin::KinematicModel& model, const ArmChain& chain,
                                   const kin::JointConfig& q_prev, const geom::Pose& target,
                                   const SolverConfig& cfg) {
  return detail::solve_step_impl(model, chain, q_prev, target, cfg).q;
}

/// True when iterated tracking steps can bring the EE within tolerance of
/// the target; used as the grasp feasibility probe.
inline bool probe_reachable(const kin::KinematicModel& model, const ArmChain& chain, const kin::JointConfig& q_seed,
                            const geom::Pose& target, SolverConfig cfg, int max_steps = 30) {
  cfg.max_iters = std::min(cfg.max_iters, 32);
  kin::JointConfig q = q_seed;
  for (int s = 0; s < max_steps; ++s) {
    detail::StepOutcome out;
    try {
      out = detail::solve_step_impl(model, chain, q, target, cfg);
    } catch (const Error&) {
      return false;
    }
    if (out.pos_err <= cfg.pos_tol && out.rot_err <= cfg.rot_tol) return true;
    if ((out.q - q).lpNorm<Eigen::Infinity>() < 1e-12) return false;  // stalled
    q = out.q;
  }
  return false;
}

/// Builds the grasp-selection probe: solve_step iterated at a fixed object
/// pose from the given seed configuration.
inline grasp::FeasibilityProbe make_feasibility_probe(const kin::KinematicModel& model, const ArmChain& chain,
                                                      const kin::JointConfig& q_seed, const geom::Pose& tcp_from_grasp,
                                                      const SolverConfig& cfg) {
  return [&model, chain, q_seed, tcp_from_grasp, cfg](const grasp::GraspCandidate& g,
                                                      const geom::Pose& object_pose) {
    const geom::Pose target = detail::grasp_target(object_pose, g, tcp_from_grasp, 0.0);
    return probe_reachable(model, chain, q_seed, target, cfg);
  };
}

struct StepResidual {
  int step = 0;
  Phase phase = Phase::pregrasp;
  double pos_err = 0.0;  // m
  double rot_err = 0.0;  // rad
};

struct ArmSolution {
  std::string arm;                      // end-effector frame
  std::vector<double> timestamps;
  std::vector<kin::JointConfig> configs;  // full actuated vectors
  std::vector<StepResidual> residuals;
};

/// Tracks a phase plan step by step with warm starts. Residuals above
/// tolerance on a transport step mean the rigid-attachment assumption
/// broke; that demo is a tracking failure.
inline ArmSolution solve_trajectory(const kin::KinematicModel& model, const ArmChain& chain,
                                    const kin::JointConfig& q0, const PhasePlan& plan, const SolverConfig& cfg) {
  cfg.validate();
  ArmSolution sol;
  sol.arm = chain.frame;
  if (plan.empty()) return sol;

  for (std::size_t i = 1; i < plan.size(); ++i) {
    if (std::abs((plan.steps[i].t - plan.steps[i - 1].t) - cfg.dt) > 1e-9) {
      throw Error(ErrorKind::InvalidArgument, "plan timestamps must be uniform with spacing cfg.dt");
    }
  }
  for (int s = 0; s < model.dof(); ++s) {
    const kin::Joint& j = model.actuated_joint(s);
    if (q0[s] < j.lower - 1e-12 || q0[s] > j.upper + 1e-12) {
      throw Error(ErrorKind::InvalidArgument, "q0 violates the limits of joint '" + j.name + "'");
    }
  }

  sol.timestamps.reserve(plan.size());
  sol.configs.reserve(plan.size());
  sol.residuals.reserve(plan.size());
  kin::JointConfig q = q0;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const PhaseStep& step = plan.steps[i];
    detail::StepOutcome out;
    try {
      out = detail::solve_step_impl(model, chain, q, step.ee_target, cfg);
    } catch (Error& e) {
      e.step = static_cast<int>(i);
      e.arm = chain.frame;
      throw;
    }
    q = out.q;
    sol.timestamps.push_back(step.t);
    sol.configs.push_back(q);
    sol.residuals.push_back({static_cast<int>(i), step.phase, out.pos_err, out.rot_err});
    if (step.phase == Phase::transport && (out.pos_err > cfg.pos_tol || out.rot_err > cfg.rot_tol)) {
      Error e(ErrorKind::TrackingFailure,
              "transport residual " + std::to_string(out.pos_err) + " m / " + std::to_string(out.rot_err) +
                  " rad at step " + std::to_string(i));
      e.step = static_cast<int>(i);
      e.arm = chain.frame;
      throw e;
    }
  }
  return sol;
}

/// Arms solved independently on their own chains from the shared root.
/// Chains must not share actuated joints; an empty plan parks that arm at
/// q0. Failures carry the arm's frame name.
inline std::vector<ArmSolution> solve_bimanual(const kin::KinematicModel& model,
                                               const std::vector<std::pair<ArmChain, PhasePlan>>& arm_plans,
                                               const kin::JointConfig& q0, const SolverConfig& cfg) {
  std::vector<bool> used(model.dof(), false);
  for (const auto& [chain, plan] : arm_plans) {
    (void)plan;
    for (int slot : chain.slots) {
      if (used[slot]) {
        throw Error(ErrorKind::InvariantViolation,
                    "arm chains share actuated joint '" + model.actuated_joint(slot).name + "'");
      }
      used[slot] = true;
    }
  }
  const PhasePlan* reference = nullptr;
  for (const auto& [chain, plan] : arm_plans) {
    (void)chain;
    if (plan.empty()) continue;
    if (!reference) {
      reference = &plan;
      continue;
    }
    if (plan.size() != reference->size() ||
        std::abs(plan.steps.front().t - reference->steps.front().t) > 1e-9) {
      throw Error(ErrorKind::InvalidArgument, "bimanual plans must share the timestamp grid");
    }
  }

  std::vector<ArmSolution> out;
  for (const auto& [chain, plan] : arm_plans) {
    if (plan.empty()) {
      ArmSolution hold;
      hold.arm = chain.frame;
      out.push_back(std::move(hold));  // arm holds q0
      continue;
    }
    out.push_back(solve_trajectory(model, chain, q0, plan, cfg));
  }
  return out;
}

}  // namespace demoforge::diffik
