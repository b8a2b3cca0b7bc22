#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "demoforge/error.hpp"
#include "demoforge/geom.hpp"

namespace demoforge::kin {

enum class JointType { revolute, prismatic, fixed, continuous };

inline const char* to_string(JointType t) {
  switch (t) {
    case JointType::revolute: return "revolute";
    case JointType::prismatic: return "prismatic";
    case JointType::fixed: return "fixed";
    case JointType::continuous: return "continuous";
  }
  return "?";
}

/// Linear coupling q_this = multiplier * q_master + offset; common in
/// parallel-jaw gripper descriptions.
struct Mimic {
  std::string joint;
  double multiplier = 1.0;
  double offset = 0.0;
};

struct Joint {
  std::string name;
  JointType type = JointType::fixed;
  std::string parent;
  std::string child;
  geom::Pose origin;
  geom::Vec3 axis = geom::Vec3::UnitZ();
  double lower = 0.0;   // rad or m
  double upper = 0.0;
  double velocity = std::numeric_limits<double>::infinity();  // rad/s or m/s
  std::optional<Mimic> mimic;

  bool is_fixed() const { return type == JointType::fixed; }
};

/// Joint values for the actuated joints, ordered by the model's actuated
/// list (document order, mimic-coupled joints removed).
using JointConfig = Eigen::VectorXd;

struct KinematicModel {
  std::vector<std::string> links;
  std::vector<Joint> joints;
  std::string root;
  std::vector<std::string> warnings;                // ignored URDF elements
  std::map<std::string, std::string> link_meshes;   // opaque render-asset refs

  // Derived topology, filled by finalize().
  std::unordered_map<std::string, int> link_index;
  std::unordered_map<std::string, int> joint_index;
  std::vector<int> parent_joint;   // per link; -1 at the root
  std::vector<int> topo_order;     // joint indices, parents before children
  std::vector<int> actuated;       // joint indices driving a config slot
  std::vector<int> slot_of_joint;  // per joint: actuated slot, or -1

  int dof() const { return static_cast<int>(actuated.size()); }

  const Joint& actuated_joint(int slot) const { return joints[actuated[slot]]; }

  int link_id(const std::string& name) const {
    auto it = link_index.find(name);
    if (it == link_index.end()) {
      throw Error(ErrorKind::UnknownFrame, "no link named '" + name + "'");
    }
    return it->second;
  }

  bool has_link(const std::string& name) const { return link_index.count(name) > 0; }

  /// Per-slot lower/upper/velocity vectors for solver use.
  void limit_vectors(Eigen::VectorXd& lo, Eigen::VectorXd& hi, Eigen::VectorXd& vel) const {
    const int n = dof();
    lo.resize(n);
    hi.resize(n);
    vel.resize(n);
    for (int s = 0; s < n; ++s) {
      const Joint& j = actuated_joint(s);
      lo[s] = j.lower;
      hi[s] = j.upper;
      vel[s] = j.velocity;
    }
  }

  JointConfig clamped(const JointConfig& q) const {
    JointConfig out = q;
    for (int s = 0; s < dof(); ++s) {
      const Joint& j = actuated_joint(s);
      out[s] = std::clamp(out[s], j.lower, j.upper);
    }
    return out;
  }

  /// Validates the tree, orders joints topologically, assigns config slots.
  void finalize() {
    link_index.clear();
    joint_index.clear();
    for (std::size_t i = 0; i < links.size(); ++i) link_index[links[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < joints.size(); ++i) joint_index[joints[i].name] = static_cast<int>(i);

    parent_joint.assign(links.size(), -1);
    for (std::size_t i = 0; i < joints.size(); ++i) {
      const Joint& j = joints[i];
      if (!link_index.count(j.parent)) {
        throw Error(ErrorKind::MalformedXml, "joint '" + j.name + "' references unknown parent link '" + j.parent + "'");
      }
      if (!link_index.count(j.child)) {
        throw Error(ErrorKind::MalformedXml, "joint '" + j.name + "' references unknown child link '" + j.child + "'");
      }
      int child = link_index.at(j.child);
      if (parent_joint[child] != -1) {
        throw Error(ErrorKind::KinematicLoop, "link '" + j.child + "' has more than one parent joint");
      }
      parent_joint[child] = static_cast<int>(i);
    }

    std::vector<int> roots;
    for (std::size_t l = 0; l < links.size(); ++l) {
      if (parent_joint[l] == -1) roots.push_back(static_cast<int>(l));
    }
    if (roots.empty()) {
      throw Error(ErrorKind::KinematicLoop, "joint graph has no root link (cycle)");
    }
    if (roots.size() > 1) {
      std::string names;
      for (int r : roots) names += (names.empty() ? "" : ", ") + links[r];
      throw Error(ErrorKind::MalformedXml, "multiple root links: " + names);
    }
    root = links[roots.front()];

    // Breadth-first walk; anything unreachable sits on a cycle.
    std::vector<std::vector<int>> children(links.size());
    for (std::size_t i = 0; i < joints.size(); ++i) {
      children[link_index.at(joints[i].parent)].push_back(static_cast<int>(i));
    }
    topo_order.clear();
    std::deque<int> queue{roots.front()};
    std::vector<bool> seen(links.size(), false);
    seen[roots.front()] = true;
    while (!queue.empty()) {
      int l = queue.front();
      queue.pop_front();
      for (int ji : children[l]) {
        int c = link_index.at(joints[ji].child);
        if (seen[c]) throw Error(ErrorKind::KinematicLoop, "cycle through link '" + links[c] + "'");
        seen[c] = true;
        topo_order.push_back(ji);
        queue.push_back(c);
      }
    }
    if (topo_order.size() != joints.size()) {
      throw Error(ErrorKind::KinematicLoop, "kinematic graph contains a loop detached from the root");
    }

    actuated.clear();
    slot_of_joint.assign(joints.size(), -1);
    for (std::size_t i = 0; i < joints.size(); ++i) {
      Joint& j = joints[i];
      if ((j.axis.norm() == 0.0) && !j.is_fixed()) {
        throw Error(ErrorKind::MalformedXml, "joint '" + j.name + "' has a zero axis");
      }
      if (!j.is_fixed()) j.axis.normalize();
      if (!j.is_fixed() && j.lower > j.upper) {
        throw Error(ErrorKind::MalformedXml, "joint '" + j.name + "' has lower > upper limit");
      }
      if (!j.is_fixed() && !j.mimic) {
        slot_of_joint[i] = static_cast<int>(actuated.size());
        actuated.push_back(static_cast<int>(i));
      }
    }
    for (const Joint& j : joints) {
      if (!j.mimic) continue;
      auto it = joint_index.find(j.mimic->joint);
      if (it == joint_index.end() || slot_of_joint[it->second] < 0) {
        throw Error(ErrorKind::MalformedXml,
                    "joint '" + j.name + "' mimics '" + j.mimic->joint + "', which is not an actuated joint");
      }
    }
  }
};

namespace detail {

inline geom::Vec3 parse_vec3(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  geom::Vec3 v;
  if (!(in >> v.x() >> v.y() >> v.z())) {
    throw Error(ErrorKind::MalformedXml, "bad 3-vector '" + text + "' in " + where);
  }
  return v;
}

/// URDF rpy: fixed-axis roll-pitch-yaw, R = Rz(yaw) Ry(pitch) Rx(roll).
inline geom::Quat rpy_to_quat(const geom::Vec3& rpy) {
  using geom::Quat;
  using geom::Vec3;
  return (Quat::from_axis_angle(Vec3::UnitZ(), rpy.z()) *
          Quat::from_axis_angle(Vec3::UnitY(), rpy.y()) *
          Quat::from_axis_angle(Vec3::UnitX(), rpy.x()))
      .normalized();
}

inline geom::Vec3 quat_to_rpy(const geom::Quat& q) {
  const geom::Mat3 m = q.to_rotation_matrix();
  geom::Vec3 rpy;
  const double sp = std::clamp(-m(2, 0), -1.0, 1.0);
  rpy.y() = std::asin(sp);
  if (std::abs(sp) < 1.0 - 1e-9) {
    rpy.x() = std::atan2(m(2, 1), m(2, 2));
    rpy.z() = std::atan2(m(1, 0), m(0, 0));
  } else {
    rpy.x() = std::atan2(-m(0, 1), m(1, 1));  // gimbal fallback, yaw folded into roll
    rpy.z() = 0.0;
  }
  return rpy;
}

inline std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace detail

/// Parses a URDF document into a validated kinematic tree. Collision,
/// inertial, and transmission blocks are skipped and reported in
/// model.warnings; visual mesh filenames are kept as opaque strings.
inline KinematicModel parse_urdf(const std::string& xml_text) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  try {
    std::istringstream in(xml_text);
    pt::read_xml(in, doc, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorKind::MalformedXml, e.what());
  }

  auto robot = doc.get_child_optional("robot");
  if (!robot) throw Error(ErrorKind::MalformedXml, "missing <robot> element");

  KinematicModel model;
  auto attr = [](const pt::ptree& node, const std::string& name) -> std::optional<std::string> {
    auto v = node.get_optional<std::string>("<xmlattr>." + name);
    if (v) return *v;
    return std::nullopt;
  };

  for (const auto& [tag, node] : *robot) {
    if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
    if (tag == "link") {
      auto name = attr(node, "name");
      if (!name) throw Error(ErrorKind::MalformedXml, "link without a name");
      model.links.push_back(*name);
      if (auto mesh = node.get_optional<std::string>("visual.geometry.mesh.<xmlattr>.filename")) {
        model.link_meshes[*name] = *mesh;
      }
      for (const auto& [sub, subnode] : node) {
        (void)subnode;
        if (sub == "collision" || sub == "inertial") {
          model.warnings.push_back("ignored <" + sub + "> in link '" + *name + "'");
        }
      }
    } else if (tag == "joint") {
      Joint j;
      auto name = attr(node, "name");
      auto type = attr(node, "type");
      if (!name || !type) throw Error(ErrorKind::MalformedXml, "joint missing name or type");
      j.name = *name;
      if (*type == "revolute") {
        j.type = JointType::revolute;
      } else if (*type == "prismatic") {
        j.type = JointType::prismatic;
      } else if (*type == "fixed") {
        j.type = JointType::fixed;
      } else if (*type == "continuous") {
        j.type = JointType::continuous;
      } else {
        throw Error(ErrorKind::UnsupportedJointType, "joint '" + j.name + "' has type '" + *type + "'");
      }

      auto parent = node.get_child_optional("parent");
      auto child = node.get_child_optional("child");
      if (!parent || !child) throw Error(ErrorKind::MalformedXml, "joint '" + j.name + "' missing parent or child");
      j.parent = attr(*parent, "link").value_or("");
      j.child = attr(*child, "link").value_or("");
      if (j.parent.empty() || j.child.empty()) {
        throw Error(ErrorKind::MalformedXml, "joint '" + j.name + "' missing parent/child link attribute");
      }

      if (auto origin = node.get_child_optional("origin")) {
        if (auto xyz = attr(*origin, "xyz")) j.origin.position = detail::parse_vec3(*xyz, "origin of " + j.name);
        if (auto rpy = attr(*origin, "rpy")) {
          j.origin.orientation = detail::rpy_to_quat(detail::parse_vec3(*rpy, "origin of " + j.name));
        }
      }
      if (auto axis = node.get_child_optional("axis")) {
        if (auto xyz = attr(*axis, "xyz")) j.axis = detail::parse_vec3(*xyz, "axis of " + j.name);
      }

      auto limit = node.get_child_optional("limit");
      if (j.type == JointType::revolute || j.type == JointType::prismatic) {
        auto lower = limit ? attr(*limit, "lower") : std::nullopt;
        auto upper = limit ? attr(*limit, "upper") : std::nullopt;
        if (!lower || !upper) {
          throw Error(ErrorKind::MissingLimit,
                      "joint '" + j.name + "' (" + *type + ") lacks lower/upper position limits");
        }
        j.lower = std::stod(*lower);
        j.upper = std::stod(*upper);
      } else if (j.type == JointType::continuous) {
        // Treated as revolute with wide symmetric limits so the limit
        // machinery stays uniform.
        j.lower = -4.0 * M_PI;
        j.upper = 4.0 * M_PI;
      }
      if (limit) {
        if (auto vel = attr(*limit, "velocity")) j.velocity = std::stod(*vel);
      }

      if (auto mimic = node.get_child_optional("mimic")) {
        Mimic m;
        m.joint = attr(*mimic, "joint").value_or("");
        if (m.joint.empty()) throw Error(ErrorKind::MalformedXml, "mimic without a joint attribute in '" + j.name + "'");
        if (auto mult = attr(*mimic, "multiplier")) m.multiplier = std::stod(*mult);
        if (auto off = attr(*mimic, "offset")) m.offset = std::stod(*off);
        j.mimic = m;
      }

      for (const auto& [sub, subnode] : node) {
        (void)subnode;
        if (sub == "dynamics" || sub == "safety_controller" || sub == "calibration") {
          model.warnings.push_back("ignored <" + sub + "> in joint '" + j.name + "'");
        }
      }
      model.joints.push_back(std::move(j));
    } else if (tag == "transmission" || tag == "gazebo" || tag == "material") {
      model.warnings.push_back("ignored <" + tag + "> element");
    }
  }

  model.finalize();
  return model;
}

/// Emits the retained URDF subset; parse(serialize(parse(x))) is a fixpoint.
inline std::string serialize_urdf(const KinematicModel& model) {
  std::ostringstream out;
  out << "<robot name=\"model\">\n";
  for (const auto& link : model.links) {
    auto mesh = model.link_meshes.find(link);
    if (mesh != model.link_meshes.end()) {
      out << "  <link name=\"" << link << "\">\n"
          << "    <visual><geometry><mesh filename=\"" << mesh->second << "\"/></geometry></visual>\n"
          << "  </link>\n";
    } else {
      out << "  <link name=\"" << link << "\"/>\n";
    }
  }
  for (const auto& j : model.joints) {
    out << "  <joint name=\"" << j.name << "\" type=\"" << to_string(j.type) << "\">\n";
    out << "    <parent link=\"" << j.parent << "\"/>\n";
    out << "    <child link=\"" << j.child << "\"/>\n";
    const geom::Vec3 rpy = detail::quat_to_rpy(j.origin.orientation);
    out << "    <origin xyz=\"" << detail::fmt(j.origin.position.x()) << ' '
        << detail::fmt(j.origin.position.y()) << ' ' << detail::fmt(j.origin.position.z())
        << "\" rpy=\"" << detail::fmt(rpy.x()) << ' ' << detail::fmt(rpy.y()) << ' '
        << detail::fmt(rpy.z()) << "\"/>\n";
    if (!j.is_fixed()) {
      out << "    <axis xyz=\"" << detail::fmt(j.axis.x()) << ' ' << detail::fmt(j.axis.y()) << ' '
          << detail::fmt(j.axis.z()) << "\"/>\n";
      if (j.type != JointType::continuous) {
        out << "    <limit lower=\"" << detail::fmt(j.lower) << "\" upper=\"" << detail::fmt(j.upper)
            << "\" velocity=\"" << detail::fmt(j.velocity) << "\"/>\n";
      } else if (std::isfinite(j.velocity)) {
        out << "    <limit velocity=\"" << detail::fmt(j.velocity) << "\"/>\n";
      }
      if (j.mimic) {
        out << "    <mimic joint=\"" << j.mimic->joint << "\" multiplier=\"" << detail::fmt(j.mimic->multiplier)
            << "\" offset=\"" << detail::fmt(j.mimic->offset) << "\"/>\n";
      }
    }
    out << "  </joint>\n";
  }
  out << "</robot>\n";
  return out.str();
}

struct FkResult {
  std::vector<geom::Pose> link_pose;    // per link id, root frame
  std::vector<geom::Pose> joint_frame;  // per joint id: frame after origin, before motion
};

namespace detail {

inline double joint_value(const KinematicModel& model, const Joint& j, int joint_id, const JointConfig& q) {
  const int slot = model.slot_of_joint[joint_id];
  if (slot >= 0) return q[slot];
  if (j.mimic) {
    const int master = model.joint_index.at(j.mimic->joint);
    return j.mimic->multiplier * q[model.slot_of_joint[master]] + j.mimic->offset;
  }
  return 0.0;
}

inline geom::Pose joint_motion(const Joint& j, double value) {
  switch (j.type) {
    case JointType::revolute:
    case JointType::continuous:
      return geom::Pose{geom::Vec3::Zero(), geom::Quat::from_axis_angle(j.axis, value)};
    case JointType::prismatic:
      return geom::Pose{value * j.axis, geom::Quat::identity()};
    case JointType::fixed:
      return geom::Pose::identity();
  }
  return geom::Pose::identity();
}

}  // namespace detail

/// Root-frame pose of every link (and every joint frame) at configuration q.
inline void forward_kinematics(const KinematicModel& model, const JointConfig& q, FkResult& out,
                               bool check_limits = true) {
  if (q.size() != model.dof()) {
    throw Error(ErrorKind::DimensionMismatch,
                "config has " + std::to_string(q.size()) + " values, model has " + std::to_string(model.dof()));
  }
  if (check_limits) {
    for (int s = 0; s < model.dof(); ++s) {
      const Joint& j = model.actuated_joint(s);
      if (q[s] < j.lower - 1e-9 || q[s] > j.upper + 1e-9) {
        throw Error(ErrorKind::InvalidArgument,
                    "joint '" + j.name + "' value " + std::to_string(q[s]) + " outside limits");
      }
    }
  }

  out.link_pose.assign(model.links.size(), geom::Pose::identity());
  out.joint_frame.assign(model.joints.size(), geom::Pose::identity());
  for (int ji : model.topo_order) {
    const Joint& j = model.joints[ji];
    const geom::Pose parent_pose = out.link_pose[model.link_index.at(j.parent)];
    const geom::Pose frame = parent_pose * j.origin;
    out.joint_frame[ji] = frame;
    out.link_pose[model.link_index.at(j.child)] =
        frame * detail::joint_motion(j, detail::joint_value(model, j, ji, q));
  }
}

inline std::map<std::string, geom::Pose> forward_kinematics_map(const KinematicModel& model, const JointConfig& q,
                                                                bool check_limits = true) {
  FkResult fk;
  forward_kinematics(model, q, fk, check_limits);
  std::map<std::string, geom::Pose> out;
  for (std::size_t l = 0; l < model.links.size(); ++l) out[model.links[l]] = fk.link_pose[l];
  return out;
}

inline geom::Pose link_pose(const KinematicModel& model, const JointConfig& q, const std::string& frame,
                            bool check_limits = true) {
  const int target = model.link_id(frame);
  FkResult fk;
  forward_kinematics(model, q, fk, check_limits);
  return fk.link_pose[target];
}

/// Joint indices along the root -> link path, root side first.
inline std::vector<int> chain_to_link(const KinematicModel& model, const std::string& frame) {
  int link = model.link_id(frame);
  std::vector<int> path;
  while (model.parent_joint[link] != -1) {
    const int ji = model.parent_joint[link];
    path.push_back(ji);
    link = model.link_index.at(model.joints[ji].parent);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

/// Geometric Jacobian of `frame` in the root frame: rows 0-2 linear, rows
/// 3-5 angular, one column per actuated joint. Columns of joints off the
/// root->frame path are zero; mimic couplings fold into their master's
/// column scaled by the multiplier.
inline Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian(const KinematicModel& model, const JointConfig& q,
                                                         const std::string& frame, const FkResult* fk_in = nullptr) {
  FkResult local;
  const FkResult* fk = fk_in;
  if (!fk) {
    forward_kinematics(model, q, local, false);
    fk = &local;
  }
  const int target = model.link_id(frame);
  Eigen::Matrix<double, 6, Eigen::Dynamic> J(6, model.dof());
  J.setZero();
  const geom::Vec3 p_frame = fk->link_pose[target].position;

  for (int ji : chain_to_link(model, frame)) {
    const Joint& j = model.joints[ji];
    int slot = model.slot_of_joint[ji];
    double mult = 1.0;
    if (slot < 0) {
      if (!j.mimic) continue;  // fixed
      slot = model.slot_of_joint[model.joint_index.at(j.mimic->joint)];
      mult = j.mimic->multiplier;
    }
    const geom::Pose& jf = fk->joint_frame[ji];
    const geom::Vec3 axis_w = jf.orientation.rotate(j.axis);
    if (j.type == JointType::prismatic) {
      J.col(slot).head<3>() += mult * axis_w;
    } else {
      J.col(slot).head<3>() += mult * axis_w.cross(p_frame - jf.position);
      J.col(slot).tail<3>() += mult * axis_w;
    }
  }
  return J;
}

}  // namespace demoforge::kin
