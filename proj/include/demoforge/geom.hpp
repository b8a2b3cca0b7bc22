#pragma once

#include <array>
#include <cassert>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace demoforge::geom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Unit quaternion in (w, x, y, z) order, Hamilton product, rotations act
/// by q v q^-1. Serialized sign is canonical: w >= 0, ties broken toward
/// the first nonzero component being positive.
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Quat() = default;
  Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  static Quat identity() { return Quat{1.0, 0.0, 0.0, 0.0}; }

  /// axis must be unit length.
  static Quat from_axis_angle(const Vec3& axis, double angle) {
    const double half = 0.5 * angle;
    const double s = std::sin(half);
    return Quat{std::cos(half), s * axis.x(), s * axis.y(), s * axis.z()};
  }

  static Quat from_rotation_vector(const Vec3& rv) {
    const double angle = rv.norm();
    if (angle < 1e-12) {
      // First-order expansion; renormalized below by callers that need it.
      return Quat{1.0, 0.5 * rv.x(), 0.5 * rv.y(), 0.5 * rv.z()}.normalized();
    }
    return from_axis_angle(rv / angle, angle);
  }

  /// Shepperd's method, branch chosen by the largest diagonal term.
  static Quat from_rotation_matrix(const Mat3& m) {
    Quat q;
    const double tr = m.trace();
    if (tr > 0.0) {
      double s = std::sqrt(tr + 1.0) * 2.0;
      q.w = 0.25 * s;
      q.x = (m(2, 1) - m(1, 2)) / s;
      q.y = (m(0, 2) - m(2, 0)) / s;
      q.z = (m(1, 0) - m(0, 1)) / s;
    } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
      double s = std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2.0;
      q.w = (m(2, 1) - m(1, 2)) / s;
      q.x = 0.25 * s;
      q.y = (m(0, 1) + m(1, 0)) / s;
      q.z = (m(0, 2) + m(2, 0)) / s;
    } else if (m(1, 1) > m(2, 2)) {
      double s = std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2.0;
      q.w = (m(0, 2) - m(2, 0)) / s;
      q.x = (m(0, 1) + m(1, 0)) / s;
      q.y = 0.25 * s;
      q.z = (m(1, 2) + m(2, 1)) / s;
    } else {
      double s = std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2.0;
      q.w = (m(1, 0) - m(0, 1)) / s;
      q.x = (m(0, 2) + m(2, 0)) / s;
      q.y = (m(1, 2) + m(2, 1)) / s;
      q.z = 0.25 * s;
    }
    return q.normalized();
  }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }

  /// Unit-norm, canonical-sign copy.
  Quat normalized() const {
    const double n = norm();
    assert(n > 0.0);
    Quat q{w / n, x / n, y / n, z / n};
    q.canonicalize_sign();
    return q;
  }

  /// Resolves the double cover: w >= 0, ties broken lexicographically.
  void canonicalize_sign() {
    if (w < 0.0 || (w == 0.0 && (x < 0.0 || (x == 0.0 && (y < 0.0 || (y == 0.0 && z < 0.0)))))) {
      w = -w;
      x = -x;
      y = -y;
      z = -z;
    }
  }

  Quat conjugate() const { return Quat{w, -x, -y, -z}; }

  /// Inverse of a unit quaternion.
  Quat inverse() const { return conjugate(); }

  /// Hamilton product.
  Quat operator*(const Quat& o) const {
    return Quat{w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
  }

  Vec3 rotate(const Vec3& v) const {
    // q v q^-1 expanded via the cross-product form.
    const Vec3 u(x, y, z);
    const Vec3 t = 2.0 * u.cross(v);
    return v + w * t + u.cross(t);
  }

  Mat3 to_rotation_matrix() const {
    Mat3 m;
    const double xx = x * x, yy = y * y, zz = z * z;
    const double xy = x * y, xz = x * z, yz = y * z;
    const double wx = w * x, wy = w * y, wz = w * z;
    m << 1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy),
         2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx),
         2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy);
    return m;
  }

  /// Rotation vector (axis * angle), angle in [0, pi].
  Vec3 rotation_vector() const {
    Quat q = *this;
    if (q.w < 0.0) {
      q = Quat{-q.w, -q.x, -q.y, -q.z};
    }
    const Vec3 v(q.x, q.y, q.z);
    const double vn = v.norm();
    if (vn < 1e-12) {
      return 2.0 * v;  // small-angle limit
    }
    const double angle = 2.0 * std::atan2(vn, q.w);
    return (angle / vn) * v;
  }
};

/// Angle between the rotations (not the 4-vectors), in [0, pi]. Formed
/// from the relative quaternion with atan2 so angles near 0 and pi keep
/// full precision (acos of the dot product bottoms out around 3e-8).
inline double geodesic_angle(const Quat& a, const Quat& b) {
  const Quat d = a.conjugate() * b;
  const double vn = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
  return 2.0 * std::atan2(vn, std::abs(d.w));
}

/// Shortest-arc spherical linear interpolation. Near-antipodal rotations
/// (|dot| below kAntipodalDot after the sign flip) and near-identical ones
/// fall back to normalized lerp; for the antipodal case the great-circle
/// path is the arbitrary one the component representation induces.
inline Quat quat_slerp(const Quat& q0, Quat q1, double s) {
  constexpr double kAntipodalDot = 1e-6;
  double d = q0.dot(q1);
  if (d < 0.0) {
    q1 = Quat{-q1.w, -q1.x, -q1.y, -q1.z};
    d = -d;
  }
  double k0, k1;
  if (d < kAntipodalDot || d > 1.0 - 1e-12) {
    k0 = 1.0 - s;
    k1 = s;
  } else {
    const double omega = std::acos(std::min(1.0, d));
    const double so = std::sin(omega);
    k0 = std::sin((1.0 - s) * omega) / so;
    k1 = std::sin(s * omega) / so;
  }
  return Quat{k0 * q0.w + k1 * q1.w, k0 * q0.x + k1 * q1.x,
              k0 * q0.y + k1 * q1.y, k0 * q0.z + k1 * q1.z}
      .normalized();
}

/// Rigid transform: rotation followed by translation, positions in meters.
struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation;

  Pose() = default;
  Pose(const Vec3& p, const Quat& q) : position(p), orientation(q) {}

  static Pose identity() { return Pose{}; }

  /// this ∘ other: apply `other` in this pose's frame.
  Pose operator*(const Pose& o) const {
    return Pose{position + orientation.rotate(o.position), (orientation * o.orientation).normalized()};
  }

  Pose inverse() const {
    const Quat qi = orientation.inverse();
    return Pose{qi.rotate(-position), qi.normalized()};
  }

  Vec3 apply(const Vec3& pt) const { return position + orientation.rotate(pt); }

  /// Serialization order used by every file format: [x y z qw qx qy qz].
  std::array<double, 7> to_array() const {
    const Quat q = orientation.normalized();
    return {position.x(), position.y(), position.z(), q.w, q.x, q.y, q.z};
  }

  static Pose from_array(const std::array<double, 7>& a) {
    return Pose{Vec3(a[0], a[1], a[2]), Quat{a[3], a[4], a[5], a[6]}.normalized()};
  }
};

inline Pose pose_compose(const Pose& a, const Pose& b) { return a * b; }

/// Lerp position, slerp orientation.
inline Pose pose_interpolate(const Pose& a, const Pose& b, double s) {
  return Pose{a.position + s * (b.position - a.position), quat_slerp(a.orientation, b.orientation, s)};
}

/// Position distance plus geodesic angle, the tolerance pair used by the
/// solver and the audits.
inline std::pair<double, double> pose_error(const Pose& a, const Pose& b) {
  return {(a.position - b.position).norm(), geodesic_angle(a.orientation, b.orientation)};
}

inline Quat yaw_rotation(double yaw) { return Quat::from_axis_angle(Vec3::UnitZ(), yaw); }

}  // namespace demoforge::geom
