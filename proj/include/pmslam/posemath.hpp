#pragma once

// Unit-quaternion algebra. Quaternions rotate sensor-frame vectors into the
// world frame: v_world = R(q) v_sensor, and R(q)^T maps world to sensor.
// Products are Hamilton; every exported quaternion is renormalized and has
// w >= 0.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "pmslam/hexgrid.hpp"

namespace pmslam {

using Vec6 = Eigen::Matrix<double, 6, 1>;

class UnitQuaternion {
 public:
  UnitQuaternion() = default;
  /// Normalizes and canonicalizes; a zero input yields identity.
  UnitQuaternion(double w, double x, double y, double z);
  explicit UnitQuaternion(const Eigen::Quaterniond& q)
      : UnitQuaternion(q.w(), q.x(), q.y(), q.z()) {}

  static UnitQuaternion identity() { return {}; }

  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }
  Eigen::Vector3d vec() const { return q_.vec(); }
  const Eigen::Quaterniond& eigen() const { return q_; }

  UnitQuaternion conjugate() const { return {q_.w(), -q_.x(), -q_.y(), -q_.z()}; }
  UnitQuaternion inverse() const { return conjugate(); }

  /// Rotates a sensor-frame vector into the world frame.
  Vec3 rotate(const Vec3& v) const { return q_ * v; }

 private:
  Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
};

struct Pose {
  Vec3 p = Vec3::Zero();
  UnitQuaternion q;
};

UnitQuaternion quat_mul(const UnitQuaternion& qa, const UnitQuaternion& qb);
inline UnitQuaternion operator*(const UnitQuaternion& qa, const UnitQuaternion& qb) {
  return quat_mul(qa, qb);
}

/// Rotation vector (radians) to quaternion, half-angle convention:
/// [cos(|v|/2), sin(|v|/2) v/|v|].
UnitQuaternion exp_map(const Vec3& v);

/// Inverse of exp_map on the w >= 0 hemisphere; |result| <= pi.
Vec3 log_map(const UnitQuaternion& q);

Mat3 to_rotation(const UnitQuaternion& q);

struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

/// ZYX (yaw-pitch-roll) decomposition, q = Rz(yaw) Ry(pitch) Rx(roll). Within
/// 1e-6 of pitch = +-pi/2 roll is set to zero and the residual rotation is
/// assigned to yaw.
EulerAngles to_euler(const UnitQuaternion& q);
UnitQuaternion from_euler(const EulerAngles& e);

/// Angle of the relative rotation qa^-1 qb, in [0, pi].
double geodesic_distance(const UnitQuaternion& qa, const UnitQuaternion& qb);

/// Wraps an angle to (-pi, pi].
double wrap_pi(double angle);

Mat3 skew(const Vec3& v);

}  // namespace pmslam
