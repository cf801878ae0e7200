#include "pmslam/posemath.hpp"

#include <algorithm>
#include <cmath>

namespace pmslam {

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n > 0.0) || !std::isfinite(n)) {
    q_ = Eigen::Quaterniond::Identity();
    return;
  }
  const double s = (w < 0.0 ? -1.0 : 1.0) / n;
  q_ = Eigen::Quaterniond(w * s, x * s, y * s, z * s);
}

UnitQuaternion quat_mul(const UnitQuaternion& qa, const UnitQuaternion& qb) {
  return UnitQuaternion(qa.eigen() * qb.eigen());
}

UnitQuaternion exp_map(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  if (theta < 1e-8) {
    const double w = 1.0 - theta2 / 8.0 + theta2 * theta2 / 384.0;
    const double s = 0.5 - theta2 / 48.0 + theta2 * theta2 / 3840.0;
    return {w, s * v.x(), s * v.y(), s * v.z()};
  }
  const double s = std::sin(0.5 * theta) / theta;
  return {std::cos(0.5 * theta), s * v.x(), s * v.y(), s * v.z()};
}

Vec3 log_map(const UnitQuaternion& q) {
  const Vec3 u = q.vec();
  const double n = u.norm();
  if (n < 1e-12) {
    return 2.0 * u / q.w();
  }
  return (2.0 * std::atan2(n, q.w()) / n) * u;
}

Mat3 to_rotation(const UnitQuaternion& q) { return q.eigen().toRotationMatrix(); }

double wrap_pi(double angle) {
  double a = std::remainder(angle, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

EulerAngles to_euler(const UnitQuaternion& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  const double sinp = std::clamp(2.0 * (w * y - z * x), -1.0, 1.0);
  EulerAngles e;
  e.pitch = std::asin(sinp);
  if (std::abs(std::abs(e.pitch) - M_PI / 2.0) < 1e-6) {
    e.roll = 0.0;
    e.yaw = wrap_pi(2.0 * std::atan2(z, w));
    return e;
  }
  e.roll = std::atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y));
  e.yaw = std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
  return e;
}

UnitQuaternion from_euler(const EulerAngles& e) {
  const Eigen::Quaterniond q = Eigen::AngleAxisd(e.yaw, Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(e.pitch, Eigen::Vector3d::UnitY()) *
                               Eigen::AngleAxisd(e.roll, Eigen::Vector3d::UnitX());
  return UnitQuaternion(q);
}

double geodesic_distance(const UnitQuaternion& qa, const UnitQuaternion& qb) {
  return log_map(qa.inverse() * qb).norm();
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace pmslam
