#include "touchloc/pose.hpp"

#include <cmath>

namespace touchloc {

Eigen::Quaterniond canonical(const Eigen::Quaterniond& q) {
  // Already-unit inputs are left untouched so canonical() is idempotent.
  Eigen::Quaterniond out = q;
  if (std::abs(q.squaredNorm() - 1.0) > 1e-15) out.normalize();
  if (out.w() < 0.0) out.coeffs() = -out.coeffs();
  return out;
}

Eigen::Vector3d rot_log(const Eigen::Quaterniond& q_in) {
  const Eigen::Quaterniond q = canonical(q_in);
  const Eigen::Vector3d v = q.vec();
  const double s = v.norm();
  const double w = q.w();
  // Near identity, 2 atan2(s, w) / s = (2 / w) (1 - s^2 / (3 w^2) + ...).
  if (s < 1e-8) {
    const double r = s / w;
    return (2.0 / w) * (1.0 - r * r / 3.0) * v;
  }
  return (2.0 * std::atan2(s, w) / s) * v;
}

Eigen::Quaterniond rot_exp(const Eigen::Vector3d& rotvec) {
  const double theta = rotvec.norm();
  double scale;  // sin(theta / 2) / theta
  if (theta < 1e-8) {
    scale = 0.5 - theta * theta / 48.0;
  } else {
    scale = std::sin(0.5 * theta) / theta;
  }
  Eigen::Quaterniond q(std::cos(0.5 * theta), scale * rotvec.x(), scale * rotvec.y(),
                       scale * rotvec.z());
  return canonical(q);
}

double rotation_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const Eigen::Quaterniond d = a.conjugate() * b;
  return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

Pose::Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation)
    : rotation_(canonical(rotation)), translation_(translation) {}

Pose Pose::from_axes(const Eigen::Vector3d& z_axis, const Eigen::Vector3d& x_hint,
                     const Eigen::Vector3d& translation) {
  const Eigen::Vector3d z = z_axis.normalized();
  Eigen::Vector3d x = x_hint - x_hint.dot(z) * z;
  if (x.squaredNorm() < 1e-20) {
    // Hint parallel to z: fall back to the least-aligned world axis.
    Eigen::Index axis;
    z.cwiseAbs().minCoeff(&axis);
    Eigen::Vector3d e = Eigen::Vector3d::Unit(axis);
    x = e - e.dot(z) * z;
  }
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return Pose(Eigen::Quaterniond(r), translation);
}

Pose Pose::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return Pose(inv, -(inv * translation_));
}

Pose Pose::operator*(const Pose& rhs) const {
  return Pose(rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_);
}

PoseKey pose_key(const Pose& pose, double alpha) {
  const Eigen::Vector3d r = alpha * rot_log(pose.rotation());
  const Eigen::Vector3d& t = pose.translation();
  return {t.x(), t.y(), t.z(), r.x(), r.y(), r.z()};
}

}  // namespace touchloc
