#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace touchloc {

/// Returns `q` normalized with a non-negative scalar part.
Eigen::Quaterniond canonical(const Eigen::Quaterniond& q);

/// SO(3) logarithm: rotation vector (axis * angle, radians) with angle in [0, pi].
Eigen::Vector3d rot_log(const Eigen::Quaterniond& q);

/// SO(3) exponential of a rotation vector, returned in canonical form.
Eigen::Quaterniond rot_exp(const Eigen::Vector3d& rotvec);

/// Geodesic distance between two rotations, radians in [0, pi].
double rotation_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

/// Rigid transform in SE(3). The rotation is kept unit-norm with w >= 0 so
/// that every rotation has exactly one stored representation.
class Pose {
 public:
  Pose() = default;
  Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation);

  static Pose identity() { return {}; }

  /// Builds the pose whose z axis is `z_axis` and whose x axis is the
  /// component of `x_hint` orthogonal to it (y = z x x).
  static Pose from_axes(const Eigen::Vector3d& z_axis, const Eigen::Vector3d& x_hint,
                        const Eigen::Vector3d& translation);

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Eigen::Vector3d x_axis() const { return rotation_ * Eigen::Vector3d::UnitX(); }
  Eigen::Vector3d y_axis() const { return rotation_ * Eigen::Vector3d::UnitY(); }
  Eigen::Vector3d z_axis() const { return rotation_ * Eigen::Vector3d::UnitZ(); }

  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& point) const {
    return rotation_ * point + translation_;
  }

  bool operator==(const Pose& rhs) const {
    return rotation_.coeffs() == rhs.rotation_.coeffs() && translation_ == rhs.translation_;
  }

 private:
  Eigen::Quaterniond rotation_ = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

/// Relative motion taking `from` to `to`: from^-1 * to.
inline Pose relative(const Pose& from, const Pose& to) { return from.inverse() * to; }

/// Six-element nearest-neighbour key [t, alpha * log(R)].
using PoseKey = std::array<double, 6>;
PoseKey pose_key(const Pose& pose, double alpha);

}  // namespace touchloc
