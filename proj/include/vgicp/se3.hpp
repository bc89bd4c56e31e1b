#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace vgicp {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Twist coordinates on se3. Block order is fixed project-wide:
/// components 0-2 are rotational (rad), 3-5 translational (m).
struct Twist {
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Twist() = default;
  Twist(const Eigen::Vector3d& rot, const Eigen::Vector3d& trans) : rotation(rot), translation(trans) {}
  explicit Twist(const Vector6d& xi) : rotation(xi.head<3>()), translation(xi.tail<3>()) {}

  Vector6d vector() const {
    Vector6d xi;
    xi << rotation, translation;
    return xi;
  }
  double norm() const { return vector().norm(); }
};

/// Rigid transform on SE3 stored as rotation matrix + translation.
/// Values are immutable in spirit: all operations return new poses.
/// retract() counts chained manifold updates and re-orthonormalizes the
/// rotation by polar projection every 50 updates to keep R^T R = I within 1e-9.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  int updates_since_orthonormalization = 0;

  Pose() = default;
  Pose(const Eigen::Matrix3d& R, const Eigen::Vector3d& t) : rotation(R), translation(t) {}

  static Pose Identity() { return Pose(); }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  Pose inverse() const { return Pose(rotation.transpose(), -(rotation.transpose() * translation)); }

  /// Right/local manifold update: T * exp(delta).
  Pose retract(const Twist& delta) const;

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

/// result = a then... applies b first, then a: (a*b).apply(p) == a.apply(b.apply(p)).
Pose compose(const Pose& a, const Pose& b);

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& omega);

/// Rotation log. Requires angle <= pi; the angle = pi boundary is resolved
/// by axis extraction from the symmetric part of R.
Eigen::Vector3d so3_log(const Eigen::Matrix3d& R);

Pose se3_exp(const Twist& xi);

Twist se3_log(const Pose& T);

/// Polar projection of the rotation onto SO3 (closest orthonormal matrix).
Pose orthonormalized(const Pose& T);

/// 6x6 adjoint of T in (rotation, translation) block order:
/// T * exp(xi) * T^-1 == exp(adjoint(T) * xi).
Matrix6d adjoint(const Pose& T);

/// D such that se3_log(se3_exp(xi) * se3_exp(delta)) ~= xi + D * delta.
/// Bernoulli series in ad(xi); full precision for |xi.rotation| up to ~3.
Matrix6d se3_right_jacobian_inverse(const Twist& xi);

}  // namespace vgicp
