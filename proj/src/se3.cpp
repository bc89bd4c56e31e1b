#include "vgicp/se3.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace vgicp {

namespace {

constexpr double kSmallAngle = 1e-8;
constexpr int kOrthonormalizeEvery = 50;

// Left Jacobian of SO3 (the V matrix coupling rotation and translation in se3 exp).
Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  const Eigen::Matrix3d W = skew(omega);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + 0.5 * W + W * W / 6.0;
  }
  const double t2 = theta * theta;
  const double a = (1.0 - std::cos(theta)) / t2;
  const double b = (theta - std::sin(theta)) / (t2 * theta);
  return Eigen::Matrix3d::Identity() + a * W + b * (W * W);
}

Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& omega) {
  // V is well conditioned for |omega| < pi; the direct inverse avoids the
  // catastrophic cancellation the closed form suffers at small angles.
  return so3_left_jacobian(omega).inverse();
}

}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.rotation * b.rotation, a.rotation * b.translation + a.translation);
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  const Eigen::Matrix3d W = skew(omega);
  if (theta < kSmallAngle) {
    // Taylor branch below 1e-8 rad.
    return Eigen::Matrix3d::Identity() + W + 0.5 * (W * W);
  }
  const double t2 = theta * theta;
  return Eigen::Matrix3d::Identity() + (std::sin(theta) / theta) * W + ((1.0 - std::cos(theta)) / t2) * (W * W);
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& R) {
  // Quaternion form: numerically stable over the whole angle range. The
  // angle = pi boundary is degenerate for the skew part; the quaternion
  // construction resolves the axis from the symmetric part of R there
  // (largest-diagonal branch), leaving only the global sign free.
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();

  const double sin_half = q.vec().norm();
  if (sin_half < kSmallAngle) {
    return (2.0 / q.w()) * q.vec();
  }
  const double theta = 2.0 * std::atan2(sin_half, q.w());
  return (theta / sin_half) * q.vec();
}

Pose se3_exp(const Twist& xi) {
  const Eigen::Matrix3d R = so3_exp(xi.rotation);
  const Eigen::Vector3d t = so3_left_jacobian(xi.rotation) * xi.translation;
  return Pose(R, t);
}

Twist se3_log(const Pose& T) {
  const Eigen::Vector3d omega = so3_log(T.rotation);
  const Eigen::Vector3d v = so3_left_jacobian_inverse(omega) * T.translation;
  return Twist(omega, v);
}

Pose orthonormalized(const Pose& T) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(T.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d U = svd.matrixU();
  const Eigen::Matrix3d V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) {
    U.col(2) = -U.col(2);
  }
  Pose out(U * V.transpose(), T.translation);
  out.updates_since_orthonormalization = 0;
  return out;
}

Pose Pose::retract(const Twist& delta) const {
  Pose out = compose(*this, se3_exp(delta));
  out.updates_since_orthonormalization = updates_since_orthonormalization + 1;
  if (out.updates_since_orthonormalization >= kOrthonormalizeEvery) {
    out = orthonormalized(out);
  }
  return out;
}

Matrix6d adjoint(const Pose& T) {
  Matrix6d ad = Matrix6d::Zero();
  ad.topLeftCorner<3, 3>() = T.rotation;
  ad.bottomRightCorner<3, 3>() = T.rotation;
  ad.bottomLeftCorner<3, 3>() = skew(T.translation) * T.rotation;
  return ad;
}

Matrix6d se3_right_jacobian_inverse(const Twist& xi) {
  // ad(xi) in (rotation, translation) block order.
  Matrix6d ad = Matrix6d::Zero();
  const Eigen::Matrix3d W = skew(xi.rotation);
  ad.topLeftCorner<3, 3>() = W;
  ad.bottomRightCorner<3, 3>() = W;
  ad.bottomLeftCorner<3, 3>() = skew(xi.translation);

  // log(exp(xi) exp(d)) = xi + f(ad_xi) d + O(d^2) with f(z) = z / (1 - e^-z),
  // whose Taylor coefficients are Bernoulli numbers B_n^+ / n!.
  static constexpr double kEvenCoeffs[] = {
      1.0 / 12.0,            // B_2 / 2!
      -1.0 / 720.0,          // B_4 / 4!
      1.0 / 30240.0,         // B_6 / 6!
      -1.0 / 1209600.0,      // B_8 / 8!
      1.0 / 47900160.0,      // B_10 / 10!
      -691.0 / 1307674368000.0,
      1.0 / 74724249600.0,
      -3617.0 / 10670622842880000.0,
  };

  Matrix6d result = Matrix6d::Identity() + 0.5 * ad;
  const Matrix6d ad2 = ad * ad;
  Matrix6d power = ad2;
  for (const double c : kEvenCoeffs) {
    result += c * power;
    power = power * ad2;
  }
  return result;
}

}  // namespace vgicp
