#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "vgicp/se3.hpp"

#include <cmath>

using namespace vgicp;

namespace {
Pose rot_z(double angle, const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
  return Pose(Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()).toRotationMatrix(), t);
}
}  // namespace

TEST_CASE("compose identities and inverse") {
  CHECK((compose(Pose::Identity(), Pose::Identity()).matrix() - Eigen::Matrix4d::Identity()).norm() == 0.0);

  oracles::Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    const Pose T = oracles::random_pose(rng, 1.5, 10.0);
    CHECK((compose(T, T.inverse()).matrix() - Eigen::Matrix4d::Identity()).norm() < 1e-12);
  }
}

TEST_CASE("compose hand example: Rz(90)+t then Rz(90)") {
  const Pose a = rot_z(M_PI / 2, Eigen::Vector3d(1, 0, 0));
  const Pose b = rot_z(M_PI / 2);
  const Pose expected = rot_z(M_PI, Eigen::Vector3d(1, 0, 0));
  CHECK((compose(a, b).matrix() - expected.matrix()).norm() < 1e-12);
}

TEST_CASE("compose associativity and inverse reversal") {
  oracles::Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Pose a = oracles::random_pose(rng, 1.0, 5.0);
    const Pose b = oracles::random_pose(rng, 1.0, 5.0);
    const Pose c = oracles::random_pose(rng, 1.0, 5.0);
    CHECK((compose(a, compose(b, c)).matrix() - compose(compose(a, b), c).matrix()).norm() < 1e-12);
    CHECK((compose(a, b).inverse().matrix() - compose(b.inverse(), a.inverse()).matrix()).norm() < 1e-12);
  }
}

TEST_CASE("exp of zero twist and zero-translation twist") {
  CHECK((se3_exp(Twist()).matrix() - Eigen::Matrix4d::Identity()).norm() == 0.0);

  const Pose T = se3_exp(Twist(Eigen::Vector3d(0, 0, M_PI / 2), Eigen::Vector3d::Zero()));
  CHECK((T.rotation - rot_z(M_PI / 2).rotation).norm() < 1e-12);
  CHECK(T.translation.norm() == 0.0);
}

TEST_CASE("exp/log roundtrip over 10000 random twists, rotation norm in [0,3]") {
  oracles::Rng rng(1234);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double target_norm = rng.uniform(0.0, 3.0);
    Eigen::Vector3d rot = rng.vector(1.0);
    if (rot.norm() > 0.0) rot *= target_norm / rot.norm();
    const Twist xi(rot, rng.vector(10.0));
    const Twist back = se3_log(se3_exp(xi));
    worst = std::max(worst, (back.vector() - xi.vector()).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("log of identity and of pure rotation") {
  CHECK(se3_log(Pose::Identity()).vector().norm() == 0.0);

  const double theta = 0.7;
  const Twist xi = se3_log(rot_z(theta));
  CHECK((xi.vector() - (Vector6d() << 0, 0, theta, 0, 0, 0).finished()).norm() < 1e-12);
}

TEST_CASE("log handles rotation angles near pi") {
  oracles::Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    Eigen::Vector3d axis = rng.vector(1.0).normalized();
    for (const double theta : {M_PI - 1e-7, M_PI - 1e-9, M_PI}) {
      const Pose T(Eigen::AngleAxisd(theta, axis).toRotationMatrix(), rng.vector(2.0));
      const Pose back = se3_exp(se3_log(T));
      CHECK((back.matrix() - T.matrix()).norm() < 1e-6);
    }
  }
}

TEST_CASE("exp(log(T)) = T for random poses with rotation below pi") {
  oracles::Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Pose T = oracles::random_pose(rng, 1.0, 20.0);
    CHECK((se3_exp(se3_log(T)).matrix() - T.matrix()).norm() < 1e-9);
  }
}

TEST_CASE("retract applies right perturbation and re-orthonormalizes periodically") {
  oracles::Rng rng(3);
  Pose T = oracles::random_pose(rng, 1.0, 1.0);
  const Twist delta(Eigen::Vector3d(0.01, -0.02, 0.03), Eigen::Vector3d(0.1, 0.2, -0.3));
  const Pose expected = compose(T, se3_exp(delta));
  CHECK((T.retract(delta).matrix() - expected.matrix()).norm() < 1e-12);

  // Long chains keep R^T R = I within 1e-9.
  for (int i = 0; i < 2000; ++i) {
    T = T.retract(Twist(rng.vector(0.05), rng.vector(0.05)));
  }
  CHECK((T.rotation.transpose() * T.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9);
  CHECK(T.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("adjoint identity: T exp(xi) T^-1 = exp(Ad_T xi)") {
  oracles::Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const Pose T = oracles::random_pose(rng, 1.2, 5.0);
    const Twist xi(rng.vector(0.3), rng.vector(0.5));
    const Pose lhs = T * se3_exp(xi) * T.inverse();
    const Pose rhs = se3_exp(Twist(adjoint(T) * xi.vector()));
    CHECK((lhs.matrix() - rhs.matrix()).norm() < 1e-10);
  }
}

TEST_CASE("right jacobian inverse matches finite differences of the log") {
  oracles::Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    const Twist xi(rng.vector(0.5), rng.vector(1.0));
    const Matrix6d D = se3_right_jacobian_inverse(xi);

    const double h = 1e-7;
    Matrix6d fd;
    for (int d = 0; d < 6; ++d) {
      Vector6d step = Vector6d::Zero();
      step[d] = h;
      const Vector6d plus = se3_log(se3_exp(xi) * se3_exp(Twist(step))).vector();
      step[d] = -h;
      const Vector6d minus = se3_log(se3_exp(xi) * se3_exp(Twist(step))).vector();
      fd.col(d) = (plus - minus) / (2.0 * h);
    }
    CHECK((D - fd).norm() < 1e-6);
  }
}
