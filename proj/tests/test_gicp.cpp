#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "vgicp/gicp.hpp"

#include <Eigen/Eigenvalues>

using namespace vgicp;

namespace {

// Three orthogonal plane patches: constrains all six degrees of freedom.
PointCloud structured_cloud(oracles::Rng& rng, int points_per_plane, double noise = 0.0) {
  PointCloud cloud;
  for (int i = 0; i < points_per_plane; ++i) {
    cloud.means.emplace_back(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.normal(noise));
    cloud.means.emplace_back(rng.uniform(-5, 5), 6.0 + rng.normal(noise), rng.uniform(0, 4));
    cloud.means.emplace_back(7.0 + rng.normal(noise), rng.uniform(-5, 5), rng.uniform(0, 4));
  }
  return estimate_covariances(cloud, 10);
}

}  // namespace

TEST_CASE("gicp_align: source == target at identity is a fixed point") {
  oracles::Rng rng(50);
  const PointCloud cloud = structured_cloud(rng, 150);
  const GicpResult r = gicp_align(cloud, cloud, Pose::Identity());
  CHECK(r.converged);
  CHECK(r.cost == doctest::Approx(0.0));
  CHECK((r.pose.matrix() - Eigen::Matrix4d::Identity()).norm() < 1e-10);
}

TEST_CASE("gicp_align recovers a known small transform") {
  oracles::Rng rng(51);
  const PointCloud target = structured_cloud(rng, 200);
  const Pose truth = se3_exp(Twist(Eigen::Vector3d(0.02, -0.015, 0.03), Eigen::Vector3d(0.15, -0.1, 0.08)));
  // target = truth * source  =>  source = truth^-1 * target.
  const PointCloud source = transform_cloud(target, truth.inverse());

  const GicpResult r = gicp_align(source, target, Pose::Identity());
  CHECK(r.converged);
  CHECK((r.pose.translation - truth.translation).norm() < 1e-3);
  const double rot_err = so3_log(r.pose.rotation.transpose() * truth.rotation).norm();
  CHECK(rot_err < 0.05 * M_PI / 180.0);
}

TEST_CASE("gicp_align flags non-convergence far outside the basin") {
  oracles::Rng rng(52);
  // Repetitive scene: a row of identical pillars, period 2 m.
  PointCloud target;
  for (int p = 0; p < 10; ++p) {
    for (int i = 0; i < 60; ++i) {
      target.means.emplace_back(2.0 * p + 0.05 * rng.normal(1.0), rng.uniform(-0.3, 0.3), rng.uniform(0, 2));
    }
  }
  target = estimate_covariances(target, 10);
  const PointCloud source = target;

  // Initial guess far outside the convergence basin.
  const Pose bad_init(Eigen::AngleAxisd(0.9, Eigen::Vector3d::UnitZ()).toRotationMatrix(),
                      Eigen::Vector3d(11.0, 4.0, 2.0));
  GicpSettings settings;
  settings.max_iterations = 8;
  const GicpResult r = gicp_align(source, target, bad_init, settings);
  const double pose_err = se3_log(r.pose).norm();
  CHECK((!r.converged || pose_err > 0.5));
}

TEST_CASE("gauge behavior: transforming both clouds conjugates the result") {
  oracles::Rng rng(53);
  const PointCloud target = structured_cloud(rng, 100);
  const Pose truth = se3_exp(Twist(Eigen::Vector3d(0.01, 0.02, -0.01), Eigen::Vector3d(0.1, 0.05, -0.04)));
  const PointCloud source = transform_cloud(target, truth.inverse());

  const GicpResult base = gicp_align(source, target, Pose::Identity());

  const Pose G = oracles::random_pose(rng, 0.8, 20.0);
  const GicpResult moved = gicp_align(transform_cloud(source, G), transform_cloud(target, G), Pose::Identity());
  const Pose expected = G * base.pose * G.inverse();
  CHECK((moved.pose.matrix() - expected.matrix()).norm() < 1e-5);
}

TEST_CASE("hessian_information/covariance: identity, scaling, floor") {
  CHECK((hessian_covariance(Matrix6d::Identity()) - Matrix6d::Identity()).norm() < 1e-12);

  oracles::Rng rng(54);
  Matrix6d A;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) A(r, c) = rng.uniform(-1, 1);
  const Matrix6d H = A * A.transpose() + Matrix6d::Identity();
  CHECK((hessian_covariance(4.0 * H) - 0.25 * hessian_covariance(H)).norm() < 1e-9);

  // Rank-deficient Hessian (corridor): floored eigenvalue gives a large but
  // finite variance along the unconstrained direction.
  Matrix6d defect = H;
  const Eigen::SelfAdjointEigenSolver<Matrix6d> eig(H);
  Vector6d vals = eig.eigenvalues();
  vals[0] = 0.0;
  defect = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
  const Matrix6d cov = hessian_covariance(defect, 1e-6);
  CHECK(cov.allFinite());
  const Eigen::SelfAdjointEigenSolver<Matrix6d> ceig(cov);
  CHECK(ceig.eigenvalues().maxCoeff() == doctest::Approx(1e6).epsilon(1e-6));

  const Matrix6d info = hessian_information(defect, 1e-6);
  const Eigen::SelfAdjointEigenSolver<Matrix6d> ieig(info);
  CHECK(ieig.eigenvalues().minCoeff() == doctest::Approx(1e-6).epsilon(1e-6));
}
