#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "vgicp/kdtree.hpp"
#include "vgicp/point_cloud.hpp"

#include <Eigen/Eigenvalues>

using namespace vgicp;

namespace {

PointCloud make_cloud(const std::vector<Eigen::Vector3d>& pts) {
  PointCloud c;
  c.means = pts;
  return c;
}

std::vector<Eigen::Vector3d> random_points(oracles::Rng& rng, int n, double scale) {
  std::vector<Eigen::Vector3d> pts(n);
  for (auto& p : pts) p = rng.vector(scale);
  return pts;
}

}  // namespace

TEST_CASE("knn: query at a cloud point returns that point first") {
  oracles::Rng rng(1);
  const auto pts = random_points(rng, 500, 10.0);
  const KdTree tree(pts);
  for (int i = 0; i < 500; i += 37) {
    const auto nn = tree.knn(pts[i], 1);
    REQUIRE(nn.size() == 1);
    CHECK(nn[0] == i);
  }
}

TEST_CASE("knn: collinear example and tie rule") {
  const std::vector<Eigen::Vector3d> pts = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  const KdTree tree(pts);
  const auto nn = tree.knn({0.9, 0, 0}, 2);
  REQUIRE(nn.size() == 2);
  CHECK(nn[0] == 1);
  CHECK(nn[1] == 0);

  // Equidistant pair: lower index first.
  const std::vector<Eigen::Vector3d> sym = {{-1, 0, 0}, {1, 0, 0}, {0, 5, 0}};
  const KdTree tree2(sym);
  const auto tie = tree2.knn({0, 0, 0}, 2);
  CHECK(tie[0] == 0);
  CHECK(tie[1] == 1);
}

TEST_CASE("knn agrees with brute force on 1000 random queries") {
  oracles::Rng rng(2);
  const auto pts = random_points(rng, 5000, 25.0);
  const KdTree tree(pts);
  for (int q = 0; q < 1000; ++q) {
    const Eigen::Vector3d query = rng.vector(30.0);
    const int k = 1 + static_cast<int>(rng.uniform(0.0, 20.0));
    CHECK(tree.knn(query, k) == oracles::brute_force_knn(pts, query, k));
  }
}

TEST_CASE("radius search matches brute force") {
  oracles::Rng rng(3);
  const auto pts = random_points(rng, 2000, 10.0);
  const KdTree tree(pts);
  for (int q = 0; q < 100; ++q) {
    const Eigen::Vector3d query = rng.vector(10.0);
    const double r = rng.uniform(0.5, 3.0);
    std::vector<int> expected;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if ((pts[i] - query).squaredNorm() <= r * r) expected.push_back(static_cast<int>(i));
    }
    CHECK(tree.radius_search(query, r) == expected);
  }
}

TEST_CASE("estimate_covariances rejects too-few points and small k") {
  oracles::Rng rng(4);
  const PointCloud cloud = make_cloud(random_points(rng, 10, 1.0));
  CHECK_THROWS_AS((void)estimate_covariances(cloud, 10), std::invalid_argument);
  CHECK_THROWS_AS((void)estimate_covariances(cloud, 3), std::invalid_argument);
  CHECK_NOTHROW((void)estimate_covariances(cloud, 9));
}

TEST_CASE("coplanar points: regularized spectrum (1, 1, eps) and plane normal") {
  oracles::Rng rng(5);
  PointCloud cloud;
  const Eigen::Vector3d normal = Eigen::Vector3d(1, 2, 3).normalized();
  const Eigen::Vector3d u = normal.unitOrthogonal();
  const Eigen::Vector3d v = normal.cross(u);
  for (int i = 0; i < 20; ++i) {
    cloud.means.push_back(rng.uniform(-1, 1) * u + rng.uniform(-1, 1) * v);
  }

  const PointCloud out = estimate_covariances(cloud, 10, 1e-3);
  REQUIRE(out.has_covariances());
  for (const auto& c : out.covariances) {
    CHECK((c - c.transpose()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(c);
    CHECK(eig.eigenvalues()[0] == doctest::Approx(1e-3).epsilon(1e-9));
    CHECK(eig.eigenvalues()[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(eig.eigenvalues()[2] == doctest::Approx(1.0).epsilon(1e-9));
    // Smallest eigenvector is the plane normal (up to sign).
    CHECK(std::abs(eig.eigenvectors().col(0).dot(normal)) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("collinear points: degenerate direction handled without NaN") {
  PointCloud cloud;
  for (int i = 0; i < 12; ++i) cloud.means.push_back(Eigen::Vector3d(0.1 * i, 0, 0));
  const PointCloud out = estimate_covariances(cloud, 5, 1e-3);
  for (const auto& c : out.covariances) {
    CHECK(c.allFinite());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(c);
    CHECK(eig.eigenvalues()[0] == doctest::Approx(1e-3).epsilon(1e-9));
    CHECK(eig.eigenvalues()[2] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("random clouds keep the exact regularized spectrum") {
  oracles::Rng rng(6);
  const PointCloud cloud = make_cloud(random_points(rng, 300, 5.0));
  const PointCloud out = estimate_covariances(cloud, 10);
  for (const auto& c : out.covariances) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(c);
    CHECK(std::abs(eig.eigenvalues()[0] - 1e-3) < 1e-9);
    CHECK(std::abs(eig.eigenvalues()[1] - 1.0) < 1e-9);
    CHECK(std::abs(eig.eigenvalues()[2] - 1.0) < 1e-9);
  }
}

TEST_CASE("transform_cloud: identity, pure translation, rotation of covariance") {
  oracles::Rng rng(7);
  PointCloud cloud = make_cloud(random_points(rng, 50, 3.0));
  cloud = estimate_covariances(cloud, 8);

  const PointCloud same = transform_cloud(cloud, Pose::Identity());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK((same.means[i] - cloud.means[i]).norm() == 0.0);
    CHECK((same.covariances[i] - cloud.covariances[i]).norm() == 0.0);
  }

  const Pose shift(Eigen::Matrix3d::Identity(), Eigen::Vector3d(1, 2, 3));
  const PointCloud moved = transform_cloud(cloud, shift);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK((moved.covariances[i] - cloud.covariances[i]).norm() == 0.0);
  }

  // Rz(90) maps diag(a, b, c) to diag(b, a, c).
  PointCloud one;
  one.means = {Eigen::Vector3d::Zero()};
  one.covariances = {Eigen::Vector3d(2.0, 5.0, 9.0).asDiagonal()};
  const Pose rz(Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix(), Eigen::Vector3d::Zero());
  const PointCloud rotated = transform_cloud(one, rz);
  CHECK((rotated.covariances[0] - Eigen::Matrix3d(Eigen::Vector3d(5.0, 2.0, 9.0).asDiagonal())).norm() < 1e-12);
}

TEST_CASE("transform roundtrip T then T^-1 is the identity within 1e-9") {
  oracles::Rng rng(8);
  PointCloud cloud = make_cloud(random_points(rng, 100, 10.0));
  cloud = estimate_covariances(cloud, 8);
  const Pose T = oracles::random_pose(rng, 1.0, 5.0);
  const PointCloud back = transform_cloud(transform_cloud(cloud, T), T.inverse());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK((back.means[i] - cloud.means[i]).norm() < 1e-9);
    CHECK((back.covariances[i] - cloud.covariances[i]).norm() < 1e-9);
  }
}

TEST_CASE("validate rejects NaN coordinates") {
  PointCloud cloud;
  cloud.means = {Eigen::Vector3d(0, 0, std::numeric_limits<double>::quiet_NaN())};
  CHECK_THROWS_AS(cloud.validate(), std::invalid_argument);
}
