#include "vgicp/point_cloud.hpp"

#include "vgicp/kdtree.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace vgicp {

void PointCloud::validate() const {
  for (const auto& p : means) {
    if (!p.allFinite()) {
      throw std::invalid_argument("point cloud contains NaN/Inf coordinates");
    }
  }
  if (!covariances.empty() && covariances.size() != means.size()) {
    throw std::invalid_argument("covariance count does not match point count");
  }
  if (!intensities.empty() && intensities.size() != means.size()) {
    throw std::invalid_argument("intensity count does not match point count");
  }
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose& T, const ExecPolicy& policy) {
  PointCloud out;
  out.means.resize(cloud.size());
  out.intensities = cloud.intensities;
  const Eigen::Matrix3d R = T.rotation;

  if (cloud.has_covariances()) {
    out.covariances.resize(cloud.size());
    parallel_for(cloud.size(), policy, [&](std::size_t i) {
      out.means[i] = T.apply(cloud.means[i]);
      out.covariances[i] = R * cloud.covariances[i] * R.transpose();
    });
  } else {
    parallel_for(cloud.size(), policy, [&](std::size_t i) { out.means[i] = T.apply(cloud.means[i]); });
  }
  return out;
}

PointCloud estimate_covariances(const PointCloud& raw, int k, double plane_epsilon, const ExecPolicy& policy) {
  if (k < 4) {
    throw std::invalid_argument("covariance estimation requires k >= 4 neighbors");
  }
  if (raw.size() <= static_cast<std::size_t>(k)) {
    throw std::invalid_argument("covariance estimation requires more than k points");
  }
  raw.validate();

  PointCloud out;
  out.means = raw.means;
  out.intensities = raw.intensities;
  out.covariances.resize(raw.size());

  const KdTree tree(raw.means);

  parallel_for(raw.size(), policy, [&](std::size_t i) {
    const std::vector<int> neighbors = tree.knn(raw.means[i], k);

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const int n : neighbors) mean += raw.means[n];
    mean /= static_cast<double>(neighbors.size());

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const int n : neighbors) {
      const Eigen::Vector3d d = raw.means[n] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(neighbors.size());

    // Plane-to-plane regularization: keep eigenvectors, clamp the spectrum
    // to (plane_epsilon, 1, 1).
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Matrix3d V = eig.eigenvectors();  // ascending eigenvalues
    const Eigen::Vector3d regularized(plane_epsilon, 1.0, 1.0);
    out.covariances[i] = V * regularized.asDiagonal() * V.transpose();
  });

  return out;
}

}  // namespace vgicp
