#pragma once

#include "vgicp/parallel.hpp"
#include "vgicp/se3.hpp"

#include <Eigen/Core>

#include <vector>

namespace vgicp {

/// A point mean with its 3x3 covariance.
struct GaussianPoint {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
};

/// Point cloud as structure-of-arrays. covariances is either empty (raw
/// cloud) or one matrix per point; intensities is optional likewise.
/// Immutable by convention once handed to registration operations.
struct PointCloud {
  std::vector<Eigen::Vector3d> means;
  std::vector<Eigen::Matrix3d> covariances;
  std::vector<double> intensities;

  std::size_t size() const { return means.size(); }
  bool empty() const { return means.empty(); }
  bool has_covariances() const { return !means.empty() && covariances.size() == means.size(); }
  bool has_intensities() const { return intensities.size() == means.size() && !means.empty(); }

  GaussianPoint point(std::size_t k) const { return {means[k], has_covariances() ? covariances[k] : Eigen::Matrix3d::Zero()}; }

  void push_back(const Eigen::Vector3d& mean) { means.push_back(mean); }

  /// Throws std::invalid_argument on NaN/Inf coordinates.
  void validate() const;
};

/// Means mapped by T, covariances mapped as R C R^T, intensities carried over.
PointCloud transform_cloud(const PointCloud& cloud, const Pose& T, const ExecPolicy& policy = {});

/// Per-point covariance from the k nearest neighbors (the point itself
/// included), eigenvalue-regularized to the plane-to-plane spectrum
/// (1, 1, plane_epsilon) keeping the eigenvectors. The neighbor search
/// happens only here, once per input cloud.
///
/// Throws std::invalid_argument when cloud.size() <= k or k < 4.
PointCloud estimate_covariances(const PointCloud& raw, int k = 10, double plane_epsilon = 1e-3,
                                const ExecPolicy& policy = {});

}  // namespace vgicp
