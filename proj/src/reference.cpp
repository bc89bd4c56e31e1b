#include "vgicp/reference.hpp"

#include "vgicp/kdtree.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace vgicp::reference {

PointCloud estimate_covariances(const PointCloud& raw, int k, double plane_epsilon) {
  if (k < 4 || raw.size() <= static_cast<std::size_t>(k)) {
    throw std::invalid_argument("covariance estimation requires k >= 4 and more than k points");
  }
  const KdTree tree(raw.means);

  PointCloud out;
  out.means = raw.means;
  out.intensities = raw.intensities;
  out.covariances.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
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
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    out.covariances[i] =
        eig.eigenvectors() * Eigen::Vector3d(plane_epsilon, 1.0, 1.0).asDiagonal() * eig.eigenvectors().transpose();
  }
  return out;
}

std::unordered_map<std::uint64_t, GaussianVoxel> build_voxelmap(const PointCloud& cloud, double resolution) {
  struct Accum {
    Eigen::Vector3d mean_sum = Eigen::Vector3d::Zero();
    Eigen::Matrix3d moment_sum = Eigen::Matrix3d::Zero();
    int count = 0;
  };
  std::unordered_map<std::uint64_t, Accum> accums;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Eigen::Vector3i coord;
    for (int a = 0; a < 3; ++a) coord[a] = static_cast<int>(std::floor(cloud.means[i][a] / resolution));
    Accum& acc = accums[GaussianVoxelMap::pack_key(coord)];
    acc.mean_sum += cloud.means[i];
    acc.moment_sum += cloud.covariances[i] + cloud.means[i] * cloud.means[i].transpose();
    acc.count += 1;
  }

  std::unordered_map<std::uint64_t, GaussianVoxel> voxels;
  voxels.reserve(accums.size());
  for (const auto& [key, acc] : accums) {
    GaussianVoxel v;
    v.count = acc.count;
    v.mean = acc.mean_sum / acc.count;
    v.covariance = acc.moment_sum / acc.count - v.mean * v.mean.transpose();
    voxels.emplace(key, v);
  }
  return voxels;
}

double overlap_rate(const PointCloud& cloud, const Pose& pose_rel, const GaussianVoxelMap& map) {
  if (cloud.empty()) throw std::invalid_argument("overlap_rate requires a nonempty cloud");
  std::size_t hits = 0;
  for (const auto& p : cloud.means) {
    if (map.lookup(pose_rel.apply(p)) != nullptr) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cloud.size());
}

LinearizedFactor linearize_matching_cost(const MatchingCostFactor& factor, const Pose& T_target,
                                         const Pose& T_source) {
  const PointCloud& source = *factor.source_points;
  const Pose T_ts = T_target.inverse() * T_source;
  const Eigen::Matrix3d R = T_ts.rotation;

  LinearizedFactor out;
  out.i = factor.target_index;
  out.j = factor.source_index;
  for (std::size_t k = 0; k < source.size(); ++k) {
    const Eigen::Vector3d transformed = T_ts.apply(source.means[k]);
    const GaussianVoxel* voxel = factor.target_voxels->lookup(transformed);
    if (voxel == nullptr) continue;

    const Eigen::Matrix3d combined = voxel->covariance + R * source.covariances[k] * R.transpose();
    const Eigen::Matrix3d omega = 0.5 * (combined.inverse() + combined.inverse().transpose());
    const Eigen::Vector3d e = voxel->mean - transformed;

    Eigen::Matrix<double, 3, 6> A;
    A.leftCols<3>() = -skew(transformed);
    A.rightCols<3>() = Eigen::Matrix3d::Identity();
    Eigen::Matrix<double, 3, 6> B;
    B.leftCols<3>() = R * skew(source.means[k]);
    B.rightCols<3>() = -R;

    out.H_ii += A.transpose() * omega * A;
    out.H_ij += A.transpose() * omega * B;
    out.H_jj += B.transpose() * omega * B;
    out.b_i -= A.transpose() * omega * e;
    out.b_j -= B.transpose() * omega * e;
    out.error += e.dot(omega * e);
    ++out.inliers;
  }
  return out;
}

}  // namespace vgicp::reference
