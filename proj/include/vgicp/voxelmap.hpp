#pragma once

#include "vgicp/parallel.hpp"
#include "vgicp/point_cloud.hpp"
#include "vgicp/se3.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <unordered_map>

namespace vgicp {

/// Aggregate Gaussian of all points inserted into one voxel:
/// mean is the arithmetic mean of the inserted means, covariance the average
/// of the inserted covariances plus the spread of the means (law of total
/// covariance), so a single point already yields a usable distribution.
struct GaussianVoxel {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  int count = 0;
};

/// Sparse voxel hash map of Gaussian distributions. The voxel of a point is
/// floor(p / resolution) per axis; integer coordinates are packed into a
/// 64-bit key (21 bits per axis), so clouds beyond +-2^20 voxels per axis
/// are rejected. Immutable after construction; lookups are freely concurrent.
class GaussianVoxelMap {
 public:
  /// Requires resolution > 0 and per-point covariances.
  /// Construction is parallel via key-sharded accumulation with a fixed
  /// merge order, so the result does not depend on the thread count.
  GaussianVoxelMap(const PointCloud& cloud, double resolution, const ExecPolicy& policy = {});

  double resolution() const { return resolution_; }
  std::size_t size() const { return voxels_.size(); }

  /// Voxel containing the point, or nullptr. Single-voxel lookup only; no
  /// neighbor fallback.
  const GaussianVoxel* lookup(const Eigen::Vector3d& point) const;

  Eigen::Vector3i voxel_coord(const Eigen::Vector3d& point) const;

  static std::uint64_t pack_key(const Eigen::Vector3i& coord);

  const std::unordered_map<std::uint64_t, GaussianVoxel>& voxels() const { return voxels_; }

  /// Total inserted point count (equals the size of the source cloud).
  std::size_t total_points() const { return total_points_; }

 private:
  double resolution_ = 1.0;
  double inv_resolution_ = 1.0;
  std::size_t total_points_ = 0;
  std::unordered_map<std::uint64_t, GaussianVoxel> voxels_;
};

/// Fraction of cloud points whose pose_rel-transformed mean lands in a
/// populated voxel of map. Exact count / N; requires a nonempty cloud.
double overlap_rate(const PointCloud& cloud, const Pose& pose_rel, const GaussianVoxelMap& map,
                    const ExecPolicy& policy = {});

/// One output point per populated voxel (the voxel distribution), ordered by
/// packed key for determinism. Intensities are averaged when present.
PointCloud voxel_downsample(const PointCloud& cloud, double resolution, const ExecPolicy& policy = {});

}  // namespace vgicp
