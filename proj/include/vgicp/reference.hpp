#pragma once

#include "vgicp/factors.hpp"
#include "vgicp/point_cloud.hpp"
#include "vgicp/voxelmap.hpp"

#include <unordered_map>

namespace vgicp::reference {

/// Serial reference implementations of the parallel kernels: plain loops,
/// input-order accumulation, no sharding and no tree reduction. Kept for
/// parity tests and as the baseline of the kernel benchmarks.

PointCloud estimate_covariances(const PointCloud& raw, int k = 10, double plane_epsilon = 1e-3);

std::unordered_map<std::uint64_t, GaussianVoxel> build_voxelmap(const PointCloud& cloud, double resolution);

double overlap_rate(const PointCloud& cloud, const Pose& pose_rel, const GaussianVoxelMap& map);

LinearizedFactor linearize_matching_cost(const MatchingCostFactor& factor, const Pose& T_target,
                                         const Pose& T_source);

}  // namespace vgicp::reference
