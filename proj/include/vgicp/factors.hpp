#pragma once

#include "vgicp/point_cloud.hpp"
#include "vgicp/robust_kernel.hpp"
#include "vgicp/se3.hpp"
#include "vgicp/voxelmap.hpp"

#include <memory>

namespace vgicp {

/// Gauss-Newton blocks of one factor between pose variables i and j.
///
/// Sign convention: b_* = -sum J^T Omega e, so the damped normal equations
/// are H delta = b and the gradient of the summed error at the linearization
/// point is -2 [b_i; b_j]. The quadratic model of the error under local
/// perturbations (d_i, d_j) is
///   error - 2 b^T d + d^T H d,  H = [[H_ii, H_ij], [H_ij^T, H_jj]].
struct LinearizedFactor {
  int i = -1;
  int j = -1;
  Matrix6d H_ii = Matrix6d::Zero();
  Matrix6d H_ij = Matrix6d::Zero();
  Matrix6d H_jj = Matrix6d::Zero();
  Vector6d b_i = Vector6d::Zero();
  Vector6d b_j = Vector6d::Zero();
  double error = 0.0;
  int inliers = 0;
};

/// Voxelized GICP matching cost between two clouds: source points are
/// transformed by T_target^-1 * T_source and looked up in the target's voxel
/// map; every hit contributes the distribution-to-distribution error. For a
/// frame pair this library fixes one direction: the older frame owns the
/// voxel map (target), the newer frame supplies the points (source).
struct MatchingCostFactor {
  int target_index = -1;  // variable whose cloud is voxelized
  int source_index = -1;  // variable whose points are evaluated
  std::shared_ptr<const PointCloud> source_points;
  std::shared_ptr<const GaussianVoxelMap> target_voxels;

  MatchingCostFactor() = default;
  MatchingCostFactor(int target_index, int source_index, std::shared_ptr<const PointCloud> source_points,
                     std::shared_ptr<const GaussianVoxelMap> target_voxels);
};

/// SE3 relative pose measurement with information matrix and robust kernel.
/// Residual r = log(measurement^-1 * T_i^-1 * T_j); the kernel is evaluated
/// on the plain twist norm of r and scales the blocks as an IRLS weight.
struct RelativePoseFactor {
  int i = -1;
  int j = -1;
  Pose measurement;
  Matrix6d information = Matrix6d::Identity();
  RobustKernel kernel;

  RelativePoseFactor() = default;
  RelativePoseFactor(int i, int j, const Pose& measurement, const Matrix6d& information,
                     const RobustKernel& kernel = RobustKernel::none());
};

struct GicpErrorResult {
  double error = 0.0;           // d^T Omega d
  Eigen::Vector3d residual;     // d = target_mean - T * source_mean
  Eigen::Matrix3d information;  // Omega = (C_target + T C_source T^T)^-1
  bool valid = true;            // false when the combined covariance is singular
};

/// Distribution-to-distribution error of one point against one voxel under T.
GicpErrorResult gicp_error(const GaussianPoint& source, const GaussianVoxel& target, const Pose& T);

/// Linearizes the matching cost at (T_target, T_source). Missed lookups
/// contribute nothing; zero hits yield an all-zero factor with inliers == 0
/// (a deficient constraint, kept in the graph). Blocks i/j correspond to the
/// factor's target/source variables respectively.
LinearizedFactor linearize_matching_cost(const MatchingCostFactor& factor, const Pose& T_target,
                                         const Pose& T_source, const ExecPolicy& policy = {});

/// Error and inlier count only (used for step acceptance tests).
std::pair<double, int> evaluate_matching_cost(const MatchingCostFactor& factor, const Pose& T_target,
                                              const Pose& T_source, const ExecPolicy& policy = {});

LinearizedFactor linearize_relative_pose(const RelativePoseFactor& factor, const Pose& T_i, const Pose& T_j);

double evaluate_relative_pose(const RelativePoseFactor& factor, const Pose& T_i, const Pose& T_j);

}  // namespace vgicp
