#pragma once

#include "vgicp/parallel.hpp"
#include "vgicp/point_cloud.hpp"
#include "vgicp/se3.hpp"

namespace vgicp {

struct GicpSettings {
  int max_iterations = 64;
  double max_correspondence_distance = 2.0;  // meters
  double convergence_twist_norm = 1e-6;
  double lambda_init = 1e-6;
  ExecPolicy policy;
};

struct GicpResult {
  Pose pose;                // T such that target ~= T * source
  double cost = 0.0;        // summed distribution-to-distribution error at pose
  double mean_residual = 0.0;  // cost / inliers
  Matrix6d hessian = Matrix6d::Zero();  // undamped Gauss-Newton Hessian at pose
  int inliers = 0;
  int iterations = 0;
  bool converged = false;
};

/// Conventional GICP: kd-tree nearest-neighbor correspondences, re-associated
/// every iteration, distribution-to-distribution error, damped Gauss-Newton
/// steps accepted only on cost decrease. Non-convergence within
/// max_iterations returns the best-so-far pose with converged == false.
GicpResult gicp_align(const PointCloud& source, const PointCloud& target, const Pose& initial,
                      const GicpSettings& settings = {});

/// Information matrix from a scan-matching Hessian: eigenvalues floored at
/// lambda_min so near-singular directions stay finite.
Matrix6d hessian_information(const Matrix6d& H, double lambda_min = 1e-6);

/// Covariance = inverse of the floored information.
Matrix6d hessian_covariance(const Matrix6d& H, double lambda_min = 1e-6);

}  // namespace vgicp
