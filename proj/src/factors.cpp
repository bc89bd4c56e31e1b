#include "vgicp/factors.hpp"

#include <Eigen/Cholesky>

#include <stdexcept>

namespace vgicp {

namespace {

// Accumulator for the per-point Gauss-Newton contributions of one matching
// cost factor. Combined by the parallel reduction (fixed tree order in
// deterministic mode, mirroring the GPU reduction contract).
struct FactorAccumulator {
  Matrix6d H_tt = Matrix6d::Zero();
  Matrix6d H_ts = Matrix6d::Zero();
  Matrix6d H_ss = Matrix6d::Zero();
  Vector6d b_t = Vector6d::Zero();
  Vector6d b_s = Vector6d::Zero();
  double error = 0.0;
  int inliers = 0;

  FactorAccumulator combine(const FactorAccumulator& o) const {
    FactorAccumulator r;
    r.H_tt = H_tt + o.H_tt;
    r.H_ts = H_ts + o.H_ts;
    r.H_ss = H_ss + o.H_ss;
    r.b_t = b_t + o.b_t;
    r.b_s = b_s + o.b_s;
    r.error = error + o.error;
    r.inliers = inliers + o.inliers;
    return r;
  }
};

// Inverse of the combined covariance via LDLT; flags near-singular inputs
// (unreachable with plane-regularized covariances).
bool invert_covariance(const Eigen::Matrix3d& M, Eigen::Matrix3d& out) {
  const Eigen::LDLT<Eigen::Matrix3d> ldlt(M);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any()) {
    return false;
  }
  out = ldlt.solve(Eigen::Matrix3d::Identity());
  out = 0.5 * (out + out.transpose()).eval();
  return true;
}

}  // namespace

MatchingCostFactor::MatchingCostFactor(int target_index, int source_index,
                                       std::shared_ptr<const PointCloud> source_points,
                                       std::shared_ptr<const GaussianVoxelMap> target_voxels)
    : target_index(target_index),
      source_index(source_index),
      source_points(std::move(source_points)),
      target_voxels(std::move(target_voxels)) {
  if (target_index == source_index) throw std::invalid_argument("matching cost factor requires distinct variables");
  if (!this->source_points || this->source_points->empty()) {
    throw std::invalid_argument("matching cost factor requires a nonempty source cloud");
  }
  if (!this->source_points->has_covariances()) {
    throw std::invalid_argument("matching cost factor requires source covariances");
  }
  if (!this->target_voxels || this->target_voxels->size() == 0) {
    throw std::invalid_argument("matching cost factor requires a nonempty target voxel map");
  }
}

RelativePoseFactor::RelativePoseFactor(int i, int j, const Pose& measurement, const Matrix6d& information,
                                       const RobustKernel& kernel)
    : i(i), j(j), measurement(measurement), information(information), kernel(kernel) {
  if (i == j) throw std::invalid_argument("relative pose factor requires distinct variables");
}

GicpErrorResult gicp_error(const GaussianPoint& source, const GaussianVoxel& target, const Pose& T) {
  GicpErrorResult result;
  result.residual = target.mean - T.apply(source.mean);
  const Eigen::Matrix3d combined =
      target.covariance + T.rotation * source.covariance * T.rotation.transpose();
  if (!invert_covariance(combined, result.information)) {
    result.valid = false;
    result.error = 0.0;
    result.information.setZero();
    return result;
  }
  result.error = result.residual.dot(result.information * result.residual);
  return result;
}

LinearizedFactor linearize_matching_cost(const MatchingCostFactor& factor, const Pose& T_target,
                                         const Pose& T_source, const ExecPolicy& policy) {
  const PointCloud& source = *factor.source_points;
  const GaussianVoxelMap& targets = *factor.target_voxels;
  const Pose T_ts = T_target.inverse() * T_source;
  const Eigen::Matrix3d R = T_ts.rotation;

  const FactorAccumulator total = parallel_reduce(
      source.size(), FactorAccumulator{}, policy,
      [&](std::size_t begin, std::size_t end) {
        FactorAccumulator acc;
        for (std::size_t k = begin; k < end; ++k) {
          const Eigen::Vector3d transformed = T_ts.apply(source.means[k]);
          const GaussianVoxel* voxel = targets.lookup(transformed);
          if (voxel == nullptr) continue;

          const Eigen::Vector3d e = voxel->mean - transformed;
          Eigen::Matrix3d omega;
          if (!invert_covariance(voxel->covariance + R * source.covariances[k] * R.transpose(), omega)) {
            continue;  // singular combined covariance: skip and flag via inlier count
          }

          // Right-perturbation Jacobians of e = mu' - T_ts * mu:
          //   target block A = [-skew(T_ts mu) | I]
          //   source block B = [ R skew(mu)    | -R]
          Eigen::Matrix<double, 3, 6> A;
          A.leftCols<3>() = -skew(transformed);
          A.rightCols<3>() = Eigen::Matrix3d::Identity();
          Eigen::Matrix<double, 3, 6> B;
          B.leftCols<3>() = R * skew(source.means[k]);
          B.rightCols<3>() = -R;

          const Eigen::Matrix<double, 3, 6> omega_A = omega * A;
          const Eigen::Matrix<double, 3, 6> omega_B = omega * B;
          acc.H_tt.noalias() += A.transpose() * omega_A;
          acc.H_ts.noalias() += A.transpose() * omega_B;
          acc.H_ss.noalias() += B.transpose() * omega_B;
          acc.b_t.noalias() -= A.transpose() * (omega * e);
          acc.b_s.noalias() -= B.transpose() * (omega * e);
          acc.error += e.dot(omega * e);
          ++acc.inliers;
        }
        return acc;
      },
      [](const FactorAccumulator& a, const FactorAccumulator& b) { return a.combine(b); });

  LinearizedFactor out;
  out.i = factor.target_index;
  out.j = factor.source_index;
  // Diagonal blocks are symmetric up to inversion rounding; make it exact.
  out.H_ii = 0.5 * (total.H_tt + total.H_tt.transpose());
  out.H_ij = total.H_ts;
  out.H_jj = 0.5 * (total.H_ss + total.H_ss.transpose());
  out.b_i = total.b_t;
  out.b_j = total.b_s;
  out.error = total.error;
  out.inliers = total.inliers;
  return out;
}

std::pair<double, int> evaluate_matching_cost(const MatchingCostFactor& factor, const Pose& T_target,
                                              const Pose& T_source, const ExecPolicy& policy) {
  const PointCloud& source = *factor.source_points;
  const GaussianVoxelMap& targets = *factor.target_voxels;
  const Pose T_ts = T_target.inverse() * T_source;
  const Eigen::Matrix3d R = T_ts.rotation;

  struct ErrPartial {
    double error = 0.0;
    int inliers = 0;
  };
  const ErrPartial total = parallel_reduce(
      source.size(), ErrPartial{}, policy,
      [&](std::size_t begin, std::size_t end) {
        ErrPartial acc;
        for (std::size_t k = begin; k < end; ++k) {
          const Eigen::Vector3d transformed = T_ts.apply(source.means[k]);
          const GaussianVoxel* voxel = targets.lookup(transformed);
          if (voxel == nullptr) continue;
          const Eigen::Vector3d e = voxel->mean - transformed;
          Eigen::Matrix3d omega;
          if (!invert_covariance(voxel->covariance + R * source.covariances[k] * R.transpose(), omega)) {
            continue;
          }
          acc.error += e.dot(omega * e);
          ++acc.inliers;
        }
        return acc;
      },
      [](const ErrPartial& a, const ErrPartial& b) { return ErrPartial{a.error + b.error, a.inliers + b.inliers}; });
  return {total.error, total.inliers};
}

LinearizedFactor linearize_relative_pose(const RelativePoseFactor& factor, const Pose& T_i, const Pose& T_j) {
  const Twist r = se3_log(factor.measurement.inverse() * T_i.inverse() * T_j);
  const Vector6d rv = r.vector();

  const KernelValue kernel = apply_kernel(factor.kernel, rv.squaredNorm());
  LinearizedFactor out;
  out.i = factor.i;
  out.j = factor.j;
  if (kernel.weight <= 0.0) {
    return out;  // outlier cutoff: zero factor
  }

  // d r / d delta_j = Jr^-1(r); d r / d delta_i = -Jr^-1(r) Ad(T_j^-1 T_i).
  const Matrix6d Jr_inv = se3_right_jacobian_inverse(r);
  const Matrix6d J_j = Jr_inv;
  const Matrix6d J_i = -Jr_inv * adjoint(T_j.inverse() * T_i);

  const Matrix6d weighted_info = kernel.weight * factor.information;
  out.H_ii = J_i.transpose() * weighted_info * J_i;
  out.H_ij = J_i.transpose() * weighted_info * J_j;
  out.H_jj = J_j.transpose() * weighted_info * J_j;
  out.H_ii = 0.5 * (out.H_ii + out.H_ii.transpose()).eval();
  out.H_jj = 0.5 * (out.H_jj + out.H_jj.transpose()).eval();
  out.b_i = -J_i.transpose() * (weighted_info * rv);
  out.b_j = -J_j.transpose() * (weighted_info * rv);
  out.error = rv.dot(weighted_info * rv);
  out.inliers = 1;
  return out;
}

double evaluate_relative_pose(const RelativePoseFactor& factor, const Pose& T_i, const Pose& T_j) {
  const Vector6d rv = se3_log(factor.measurement.inverse() * T_i.inverse() * T_j).vector();
  const KernelValue kernel = apply_kernel(factor.kernel, rv.squaredNorm());
  return kernel.weight * rv.dot(factor.information * rv);
}

}  // namespace vgicp
