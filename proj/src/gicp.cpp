#include "vgicp/gicp.hpp"

#include "vgicp/kdtree.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace vgicp {

namespace {

struct GnAccumulator {
  Matrix6d H = Matrix6d::Zero();
  Vector6d b = Vector6d::Zero();
  double cost = 0.0;
  int inliers = 0;

  GnAccumulator combine(const GnAccumulator& o) const {
    GnAccumulator r;
    r.H = H + o.H;
    r.b = b + o.b;
    r.cost = cost + o.cost;
    r.inliers = inliers + o.inliers;
    return r;
  }
};

// One pass over the source cloud at pose T. with_jacobians toggles between
// full linearization and error-only evaluation.
GnAccumulator evaluate_pass(const PointCloud& source, const PointCloud& target, const KdTree& tree, const Pose& T,
                            double max_dist, bool with_jacobians, const ExecPolicy& policy) {
  const double max_d2 = max_dist * max_dist;
  const Eigen::Matrix3d R = T.rotation;

  return parallel_reduce(
      source.size(), GnAccumulator{}, policy,
      [&](std::size_t begin, std::size_t end) {
        GnAccumulator acc;
        for (std::size_t k = begin; k < end; ++k) {
          const Eigen::Vector3d transformed = T.apply(source.means[k]);
          const std::vector<int> nn = tree.knn(transformed, 1);
          if (nn.empty()) continue;
          const int idx = nn[0];
          const Eigen::Vector3d e = target.means[idx] - transformed;
          if (e.squaredNorm() > max_d2) continue;

          const Eigen::Matrix3d combined = target.covariances[idx] + R * source.covariances[k] * R.transpose();
          const Eigen::LDLT<Eigen::Matrix3d> ldlt(combined);
          if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any()) continue;
          const Eigen::Matrix3d omega = ldlt.solve(Eigen::Matrix3d::Identity());

          acc.cost += e.dot(omega * e);
          ++acc.inliers;
          if (with_jacobians) {
            Eigen::Matrix<double, 3, 6> J;
            J.leftCols<3>() = R * skew(source.means[k]);
            J.rightCols<3>() = -R;
            const Eigen::Matrix<double, 3, 6> omega_J = omega * J;
            acc.H.noalias() += J.transpose() * omega_J;
            acc.b.noalias() -= J.transpose() * (omega * e);
          }
        }
        return acc;
      },
      [](const GnAccumulator& a, const GnAccumulator& b) { return a.combine(b); });
}

}  // namespace

GicpResult gicp_align(const PointCloud& source, const PointCloud& target, const Pose& initial,
                      const GicpSettings& settings) {
  if (!source.has_covariances() || !target.has_covariances()) {
    throw std::invalid_argument("gicp_align requires covariances on both clouds");
  }

  const KdTree tree(target.means);

  GicpResult result;
  result.pose = initial;

  double lambda = settings.lambda_init;
  GnAccumulator current =
      evaluate_pass(source, target, tree, result.pose, settings.max_correspondence_distance, true, settings.policy);

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    result.iterations = iter + 1;

    if (current.inliers == 0) break;

    // Damped step from the current linearization.
    Vector6d delta = Vector6d::Zero();
    bool solved = false;
    while (lambda < 1e12) {
      Matrix6d damped = current.H;
      for (int d = 0; d < 6; ++d) damped(d, d) += lambda * std::max(current.H(d, d), 1e-10);
      const Eigen::LDLT<Matrix6d> ldlt(damped);
      if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
        delta = ldlt.solve(current.b);
        solved = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!solved) break;

    if (delta.norm() < settings.convergence_twist_norm) {
      result.converged = true;
      break;
    }

    const Pose candidate = result.pose.retract(Twist(delta));
    const GnAccumulator next =
        evaluate_pass(source, target, tree, candidate, settings.max_correspondence_distance, true, settings.policy);

    if (next.inliers > 0 && next.cost < current.cost) {
      result.pose = candidate;
      current = next;
      lambda = std::max(lambda * 0.1, 1e-12);
      if (delta.norm() < settings.convergence_twist_norm) {
        result.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e10) break;
    }
  }

  result.cost = current.cost;
  result.inliers = current.inliers;
  result.mean_residual = current.inliers > 0 ? current.cost / current.inliers : std::numeric_limits<double>::infinity();
  result.hessian = current.H;
  return result;
}

Matrix6d hessian_information(const Matrix6d& H, double lambda_min) {
  const Eigen::SelfAdjointEigenSolver<Matrix6d> eig(0.5 * (H + H.transpose()));
  const Vector6d floored = eig.eigenvalues().cwiseMax(lambda_min);
  return eig.eigenvectors() * floored.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix6d hessian_covariance(const Matrix6d& H, double lambda_min) {
  const Eigen::SelfAdjointEigenSolver<Matrix6d> eig(0.5 * (H + H.transpose()));
  const Vector6d floored = eig.eigenvalues().cwiseMax(lambda_min);
  return eig.eigenvectors() * floored.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace vgicp
