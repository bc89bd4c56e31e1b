#pragma once

#include "vgicp/gicp.hpp"
#include "vgicp/graph.hpp"
#include "vgicp/point_cloud.hpp"
#include "vgicp/robust_kernel.hpp"
#include "vgicp/se3.hpp"

#include <memory>
#include <utility>
#include <vector>

namespace vgicp {

/// Ordered (frame index, pose) list with strictly increasing indices.
struct Trajectory {
  std::vector<std::pair<int, Pose>> poses;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
  void append(int index, const Pose& pose);  // enforces monotone indices
};

/// KITTI-protocol relative trajectory error: for every start frame and every
/// segment length in {100, ..., 800} m (measured along the ground-truth
/// path), the pose error between the estimated and true subsegment motions,
/// normalized by the length. Rotational output is deg / 100 m, translational
/// the dimensionless ratio x 100 (m / 100 m).
struct RteResult {
  struct LengthBucket {
    double length = 0.0;
    double rotational_deg_per_100m = 0.0;
    double translational_m_per_100m = 0.0;
    int subsegments = 0;
  };
  double rotational_deg_per_100m = 0.0;     // mean over all subsegments
  double translational_m_per_100m = 0.0;
  std::vector<LengthBucket> per_length;
  int total_subsegments = 0;
  bool flagged_short = false;  // ground truth shorter than the first length
};

/// Frames are matched by index; indices present in only one trajectory are
/// ignored. Subsegment starts stride every frame.
RteResult compute_rte(const Trajectory& estimate, const Trajectory& ground_truth);

struct MmeResult {
  double mean_entropy = 0.0;             // nats, over evaluated points
  std::vector<double> per_point;         // NaN for skipped points
  int evaluated = 0;
  int skipped = 0;
};

/// Mean map entropy: per-point Gaussian entropy 0.5 ln((2 pi e)^3 det(S))
/// of the sample covariance S of neighbors within radius. Points with fewer
/// than 5 neighbors (or a non-positive-definite neighborhood) are skipped.
/// Throws std::runtime_error when no point can be evaluated.
MmeResult compute_mme(const PointCloud& map, double radius = 0.5, const ExecPolicy& policy = {});

struct AblationSettings {
  GicpSettings gicp;
  double huber_delta = 1.0;
  double information_floor = 1e-6;
};

/// Replaces every matching cost factor with an SE3 relative pose factor whose
/// measurement comes from conventional GICP seeded at the current estimate,
/// information from the scan-matching Hessian (eigenvalue-floored), and a
/// Huber kernel attached. Topology is unchanged; failed alignments keep the
/// unconverged measurement. clouds_by_variable supplies the per-variable
/// point clouds the factors were built from.
MappingGraph ablation_swap(const MappingGraph& graph,
                           const std::vector<std::shared_ptr<const PointCloud>>& clouds_by_variable,
                           const AblationSettings& settings = {});

}  // namespace vgicp
