#include "vgicp/evaluation.hpp"

#include "vgicp/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vgicp {

void Trajectory::append(int index, const Pose& pose) {
  if (!poses.empty() && index <= poses.back().first) {
    throw std::invalid_argument("trajectory frame indices must be strictly increasing");
  }
  poses.emplace_back(index, pose);
}

namespace {

constexpr double kRteLengths[] = {100, 200, 300, 400, 500, 600, 700, 800};

double rotation_error(const Pose& error) {
  const double d = std::clamp(0.5 * (error.rotation.trace() - 1.0), -1.0, 1.0);
  return std::acos(d);
}

// First frame index whose cumulative path length passes dist[first] + len.
int last_frame_from_segment_length(const std::vector<double>& dist, int first, double len) {
  for (int i = first; i < static_cast<int>(dist.size()); ++i) {
    if (dist[i] > dist[first] + len) return i;
  }
  return -1;
}

}  // namespace

RteResult compute_rte(const Trajectory& estimate, const Trajectory& ground_truth) {
  // Match frames by index.
  std::vector<Pose> est, gt;
  {
    std::size_t a = 0, b = 0;
    while (a < estimate.size() && b < ground_truth.size()) {
      const int ia = estimate.poses[a].first;
      const int ib = ground_truth.poses[b].first;
      if (ia == ib) {
        est.push_back(estimate.poses[a].second);
        gt.push_back(ground_truth.poses[b].second);
        ++a;
        ++b;
      } else if (ia < ib) {
        ++a;
      } else {
        ++b;
      }
    }
  }

  RteResult result;
  const int n = static_cast<int>(gt.size());
  if (n == 0) {
    result.flagged_short = true;
    return result;
  }

  std::vector<double> dist(n, 0.0);
  for (int i = 1; i < n; ++i) {
    dist[i] = dist[i - 1] + (gt[i].translation - gt[i - 1].translation).norm();
  }

  double rot_sum = 0.0, trans_sum = 0.0;
  for (const double len : kRteLengths) {
    RteResult::LengthBucket bucket;
    bucket.length = len;
    double bucket_rot = 0.0, bucket_trans = 0.0;
    for (int first = 0; first < n; ++first) {  // stride: every frame
      const int last = last_frame_from_segment_length(dist, first, len);
      if (last < 0) break;
      const Pose delta_gt = gt[first].inverse() * gt[last];
      const Pose delta_est = est[first].inverse() * est[last];
      const Pose error = delta_est.inverse() * delta_gt;
      bucket_rot += rotation_error(error) / len;
      bucket_trans += error.translation.norm() / len;
      ++bucket.subsegments;
    }
    if (bucket.subsegments > 0) {
      rot_sum += bucket_rot;
      trans_sum += bucket_trans;
      result.total_subsegments += bucket.subsegments;
      bucket.rotational_deg_per_100m = bucket_rot / bucket.subsegments * (180.0 / M_PI) * 100.0;
      bucket.translational_m_per_100m = bucket_trans / bucket.subsegments * 100.0;
      result.per_length.push_back(bucket);
    }
  }

  if (result.total_subsegments == 0) {
    result.flagged_short = true;
    return result;
  }
  result.rotational_deg_per_100m = rot_sum / result.total_subsegments * (180.0 / M_PI) * 100.0;
  result.translational_m_per_100m = trans_sum / result.total_subsegments * 100.0;
  return result;
}

MmeResult compute_mme(const PointCloud& map, double radius, const ExecPolicy& policy) {
  if (map.empty()) throw std::invalid_argument("compute_mme requires a nonempty map");

  const KdTree tree(map.means);
  MmeResult result;
  result.per_point.assign(map.size(), std::numeric_limits<double>::quiet_NaN());

  parallel_for(map.size(), policy, [&](std::size_t i) {
    const std::vector<int> neighbors = tree.radius_search(map.means[i], radius);
    if (neighbors.size() < 5) return;

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const int n : neighbors) mean += map.means[n];
    mean /= static_cast<double>(neighbors.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const int n : neighbors) {
      const Eigen::Vector3d d = map.means[n] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(neighbors.size());

    const double det = cov.determinant();
    if (!(det > 0.0)) return;
    const double entropy = 0.5 * std::log(std::pow(2.0 * M_PI * M_E, 3.0) * det);
    if (std::isfinite(entropy)) result.per_point[i] = entropy;
  });

  double sum = 0.0;
  for (const double e : result.per_point) {
    if (std::isnan(e)) {
      ++result.skipped;
    } else {
      sum += e;
      ++result.evaluated;
    }
  }
  if (result.evaluated == 0) {
    throw std::runtime_error("compute_mme: no point has enough neighbors within the radius");
  }
  result.mean_entropy = sum / result.evaluated;
  return result;
}

MappingGraph ablation_swap(const MappingGraph& graph,
                           const std::vector<std::shared_ptr<const PointCloud>>& clouds_by_variable,
                           const AblationSettings& settings) {
  if (clouds_by_variable.size() != graph.num_poses()) {
    throw std::invalid_argument("ablation_swap needs one cloud per variable");
  }

  MappingGraph swapped;
  swapped.poses = graph.poses;
  swapped.fixed = graph.fixed;
  swapped.relative_factors = graph.relative_factors;  // explicit loops stay

  for (const auto& factor : graph.matching_factors) {
    const int t = factor.target_index;
    const int s = factor.source_index;
    const auto& target_cloud = clouds_by_variable[t];
    const auto& source_cloud = clouds_by_variable[s];
    if (!target_cloud || !source_cloud) {
      throw std::invalid_argument("ablation_swap: missing cloud for a factor variable");
    }

    // Scan matching seeded at the current estimate; failures keep the
    // unconverged measurement.
    const Pose initial = graph.poses[t].inverse() * graph.poses[s];
    const GicpResult align = gicp_align(*source_cloud, *target_cloud, initial, settings.gicp);

    RelativePoseFactor rel(t, s, align.pose, hessian_information(align.hessian, settings.information_floor),
                           RobustKernel::huber(settings.huber_delta));
    swapped.add_relative_pose_factor(std::move(rel));
  }
  return swapped;
}

}  // namespace vgicp
