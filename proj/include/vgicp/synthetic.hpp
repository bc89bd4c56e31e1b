#pragma once

#include "vgicp/evaluation.hpp"
#include "vgicp/point_cloud.hpp"
#include "vgicp/se3.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vgicp {

enum class TrajectoryShape { line, circle, figure_eight };

TrajectoryShape trajectory_shape_from_string(const std::string& name);
const char* to_string(TrajectoryShape shape);

/// Desk-scale verification substrate: a seeded structured world (ground
/// plane, perimeter walls, boxes) observed from a parametric trajectory.
struct SyntheticSceneSpec {
  TrajectoryShape shape = TrajectoryShape::circle;
  int frames = 100;
  double radius = 50.0;        // circle / figure-eight lobe radius
  double spacing = 2.0;        // frame spacing for the line shape
  int points_per_scan = 1000;
  double max_range = 40.0;
  double noise_sigma = 0.0;    // per-axis Gaussian noise on local points
  Twist drift_per_frame;       // bias composed onto every relative motion
  std::uint64_t seed = 1;
  int box_count = 40;
  double sensor_height = 1.6;

  void validate() const;  // throws std::invalid_argument
};

struct SyntheticSequence {
  std::vector<PointCloud> scans;  // raw local-frame points, no covariances
  Trajectory ground_truth;
  Trajectory odometry;  // ground truth with accumulated drift bias
};

/// Deterministic for a fixed spec: same seed, same scans bit for bit.
SyntheticSequence generate_synthetic_sequence(const SyntheticSceneSpec& spec);

}  // namespace vgicp
