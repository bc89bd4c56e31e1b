#pragma once

#include "vgicp/gicp.hpp"
#include "vgicp/optimizer.hpp"
#include "vgicp/se3.hpp"

#include <filesystem>
#include <string>

namespace vgicp {

/// Every tunable of the mapping pipeline in one place. The config file is
/// the single home of each parameter; CLI flags override individual fields.
struct PipelineConfig {
  // Local mapping lifecycle.
  double local_overlap_skip_max = 0.95;   // skip frame above this overlap with the last keyframe
  double local_overlap_emit_min = 0.10;   // emit submap when first/last overlap drops below
  int local_max_window_frames = 20;       // emit submap at this window size
  double local_voxel_resolution = 0.5;

  // Global mapping.
  double global_voxel_resolution = 1.0;
  double global_factor_overlap_min = 0.025;  // create a factor above this overlap
  bool global_optimize_every_submap = true;  // false: single batch optimization at the end
  double submap_downsample_resolution = 0.25;  // 0 disables
  bool symmetric_factors = false;              // also create the reversed-direction factor

  // Covariance estimation.
  int covariance_neighbors = 10;
  double covariance_plane_epsilon = 1e-3;

  // Robust kernels (twist-norm units).
  double tukey_width = 1.0;
  double tukey_offset = 1.0;
  double huber_delta = 1.0;

  // SE3 loop constraint information diagonal, rotation block first.
  Vector6d loop_information = (Vector6d() << 100, 100, 100, 25, 25, 25).finished();

  // Loop candidate handling.
  double loop_gate_min_overlap = 0.3;
  double loop_gate_max_mean_residual = 0.5;
  double proximity_radius = 0.0;  // 0 disables proximity search
  int proximity_min_id_gap = 5;
  GicpSettings loop_gicp;  // refinement of loop candidates

  // Built-in frame-to-previous-frame odometry fallback.
  GicpSettings odometry_gicp;

  // Optimizer.
  LmSettings lm;

  // Evaluation.
  double mme_radius = 0.5;

  // Runtime.
  int threads = 0;
  bool deterministic = false;
  double output_downsample_resolution = 0.0;  // 0: export the full map

  ExecPolicy policy() const { return ExecPolicy{threads, deterministic}; }

  /// Throws std::invalid_argument when thresholds or resolutions are
  /// inconsistent (requires 0 < global_factor_overlap_min <
  /// local_overlap_emit_min < local_overlap_skip_max <= 1).
  void validate() const;

  std::string to_json() const;
  static PipelineConfig from_json(const std::string& text);

  static PipelineConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

}  // namespace vgicp
