#include "vgicp/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

namespace vgicp {

using nlohmann::json;

MappingPipeline::MappingPipeline(const PipelineConfig& config, EventSink events)
    : config_(config), policy_(config.policy()), events_(std::move(events)) {
  config_.validate();
}

void MappingPipeline::emit(const json& event) const {
  if (events_) events_(event);
}

InsertResult MappingPipeline::local_insert(std::shared_ptr<const PointCloud> frame, const Pose& odom_guess,
                                           int frame_index) {
  if (!frame || frame->empty() || !frame->has_covariances()) {
    throw std::invalid_argument("local_insert requires a preprocessed nonempty frame");
  }

  InsertResult result;

  if (!window_.empty()) {
    // Overlap of the incoming frame against the last keyframe's voxel map.
    const Pose& last_pose = window_graph_.poses[window_.size() - 1];
    const Pose rel = last_pose.inverse() * odom_guess;
    result.overlap_with_last = overlap_rate(*frame, rel, *window_.back().voxels, policy_);
    if (result.overlap_with_last > config_.local_overlap_skip_max) {
      result.action = InsertAction::skipped;
      emit(json{{"event", "skip"}, {"frame", frame_index}, {"overlap", result.overlap_with_last}});
      return result;
    }
  }

  WindowFrame wf;
  wf.frame_index = frame_index;
  wf.cloud = frame;
  wf.voxels = std::make_shared<GaussianVoxelMap>(*frame, config_.local_voxel_resolution, policy_);

  const int new_var = window_graph_.add_pose(odom_guess, window_.empty());
  for (std::size_t w = 0; w < window_.size(); ++w) {
    // Older frame owns the voxel map; the new frame supplies the points.
    window_graph_.add_matching_cost_factor(
        MatchingCostFactor(static_cast<int>(w), new_var, frame, window_[w].voxels));
    if (config_.symmetric_factors) {
      window_graph_.add_matching_cost_factor(
          MatchingCostFactor(new_var, static_cast<int>(w), window_[w].cloud, wf.voxels));
    }
  }
  window_.push_back(std::move(wf));
  emit(json{{"event", "insert"}, {"frame", frame_index}, {"overlap", result.overlap_with_last},
            {"window", window_.size()}});

  bool emit_now = static_cast<int>(window_.size()) >= config_.local_max_window_frames;
  if (!emit_now && window_.size() >= 2) {
    const Pose rel_first_last = window_graph_.poses.back().inverse() * window_graph_.poses.front();
    const double span_overlap = overlap_rate(*window_.front().cloud, rel_first_last, *window_.back().voxels, policy_);
    emit_now = span_overlap < config_.local_overlap_emit_min;
  }

  if (emit_now) {
    result.action = InsertAction::submap_emitted;
    result.submap_id = emit_submap();
  } else {
    result.action = InsertAction::inserted;
  }
  return result;
}

std::optional<int> MappingPipeline::flush() {
  if (window_.empty()) return std::nullopt;
  return emit_submap();
}

int MappingPipeline::emit_submap() {
  // Optimize the fully connected window, then freeze it into one rigid submap.
  LmSettings lm = config_.lm;
  lm.policy = policy_;
  const OptimizerReport report = window_.size() > 1 ? optimize(window_graph_, lm) : OptimizerReport{};

  Submap submap;
  submap.id = static_cast<int>(submaps_.size());
  submap.pose = window_graph_.poses.front();

  PointCloud merged;
  bool keep_intensities = true;
  const Pose world_to_submap = submap.pose.inverse();
  for (std::size_t w = 0; w < window_.size(); ++w) {
    const Pose internal = world_to_submap * window_graph_.poses[w];
    submap.frame_indices.push_back(window_[w].frame_index);
    submap.frame_poses.push_back(internal);
    const PointCloud local = transform_cloud(*window_[w].cloud, internal, policy_);
    merged.means.insert(merged.means.end(), local.means.begin(), local.means.end());
    merged.covariances.insert(merged.covariances.end(), local.covariances.begin(), local.covariances.end());
    keep_intensities = keep_intensities && local.has_intensities();
    if (keep_intensities) {
      merged.intensities.insert(merged.intensities.end(), local.intensities.begin(), local.intensities.end());
    } else {
      merged.intensities.clear();
    }
  }
  if (config_.submap_downsample_resolution > 0.0) {
    merged = voxel_downsample(merged, config_.submap_downsample_resolution, policy_);
  }

  submap.cloud = std::make_shared<PointCloud>(std::move(merged));
  submap.voxels = std::make_shared<GaussianVoxelMap>(*submap.cloud, config_.global_voxel_resolution, policy_);

  const int var = global_graph_.add_pose(submap.pose, submaps_.empty());
  (void)var;

  emit(json{{"event", "submap"},
            {"id", submap.id},
            {"frames", submap.frame_indices},
            {"points", submap.cloud->size()},
            {"optimizer_iterations", report.iterations}});

  submaps_.push_back(std::move(submap));
  window_.clear();
  window_graph_ = MappingGraph{};
  return submaps_.back().id;
}

std::vector<std::pair<int, int>> MappingPipeline::global_insert(int submap_id) {
  if (submap_id < 0 || submap_id >= static_cast<int>(submaps_.size())) {
    throw std::invalid_argument("global_insert: unknown submap id");
  }
  const Submap& submap = submaps_[submap_id];

  std::vector<std::pair<int, int>> created;
  for (int past = 0; past < submap_id; ++past) {
    // One-directional evaluation: the new submap's points against the past
    // submap's voxel map at the creation-time poses.
    const Pose rel = global_graph_.poses[past].inverse() * global_graph_.poses[submap_id];
    const double ov = overlap_rate(*submap.cloud, rel, *submaps_[past].voxels, policy_);
    if (ov > config_.global_factor_overlap_min) {
      global_graph_.add_matching_cost_factor(MatchingCostFactor(past, submap_id, submap.cloud, submaps_[past].voxels));
      if (config_.symmetric_factors) {
        global_graph_.add_matching_cost_factor(
            MatchingCostFactor(submap_id, past, submaps_[past].cloud, submap.voxels));
      }
      factor_log_.emplace_back(past, submap_id, ov);
      created.emplace_back(past, submap_id);
      emit(json{{"event", "factor"}, {"target", past}, {"source", submap_id}, {"overlap", ov}});
    }
  }
  return created;
}

OptimizerReport MappingPipeline::optimize_global() {
  LmSettings lm = config_.lm;
  lm.policy = policy_;
  const OptimizerReport report = optimize(global_graph_, lm);
  for (std::size_t s = 0; s < submaps_.size(); ++s) {
    submaps_[s].pose = global_graph_.poses[s];
  }
  emit(json{{"event", "global_optimize"},
            {"submaps", submaps_.size()},
            {"factors", global_graph_.num_factors()},
            {"iterations", report.iterations},
            {"initial_error", report.initial_error},
            {"final_error", report.final_error},
            {"reason", to_string(report.reason)}});
  return report;
}

std::vector<LoopCandidate> MappingPipeline::proximity_loop_candidates(double radius, int min_id_gap) const {
  std::vector<LoopCandidate> candidates;
  for (std::size_t a = 0; a < submaps_.size(); ++a) {
    for (std::size_t b = a + 1; b < submaps_.size(); ++b) {
      if (static_cast<int>(b - a) < min_id_gap) continue;
      if ((submaps_[a].pose.translation - submaps_[b].pose.translation).norm() > radius) continue;
      LoopCandidate c;
      c.submap_a = static_cast<int>(a);
      c.submap_b = static_cast<int>(b);
      c.initial_guess = submaps_[a].pose.inverse() * submaps_[b].pose;
      c.source = LoopCandidate::Source::proximity;
      candidates.push_back(c);
    }
  }
  return candidates;
}

LoopDecision MappingPipeline::process_loop_candidate(const LoopCandidate& candidate) {
  LoopDecision decision;
  decision.candidate = candidate;

  const int n = static_cast<int>(submaps_.size());
  if (candidate.submap_a < 0 || candidate.submap_b < 0 || candidate.submap_a >= n || candidate.submap_b >= n ||
      candidate.submap_a == candidate.submap_b) {
    throw std::invalid_argument("loop candidate references invalid submap ids");
  }
  const Submap& a = submaps_[candidate.submap_a];
  const Submap& b = submaps_[candidate.submap_b];

  GicpSettings gicp = config_.loop_gicp;
  gicp.policy = policy_;
  const GicpResult align = gicp_align(*b.cloud, *a.cloud, candidate.initial_guess, gicp);
  decision.measurement = align.pose;
  decision.converged = align.converged;
  decision.mean_residual = align.mean_residual;
  decision.overlap_after = align.inliers > 0 ? overlap_rate(*b.cloud, align.pose, *a.voxels, policy_) : 0.0;

  if (!align.converged) {
    decision.reject_reason = "gicp did not converge";
  } else if (decision.mean_residual > config_.loop_gate_max_mean_residual) {
    decision.reject_reason = "mean residual above gate";
  } else if (decision.overlap_after < config_.loop_gate_min_overlap) {
    decision.reject_reason = "post-alignment overlap below gate";
  }
  decision.accepted = decision.reject_reason.empty();

  if (decision.accepted) {
    global_graph_.add_relative_pose_factor(
        RelativePoseFactor(candidate.submap_a, candidate.submap_b, align.pose,
                           Matrix6d(config_.loop_information.asDiagonal()),
                           RobustKernel::shifted_tukey(config_.tukey_width, config_.tukey_offset)));
    emit(json{{"event", "loop_accept"},
              {"a", candidate.submap_a},
              {"b", candidate.submap_b},
              {"mean_residual", decision.mean_residual},
              {"overlap", decision.overlap_after}});
  } else {
    emit(json{{"event", "loop_reject"},
              {"a", candidate.submap_a},
              {"b", candidate.submap_b},
              {"reason", decision.reject_reason},
              {"mean_residual", decision.mean_residual},
              {"overlap", decision.overlap_after}});
  }
  return decision;
}

PointCloud MappingPipeline::concatenate_map(double downsample_resolution) const {
  PointCloud map;
  bool keep_intensities = true;
  for (const Submap& submap : submaps_) {
    const PointCloud world = transform_cloud(*submap.cloud, submap.pose, policy_);
    map.means.insert(map.means.end(), world.means.begin(), world.means.end());
    map.covariances.insert(map.covariances.end(), world.covariances.begin(), world.covariances.end());
    keep_intensities = keep_intensities && world.has_intensities();
    if (keep_intensities) {
      map.intensities.insert(map.intensities.end(), world.intensities.begin(), world.intensities.end());
    } else {
      map.intensities.clear();
    }
  }
  if (downsample_resolution > 0.0 && !map.empty()) {
    return voxel_downsample(map, downsample_resolution, policy_);
  }
  return map;
}

Trajectory MappingPipeline::trajectory() const {
  Trajectory traj;
  for (const Submap& submap : submaps_) {
    for (std::size_t k = 0; k < submap.frame_indices.size(); ++k) {
      traj.append(submap.frame_indices[k], submap.pose * submap.frame_poses[k]);
    }
  }
  for (std::size_t w = 0; w < window_.size(); ++w) {
    traj.append(window_[w].frame_index, window_graph_.poses[w]);
  }
  return traj;
}

std::optional<Pose> MappingPipeline::last_frame_estimate() const {
  if (!window_.empty()) return window_graph_.poses[window_.size() - 1];
  if (!submaps_.empty()) {
    const Submap& s = submaps_.back();
    return s.pose * s.frame_poses.back();
  }
  return std::nullopt;
}

std::vector<std::shared_ptr<const PointCloud>> MappingPipeline::submap_clouds() const {
  std::vector<std::shared_ptr<const PointCloud>> clouds;
  clouds.reserve(submaps_.size());
  for (const Submap& s : submaps_) clouds.push_back(s.cloud);
  return clouds;
}

}  // namespace vgicp
