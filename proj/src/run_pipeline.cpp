#include "vgicp/run_pipeline.hpp"

#include "vgicp/io.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <map>
#include <stdexcept>

namespace vgicp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct LoadedSequence {
  std::vector<PointCloud> scans;
  Trajectory odometry;      // may be empty: odometry comes from GICP fallback
  Trajectory ground_truth;  // may be empty
  std::vector<LoopCandidateRecord> loop_records;
};

LoadedSequence load_inputs(const RunInputs& inputs) {
  LoadedSequence seq;
  if (inputs.synthetic.has_value()) {
    SyntheticSequence synth = generate_synthetic_sequence(*inputs.synthetic);
    seq.scans = std::move(synth.scans);
    seq.odometry = std::move(synth.odometry);
    seq.ground_truth = std::move(synth.ground_truth);
  } else {
    if (inputs.scan_files.empty()) {
      throw std::invalid_argument("no scans: provide scan files or a synthetic spec");
    }
    for (const auto& path : inputs.scan_files) {
      seq.scans.push_back(load_kitti_scan(path).cloud);
    }
    if (inputs.odometry_file) {
      seq.odometry = read_kitti_trajectory(*inputs.odometry_file);
      if (seq.odometry.size() < seq.scans.size()) {
        throw std::invalid_argument("odometry file has fewer poses than there are scans");
      }
    }
    if (inputs.ground_truth_file) {
      seq.ground_truth = read_kitti_trajectory(*inputs.ground_truth_file);
    }
  }
  if (inputs.loop_file) {
    seq.loop_records = read_loop_candidates(*inputs.loop_file);
  }
  return seq;
}

Trajectory restrict_to(const Trajectory& traj, const Trajectory& reference) {
  Trajectory out;
  std::size_t r = 0;
  for (const auto& [index, pose] : traj.poses) {
    while (r < reference.size() && reference.poses[r].first < index) ++r;
    if (r < reference.size() && reference.poses[r].first == index) out.append(index, pose);
  }
  return out;
}

// Concatenation of the raw preprocessed frames at the given trajectory's
// poses (used for the before/after map-entropy comparison).
PointCloud concatenate_at(const std::vector<PointCloud>& frames, const std::vector<int>& frame_of_scan,
                          const Trajectory& traj, const ExecPolicy& policy) {
  std::map<int, const Pose*> pose_of;
  for (const auto& [index, pose] : traj.poses) pose_of[index] = &pose;
  PointCloud map;
  for (std::size_t s = 0; s < frames.size(); ++s) {
    const auto it = pose_of.find(frame_of_scan[s]);
    if (it == pose_of.end()) continue;
    const PointCloud world = transform_cloud(frames[s], *it->second, policy);
    map.means.insert(map.means.end(), world.means.begin(), world.means.end());
  }
  return map;
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& config, const RunInputs& inputs, const fs::path& out_dir,
                       bool compute_metrics) {
  config.validate();
  const ExecPolicy policy = config.policy();
  const bool exporting = !out_dir.empty();

  const LoadedSequence seq = load_inputs(inputs);
  const int n_frames = static_cast<int>(seq.scans.size());

  std::vector<json> events;
  std::vector<json> trace_records;
  auto pipeline_ptr = std::make_shared<MappingPipeline>(config, [&](const json& e) { events.push_back(e); });
  MappingPipeline& pipeline = *pipeline_ptr;

  const auto t_start = std::chrono::steady_clock::now();

  // Preprocess + mapping loop. Odometry guesses are applied as increments on
  // the current estimate so already-corrected drift does not re-enter.
  std::vector<PointCloud> preprocessed(n_frames);
  std::vector<int> frame_of_scan(n_frames);
  RunResult result;

  // Anchor for guess chaining: the last inserted frame's current estimate
  // and its odometry pose. Increments are taken from the anchor so drift that
  // was already optimized away does not re-enter, and skipped frames do not
  // break the chain.
  std::optional<Pose> anchor_estimate;
  Pose anchor_odom;
  std::shared_ptr<const PointCloud> anchor_cloud;  // for the GICP fallback

  auto record_trace = [&](const char* stage, const OptimizerReport& report) {
    for (const auto& rec : report.trace) {
      trace_records.push_back(json{{"stage", stage},
                                   {"iteration", rec.iteration},
                                   {"error", rec.error},
                                   {"lambda", rec.lambda},
                                   {"step_norm", rec.step_norm},
                                   {"accepted", rec.accepted}});
    }
  };

  for (int k = 0; k < n_frames; ++k) {
    if (seq.scans[k].empty()) {
      throw std::runtime_error("frame " + std::to_string(k) + " is empty");
    }
    PointCloud frame;
    try {
      frame = estimate_covariances(seq.scans[k], config.covariance_neighbors, config.covariance_plane_epsilon,
                                   policy);
    } catch (const std::exception& e) {
      throw std::runtime_error("preprocessing failed at frame " + std::to_string(k) + ": " + e.what());
    }
    preprocessed[k] = frame;
    frame_of_scan[k] = k;
    auto frame_ptr = std::make_shared<const PointCloud>(std::move(frame));

    Pose guess;
    Pose odom_now;
    if (!seq.odometry.empty()) {
      odom_now = seq.odometry.poses[k].second;
      guess = anchor_estimate ? *anchor_estimate * (anchor_odom.inverse() * odom_now) : odom_now;
      result.odometry.append(k, odom_now);
    } else {
      // Built-in naive odometry: GICP against the last inserted frame.
      if (!anchor_cloud) {
        guess = Pose::Identity();
      } else {
        GicpSettings gicp = config.odometry_gicp;
        gicp.policy = policy;
        // align.pose maps the new frame into the anchor frame.
        const GicpResult align = gicp_align(*frame_ptr, *anchor_cloud, Pose::Identity(), gicp);
        guess = *anchor_estimate * align.pose;
      }
      odom_now = guess;
      result.odometry.append(k, guess);
    }

    const InsertResult ins = pipeline.local_insert(frame_ptr, guess, k);
    if (ins.action == InsertAction::skipped) {
      ++result.frames_skipped;
      continue;
    }
    ++result.frames_processed;
    if (ins.action == InsertAction::submap_emitted) {
      pipeline.global_insert(ins.submap_id);
      if (config.global_optimize_every_submap) {
        record_trace("global", pipeline.optimize_global());
      }
    }
    anchor_estimate = pipeline.last_frame_estimate();
    anchor_odom = odom_now;
    anchor_cloud = frame_ptr;
  }

  if (const auto flushed = pipeline.flush()) {
    pipeline.global_insert(*flushed);
    if (config.global_optimize_every_submap) {
      record_trace("global", pipeline.optimize_global());
    }
  }

  // Loop candidates: external file first, then proximity search.
  std::vector<LoopCandidate> candidates;
  for (const auto& rec : seq.loop_records) {
    LoopCandidate c;
    c.submap_a = std::min(rec.submap_a, rec.submap_b);
    c.submap_b = std::max(rec.submap_a, rec.submap_b);
    c.source = LoopCandidate::Source::external_file;
    if (rec.yaw_guess_deg.has_value()) {
      // Heading-only guess: revisit at the same location with the given yaw.
      const double yaw = *rec.yaw_guess_deg * M_PI / 180.0;
      c.initial_guess = Pose(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix(),
                             Eigen::Vector3d::Zero());
    } else {
      const auto& submaps = pipeline.submaps();
      if (c.submap_a >= static_cast<int>(submaps.size()) || c.submap_b >= static_cast<int>(submaps.size())) {
        throw std::invalid_argument("loop candidate file references a submap that does not exist");
      }
      c.initial_guess = submaps[c.submap_a].pose.inverse() * submaps[c.submap_b].pose;
    }
    candidates.push_back(c);
  }
  if (config.proximity_radius > 0.0) {
    const auto proximity = pipeline.proximity_loop_candidates(config.proximity_radius, config.proximity_min_id_gap);
    candidates.insert(candidates.end(), proximity.begin(), proximity.end());
  }

  for (const auto& candidate : candidates) {
    const LoopDecision decision = pipeline.process_loop_candidate(candidate);
    if (decision.accepted) {
      ++result.loops_accepted;
    } else {
      ++result.loops_rejected;
    }
  }

  // Final optimization covers batch mode and newly added loop factors.
  if (!pipeline.submaps().empty() && (!config.global_optimize_every_submap || !candidates.empty())) {
    record_trace("final", pipeline.optimize_global());
  }

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  result.frames_per_second = n_frames / std::max(elapsed, 1e-9);

  result.trajectory = pipeline.trajectory();
  result.ground_truth = seq.ground_truth;
  result.pipeline = pipeline_ptr;
  result.submap_count = static_cast<int>(pipeline.submaps().size());
  result.matching_factor_count = static_cast<int>(pipeline.global_graph().matching_factors.size());
  result.loop_factor_count = static_cast<int>(pipeline.global_graph().relative_factors.size());

  // Metrics.
  std::vector<json> metric_records;
  if (compute_metrics && !seq.ground_truth.empty()) {
    result.rte = compute_rte(result.trajectory, seq.ground_truth);
    for (const auto& bucket : result.rte->per_length) {
      metric_records.push_back(json{{"metric", "rte"},
                                    {"length", bucket.length},
                                    {"rot_deg_per_100m", bucket.rotational_deg_per_100m},
                                    {"trans_m_per_100m", bucket.translational_m_per_100m},
                                    {"subsegments", bucket.subsegments}});
    }
  }
  if (compute_metrics && !result.odometry.empty()) {
    const Trajectory odo_used = restrict_to(result.odometry, result.trajectory);
    const PointCloud before = concatenate_at(preprocessed, frame_of_scan, odo_used, policy);
    const PointCloud after = concatenate_at(preprocessed, frame_of_scan, result.trajectory, policy);
    if (!before.empty() && !after.empty()) {
      result.mme_before = compute_mme(before, config.mme_radius, policy).mean_entropy;
      result.mme_after = compute_mme(after, config.mme_radius, policy).mean_entropy;
      metric_records.push_back(json{{"metric", "mme"},
                                    {"radius", config.mme_radius},
                                    {"before_optimization", *result.mme_before},
                                    {"after_optimization", *result.mme_after}});
    }
  }

  if (exporting) {
    fs::create_directories(out_dir);
    write_trajectory_kitti(result.trajectory, out_dir / "trajectory.txt");
    if (!result.odometry.empty()) {
      write_trajectory_kitti(restrict_to(result.odometry, result.trajectory), out_dir / "odometry.txt");
    }
    if (!seq.ground_truth.empty()) {
      write_trajectory_kitti(restrict_to(seq.ground_truth, result.trajectory), out_dir / "ground_truth.txt");
    }

    const PointCloud map = pipeline.concatenate_map(config.output_downsample_resolution);
    if (!map.empty()) export_map_ply(map, out_dir / "map.ply");

    // Graph export: nodes with translations, edges with type, creation-time
    // overlap, and the error at the final estimate.
    std::vector<json> graph_records;
    for (const auto& submap : pipeline.submaps()) {
      graph_records.push_back(json{{"node", submap.id},
                                   {"t", {submap.pose.translation.x(), submap.pose.translation.y(),
                                          submap.pose.translation.z()}},
                                   {"frames", submap.frame_indices.size()}});
    }
    const MappingGraph& graph = pipeline.global_graph();
    std::map<std::pair<int, int>, double> overlap_at_creation;
    for (const auto& [t, s, ov] : pipeline.factor_creation_log()) overlap_at_creation[{t, s}] = ov;
    for (const auto& factor : graph.matching_factors) {
      const auto [error, inliers] =
          evaluate_matching_cost(factor, graph.poses[factor.target_index], graph.poses[factor.source_index], policy);
      json rec{{"edge", {factor.target_index, factor.source_index}},
               {"type", "matching_cost"},
               {"error", error},
               {"inliers", inliers}};
      const auto it = overlap_at_creation.find({factor.target_index, factor.source_index});
      if (it != overlap_at_creation.end()) rec["overlap_at_creation"] = it->second;
      graph_records.push_back(rec);
    }
    for (const auto& factor : graph.relative_factors) {
      graph_records.push_back(json{{"edge", {factor.i, factor.j}},
                                   {"type", "se3_loop"},
                                   {"error", evaluate_relative_pose(factor, graph.poses[factor.i],
                                                                    graph.poses[factor.j])}});
    }

    auto write_jsonl = [&](const fs::path& path, const std::vector<json>& records) {
      atomic_write(path, [&](std::ostream& out) {
        for (const auto& r : records) out << r.dump() << "\n";
      });
    };
    write_jsonl(out_dir / "graph.jsonl", graph_records);
    write_jsonl(out_dir / "events.jsonl", events);
    write_jsonl(out_dir / "trace.jsonl", trace_records);
    write_jsonl(out_dir / "metrics.jsonl", metric_records);
    atomic_write(out_dir / "config.json", [&](std::ostream& out) { out << config.to_json(); });
  }

  return result;
}

}  // namespace vgicp
