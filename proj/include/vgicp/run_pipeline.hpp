#pragma once

#include "vgicp/config.hpp"
#include "vgicp/evaluation.hpp"
#include "vgicp/pipeline.hpp"
#include "vgicp/synthetic.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vgicp {

/// End-to-end inputs: either a synthetic scene spec or a list of scan files
/// with optional odometry guesses, loop candidates, and ground truth. When
/// no odometry source exists the built-in frame-to-previous-frame GICP
/// odometry provides the guesses.
struct RunInputs {
  std::optional<SyntheticSceneSpec> synthetic;
  std::vector<std::filesystem::path> scan_files;
  std::optional<std::filesystem::path> odometry_file;
  std::optional<std::filesystem::path> loop_file;
  std::optional<std::filesystem::path> ground_truth_file;
};

struct RunResult {
  Trajectory trajectory;
  Trajectory odometry;
  Trajectory ground_truth;  // empty when unavailable
  int frames_processed = 0;
  int frames_skipped = 0;
  int submap_count = 0;
  int matching_factor_count = 0;
  int loop_factor_count = 0;
  int loops_accepted = 0;
  int loops_rejected = 0;
  double frames_per_second = 0.0;
  std::optional<RteResult> rte;
  std::optional<double> mme_before;  // map entropy at odometry poses
  std::optional<double> mme_after;   // map entropy at optimized poses

  /// The pipeline state after the run (graph, submaps), for ablations and
  /// post-hoc analysis.
  std::shared_ptr<MappingPipeline> pipeline;
};

/// Runs preprocess -> local mapping -> global mapping -> loop candidates ->
/// final optimization -> exports. Artifacts written under out_dir:
/// trajectory.txt, odometry.txt, ground_truth.txt (when available), map.ply,
/// graph.jsonl, events.jsonl, trace.jsonl, metrics.jsonl, config.json.
/// Pass an empty out_dir to skip all file exports.
RunResult run_pipeline(const PipelineConfig& config, const RunInputs& inputs,
                       const std::filesystem::path& out_dir, bool compute_metrics = true);

}  // namespace vgicp
