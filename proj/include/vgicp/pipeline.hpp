#pragma once

#include "vgicp/config.hpp"
#include "vgicp/evaluation.hpp"
#include "vgicp/gicp.hpp"
#include "vgicp/graph.hpp"
#include "vgicp/optimizer.hpp"
#include "vgicp/voxelmap.hpp"

#include <json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vgicp {

/// Rigid aggregate of consecutive frames. Internal relative poses are frozen
/// once the submap is created; only the world pose moves afterwards.
struct Submap {
  int id = -1;
  std::shared_ptr<const PointCloud> cloud;            // merged, in submap frame
  std::shared_ptr<const GaussianVoxelMap> voxels;     // global-mapping resolution
  Pose pose;                                          // world
  std::vector<int> frame_indices;
  std::vector<Pose> frame_poses;                      // frozen, submap frame
};

struct LoopCandidate {
  enum class Source { external_file, proximity };
  int submap_a = -1;  // a < b
  int submap_b = -1;
  Pose initial_guess;  // estimate of T_a^-1 * T_b
  Source source = Source::proximity;
};

struct LoopDecision {
  LoopCandidate candidate;
  bool accepted = false;
  std::string reject_reason;     // empty when accepted
  Pose measurement;              // refined T_a^-1 * T_b
  bool converged = false;
  double mean_residual = 0.0;
  double overlap_after = 0.0;
};

enum class InsertAction { skipped, inserted, submap_emitted };

struct InsertResult {
  InsertAction action = InsertAction::inserted;
  double overlap_with_last = 0.0;  // against the previous keyframe's voxel map
  int submap_id = -1;              // valid when a submap was emitted
};

/// Line-delimited structured event records (skips, insertions, submap
/// emissions, factor creations, loop accept/reject). Deterministic content:
/// no wall-clock fields.
using EventSink = std::function<void(const nlohmann::json&)>;

/// Local and global mapping manager: overlap-driven keyframe/submap
/// lifecycle, dense factor creation, loop candidate handling, and final map
/// concatenation. Frames are consumed in order on one thread; the heavy
/// per-operation work parallelizes internally.
class MappingPipeline {
 public:
  explicit MappingPipeline(const PipelineConfig& config, EventSink events = nullptr);

  /// Preprocessed frame (covariances present) with a world-frame pose guess.
  /// Skips near-identical frames, otherwise inserts into the fully connected
  /// local window; emits a submap when the window span or size limit is hit.
  InsertResult local_insert(std::shared_ptr<const PointCloud> frame, const Pose& odom_guess, int frame_index);

  /// Force-emits the residual window (end of sequence). Returns the submap id.
  std::optional<int> flush();

  /// Creates matching cost factors between the given submap and every past
  /// submap whose overlap at the current poses exceeds the threshold.
  /// Returns the (past, new) pairs created.
  std::vector<std::pair<int, int>> global_insert(int submap_id);

  /// Levenberg-Marquardt over the global graph; submap poses updated.
  OptimizerReport optimize_global();

  /// Submap pairs within radius of each other whose id gap is at least
  /// min_id_gap; initial guess is the current relative pose estimate.
  std::vector<LoopCandidate> proximity_loop_candidates(double radius, int min_id_gap) const;

  /// GICP refinement of the candidate under the strict accept gates
  /// (convergence, mean residual, post-alignment overlap). Accepted factors
  /// carry the shifted Tukey kernel and the constant loop information.
  /// Rejections are reported with a reason, never silently dropped.
  LoopDecision process_loop_candidate(const LoopCandidate& candidate);

  /// All submap clouds in the world frame at the current estimates.
  PointCloud concatenate_map(double downsample_resolution = 0.0) const;

  /// World poses of every processed frame (submaps plus the open window).
  Trajectory trajectory() const;

  /// Best current world-pose estimate of the most recently processed frame.
  std::optional<Pose> last_frame_estimate() const;

  const std::vector<Submap>& submaps() const { return submaps_; }
  const MappingGraph& global_graph() const { return global_graph_; }
  MappingGraph& global_graph() { return global_graph_; }
  std::size_t window_size() const { return window_.size(); }

  /// Per-variable submap clouds (for the SE3 ablation swap).
  std::vector<std::shared_ptr<const PointCloud>> submap_clouds() const;

  /// Overlap of each created matching factor at creation time, keyed by
  /// (target submap, source submap).
  const std::vector<std::tuple<int, int, double>>& factor_creation_log() const { return factor_log_; }

 private:
  struct WindowFrame {
    int frame_index = -1;
    std::shared_ptr<const PointCloud> cloud;
    std::shared_ptr<const GaussianVoxelMap> voxels;  // local resolution
  };

  int emit_submap();
  void emit(const nlohmann::json& event) const;

  PipelineConfig config_;
  ExecPolicy policy_;
  EventSink events_;

  std::vector<WindowFrame> window_;
  MappingGraph window_graph_;

  std::vector<Submap> submaps_;
  MappingGraph global_graph_;
  std::vector<std::tuple<int, int, double>> factor_log_;
};

}  // namespace vgicp
