#pragma once

#include "vgicp/factors.hpp"

#include <cstdint>
#include <vector>

namespace vgicp {

/// Factor graph over pose variables: matching cost factors re-linearized at
/// every iteration plus fixed SE3 relative pose factors. The fixed mask
/// anchors gauge freedom; the optimizer additionally anchors the first pose
/// of any connected component that has no fixed variable.
struct MappingGraph {
  std::vector<Pose> poses;
  std::vector<std::uint8_t> fixed;
  std::vector<MatchingCostFactor> matching_factors;
  std::vector<RelativePoseFactor> relative_factors;

  int add_pose(const Pose& pose, bool is_fixed = false);

  void add_matching_cost_factor(MatchingCostFactor factor);
  void add_relative_pose_factor(RelativePoseFactor factor);

  std::size_t num_poses() const { return poses.size(); }
  std::size_t num_factors() const { return matching_factors.size() + relative_factors.size(); }

 private:
  void check_indices(int i, int j) const;
};

}  // namespace vgicp
