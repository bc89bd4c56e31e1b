#include "vgicp/graph.hpp"

#include <stdexcept>

namespace vgicp {

int MappingGraph::add_pose(const Pose& pose, bool is_fixed) {
  poses.push_back(pose);
  fixed.push_back(is_fixed ? 1 : 0);
  return static_cast<int>(poses.size()) - 1;
}

void MappingGraph::check_indices(int i, int j) const {
  const int n = static_cast<int>(poses.size());
  if (i < 0 || j < 0 || i >= n || j >= n || i == j) {
    throw std::invalid_argument("factor references invalid variable indices");
  }
}

void MappingGraph::add_matching_cost_factor(MatchingCostFactor factor) {
  check_indices(factor.target_index, factor.source_index);
  matching_factors.push_back(std::move(factor));
}

void MappingGraph::add_relative_pose_factor(RelativePoseFactor factor) {
  check_indices(factor.i, factor.j);
  relative_factors.push_back(std::move(factor));
}

}  // namespace vgicp
