#pragma once

#include "vgicp/factors.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace vgicp {

/// 6x6 block-sparse symmetric normal equations over the active (non-fixed)
/// variables. Blocks are stored in elimination-order coordinates: variables
/// are eliminated in reverse insertion order, so active variable with
/// insertion rank k maps to elimination slot (m - 1 - k). Only the lower
/// triangle (row slot >= column slot) is stored.
struct BlockSystem {
  int num_slots = 0;
  std::vector<int> slot_of_var;  // -1 for fixed variables
  std::vector<int> var_of_slot;
  std::vector<std::map<int, Matrix6d>> columns;  // columns[c][r] with r >= c
  std::vector<Vector6d> rhs;

  Matrix6d& block(int slot_a, int slot_b);  // accumulates into the lower triangle
};

/// Scatter-adds all factor blocks; fixed variables are eliminated by
/// dropping their rows and columns. All factors must be linearized at the
/// same estimate.
BlockSystem assemble_normal_equations(std::span<const LinearizedFactor> factors,
                                      const std::vector<std::uint8_t>& fixed, int num_variables);

struct BlockSolveResult {
  bool success = false;
  int failed_slot = -1;               // elimination slot of the non-PD pivot
  std::vector<Vector6d> delta_by_var; // indexed by variable; zero for fixed
};

/// Sparse block Cholesky in elimination order with forward/backward
/// substitution. A non-positive-definite pivot is reported (for damping
/// escalation by the caller) rather than thrown.
BlockSolveResult solve_block_system(const BlockSystem& system);

}  // namespace vgicp
