#include "vgicp/block_solver.hpp"

#include <Eigen/Cholesky>

#include <stdexcept>

namespace vgicp {

Matrix6d& BlockSystem::block(int slot_a, int slot_b) {
  if (slot_a < slot_b) std::swap(slot_a, slot_b);
  return columns[slot_b].try_emplace(slot_a, Matrix6d::Zero()).first->second;
}

BlockSystem assemble_normal_equations(std::span<const LinearizedFactor> factors,
                                      const std::vector<std::uint8_t>& fixed, int num_variables) {
  BlockSystem system;
  system.slot_of_var.assign(num_variables, -1);

  int active = 0;
  for (int v = 0; v < num_variables; ++v) {
    if (!fixed[v]) ++active;
  }
  system.num_slots = active;
  system.var_of_slot.assign(active, -1);

  // Reverse insertion order: the last inserted active variable is eliminated
  // first (slot 0).
  int rank = 0;
  for (int v = 0; v < num_variables; ++v) {
    if (fixed[v]) continue;
    const int slot = active - 1 - rank;
    system.slot_of_var[v] = slot;
    system.var_of_slot[slot] = v;
    ++rank;
  }

  system.columns.resize(active);
  system.rhs.assign(active, Vector6d::Zero());

  for (const LinearizedFactor& f : factors) {
    const int si = system.slot_of_var[f.i];
    const int sj = system.slot_of_var[f.j];
    if (si >= 0) {
      system.block(si, si) += f.H_ii;
      system.rhs[si] += f.b_i;
    }
    if (sj >= 0) {
      system.block(sj, sj) += f.H_jj;
      system.rhs[sj] += f.b_j;
    }
    if (si >= 0 && sj >= 0) {
      // The permuted entry (slot_i, slot_j) equals H_ij; store whichever
      // orientation lands in the lower triangle.
      if (si >= sj) {
        system.block(si, sj) += f.H_ij;
      } else {
        system.block(sj, si) += f.H_ij.transpose();
      }
    }
  }
  return system;
}

BlockSolveResult solve_block_system(const BlockSystem& system) {
  BlockSolveResult result;
  const int m = system.num_slots;

  // Right-looking block Cholesky on a copy; fill-in is created on demand.
  std::vector<std::map<int, Matrix6d>> cols = system.columns;
  std::vector<Eigen::LLT<Matrix6d>> diag_llt(m, Eigen::LLT<Matrix6d>());

  for (int c = 0; c < m; ++c) {
    auto& col = cols[c];
    const auto diag_it = col.find(c);
    if (diag_it == col.end()) {
      result.failed_slot = c;
      return result;
    }
    diag_llt[c].compute(diag_it->second);
    if (diag_llt[c].info() != Eigen::Success) {
      result.failed_slot = c;
      return result;
    }
    const Matrix6d L_cc_T = diag_llt[c].matrixL().transpose();

    // L_rc = A_rc * L_cc^-T for all sub-diagonal blocks of this column.
    for (auto it = std::next(diag_it); it != col.end(); ++it) {
      it->second = L_cc_T.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(it->second);
    }
    // Trailing update: A_{r2,r1} -= L_{r2,c} L_{r1,c}^T for r2 >= r1 > c.
    for (auto it1 = std::next(diag_it); it1 != col.end(); ++it1) {
      for (auto it2 = it1; it2 != col.end(); ++it2) {
        cols[it1->first].try_emplace(it2->first, Matrix6d::Zero()).first->second.noalias() -=
            it2->second * it1->second.transpose();
      }
    }
  }

  // Forward substitution L y = b.
  std::vector<Vector6d> y = system.rhs;
  for (int c = 0; c < m; ++c) {
    y[c] = diag_llt[c].matrixL().solve(y[c]);
    const auto& col = cols[c];
    for (auto it = col.upper_bound(c); it != col.end(); ++it) {
      y[it->first].noalias() -= it->second * y[c];
    }
  }
  // Backward substitution L^T x = y.
  for (int c = m - 1; c >= 0; --c) {
    const auto& col = cols[c];
    for (auto it = col.upper_bound(c); it != col.end(); ++it) {
      y[c].noalias() -= it->second.transpose() * y[it->first];
    }
    y[c] = diag_llt[c].matrixL().transpose().solve(y[c]);
  }

  result.success = true;
  result.delta_by_var.assign(system.slot_of_var.size(), Vector6d::Zero());
  for (int c = 0; c < m; ++c) {
    result.delta_by_var[system.var_of_slot[c]] = y[c];
  }
  return result;
}

}  // namespace vgicp
