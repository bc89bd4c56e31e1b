#include "vgicp/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vgicp {

namespace {

// Union-find over factor adjacency for gauge anchoring.
struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

std::vector<std::uint8_t> effective_fixed_mask(const MappingGraph& graph) {
  const int n = static_cast<int>(graph.num_poses());
  DisjointSet components(n);
  for (const auto& f : graph.matching_factors) components.unite(f.target_index, f.source_index);
  for (const auto& f : graph.relative_factors) components.unite(f.i, f.j);

  std::vector<std::uint8_t> fixed = graph.fixed;
  std::vector<std::uint8_t> component_has_fixed(n, 0);
  for (int v = 0; v < n; ++v) {
    if (fixed[v]) component_has_fixed[components.find(v)] = 1;
  }
  for (int v = 0; v < n; ++v) {
    const int root = components.find(v);
    if (!component_has_fixed[root]) {
      fixed[v] = 1;  // first pose of the component, by insertion order
      component_has_fixed[root] = 1;
    }
  }
  return fixed;
}

std::vector<LinearizedFactor> linearize_all(const MappingGraph& graph, const std::vector<Pose>& poses,
                                            const ExecPolicy& policy) {
  const std::size_t nm = graph.matching_factors.size();
  const std::size_t nr = graph.relative_factors.size();
  std::vector<LinearizedFactor> out(nm + nr);

  // Matching factors parallelize internally across points; relative pose
  // factors are cheap and looped directly.
  for (std::size_t f = 0; f < nm; ++f) {
    const auto& factor = graph.matching_factors[f];
    out[f] = linearize_matching_cost(factor, poses[factor.target_index], poses[factor.source_index], policy);
  }
  for (std::size_t f = 0; f < nr; ++f) {
    const auto& factor = graph.relative_factors[f];
    out[nm + f] = linearize_relative_pose(factor, poses[factor.i], poses[factor.j]);
  }
  return out;
}

}  // namespace

double total_error(const MappingGraph& graph, const std::vector<Pose>& poses, const ExecPolicy& policy) {
  double error = 0.0;
  for (const auto& factor : graph.matching_factors) {
    error += evaluate_matching_cost(factor, poses[factor.target_index], poses[factor.source_index], policy).first;
  }
  for (const auto& factor : graph.relative_factors) {
    error += evaluate_relative_pose(factor, poses[factor.i], poses[factor.j]);
  }
  return error;
}

const char* to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::converged_relative_error: return "converged_relative_error";
    case TerminationReason::converged_step_norm: return "converged_step_norm";
    case TerminationReason::max_iterations: return "max_iterations";
    case TerminationReason::lambda_limit: return "lambda_limit";
    case TerminationReason::solver_abort: return "solver_abort";
  }
  return "unknown";
}

OptimizerReport optimize(MappingGraph& graph, const LmSettings& settings) {
  const auto t_start = std::chrono::steady_clock::now();
  OptimizerReport report;

  if (graph.poses.empty()) {
    report.reason = TerminationReason::converged_step_norm;
    return report;
  }

  const std::vector<std::uint8_t> fixed = effective_fixed_mask(graph);
  const int n = static_cast<int>(graph.num_poses());

  std::vector<Pose> poses = graph.poses;
  std::vector<LinearizedFactor> linearized = linearize_all(graph, poses, settings.policy);
  // Error bookkeeping goes through total_error() everywhere so accepted-step
  // comparisons never mix two summation paths.
  double current_error = total_error(graph, poses, settings.policy);

  report.initial_error = current_error;
  report.final_error = current_error;

  double lambda = settings.lambda_init;
  bool any_accepted = false;
  report.reason = TerminationReason::max_iterations;

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    const BlockSystem system = assemble_normal_equations(linearized, fixed, n);

    bool accepted = false;
    while (true) {
      // Marquardt damping on a copy of the assembled system.
      BlockSystem damped = system;
      for (int slot = 0; slot < damped.num_slots; ++slot) {
        Matrix6d& diag = damped.block(slot, slot);
        for (int d = 0; d < 6; ++d) diag(d, d) += lambda * std::max(diag(d, d), 1e-10);
      }

      const BlockSolveResult solve = solve_block_system(damped);
      if (!solve.success) {
        lambda *= settings.lambda_increase;
        if (lambda > settings.lambda_max) {
          if (!any_accepted) {
            report.aborted = true;
            report.reason = TerminationReason::solver_abort;
            report.diagnostic = "linear solve failed at maximum damping (slot " +
                                std::to_string(solve.failed_slot) + "); poses unchanged";
          } else {
            report.reason = TerminationReason::lambda_limit;
          }
          break;
        }
        continue;
      }

      double step_sq = 0.0;
      for (int v = 0; v < n; ++v) step_sq += solve.delta_by_var[v].squaredNorm();
      const double step_norm = std::sqrt(step_sq);

      if (step_norm < settings.step_norm_tolerance) {
        report.trace.push_back({iter, current_error, lambda, step_norm, false});
        report.reason = TerminationReason::converged_step_norm;
        break;
      }

      std::vector<Pose> candidate = poses;
      for (int v = 0; v < n; ++v) {
        if (!fixed[v]) candidate[v] = poses[v].retract(Twist(solve.delta_by_var[v]));
      }
      const double candidate_error = total_error(graph, candidate, settings.policy);

      if (candidate_error < current_error) {
        const double decrease = (current_error - candidate_error) / std::max(current_error, 1e-300);
        poses = std::move(candidate);
        any_accepted = true;
        accepted = true;
        report.trace.push_back({iter, candidate_error, lambda, step_norm, true});
        current_error = candidate_error;
        lambda = std::max(lambda * settings.lambda_decrease, 1e-12);
        ++report.iterations;
        if (decrease < settings.relative_error_decrease) {
          report.reason = TerminationReason::converged_relative_error;
        }
        break;
      }

      report.trace.push_back({iter, current_error, lambda, step_norm, false});
      lambda *= settings.lambda_increase;
      if (lambda > settings.lambda_max) {
        report.reason = TerminationReason::lambda_limit;
        break;
      }
    }

    if (!accepted) break;
    if (report.reason == TerminationReason::converged_relative_error) break;

    linearized = linearize_all(graph, poses, settings.policy);
    report.reason = TerminationReason::max_iterations;
  }

  if (!report.aborted) {
    graph.poses = poses;
    report.final_error = current_error;
  }
  report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

}  // namespace vgicp
