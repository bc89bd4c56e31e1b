#pragma once

#include "vgicp/block_solver.hpp"
#include "vgicp/graph.hpp"

#include <functional>
#include <string>
#include <vector>

namespace vgicp {

struct LmSettings {
  int max_iterations = 50;
  double lambda_init = 1e-5;
  double lambda_increase = 10.0;
  double lambda_decrease = 0.1;
  double lambda_max = 1e10;
  double relative_error_decrease = 1e-6;
  double step_norm_tolerance = 1e-8;
  ExecPolicy policy;
};

enum class TerminationReason {
  converged_relative_error,
  converged_step_norm,
  max_iterations,
  lambda_limit,
  solver_abort,
};

const char* to_string(TerminationReason reason);

struct IterationRecord {
  int iteration = 0;
  double error = 0.0;   // total error after this solve attempt (accepted or not)
  double lambda = 0.0;
  double step_norm = 0.0;
  bool accepted = false;
};

struct OptimizerReport {
  int iterations = 0;  // accepted re-linearizations
  double initial_error = 0.0;
  double final_error = 0.0;
  std::vector<IterationRecord> trace;
  TerminationReason reason = TerminationReason::max_iterations;
  double wall_time_seconds = 0.0;
  bool aborted = false;
  std::string diagnostic;
};

/// Levenberg-Marquardt over the graph. Every factor is re-linearized at each
/// accepted estimate; damping scales diag(H) (Marquardt variant); a step is
/// accepted only when the re-evaluated total error decreases. Any connected
/// component without a fixed variable gets its first pose anchored for the
/// duration of the call. On solver abort before any accepted step the poses
/// are left unchanged.
OptimizerReport optimize(MappingGraph& graph, const LmSettings& settings = {});

/// Total graph error at the current estimates (kernel weights included).
double total_error(const MappingGraph& graph, const std::vector<Pose>& poses, const ExecPolicy& policy);

}  // namespace vgicp
