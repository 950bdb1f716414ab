#pragma once

#include "ldt/propagators.hpp"

namespace ldt {

/// Static recursive (bisection) checkpoint schedule for backward sweeps whose
/// forward trajectory is too large to store. budget is the maximum number of
/// simultaneously held full-state snapshots (including the initial state);
/// a budget of ceil(log2 n_steps) + 1 gives pure bisection with O(n log n)
/// recomputation, smaller budgets degrade to quadratic recomputation on the
/// deepest segments.
struct CheckpointPlan {
  int n_steps = 0;
  int budget = 0;

  static CheckpointPlan make(int n_steps, int budget);
};

struct CheckpointStats {
  int peak_snapshots = 0;
  long recomputed_steps = 0;
};

/// Hessian-vector product of the discrete lambda F identical to the direct
/// (fully stored) sweep, but holding at most plan.budget (phi, gamma)
/// snapshots at any time. Forward values are recomputed segment-wise with the
/// same stepper arithmetic, so outputs are bitwise equal to the direct path.
Path checkpointed_apply(const ProblemSpec& spec, const Path& eta, double lambda,
                        const Path& deta, const IntegratorConfig& cfg,
                        const CheckpointPlan& plan, CheckpointStats* stats = nullptr);

}  // namespace ldt
