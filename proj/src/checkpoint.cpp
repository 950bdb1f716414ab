#include "ldt/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ldt/errors.hpp"
#include "stepper.hpp"

namespace ldt {

namespace {

struct Joint {
  Vector phi;
  Vector gamma;
};

/// Backward sweep with segment recomputation from snapshots. Holds the
/// marching (theta, zeta) pair and the derivative accumulator.
class Treeverse {
 public:
  Treeverse(const detail::Ops& ops, const ProblemSpec& spec, const TimeGrid& grid,
            const Path& eta, const Path& deta, CheckpointStats& stats)
      : ops_(ops), spec_(spec), grid_(grid), eta_(eta), deta_(deta), stats_(stats),
        acc_(Matrix::Zero(grid.n_nodes(), spec.noise_rank)),
        theta_acc_(Matrix::Zero(grid.n_nodes(), spec.noise_rank)) {}

  Joint advance(Joint s, int from, int to, bool count) {
    for (int k = from; k < to; ++k) {
      const double dt = grid_.dt(k);
      Vector stage;
      const Vector phi_next =
          detail::forward_step(ops_, dt, s.phi, eta_.node_copy(k), eta_.node_copy(k + 1),
                               ops_.two_stage ? &stage : nullptr);
      s.gamma = detail::linearized_step(ops_, dt, s.phi, ops_.two_stage ? &stage : nullptr,
                                        s.gamma, deta_.node_copy(k), deta_.node_copy(k + 1),
                                        nullptr);
      s.phi = phi_next;
      if (!s.phi.allFinite() || !s.gamma.allFinite()) {
        throw numerical_error("checkpointed_apply: non-finite state at node " +
                              std::to_string(k + 1));
      }
    }
    if (count) {
      stats_.recomputed_steps += std::max(0, to - from);
    }
    return s;
  }

  void init_terminal(const Joint& final_state, double lambda) {
    theta_ = lambda * spec_.obs_grad(final_state.phi);
    zeta_ = spec_.obs_hess_action
                ? Vector(lambda * spec_.obs_hess_action(final_state.phi, final_state.gamma))
                : Vector(Vector::Zero(spec_.state_dim));
  }

  void backward_step(int k, const Joint& s) {
    const double dt = grid_.dt(k);
    Vector stage;
    Vector gamma_stage;
    if (ops_.two_stage) {
      (void)detail::forward_step(ops_, dt, s.phi, eta_.node_copy(k), eta_.node_copy(k + 1),
                                 &stage);
      (void)detail::linearized_step(ops_, dt, s.phi, &stage, s.gamma, deta_.node_copy(k),
                                    deta_.node_copy(k + 1), &gamma_stage);
    }
    zeta_ = detail::second_adjoint_step(ops_, dt, zeta_, theta_, s.phi,
                                        ops_.two_stage ? &stage : nullptr, s.gamma,
                                        ops_.two_stage ? &gamma_stage : nullptr, acc_, k);
    theta_ = detail::adjoint_step(ops_, dt, theta_, s.phi, ops_.two_stage ? &stage : nullptr,
                                  theta_acc_, k);
  }

  void process(int lo, int hi, const Joint& state_lo, int slots_left) {
    if (hi - lo == 1) {
      backward_step(lo, state_lo);
      return;
    }
    if (slots_left <= 0) {
      for (int k = hi - 1; k > lo; --k) {
        const Joint s = advance(state_lo, lo, k, true);
        backward_step(k, s);
      }
      backward_step(lo, state_lo);
      return;
    }
    const int mid = lo + (hi - lo + 1) / 2;
    const Joint snap = advance(state_lo, lo, mid, true);
    ++held_;
    stats_.peak_snapshots = std::max(stats_.peak_snapshots, held_);
    process(mid, hi, snap, slots_left - 1);
    --held_;
    process(lo, mid, state_lo, slots_left);
  }

  void note_root_snapshot() {
    held_ = 1;
    stats_.peak_snapshots = std::max(stats_.peak_snapshots, held_);
  }

  Path finalize(GridPtr grid_ptr) {
    Path h(std::move(grid_ptr), spec_.noise_rank);
    for (int i = 0; i < grid_.n_nodes(); ++i) {
      h.values().row(i) = acc_.row(i) / grid_.weight(i);
    }
    return h;
  }

 private:
  const detail::Ops& ops_;
  const ProblemSpec& spec_;
  const TimeGrid& grid_;
  const Path& eta_;
  const Path& deta_;
  CheckpointStats& stats_;
  Matrix acc_;
  Matrix theta_acc_;  // adjoint_step accumulates the first-order rows here; unused
  Vector theta_;
  Vector zeta_;
  int held_ = 0;
};

}  // namespace

CheckpointPlan CheckpointPlan::make(int n_steps, int budget) {
  if (n_steps < 1) {
    throw config_error("CheckpointPlan: need at least one step");
  }
  if (budget < 2) {
    throw config_error("CheckpointPlan: snapshot budget must be at least 2");
  }
  return CheckpointPlan{n_steps, budget};
}

Path checkpointed_apply(const ProblemSpec& spec, const Path& eta, double lambda,
                        const Path& deta, const IntegratorConfig& cfg,
                        const CheckpointPlan& plan, CheckpointStats* stats) {
  if (plan.n_steps != eta.grid().n_steps()) {
    throw dimension_error("checkpointed_apply: plan does not match the grid");
  }
  const detail::Ops ops = detail::make_ops(spec, cfg);
  CheckpointStats local;
  CheckpointStats& st = stats ? *stats : local;
  st = CheckpointStats{};

  Treeverse sweep(ops, spec, eta.grid(), eta, deta, st);
  const Joint root{spec.initial_state, Vector::Zero(spec.state_dim)};
  sweep.note_root_snapshot();
  const int n = eta.grid().n_steps();
  const Joint final_state = sweep.advance(root, 0, n, false);
  sweep.init_terminal(final_state, lambda);
  sweep.process(0, n, root, plan.budget - 1);
  return sweep.finalize(eta.grid_ptr());
}

}  // namespace ldt
