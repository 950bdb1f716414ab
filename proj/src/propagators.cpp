#include "ldt/propagators.hpp"

#include <cmath>
#include <string>

#include "ldt/errors.hpp"
#include "stepper.hpp"

namespace ldt {

namespace {

void check_noise_path(const ProblemSpec& spec, const Path& eta, const char* what) {
  if (eta.width() != spec.noise_rank) {
    throw dimension_error(std::string(what) + ": noise path width != noise rank");
  }
}

void check_finite(const Vector& v, int node, const char* what) {
  if (!v.allFinite()) {
    throw numerical_error(std::string(what) + ": non-finite value at node " +
                          std::to_string(node));
  }
}

}  // namespace

namespace detail {

ForwardCache run_forward(const ProblemSpec& spec, const Path& eta, const IntegratorConfig& cfg) {
  check_noise_path(spec, eta, "solve_state");
  const Ops ops = make_ops(spec, cfg);
  const TimeGrid& grid = eta.grid();
  const int n = grid.n_steps();

  ForwardCache out{Path(eta.grid_ptr(), spec.state_dim), {}, 0.0};
  if (ops.two_stage) {
    out.stages.resize(n);
  }
  Vector x = spec.initial_state;
  out.phi.set_node(0, x);
  for (int k = 0; k < n; ++k) {
    x = forward_step(ops, grid.dt(k), x, eta.node_copy(k), eta.node_copy(k + 1),
                     ops.two_stage ? &out.stages[k] : nullptr);
    check_finite(x, k + 1, "solve_state");
    out.phi.set_node(k + 1, x);
  }
  out.obs = spec.observable(x);
  return out;
}

AdjointCache run_backward(const ProblemSpec& spec, const ForwardCache& fwd, double lambda,
                          const IntegratorConfig& cfg) {
  const Ops ops = make_ops(spec, cfg);
  const TimeGrid& grid = fwd.phi.grid();
  const int n = grid.n_steps();
  if (ops.two_stage && static_cast<int>(fwd.stages.size()) != n) {
    throw dimension_error("run_backward: forward cache lacks stage states");
  }

  AdjointCache out{Path(fwd.phi.grid_ptr(), spec.state_dim),
                   Path(fwd.phi.grid_ptr(), spec.noise_rank)};
  Matrix acc = Matrix::Zero(grid.n_nodes(), spec.noise_rank);

  Vector theta = lambda * spec.obs_grad(fwd.phi.node_copy(n));
  out.theta.set_node(n, theta);
  for (int k = n - 1; k >= 0; --k) {
    theta = adjoint_step(ops, grid.dt(k), theta, fwd.phi.node_copy(k),
                         ops.two_stage ? &fwd.stages[k] : nullptr, acc, k);
    check_finite(theta, k, "solve_adjoint");
    out.theta.set_node(k, theta);
  }
  for (int i = 0; i < grid.n_nodes(); ++i) {
    out.grad.values().row(i) = acc.row(i) / grid.weight(i);
  }
  return out;
}

Path run_linearized_state(const ProblemSpec& spec, const ForwardCache& fwd, const Path& deta,
                          const IntegratorConfig& cfg) {
  check_noise_path(spec, deta, "solve_linearized_pair");
  const Ops ops = make_ops(spec, cfg);
  const TimeGrid& grid = fwd.phi.grid();
  const int n = grid.n_steps();

  Path gamma(fwd.phi.grid_ptr(), spec.state_dim);
  Vector g = Vector::Zero(spec.state_dim);
  for (int k = 0; k < n; ++k) {
    g = linearized_step(ops, grid.dt(k), fwd.phi.node_copy(k),
                        ops.two_stage ? &fwd.stages[k] : nullptr, g, deta.node_copy(k),
                        deta.node_copy(k + 1), nullptr);
    check_finite(g, k + 1, "solve_linearized_pair");
    gamma.set_node(k + 1, g);
  }
  return gamma;
}

Path run_hessian_action(const ProblemSpec& spec, const ForwardCache& fwd, const Path& theta,
                        double lambda, const Path& deta, const IntegratorConfig& cfg,
                        Path* gamma_out, Path* zeta_out) {
  check_noise_path(spec, deta, "run_hessian_action");
  const Ops ops = make_ops(spec, cfg);
  const TimeGrid& grid = fwd.phi.grid();
  const int n = grid.n_steps();

  Path gamma(fwd.phi.grid_ptr(), spec.state_dim);
  std::vector<Vector> gamma_stages(ops.two_stage ? n : 0);
  {
    Vector g = Vector::Zero(spec.state_dim);
    for (int k = 0; k < n; ++k) {
      g = linearized_step(ops, grid.dt(k), fwd.phi.node_copy(k),
                          ops.two_stage ? &fwd.stages[k] : nullptr, g, deta.node_copy(k),
                          deta.node_copy(k + 1), ops.two_stage ? &gamma_stages[k] : nullptr);
      check_finite(g, k + 1, "run_hessian_action");
      gamma.set_node(k + 1, g);
    }
  }

  Path zeta(fwd.phi.grid_ptr(), spec.state_dim);
  Matrix acc = Matrix::Zero(grid.n_nodes(), spec.noise_rank);
  const Vector phi_T = fwd.phi.node_copy(n);
  Vector z = spec.obs_hess_action
                 ? Vector(lambda * spec.obs_hess_action(phi_T, gamma.node_copy(n)))
                 : Vector(Vector::Zero(spec.state_dim));
  zeta.set_node(n, z);
  for (int k = n - 1; k >= 0; --k) {
    z = second_adjoint_step(ops, grid.dt(k), z, theta.node_copy(k + 1), fwd.phi.node_copy(k),
                            ops.two_stage ? &fwd.stages[k] : nullptr, gamma.node_copy(k),
                            ops.two_stage ? &gamma_stages[k] : nullptr, acc, k);
    check_finite(z, k, "run_hessian_action");
    zeta.set_node(k, z);
  }

  Path h(fwd.phi.grid_ptr(), spec.noise_rank);
  for (int i = 0; i < grid.n_nodes(); ++i) {
    h.values().row(i) = acc.row(i) / grid.weight(i);
  }
  if (gamma_out) {
    *gamma_out = std::move(gamma);
  }
  if (zeta_out) {
    *zeta_out = std::move(zeta);
  }
  return h;
}

}  // namespace detail

Path solve_state(const ProblemSpec& spec, const Path& eta, const IntegratorConfig& cfg) {
  return detail::run_forward(spec, eta, cfg).phi;
}

Path solve_adjoint(const ProblemSpec& spec, const Path& phi, double lambda,
                   const IntegratorConfig& cfg) {
  if (phi.width() != spec.state_dim) {
    throw dimension_error("solve_adjoint: state path width != state dim");
  }
  const detail::Ops ops = detail::make_ops(spec, cfg);
  const TimeGrid& grid = phi.grid();
  const int n = grid.n_steps();

  Matrix acc = Matrix::Zero(grid.n_nodes(), spec.noise_rank);
  Path out(phi.grid_ptr(), spec.state_dim);
  Vector theta = lambda * spec.obs_grad(phi.node_copy(n));
  out.set_node(n, theta);
  for (int k = n - 1; k >= 0; --k) {
    // Stage states re-approximated by the successor node (same order in dt).
    const Vector stage = phi.node_copy(k + 1);
    theta = detail::adjoint_step(ops, grid.dt(k), theta, phi.node_copy(k),
                                 ops.two_stage ? &stage : nullptr, acc, k);
    check_finite(theta, k, "solve_adjoint");
    out.set_node(k, theta);
  }
  return out;
}

Path gradient(const ProblemSpec& spec, const Path& eta, double lambda,
              const IntegratorConfig& cfg) {
  const auto fwd = detail::run_forward(spec, eta, cfg);
  return detail::run_backward(spec, fwd, lambda, cfg).grad;
}

std::pair<Path, Path> solve_linearized_pair(const ProblemSpec& spec, const Path& eta,
                                            double lambda, const Path& deta,
                                            const IntegratorConfig& cfg) {
  const auto fwd = detail::run_forward(spec, eta, cfg);
  const auto adj = detail::run_backward(spec, fwd, lambda, cfg);
  Path gamma(eta.grid_ptr(), spec.state_dim);
  Path zeta(eta.grid_ptr(), spec.state_dim);
  detail::run_hessian_action(spec, fwd, adj.theta, lambda, deta, cfg, &gamma, &zeta);
  return {std::move(gamma), std::move(zeta)};
}

}  // namespace ldt
