#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ldt/propagators.hpp"

namespace ldt {

/// Augmented-Lagrangian instanton solver configuration. The constrained
/// problem min 1/2 ||eta||^2 s.t. f(phi_T(eta)) = z is relaxed to
/// min 1/2||eta||^2 - lambda (F - z) + mu/2 (F - z)^2 over a growing penalty
/// schedule with multiplier updates lambda <- lambda - mu (F - z).
struct InstantonConfig {
  /// Penalty values; empty means 6 log-spaced values from 1 to 300.
  std::vector<double> penalty_schedule;
  /// Per-subproblem relative gradient-norm reduction; the last subproblem
  /// uses the final (tight) factor.
  double grad_reduction_inner = 1e2;
  double grad_reduction_final = 1e6;
  /// Observable residual target |f - z| <= constraint_tol * max(1, |z|).
  double constraint_tol = 1e-6;
  /// Additional multiplier rounds at the final penalty value.
  int max_final_stages = 30;
  long max_iterations = 200000;

  enum class Method { automatic, gradient_descent, lbfgs };
  /// automatic: gradient descent for state dim <= 10, L-BFGS otherwise.
  Method method = Method::automatic;
  int lbfgs_memory = 4;
  /// Per-node (sigma^T sigma)^{-1} scaling of descent directions.
  bool precondition = true;

  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_line_search = 60;

  /// Multi-start: start 0 is eta == 0; the rest are seeded Gaussian paths.
  int n_starts = 4;
  std::uint64_t start_seed = 2024;
  double start_amplitude = 0.5;

  IntegratorConfig integ;
};

struct InstantonResult {
  Path eta;    // minimizing noise path (rank sigma coordinates)
  Path phi;    // state path
  Path theta;  // discrete adjoint multipliers, theta_T = lambda grad f
  double lambda = 0.0;
  double z = 0.0;
  double rate = 0.0;          // I_F(z) = 1/2 ||eta||^2
  double rate_adjoint = 0.0;  // 1/2 <theta, a theta> cross-check
  double obs = 0.0;
  double obs_residual = 0.0;
  /// ||eta - sigma^T theta|| / ||eta||: discrete first-order condition.
  double first_order_residual = 0.0;
  long iterations = 0;
  double initial_grad_norm = 0.0;
  double final_grad_norm = 0.0;
  std::vector<double> grad_norm_history;
  bool converged = false;
  int selected_start = 0;
  std::vector<double> start_objectives;

  InstantonResult(GridPtr grid, int noise_rank, int state_dim)
      : eta(grid, noise_rank), phi(grid, state_dim), theta(grid, state_dim) {}
};

/// Requires z >= f(deterministic final state); equality returns the zero
/// path immediately. Throws numerical_error when no start converges.
InstantonResult solve_instanton(const ProblemSpec& spec, GridPtr grid, double z,
                                const InstantonConfig& cfg);

/// Solves a sorted sweep of z values, warm-starting each one from the
/// previous solution (multi-start only on the first).
std::vector<InstantonResult> rate_function_sweep(const ProblemSpec& spec, GridPtr grid,
                                                 std::vector<double> zs,
                                                 const InstantonConfig& cfg);

}  // namespace ldt
