#pragma once

#include <vector>

#include "ldt/instanton.hpp"

namespace ldt {

/// Dense-Q Riccati sweep along the instanton:
///   Q' = a + Q grad b^T + grad b Q + Q <grad^2 b, theta> Q,  Q(0) = 0,
/// stepped with the same scheme family as the propagators (linear parts via
/// exponential actions, Jacobian and Hessian terms column-wise).
struct RiccatiConfig {
  IntegratorConfig integ;
  int dense_cap = 4096;           // refuse state dims beyond this
  double blowup_norm = 1e12;      // max-norm guard
  double spike_factor = 1e3;      // per-step growth recorded as a spike
  bool store_path = false;        // keep Q at every node (small systems)
};

struct RiccatiResult {
  Matrix q_final;                  // Q(T)
  Matrix u_final;                  // U = Id - lambda grad^2 f(phi_T) Q(T)
  double trace_integral = 0.0;     // int_0^T tr[<grad^2 b, theta> Q] dt
  double lambda = 0.0;
  double rate = 0.0;
  Vector obs_grad_final;
  std::vector<Matrix> q_path;      // filled when store_path
  /// Nodes where per-step growth exceeded spike_factor (possible removable
  /// singularities; kept as diagnostics).
  std::vector<int> spike_nodes;
};

RiccatiResult solve_riccati(const ProblemSpec& spec, const InstantonResult& instanton,
                            const RiccatiConfig& cfg);

/// C_F(z) = exp(trace_integral / 2) / (lambda [det U <grad f, Q U^{-1} grad f>]^{1/2}).
/// Throws assumption_error when U is singular or the bracket is not positive.
double prefactor_riccati(const RiccatiResult& rr);

/// Final-time fluctuation covariance
///   C(T,T) = Q U^{-1} - (Q U^{-1} grad f)(Q U^{-1} grad f)^T / <grad f, Q U^{-1} grad f>.
Matrix final_time_covariance_riccati(const RiccatiResult& rr);

}  // namespace ldt
