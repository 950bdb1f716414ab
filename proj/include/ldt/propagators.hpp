#pragma once

#include <utility>
#include <vector>

#include "ldt/integrator.hpp"
#include "ldt/path.hpp"
#include "ldt/problem.hpp"

namespace ldt {

/// Forward state solve phi' = b(phi) + sigma eta, phi(0) = x0, one step
/// per grid interval. Throws numerical_error (with the node index) on
/// non-finite states.
Path solve_state(const ProblemSpec& spec, const Path& eta, const IntegratorConfig& cfg);

/// Backward multiplier solve theta' = -grad b(phi)^T theta with
/// theta(T) = lambda grad f(phi(T)) exactly, stepped with the transpose of
/// the forward scheme (stage states re-approximated from node values).
Path solve_adjoint(const ProblemSpec& spec, const Path& phi, double lambda,
                   const IntegratorConfig& cfg);

/// Exact discrete L2 gradient of eta -> lambda f(phi_T(eta)): the transpose
/// of the discrete forward map divided by the quadrature weights, so that
/// <gradient, deta>_L2 equals the exact directional derivative.
Path gradient(const ProblemSpec& spec, const Path& eta, double lambda,
              const IntegratorConfig& cfg);

/// Linearization (gamma = delta phi, zeta = delta theta) of the discrete
/// forward and backward sweeps around the trajectory generated by eta, in
/// direction deta. zeta(T) = lambda grad^2 f(phi_T) gamma(T).
std::pair<Path, Path> solve_linearized_pair(const ProblemSpec& spec, const Path& eta,
                                            double lambda, const Path& deta,
                                            const IntegratorConfig& cfg);

namespace detail {

/// Forward sweep with everything the exact transpose needs retained:
/// node states plus per-step stage states (rk2 only).
struct ForwardCache {
  Path phi;
  std::vector<Vector> stages;
  double obs = 0.0;
};

struct AdjointCache {
  Path theta;  // exact discrete multipliers dJ/dphi_k
  Path grad;   // exact discrete L2 gradient of lambda F
};

ForwardCache run_forward(const ProblemSpec& spec, const Path& eta, const IntegratorConfig& cfg);

AdjointCache run_backward(const ProblemSpec& spec, const ForwardCache& fwd, double lambda,
                          const IntegratorConfig& cfg);

/// Exact directional derivative of the discrete gradient map (Hessian-vector
/// product of the discrete lambda F). Optionally exposes gamma and zeta.
Path run_hessian_action(const ProblemSpec& spec, const ForwardCache& fwd, const Path& theta,
                        double lambda, const Path& deta, const IntegratorConfig& cfg,
                        Path* gamma_out = nullptr, Path* zeta_out = nullptr);

/// Linearized forward sweep only (gamma), used for tube reconstruction.
Path run_linearized_state(const ProblemSpec& spec, const ForwardCache& fwd, const Path& deta,
                          const IntegratorConfig& cfg);

}  // namespace detail

}  // namespace ldt
