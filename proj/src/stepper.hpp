#pragma once

// Internal single-step kernels shared by the direct and the checkpointed
// sweeps; keeping one implementation makes recomputed segments bitwise equal
// to directly stored ones.

#include "ldt/integrator.hpp"
#include "ldt/problem.hpp"

namespace ldt::detail {

/// Callbacks resolved against the integrating-factor choice: N is the
/// nonlinear remainder when the linear part is in use, the full drift
/// otherwise, and E/ET degenerate to the identity without a linear part.
struct Ops {
  const ProblemSpec& p;
  bool use_if;
  bool two_stage;

  Vector N(const Vector& x) const { return use_if ? p.nonlinear_drift(x) : p.drift(x); }
  Vector dN(const Vector& x, const Vector& v) const {
    return use_if ? p.nonlinear_jacobian_action(x, v) : p.jacobian_action(x, v);
  }
  Vector dNT(const Vector& x, const Vector& v) const {
    return use_if ? p.nonlinear_jacobian_adjoint_action(x, v)
                  : p.jacobian_adjoint_action(x, v);
  }
  Vector E(double dt, const Vector& v) const {
    return use_if ? p.linear_part->exp_apply(dt, v) : v;
  }
  Vector ET(double dt, const Vector& v) const {
    return use_if ? p.linear_part->exp_apply_transpose(dt, v) : v;
  }
  Vector H(const Vector& x, const Vector& adj, const Vector& dir) const {
    return p.hessian_bilinear(x, adj, dir);
  }
};

inline Ops make_ops(const ProblemSpec& spec, const IntegratorConfig& cfg) {
  return Ops{spec, cfg.use_linear_part && spec.linear_part != nullptr,
             cfg.scheme == Scheme::rk2_if};
}

/// phi_k -> phi_{k+1}; fills *stage_out for the two-stage scheme.
inline Vector forward_step(const Ops& ops, double dt, const Vector& x, const Vector& eta_k,
                           const Vector& eta_k1, Vector* stage_out) {
  if (ops.two_stage) {
    const Vector s1 = ops.N(x) + ops.p.sigma_apply(eta_k);
    Vector stage = ops.E(dt, x + dt * s1);
    const Vector s2 = ops.N(stage) + ops.p.sigma_apply(eta_k1);
    Vector next = ops.E(dt, x + 0.5 * dt * s1) + 0.5 * dt * s2;
    if (stage_out) {
      *stage_out = std::move(stage);
    }
    return next;
  }
  return ops.E(dt, x + dt * (ops.N(x) + ops.p.sigma_apply(eta_k)));
}

/// gamma_k -> gamma_{k+1} along base (phi_k, stage_k).
inline Vector linearized_step(const Ops& ops, double dt, const Vector& phi_k,
                              const Vector* stage_k, const Vector& g, const Vector& deta_k,
                              const Vector& deta_k1, Vector* gstage_out) {
  if (ops.two_stage) {
    const Vector ls1 = ops.dN(phi_k, g) + ops.p.sigma_apply(deta_k);
    Vector gstage = ops.E(dt, g + dt * ls1);
    const Vector ls2 = ops.dN(*stage_k, gstage) + ops.p.sigma_apply(deta_k1);
    Vector next = ops.E(dt, g + 0.5 * dt * ls1) + 0.5 * dt * ls2;
    if (gstage_out) {
      *gstage_out = std::move(gstage);
    }
    return next;
  }
  return ops.E(dt, g + dt * (ops.dN(phi_k, g) + ops.p.sigma_apply(deta_k)));
}

/// theta_{k+1} -> theta_k, the exact transpose of forward_step. Accumulates
/// the derivative dJ/deta into acc rows k and k+1.
inline Vector adjoint_step(const Ops& ops, double dt, const Vector& theta, const Vector& phi_k,
                           const Vector* stage_k, Matrix& acc, int k) {
  if (ops.two_stage) {
    const Vector psi = 0.5 * dt * ops.dNT(*stage_k, theta);
    const Vector ev = ops.ET(dt, theta);
    const Vector epsi = ops.ET(dt, psi);
    acc.row(k + 1) += (0.5 * dt * ops.p.sigma_adjoint(theta)).transpose();
    acc.row(k) += ops.p.sigma_adjoint(0.5 * dt * ev + dt * epsi).transpose();
    return ev + 0.5 * dt * ops.dNT(phi_k, ev) + epsi + dt * ops.dNT(phi_k, epsi);
  }
  const Vector ev = ops.ET(dt, theta);
  acc.row(k) += (dt * ops.p.sigma_adjoint(ev)).transpose();
  return ev + dt * ops.dNT(phi_k, ev);
}

/// zeta_{k+1} -> zeta_k: the exact linearization of adjoint_step along
/// (gamma, zeta). Accumulates the Hessian-action derivative into acc.
inline Vector second_adjoint_step(const Ops& ops, double dt, const Vector& zeta,
                                  const Vector& theta_k1, const Vector& phi_k,
                                  const Vector* stage_k, const Vector& gamma_k,
                                  const Vector* gamma_stage_k, Matrix& acc, int k) {
  if (ops.two_stage) {
    const Vector psi = 0.5 * dt * ops.dNT(*stage_k, theta_k1);
    const Vector dpsi =
        0.5 * dt * (ops.H(*stage_k, theta_k1, *gamma_stage_k) + ops.dNT(*stage_k, zeta));
    const Vector ev = ops.ET(dt, theta_k1);
    const Vector epsi = ops.ET(dt, psi);
    const Vector ez = ops.ET(dt, zeta);
    const Vector edpsi = ops.ET(dt, dpsi);
    acc.row(k + 1) += (0.5 * dt * ops.p.sigma_adjoint(zeta)).transpose();
    acc.row(k) += ops.p.sigma_adjoint(0.5 * dt * ez + dt * edpsi).transpose();
    return ez + 0.5 * dt * (ops.H(phi_k, ev, gamma_k) + ops.dNT(phi_k, ez)) +
           dt * ops.H(phi_k, epsi, gamma_k) + edpsi + dt * ops.dNT(phi_k, edpsi);
  }
  const Vector ev = ops.ET(dt, theta_k1);
  const Vector ez = ops.ET(dt, zeta);
  acc.row(k) += (dt * ops.p.sigma_adjoint(ez)).transpose();
  return ez + dt * (ops.dNT(phi_k, ez) + ops.H(phi_k, ev, gamma_k));
}

}  // namespace ldt::detail
