#include "ldt/riccati.hpp"

#include <cmath>
#include <utility>

#include <Eigen/LU>

#include "ldt/errors.hpp"

namespace ldt {

namespace {

/// Column-probed dense Jacobian of the stepping drift part (nonlinear
/// remainder under an integrating factor, full drift otherwise).
Matrix drift_jacobian(const ProblemSpec& spec, bool use_if, const Vector& x) {
  const int n = spec.state_dim;
  Matrix j(n, n);
  Vector e = Vector::Zero(n);
  for (int c = 0; c < n; ++c) {
    e(c) = 1.0;
    j.col(c) = use_if ? spec.nonlinear_jacobian_action(x, e) : spec.jacobian_action(x, e);
    e(c) = 0.0;
  }
  return j;
}

/// <grad^2 b(x), theta>: symmetric matrix probed column-wise. The linear
/// part never contributes, so this is scheme independent.
Matrix hessian_matrix(const ProblemSpec& spec, const Vector& x, const Vector& theta) {
  const int n = spec.state_dim;
  Matrix h(n, n);
  Vector e = Vector::Zero(n);
  for (int c = 0; c < n; ++c) {
    e(c) = 1.0;
    h.col(c) = spec.hessian_bilinear(x, theta, e);
    e(c) = 0.0;
  }
  return h;
}

Matrix exp_sandwich(const LinearPart* lp, double dt, Matrix m) {
  if (lp == nullptr) {
    return m;
  }
  for (int c = 0; c < m.cols(); ++c) {
    m.col(c) = lp->exp_apply(dt, m.col(c));
  }
  Matrix t = m.transpose();
  for (int c = 0; c < t.cols(); ++c) {
    t.col(c) = lp->exp_apply(dt, t.col(c));
  }
  return t.transpose();
}

struct USolve {
  Eigen::PartialPivLU<Matrix> lu;
  double det;
  Vector u_inv_grad;   // U^{-1} grad f
  Vector q_u_inv_grad; // Q U^{-1} grad f
  double bracket;      // <grad f, Q U^{-1} grad f>

  explicit USolve(const RiccatiResult& rr) : lu(rr.u_final) {
    det = lu.determinant();
    if (!std::isfinite(det) || det <= 0.0) {
      throw assumption_error("prefactor_riccati: det U must be positive");
    }
    u_inv_grad = lu.solve(rr.obs_grad_final);
    q_u_inv_grad = rr.q_final * u_inv_grad;
    bracket = rr.obs_grad_final.dot(q_u_inv_grad);
    if (!std::isfinite(bracket) || bracket <= 0.0) {
      throw assumption_error("prefactor_riccati: <grad f, Q U^{-1} grad f> must be positive");
    }
  }
};

}  // namespace

RiccatiResult solve_riccati(const ProblemSpec& spec, const InstantonResult& instanton,
                            const RiccatiConfig& cfg) {
  spec.validate();
  const int n = spec.state_dim;
  if (n > cfg.dense_cap) {
    throw config_error("solve_riccati: state dimension exceeds the dense cap");
  }
  const TimeGrid& grid = instanton.phi.grid();
  const bool use_if = cfg.integ.use_linear_part && spec.linear_part != nullptr;
  const bool two_stage = cfg.integ.scheme == Scheme::rk2_if;
  const LinearPart* lp = use_if ? spec.linear_part.get() : nullptr;

  const Matrix a = spec.covariance_matrix();
  Matrix q = Matrix::Zero(n, n);

  RiccatiResult res;
  res.lambda = instanton.lambda;
  res.rate = instanton.rate;
  if (cfg.store_path) {
    res.q_path.reserve(grid.n_nodes());
    res.q_path.push_back(q);
  }

  // G(Q, node) = a + Q J^T + J Q + Q H Q with J, H frozen at the node.
  auto rhs = [&](const Matrix& qq, const Matrix& j, const Matrix& h) {
    return Matrix(a + qq * j.transpose() + j * qq + qq * h * qq);
  };

  Matrix j_k = drift_jacobian(spec, use_if, instanton.phi.node_copy(0));
  Matrix h_k = hessian_matrix(spec, instanton.phi.node_copy(0), instanton.theta.node_copy(0));
  res.trace_integral = grid.weight(0) * h_k.cwiseProduct(q).sum();

  for (int k = 0; k < grid.n_steps(); ++k) {
    const double dt = grid.dt(k);
    const Matrix g1 = rhs(q, j_k, h_k);
    const Vector phi_next = instanton.phi.node_copy(k + 1);
    const Vector theta_next = instanton.theta.node_copy(k + 1);
    const Matrix j_next = drift_jacobian(spec, use_if, phi_next);
    const Matrix h_next = hessian_matrix(spec, phi_next, theta_next);

    Matrix q_next;
    if (two_stage) {
      const Matrix q_star = exp_sandwich(lp, dt, q + dt * g1);
      const Matrix g2 = rhs(q_star, j_next, h_next);
      q_next = exp_sandwich(lp, dt, q + 0.5 * dt * g1) + 0.5 * dt * g2;
    } else {
      q_next = exp_sandwich(lp, dt, q + dt * g1);
    }
    q_next = (0.5 * (q_next + q_next.transpose())).eval();

    const double prev_norm = std::max(q.cwiseAbs().maxCoeff(), 1.0);
    const double next_norm = q_next.cwiseAbs().maxCoeff();
    if (!q_next.allFinite() || next_norm > cfg.blowup_norm) {
      throw numerical_error("solve_riccati: Q blew up at node " + std::to_string(k + 1));
    }
    if (next_norm > cfg.spike_factor * prev_norm) {
      res.spike_nodes.push_back(k + 1);
    }

    q = std::move(q_next);
    j_k = j_next;
    h_k = h_next;
    res.trace_integral += grid.weight(k + 1) * h_k.cwiseProduct(q).sum();
    if (cfg.store_path) {
      res.q_path.push_back(q);
    }
  }

  res.q_final = q;
  const Vector phi_final = instanton.phi.node_copy(grid.n_steps());
  res.obs_grad_final = spec.obs_grad(phi_final);
  Matrix fq = Matrix::Zero(n, n);
  if (spec.obs_hess_action) {
    for (int c = 0; c < n; ++c) {
      fq.col(c) = spec.obs_hess_action(phi_final, q.col(c));
    }
  }
  res.u_final = Matrix::Identity(n, n) - instanton.lambda * fq;
  return res;
}

double prefactor_riccati(const RiccatiResult& rr) {
  if (!(rr.lambda > 0.0)) {
    throw assumption_error("prefactor_riccati: lambda must be positive");
  }
  const USolve u(rr);
  return std::exp(0.5 * rr.trace_integral) / (rr.lambda * std::sqrt(u.det * u.bracket));
}

Matrix final_time_covariance_riccati(const RiccatiResult& rr) {
  const USolve u(rr);
  Eigen::PartialPivLU<Matrix> lut(rr.u_final.transpose());
  const Matrix q_u_inv = lut.solve(rr.q_final.transpose()).transpose();
  Matrix c = q_u_inv - (u.q_u_inv_grad * u.q_u_inv_grad.transpose()) / u.bracket;
  c = (0.5 * (c + c.transpose())).eval();
  if (!c.allFinite()) {
    throw numerical_error("final_time_covariance_riccati: covariance is not finite");
  }
  return c;
}

}  // namespace ldt
