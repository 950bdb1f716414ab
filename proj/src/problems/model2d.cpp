#include "ldt/problems/model2d.hpp"

namespace ldt {

ProblemSpec make_model2d() {
  ProblemSpec p;
  p.name = "model2d";
  p.state_dim = 2;
  p.noise_rank = 2;
  p.initial_state = Vector::Zero(2);

  p.drift = [](const Vector& x) {
    Vector b(2);
    b(0) = -x(0) - x(0) * x(1);
    b(1) = -4.0 * x(1) + x(0) * x(0);
    return b;
  };
  p.jacobian_action = [](const Vector& x, const Vector& v) {
    Vector r(2);
    r(0) = (-1.0 - x(1)) * v(0) - x(0) * v(1);
    r(1) = 2.0 * x(0) * v(0) - 4.0 * v(1);
    return r;
  };
  p.jacobian_adjoint_action = [](const Vector& x, const Vector& w) {
    Vector r(2);
    r(0) = (-1.0 - x(1)) * w(0) + 2.0 * x(0) * w(1);
    r(1) = -x(0) * w(0) - 4.0 * w(1);
    return r;
  };
  p.hessian_bilinear = [](const Vector&, const Vector& adj, const Vector& dir) {
    Vector r(2);
    r(0) = 2.0 * adj(1) * dir(0) - adj(0) * dir(1);
    r(1) = -adj(0) * dir(0);
    return r;
  };

  p.sigma_apply = [](const Vector& w) {
    Vector r(2);
    r(0) = w(0);
    r(1) = 0.5 * w(1);
    return r;
  };
  p.sigma_adjoint = [](const Vector& v) {
    Vector r(2);
    r(0) = v(0);
    r(1) = 0.5 * v(1);
    return r;
  };

  p.observable = [](const Vector& x) { return x(0) + 2.0 * x(1); };
  p.obs_grad = [](const Vector&) {
    Vector g(2);
    g(0) = 1.0;
    g(1) = 2.0;
    return g;
  };

  Vector diag(2);
  diag << -1.0, -4.0;
  p.linear_part = std::make_shared<DiagonalLinearPart>(diag);
  p.nonlinear_drift = [](const Vector& x) {
    Vector b(2);
    b(0) = -x(0) * x(1);
    b(1) = x(0) * x(0);
    return b;
  };
  p.nonlinear_jacobian_action = [](const Vector& x, const Vector& v) {
    Vector r(2);
    r(0) = -x(1) * v(0) - x(0) * v(1);
    r(1) = 2.0 * x(0) * v(0);
    return r;
  };
  p.nonlinear_jacobian_adjoint_action = [](const Vector& x, const Vector& w) {
    Vector r(2);
    r(0) = -x(1) * w(0) + 2.0 * x(0) * w(1);
    r(1) = -x(0) * w(0);
    return r;
  };
  return p;
}

}  // namespace ldt
