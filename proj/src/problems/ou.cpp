#include "ldt/problems/ou.hpp"

#include <cmath>

#include "ldt/errors.hpp"
#include "ldt/rng.hpp"

namespace ldt {

ProblemSpec make_ou(double kappa) {
  if (!(kappa > 0.0)) {
    throw config_error("make_ou: kappa must be positive");
  }
  ProblemSpec p;
  p.name = "ou";
  p.state_dim = 1;
  p.noise_rank = 1;
  p.initial_state = Vector::Zero(1);

  p.drift = [kappa](const Vector& x) { return Vector(-kappa * x); };
  p.jacobian_action = [kappa](const Vector&, const Vector& v) { return Vector(-kappa * v); };
  p.jacobian_adjoint_action = [kappa](const Vector&, const Vector& w) {
    return Vector(-kappa * w);
  };
  p.hessian_bilinear = [](const Vector&, const Vector&, const Vector&) {
    return Vector(Vector::Zero(1));
  };

  p.sigma_apply = [](const Vector& w) { return w; };
  p.sigma_adjoint = [](const Vector& v) { return v; };

  p.observable = [](const Vector& x) { return x(0); };
  p.obs_grad = [](const Vector&) { return Vector(Vector::Ones(1)); };

  p.linear_part = std::make_shared<DiagonalLinearPart>(Vector(-kappa * Vector::Ones(1)));
  p.nonlinear_drift = [](const Vector&) { return Vector(Vector::Zero(1)); };
  p.nonlinear_jacobian_action = [](const Vector&, const Vector&) {
    return Vector(Vector::Zero(1));
  };
  p.nonlinear_jacobian_adjoint_action = [](const Vector&, const Vector&) {
    return Vector(Vector::Zero(1));
  };
  return p;
}

double ou_variance(double kappa, double horizon) {
  return (1.0 - std::exp(-2.0 * kappa * horizon)) / (2.0 * kappa);
}

double ou_rate(double kappa, double horizon, double z) {
  return z * z / (2.0 * ou_variance(kappa, horizon));
}

double ou_lambda(double kappa, double horizon, double z) {
  return z / ou_variance(kappa, horizon);
}

double ou_prefactor(double kappa, double horizon, double z) {
  return std::sqrt(ou_variance(kappa, horizon)) / z;
}

double ou_exact_tail(double kappa, double horizon, double z, double eps) {
  return normal_upper_tail(z / std::sqrt(eps * ou_variance(kappa, horizon)));
}

}  // namespace ldt
