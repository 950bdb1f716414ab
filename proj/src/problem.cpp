#include "ldt/problem.hpp"

#include "ldt/errors.hpp"

namespace ldt {

Matrix ProblemSpec::sigma_matrix() const {
  Matrix s(state_dim, noise_rank);
  Vector e = Vector::Zero(noise_rank);
  for (int j = 0; j < noise_rank; ++j) {
    e[j] = 1.0;
    s.col(j) = sigma_apply(e);
    e[j] = 0.0;
  }
  return s;
}

Matrix ProblemSpec::covariance_matrix() const {
  const Matrix s = sigma_matrix();
  return s * s.transpose();
}

Matrix ProblemSpec::noise_gram() const {
  const Matrix s = sigma_matrix();
  return s.transpose() * s;
}

void ProblemSpec::validate() const {
  if (state_dim < 1 || noise_rank < 1) {
    throw dimension_error("ProblemSpec: dimensions must be positive");
  }
  if (initial_state.size() != state_dim) {
    throw dimension_error("ProblemSpec: initial state size mismatch");
  }
  if (!drift || !jacobian_action || !jacobian_adjoint_action || !hessian_bilinear ||
      !sigma_apply || !sigma_adjoint || !observable || !obs_grad) {
    throw dimension_error("ProblemSpec: missing required callback");
  }
  if (linear_part &&
      (!nonlinear_drift || !nonlinear_jacobian_action || !nonlinear_jacobian_adjoint_action)) {
    throw dimension_error("ProblemSpec: linear part requires nonlinear remainders");
  }
}

}  // namespace ldt
