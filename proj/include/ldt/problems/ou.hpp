#pragma once

#include "ldt/problem.hpp"

namespace ldt {

/// Scalar Ornstein-Uhlenbeck process dX = -kappa X dt + sqrt(eps) dB from 0
/// with f(x) = x. Everything about it is known in closed form, which makes it
/// the analytic oracle for the whole pipeline.
ProblemSpec make_ou(double kappa);

/// Var(X_T)/eps = (1 - exp(-2 kappa T)) / (2 kappa).
double ou_variance(double kappa, double horizon);
/// I_F(z) = z^2 / (2 Var), lambda_z = z / Var, C_F = sqrt(Var) / z.
double ou_rate(double kappa, double horizon, double z);
double ou_lambda(double kappa, double horizon, double z);
double ou_prefactor(double kappa, double horizon, double z);
/// Exact tail P(X_T >= z) for noise strength eps.
double ou_exact_tail(double kappa, double horizon, double z, double eps);

}  // namespace ldt
