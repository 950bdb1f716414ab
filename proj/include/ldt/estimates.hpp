#pragma once

#include <functional>
#include <optional>

#include "ldt/instanton.hpp"
#include "ldt/spectrum.hpp"

namespace ldt {

/// C_F(z) = [2 I_F(z) det(Id - A_z)]^{-1/2} from the dominant-eigenvalue
/// product. Throws assumption_error for nonpositive determinant or rate.
double prefactor_fredholm(const InstantonResult& instanton, const FredholmResult& det);

/// Sharp tail estimate P(f(X_T) >= z) ~ sqrt(eps / 2 pi) C_F exp(-I_F / eps).
/// Assembled in log space; also exposed as log10 for deep tails.
double tail_probability(double rate, double prefactor, double eps);
double log10_tail_probability(double rate, double prefactor, double eps);

/// Density estimate rho(z) ~ lambda_z C_F (2 pi eps)^{-1/2} exp(-I_F / eps).
double pdf_estimate(double rate, double lambda, double prefactor, double eps);

struct EstimateReport {
  double z = 0.0;
  double eps = 0.0;
  double rate = 0.0;
  double lambda = 0.0;
  double det_fredholm = 1.0;
  double prefactor = 0.0;                  // Fredholm route
  std::optional<double> prefactor_riccati; // independent route when computed
  double tail = 0.0;
  double log10_tail = 0.0;
  double pdf = 0.0;
};

EstimateReport make_estimate_report(const InstantonResult& instanton,
                                    const FredholmResult& det, double eps,
                                    std::optional<double> riccati_prefactor = {});

/// Finite-dimensional analogue on R^N: minimize 1/2 |eta|^2 subject to
/// F(eta) = z, then assemble the same sharp estimate from the projected
/// Hessian spectrum. Serves as the strongest end-to-end oracle: the
/// discretized path problem is exactly of this form.
struct FiniteDimProblem {
  int dim = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  /// Hessian-vector product of F.
  std::function<Vector(const Vector&, const Vector&)> hessian_action;
};

struct SormConfig {
  std::vector<double> penalty_schedule;  // empty: 6 log-spaced 1..300
  double grad_reduction_inner = 1e2;
  double grad_reduction_final = 1e8;
  double constraint_tol = 1e-9;
  long max_iterations = 200000;
  Vector initial_point;  // empty: zero
};

struct SormResult {
  Vector eta;
  double lambda = 0.0;
  double rate = 0.0;
  double det = 1.0;
  double prefactor = 0.0;
  Vector hessian_eigenvalues;  // of lambda P grad^2F P, descending |.|
};

SormResult finite_dim_sorm(const FiniteDimProblem& problem, double z, const SormConfig& cfg);

}  // namespace ldt
