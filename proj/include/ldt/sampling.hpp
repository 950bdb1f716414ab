#pragma once

#include <cstdint>
#include <vector>

#include "ldt/instanton.hpp"

namespace ldt {

/// Stochastic integrators for dX = b(X) dt + sqrt(eps) sigma dB. Noise
/// increments come from the counter RNG keyed by (seed, sample, step), so
/// ensembles are bitwise reproducible for any thread count.
enum class McScheme {
  euler_maruyama_if,
  heun_if,
};

struct McConfig {
  double eps = 1.0;
  long n_samples = 0;
  McScheme scheme = McScheme::euler_maruyama_if;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Endpoint conditioning half-width for importance sampling, in rescaled
  /// observable units |f(X_T) - z| / sqrt(eps).
  double conditioning_tol = 0.05;
};

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

/// Wilson score interval for a binomial proportion.
Interval wilson_interval(long hits, long n, double confidence = 0.95);

struct McTailResult {
  long hits = 0;
  long n_samples = 0;
  long failures = 0;  // non-finite trajectories, counted as misses
  double estimate = 0.0;
  Interval interval;
};

/// Direct Monte Carlo estimate of P(f(X_T) >= z).
McTailResult direct_tail_mc(const ProblemSpec& spec, GridPtr grid, double z,
                            const McConfig& cfg);

/// Ensemble of shifted-process paths Y (X = phi_z + sqrt(eps) Y) accepted by
/// the endpoint condition, with self-normalized conditioning weights
///   w = exp( eps^{-1} int <b(phi+sqrt(eps)Y) - b(phi) - sqrt(eps) grad b(phi) Y, theta> dt
///          + eps^{-1} lambda [f(phi_T+sqrt(eps)Y_T) - f(phi_T) - sqrt(eps) <grad f, Y_T>] ).
struct IsEnsemble {
  std::vector<int> record_nodes;
  /// One row per accepted sample: record values concatenated per node
  /// (n_accepted x (record_nodes * state_dim)).
  Matrix records;
  std::vector<double> log_weights;
  std::vector<double> weights;  // exp(logw - max logw), unnormalized
  long n_total = 0;
  long n_accepted = 0;
  long n_overflow = 0;  // non-finite weights, excluded

  double effective_sample_size() const;
  /// Weighted mean / covariance of the (shifted, unscaled) state at a
  /// record slot: statistics of X = phi + sqrt(eps) Y need the caller's
  /// affine transform.
  Vector weighted_mean(int slot, int state_dim) const;
  Matrix weighted_covariance(int slot, int state_dim) const;
};

IsEnsemble importance_sampled_paths(const ProblemSpec& spec, const InstantonResult& instanton,
                                    const McConfig& cfg, const std::vector<int>& record_nodes);

struct IsTailResult {
  double estimate = 0.0;
  double std_error = 0.0;
  long n_samples = 0;
  double effective_sample_size = 0.0;
};

/// Unbiased tail estimate from instanton-shifted sampling with the exact
/// discrete Girsanov likelihood ratio (euler_maruyama_if only).
IsTailResult importance_sampled_tail(const ProblemSpec& spec, const InstantonResult& instanton,
                                     const McConfig& cfg);

}  // namespace ldt
