#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ldt/instanton.hpp"
#include "ldt/propagators.hpp"
#include "ldt/spectrum.hpp"

namespace ldt {

/// Gaussian tube model around the instanton. The conditioned fluctuation
/// covariance splits into a free (Lyapunov) part, the removal of the
/// constrained direction, and dominant-mode corrections:
///   C(t, t') = C_free(t, t') - gamma_hat(t) gamma_hat(t')^T
///            + sum_i mu_i / (1 - mu_i) gamma_i(t) gamma_i(t')^T,
/// where gamma_i solves the linearized state equation driven by eigenmode i
/// and gamma_hat is the response to the normalized instanton noise. Only the
/// corrections are truncated; their weights vanish with mu_i.
/// Marginals are N(phi_z(t), eps C(t, t)).
struct TubeConfig {
  /// Drop modes with |mu| below this fraction of |mu_1|.
  double truncation = 0.0;  // keep all provided modes by default
  IntegratorConfig integ;
};

class TubeModel {
 public:
  /// eigenvalues/noise_modes are the kept dominant pairs, with the modes
  /// already orthogonal to eta_z. Solves the Lyapunov sweep and all
  /// linearized responses up front.
  TubeModel(const ProblemSpec& spec, const InstantonResult& instanton,
            std::vector<double> eigenvalues, std::vector<Path> noise_modes,
            IntegratorConfig integ = {});

  const InstantonResult& instanton() const { return instanton_; }
  int n_modes() const { return static_cast<int>(eigenvalues_.size()); }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  const std::vector<Path>& state_modes() const { return state_modes_; }
  const Vector& obs_grad_final() const { return obs_grad_final_; }
  int state_dim() const { return state_dim_; }

  /// Two-time fluctuation covariance block C(t_i, t_j) (state_dim square).
  Matrix covariance_at(int node_i, int node_j) const;

  struct Marginal {
    Vector mean;
    Matrix covariance;  // eps-scaled
  };
  Marginal marginal(int node, double eps) const;

 private:
  const ProblemSpec* spec_;
  IntegratorConfig integ_;
  InstantonResult instanton_;
  std::vector<double> eigenvalues_;
  std::vector<double> weights_;      // mu / (1 - mu) per kept mode
  std::vector<Path> state_modes_;    // gamma_i
  std::optional<Path> hat_mode_;     // gamma_hat (absent for a zero instanton)
  std::vector<Matrix> free_cov_;     // Lyapunov covariance at every node
  detail::ForwardCache fwd_;         // base trajectory for propagation
  Vector obs_grad_final_;
  int state_dim_ = 0;
};

/// Projects the eigenmodes orthogonal to eta_z, solves their linearized
/// responses, and checks the endpoint identity <grad f(phi_T), gamma_i(T)>
/// = 0 that conditioning implies. Throws assumption_error if any mu >= 1 or
/// the identity fails grossly.
TubeModel build_tube(const ProblemSpec& spec, const InstantonResult& instanton,
                     const SpectrumResult& sr, const TubeConfig& cfg);

/// Endpoint samples phi_z(T) + sqrt(eps) * fluctuation, with the fluctuation
/// covariance deflated along grad f (the constraint direction is exactly
/// unexcited). Rows are samples; bitwise deterministic in (seed, index).
Matrix sample_tube_endpoints(const TubeModel& tube, double eps, std::uint64_t seed,
                             int n_samples);

}  // namespace ldt
