#include "ldt/covariance.hpp"

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

#include "ldt/errors.hpp"
#include "ldt/riccati.hpp"
#include "ldt/rng.hpp"
#include "stepper.hpp"

namespace ldt {

TubeModel::TubeModel(const ProblemSpec& spec, const InstantonResult& instanton,
                     std::vector<double> eigenvalues, std::vector<Path> noise_modes,
                     IntegratorConfig integ)
    : spec_(&spec),
      integ_(integ),
      instanton_(instanton),
      eigenvalues_(std::move(eigenvalues)),
      fwd_(detail::run_forward(spec, instanton.eta, integ)),
      state_dim_(spec.state_dim) {
  if (eigenvalues_.size() != noise_modes.size()) {
    throw dimension_error("TubeModel: eigenvalues and modes disagree in count");
  }
  for (double mu : eigenvalues_) {
    if (mu >= 1.0) {
      throw assumption_error("TubeModel: an eigenvalue reaches 1");
    }
    weights_.push_back(mu / (1.0 - mu));
  }

  state_modes_.reserve(noise_modes.size());
  for (const Path& v : noise_modes) {
    state_modes_.push_back(detail::run_linearized_state(spec, fwd_, v, integ_));
  }
  const double eta_norm = l2_norm(instanton_.eta);
  if (eta_norm > 0.0) {
    Path hat = instanton_.eta;
    hat *= 1.0 / eta_norm;
    hat_mode_ = detail::run_linearized_state(spec, fwd_, hat, integ_);
  }

  // Free fluctuation covariance: the Riccati sweep with the adjoint zeroed
  // degenerates to the Lyapunov equation Q' = a + grad b Q + Q grad b^T.
  InstantonResult frozen = instanton_;
  frozen.theta.values().setZero();
  RiccatiConfig rc;
  rc.integ = integ_;
  rc.dense_cap = spec.state_dim;
  rc.store_path = true;
  free_cov_ = solve_riccati(spec, frozen, rc).q_path;

  obs_grad_final_ = spec.obs_grad(fwd_.phi.node_copy(fwd_.phi.grid().n_steps()));
}

Matrix TubeModel::covariance_at(int node_i, int node_j) const {
  const int n_nodes = instanton_.eta.grid().n_nodes();
  if (node_i < 0 || node_j < 0 || node_i >= n_nodes || node_j >= n_nodes) {
    throw dimension_error("TubeModel::covariance_at: node out of range");
  }
  if (node_i > node_j) {
    return covariance_at(node_j, node_i).transpose();
  }

  Matrix c = free_cov_[node_i];
  if (node_j > node_i) {
    // C_free(t_i, t_j) = Q(t_i) Phi(t_j, t_i)^T = (Phi Q)(t_j)^T with each
    // column of Q advanced by the zero-noise linearized flow.
    const detail::Ops ops = detail::make_ops(*spec_, integ_);
    const Vector zero = Vector::Zero(spec_->noise_rank);
    Matrix advanced = c;
    for (int col = 0; col < advanced.cols(); ++col) {
      Vector g = advanced.col(col);
      for (int k = node_i; k < node_j; ++k) {
        g = detail::linearized_step(ops, instanton_.eta.grid().dt(k),
                                    fwd_.phi.node_copy(k),
                                    ops.two_stage ? &fwd_.stages[k] : nullptr, g, zero, zero,
                                    nullptr);
      }
      advanced.col(col) = g;
    }
    c = advanced.transpose();
  }

  if (hat_mode_) {
    c.noalias() -= hat_mode_->node_copy(node_i) * hat_mode_->node_copy(node_j).transpose();
  }
  for (std::size_t m = 0; m < state_modes_.size(); ++m) {
    if (weights_[m] == 0.0) {
      continue;
    }
    c.noalias() += weights_[m] * state_modes_[m].node_copy(node_i) *
                   state_modes_[m].node_copy(node_j).transpose();
  }
  if (node_i == node_j) {
    c = (0.5 * (c + c.transpose())).eval();
  }
  return c;
}

TubeModel::Marginal TubeModel::marginal(int node, double eps) const {
  if (!(eps > 0.0)) {
    throw config_error("TubeModel::marginal: eps must be positive");
  }
  Marginal m{instanton_.phi.node_copy(node), covariance_at(node, node)};
  m.covariance *= eps;
  return m;
}

TubeModel build_tube(const ProblemSpec& spec, const InstantonResult& instanton,
                     const SpectrumResult& sr, const TubeConfig& cfg) {
  spec.validate();
  if (sr.eigenvalues.size() != sr.eigenvectors.size()) {
    throw dimension_error("build_tube: spectrum eigenpairs are inconsistent");
  }
  double mu_max = 0.0;
  for (double mu : sr.eigenvalues) {
    mu_max = std::max(mu_max, std::abs(mu));
  }

  std::vector<double> kept_mu;
  std::vector<Path> kept_modes;
  for (std::size_t i = 0; i < sr.eigenvalues.size(); ++i) {
    const double mu = sr.eigenvalues[i];
    if (mu >= 1.0) {
      throw assumption_error("build_tube: an eigenvalue reaches 1");
    }
    if (std::abs(mu) < cfg.truncation * mu_max) {
      continue;
    }
    Path v = project_orthogonal(sr.eigenvectors[i], instanton.eta);
    const double nrm = l2_norm(v);
    if (nrm > 1e-8) {
      v *= 1.0 / nrm;
    } else if (mu != 0.0) {
      throw assumption_error("build_tube: eigenmode " + std::to_string(i) +
                             " collapses under the constraint projection");
    }
    kept_mu.push_back(mu);
    kept_modes.push_back(std::move(v));
  }

  TubeModel tube(spec, instanton, std::move(kept_mu), std::move(kept_modes), cfg.integ);

  const int last = instanton.phi.grid().n_steps();
  const Vector grad_f = tube.obs_grad_final();
  const double gscale = std::max(grad_f.norm(), 1e-30);
  for (int m = 0; m < tube.n_modes(); ++m) {
    const Vector gT = tube.state_modes()[m].node_copy(last);
    const double overlap = std::abs(grad_f.dot(gT)) / (gscale * std::max(gT.norm(), 1e-30));
    if (gT.norm() > 1e-12 && overlap > 1e-4) {
      throw assumption_error("build_tube: endpoint identity fails for mode " +
                             std::to_string(m));
    }
  }
  return tube;
}

Matrix sample_tube_endpoints(const TubeModel& tube, double eps, std::uint64_t seed,
                             int n_samples) {
  if (!(eps > 0.0) || n_samples < 1) {
    throw config_error("sample_tube_endpoints: need eps > 0 and at least one sample");
  }
  const int last = tube.instanton().phi.grid().n_steps();
  const Vector mean = tube.instanton().phi.node_copy(last);
  const int n = tube.state_dim();

  Matrix c = tube.covariance_at(last, last);
  const Vector grad_f = tube.obs_grad_final();
  const double gn = grad_f.norm();
  if (gn > 0.0) {
    const Vector unit = grad_f / gn;
    const Matrix proj = Matrix::Identity(n, n) - unit * unit.transpose();
    c = (proj * c * proj).eval();
    c = (0.5 * (c + c.transpose())).eval();
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(c);
  if (es.info() != Eigen::Success) {
    throw numerical_error("sample_tube_endpoints: covariance eigensolve failed");
  }
  const double lam_max = std::max(es.eigenvalues().maxCoeff(), 0.0);
  Matrix factors(n, n);  // columns sqrt(max(lambda, 0)) u, deflated exactly
  for (int i = 0; i < n; ++i) {
    double lam = std::max(es.eigenvalues()(i), 0.0);
    if (lam < 1e-12 * lam_max) {
      lam = 0.0;
    }
    factors.col(i) = std::sqrt(lam) * es.eigenvectors().col(i);
  }

  CounterRng rng(seed);
  Matrix out(n_samples, n);
  const double root_eps = std::sqrt(eps);
  for (int s = 0; s < n_samples; ++s) {
    Vector x = mean;
    for (int i = 0; i < n; ++i) {
      x += root_eps * rng.normal(static_cast<std::uint64_t>(s), 0, i) * factors.col(i);
    }
    out.row(s) = x.transpose();
  }
  return out;
}

}  // namespace ldt
