#include "ldt/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ldt/errors.hpp"

namespace ldt {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double log_amplitude(double rate, double prefactor, double eps) {
  if (!(eps > 0.0)) {
    throw config_error("tail estimate: eps must be positive");
  }
  if (!(prefactor > 0.0)) {
    throw assumption_error("tail estimate: prefactor must be positive");
  }
  return 0.5 * std::log(eps / kTwoPi) + std::log(prefactor) - rate / eps;
}

}  // namespace

double prefactor_fredholm(const InstantonResult& instanton, const FredholmResult& det) {
  if (!(instanton.rate > 0.0)) {
    throw assumption_error("prefactor_fredholm: rate must be positive");
  }
  if (!(det.value > 0.0)) {
    throw assumption_error("prefactor_fredholm: det(Id - A) must be positive");
  }
  return 1.0 / std::sqrt(2.0 * instanton.rate * det.value);
}

double tail_probability(double rate, double prefactor, double eps) {
  return std::exp(log_amplitude(rate, prefactor, eps));
}

double log10_tail_probability(double rate, double prefactor, double eps) {
  return log_amplitude(rate, prefactor, eps) / std::log(10.0);
}

double pdf_estimate(double rate, double lambda, double prefactor, double eps) {
  if (!(eps > 0.0)) {
    throw config_error("pdf_estimate: eps must be positive");
  }
  if (!(prefactor > 0.0) || !(lambda > 0.0)) {
    throw assumption_error("pdf_estimate: lambda and prefactor must be positive");
  }
  return lambda * prefactor / std::sqrt(kTwoPi * eps) * std::exp(-rate / eps);
}

EstimateReport make_estimate_report(const InstantonResult& instanton, const FredholmResult& det,
                                    double eps, std::optional<double> riccati_prefactor) {
  EstimateReport rep;
  rep.z = instanton.z;
  rep.eps = eps;
  rep.rate = instanton.rate;
  rep.lambda = instanton.lambda;
  rep.det_fredholm = det.value;
  rep.prefactor = prefactor_fredholm(instanton, det);
  rep.prefactor_riccati = riccati_prefactor;
  rep.tail = tail_probability(rep.rate, rep.prefactor, eps);
  rep.log10_tail = log10_tail_probability(rep.rate, rep.prefactor, eps);
  rep.pdf = pdf_estimate(rep.rate, rep.lambda, rep.prefactor, eps);
  return rep;
}

namespace {

struct SormObjective {
  const FiniteDimProblem& pb;
  double z;

  double value(const Vector& eta, double lambda, double mu, double& fval) const {
    fval = pb.value(eta);
    const double r = fval - z;
    return 0.5 * eta.squaredNorm() - lambda * r + 0.5 * mu * r * r;
  }

  Vector grad(const Vector& eta, double fval, double lambda, double mu) const {
    const double lambda_eff = lambda - mu * (fval - z);
    return eta - lambda_eff * pb.gradient(eta);
  }
};

}  // namespace

SormResult finite_dim_sorm(const FiniteDimProblem& pb, double z, const SormConfig& cfg) {
  if (pb.dim < 1 || !pb.value || !pb.gradient || !pb.hessian_action) {
    throw config_error("finite_dim_sorm: problem is not fully specified");
  }
  Vector eta = cfg.initial_point.size() == pb.dim ? cfg.initial_point
                                                  : Vector(Vector::Zero(pb.dim));
  std::vector<double> schedule = cfg.penalty_schedule;
  if (schedule.empty()) {
    const double hi = std::log10(300.0);
    for (int i = 0; i < 6; ++i) {
      schedule.push_back(std::pow(10.0, hi * i / 5));
    }
  }

  const SormObjective obj{pb, z};
  double lambda = 0.0;
  double fval = 0.0;
  long iters = 0;
  double overall_scale = -1.0;

  auto minimize = [&](double mu, double reduction, double anchor) {
    double j = obj.value(eta, lambda, mu, fval);
    Vector g = obj.grad(eta, fval, lambda, mu);
    double gn = g.norm();
    if (overall_scale < 0.0) {
      overall_scale = std::max(1e-30, gn);
    }
    if (anchor < 0.0) {
      anchor = gn;
    }
    const double target = std::max(anchor / reduction, 1e-15 * std::max(1.0, overall_scale));
    double step = 1.0;
    double best_gn = gn;
    int since_best = 0;
    while (gn > target && iters < cfg.max_iterations && since_best < 30) {
      ++iters;
      const Vector dir = -g;
      const double dd = -gn * gn;
      double alpha = step;
      bool accepted = false;
      Vector trial;
      double trial_j = 0.0;
      double trial_f = 0.0;
      int tries = 0;
      for (; tries < 60; ++tries) {
        trial = eta + alpha * dir;
        trial_j = obj.value(trial, lambda, mu, trial_f);
        if (std::isfinite(trial_j) && trial_j <= j + 1e-4 * alpha * dd) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        break;
      }
      step = (tries == 0) ? 2.0 * alpha : alpha;
      eta = std::move(trial);
      j = trial_j;
      fval = trial_f;
      g = obj.grad(eta, fval, lambda, mu);
      gn = g.norm();
      if (gn < 0.99 * best_gn) {
        best_gn = gn;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    return anchor;
  };

  const double tol = cfg.constraint_tol * std::max(1.0, std::abs(z));
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double mu = schedule[stage];
    const bool final_stage = stage + 1 == schedule.size();
    const int rounds = final_stage ? 30 : 1;
    double anchor = -1.0;
    for (int round = 0; round < rounds; ++round) {
      anchor =
          minimize(mu, final_stage ? cfg.grad_reduction_final : cfg.grad_reduction_inner, anchor);
      lambda -= mu * (fval - z);
      if (!final_stage || std::abs(fval - z) <= tol) {
        break;
      }
    }
  }
  if (std::abs(fval - z) > tol) {
    throw numerical_error("finite_dim_sorm: constraint not reached");
  }

  SormResult out;
  out.eta = eta;
  out.lambda = lambda;
  out.rate = 0.5 * eta.squaredNorm();

  // Projected scaled Hessian lambda P grad^2 F P, probed column-wise.
  const double nrm = eta.norm();
  const Vector unit = nrm > 0.0 ? Vector(eta / nrm) : Vector(Vector::Zero(pb.dim));
  auto project = [&](Vector v) {
    if (nrm > 0.0) {
      v -= unit.dot(v) * unit;
    }
    return v;
  };
  Matrix b(pb.dim, pb.dim);
  Vector e = Vector::Zero(pb.dim);
  for (int c = 0; c < pb.dim; ++c) {
    e(c) = 1.0;
    b.col(c) = lambda * project(pb.hessian_action(eta, project(e)));
    e(c) = 0.0;
  }
  b = (0.5 * (b + b.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(b);
  if (es.info() != Eigen::Success) {
    throw numerical_error("finite_dim_sorm: Hessian eigensolve failed");
  }
  std::vector<int> order(pb.dim);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    return std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(j));
  });
  out.hessian_eigenvalues.resize(pb.dim);
  double det = 1.0;
  for (int i = 0; i < pb.dim; ++i) {
    const double mu_i = es.eigenvalues()(order[i]);
    out.hessian_eigenvalues(i) = mu_i;
    if (mu_i >= 1.0) {
      throw assumption_error("finite_dim_sorm: an eigenvalue reaches 1");
    }
    det *= 1.0 - mu_i;
  }
  out.det = det;
  if (!(out.rate > 0.0) || !(det > 0.0)) {
    throw assumption_error("finite_dim_sorm: rate and det must be positive");
  }
  out.prefactor = 1.0 / std::sqrt(2.0 * out.rate * det);
  return out;
}

}  // namespace ldt
