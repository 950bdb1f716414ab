#include "ldt/second_variation.hpp"

#include <cmath>
#include <utility>

#include "ldt/errors.hpp"

namespace ldt {

SecondVariationOperator::SecondVariationOperator(const ProblemSpec& spec,
                                                 const InstantonResult& instanton, Config cfg)
    : spec_(&spec),
      instanton_(instanton),
      cfg_(std::move(cfg)),
      fwd_(detail::run_forward(spec, instanton.eta, cfg_.integ)),
      base_grad_(instanton.eta.grid_ptr(), spec.noise_rank) {
  if (cfg_.plan && cfg_.plan->n_steps != instanton_.eta.grid().n_steps()) {
    throw config_error("SecondVariationOperator: checkpoint plan does not match the grid");
  }
  detail::AdjointCache adj = detail::run_backward(spec, fwd_, instanton_.lambda, cfg_.integ);
  instanton_.theta = std::move(adj.theta);  // keep multipliers consistent with cfg_.integ
  base_grad_ = std::move(adj.grad);
  eta_norm_ = l2_norm(instanton_.eta);
}

Path SecondVariationOperator::apply(const Path& deta) const {
  if (!deta.grid().same_as(instanton_.eta.grid()) || deta.width() != spec_->noise_rank) {
    throw dimension_error("SecondVariationOperator::apply: direction does not match the grid");
  }
  ++apply_count_;
  const Path projected = project_orthogonal(deta, instanton_.eta);

  Path h(deta.grid_ptr(), deta.width());
  if (cfg_.mode == Mode::exact) {
    if (cfg_.plan) {
      h = checkpointed_apply(*spec_, instanton_.eta, instanton_.lambda, projected, cfg_.integ,
                             *cfg_.plan);
    } else {
      h = detail::run_hessian_action(*spec_, fwd_, instanton_.theta, instanton_.lambda,
                                     projected, cfg_.integ);
    }
  } else {
    const double dnorm = l2_norm(projected);
    if (dnorm == 0.0) {
      return h;  // zero path
    }
    double step = cfg_.fd_step;
    if (step <= 0.0) {
      step = 1e-5 * (eta_norm_ > 0.0 ? eta_norm_ : 1.0) / dnorm;
    }
    const Path perturbed_grad =
        gradient(*spec_, instanton_.eta + step * projected, instanton_.lambda, cfg_.integ);
    h = perturbed_grad - base_grad_;
    h *= 1.0 / step;
  }
  return project_orthogonal(h, instanton_.eta);
}

}  // namespace ldt
