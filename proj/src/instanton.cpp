#include "ldt/instanton.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <utility>

#include <Eigen/Cholesky>

#include "ldt/errors.hpp"
#include "ldt/rng.hpp"

namespace ldt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ObjEval {
  detail::ForwardCache fwd;
  double j = 0.0;
};

/// Augmented-Lagrangian objective around a fixed (lambda, mu) pair, with an
/// optional per-node (sigma^T sigma)^{-1} preconditioner.
class Objective {
 public:
  Objective(const ProblemSpec& spec, const IntegratorConfig& integ, double z, bool precondition)
      : spec_(spec), integ_(integ), z_(z) {
    if (precondition) {
      gram_.emplace(spec.noise_gram());
      if (gram_->info() != Eigen::Success) {
        throw numerical_error("instanton: sigma^T sigma is not positive definite");
      }
    }
  }

  /// Forward solve plus objective value; empty on non-finite trajectories
  /// or overflowing values, which the line search treats as rejections.
  std::optional<ObjEval> try_eval(const Path& eta, double lambda, double mu) const {
    try {
      detail::ForwardCache fwd = detail::run_forward(spec_, eta, integ_);
      const double r = fwd.obs - z_;
      const double n2 = l2_norm(eta);
      const double j = 0.5 * n2 * n2 - lambda * r + 0.5 * mu * r * r;
      if (!std::isfinite(j)) {
        return std::nullopt;
      }
      return ObjEval{std::move(fwd), j};
    } catch (const numerical_error&) {
      return std::nullopt;
    }
  }

  Path gradient_at(const Path& eta, const ObjEval& ev, double lambda, double mu) const {
    const double lambda_eff = lambda - mu * (ev.fwd.obs - z_);
    detail::AdjointCache adj = detail::run_backward(spec_, ev.fwd, lambda_eff, integ_);
    Path g = eta;
    g -= adj.grad;
    return g;
  }

  Path precondition(const Path& g) const {
    if (!gram_) {
      return g;
    }
    Path out = g;
    out.values() = gram_->solve(g.values().transpose()).transpose();
    return out;
  }

  double z() const { return z_; }

 private:
  const ProblemSpec& spec_;
  const IntegratorConfig& integ_;
  double z_;
  std::optional<Eigen::LLT<Matrix>> gram_;
};

struct LbfgsPair {
  Path s;
  Path y;
  double rho;
};

Path lbfgs_direction(const Objective& obj, const std::deque<LbfgsPair>& mem, const Path& grad) {
  Path q = grad;
  std::vector<double> alpha(mem.size());
  for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
    alpha[i] = mem[i].rho * l2_inner(mem[i].s, q);
    q -= alpha[i] * mem[i].y;
  }
  Path r = obj.precondition(q);
  if (!mem.empty()) {
    const LbfgsPair& last = mem.back();
    const double denom = l2_inner(last.y, obj.precondition(last.y));
    if (denom > 0.0) {
      r *= l2_inner(last.s, last.y) / denom;
    }
  }
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * l2_inner(mem[i].y, r);
    r += (alpha[i] - beta) * mem[i].s;
  }
  r *= -1.0;
  return r;
}

struct SubproblemResult {
  double final_grad = 0.0;
  double obs = 0.0;
  bool stalled = false;  // line search or budget exhausted before the target
};

struct StartOutcome {
  std::optional<Path> eta;
  double lambda = 0.0;
  double obs = 0.0;
  long iterations = 0;
  std::vector<double> history;
  bool feasible = false;
  double score = kInf;  // rate when feasible
};

class AlSolver {
 public:
  AlSolver(const ProblemSpec& spec, GridPtr grid, double z, const InstantonConfig& cfg)
      : spec_(spec), grid_(std::move(grid)), cfg_(cfg), obj_(spec, cfg.integ, z, cfg.precondition) {
    schedule_ = cfg.penalty_schedule;
    if (schedule_.empty()) {
      const int count = 6;
      const double hi = std::log10(300.0);
      for (int i = 0; i < count; ++i) {
        schedule_.push_back(std::pow(10.0, hi * i / (count - 1)));
      }
    }
    double prev = 0.0;
    for (double mu : schedule_) {
      if (!(mu > prev)) {
        throw config_error("instanton: penalty schedule must be positive and increasing");
      }
      prev = mu;
    }
    use_lbfgs_ = cfg.method == InstantonConfig::Method::lbfgs ||
                 (cfg.method == InstantonConfig::Method::automatic && spec.state_dim > 10);
  }

  StartOutcome run(Path eta, double lambda) const {
    StartOutcome out;
    long iters = 0;
    double overall_scale = -1.0;
    double obs = obj_.z();
    bool aborted = false;

    for (std::size_t stage = 0; stage < schedule_.size() && !aborted; ++stage) {
      const double mu = schedule_[stage];
      const bool final_stage = stage + 1 == schedule_.size();
      double anchor = -1.0;  // entry gradient norm of the stage
      const int rounds = final_stage ? std::max(1, cfg_.max_final_stages) : 1;
      for (int round = 0; round < rounds; ++round) {
        const double reduction =
            final_stage ? cfg_.grad_reduction_final : cfg_.grad_reduction_inner;
        SubproblemResult sub;
        if (!minimize(eta, lambda, mu, reduction, anchor, overall_scale, iters, out.history, sub)) {
          aborted = true;  // not evaluable at the current point
          break;
        }
        obs = sub.obs;
        lambda -= mu * (obs - obj_.z());
        if (final_stage && constraint_met(obs)) {
          break;
        }
        if (!final_stage) {
          break;
        }
      }
    }

    out.eta = std::move(eta);
    out.lambda = lambda;
    out.obs = obs;
    out.iterations = iters;
    out.feasible = !aborted && constraint_met(obs);
    if (out.feasible) {
      const double n = l2_norm(*out.eta);
      out.score = 0.5 * n * n;
    }
    return out;
  }

  bool constraint_met(double obs) const {
    return std::abs(obs - obj_.z()) <= cfg_.constraint_tol * std::max(1.0, std::abs(obj_.z()));
  }

 private:
  /// Minimizes the fixed-(lambda, mu) subproblem in place. The target is the
  /// entry gradient norm over `reduction`, anchored once per stage so that
  /// multiplier rounds at the final penalty share one absolute target.
  /// Returns false when the entry point itself is not evaluable.
  bool minimize(Path& eta, double lambda, double mu, double reduction, double& anchor,
                double& overall_scale, long& iters, std::vector<double>& history,
                SubproblemResult& out) const {
    std::optional<ObjEval> ev = obj_.try_eval(eta, lambda, mu);
    if (!ev) {
      return false;
    }
    Path grad = obj_.gradient_at(eta, *ev, lambda, mu);
    double gn = l2_norm(grad);
    history.push_back(gn);
    if (overall_scale < 0.0) {
      overall_scale = std::max(1e-30, gn);
    }
    if (anchor < 0.0) {
      anchor = gn;
    }
    const double target = std::max(anchor / reduction, 1e-15 * std::max(1.0, overall_scale));

    std::deque<LbfgsPair> mem;
    double gd_step = 1.0;
    double best_gn = gn;
    int since_best = 0;
    while (true) {
      if (gn <= target) {
        out = {gn, ev->fwd.obs, false};
        return true;
      }
      if (iters >= cfg_.max_iterations || since_best >= 30) {
        // no meaningful gradient progress: the target sits below what the
        // arithmetic can deliver, stop and let the multiplier loop decide
        out = {gn, ev->fwd.obs, true};
        return true;
      }
      ++iters;

      Path dir = use_lbfgs_ ? lbfgs_direction(obj_, mem, grad) : obj_.precondition(grad);
      if (!use_lbfgs_) {
        dir *= -1.0;
      }
      double dd = l2_inner(grad, dir);
      if (!(dd < 0.0)) {
        dir = obj_.precondition(grad);
        dir *= -1.0;
        dd = l2_inner(grad, dir);
        if (!(dd < 0.0)) {
          out = {gn, ev->fwd.obs, true};
          return true;
        }
      }

      double alpha = use_lbfgs_ ? 1.0 : gd_step;
      bool accepted = false;
      int tries = 0;
      std::optional<ObjEval> trial;
      std::optional<Path> trial_grad;
      Path trial_eta = eta;
      for (; tries < cfg_.max_line_search; ++tries) {
        trial_eta = eta + alpha * dir;
        trial = obj_.try_eval(trial_eta, lambda, mu);
        if (trial) {
          const double pred = cfg_.armijo_c1 * alpha * dd;
          if (trial->j <= ev->j + pred) {
            accepted = true;
            break;
          }
          // once the predicted decrement drops below the rounding resolution
          // of the objective, certify progress on the gradient norm instead
          if (std::abs(pred) <
              16.0 * std::numeric_limits<double>::epsilon() * std::abs(ev->j)) {
            Path tg = obj_.gradient_at(trial_eta, *trial, lambda, mu);
            if (l2_norm(tg) < gn) {
              trial_grad = std::move(tg);
              accepted = true;
              break;
            }
          }
        }
        alpha *= cfg_.backtrack;
      }
      if (!accepted) {
        out = {gn, ev->fwd.obs, true};
        return true;
      }

      Path new_grad =
          trial_grad ? std::move(*trial_grad) : obj_.gradient_at(trial_eta, *trial, lambda, mu);
      if (use_lbfgs_) {
        Path s = alpha * dir;
        Path y = new_grad - grad;
        const double sy = l2_inner(s, y);
        if (sy > 1e-12 * l2_norm(s) * l2_norm(y)) {
          mem.push_back({std::move(s), std::move(y), 1.0 / sy});
          if (static_cast<int>(mem.size()) > std::max(1, cfg_.lbfgs_memory)) {
            mem.pop_front();
          }
        }
      } else {
        gd_step = (tries == 0) ? 2.0 * alpha : alpha;
      }
      eta = std::move(trial_eta);
      ev = std::move(trial);
      grad = std::move(new_grad);
      gn = l2_norm(grad);
      history.push_back(gn);
      if (gn < 0.99 * best_gn) {
        best_gn = gn;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
  }

  const ProblemSpec& spec_;
  GridPtr grid_;
  const InstantonConfig& cfg_;
  Objective obj_;
  std::vector<double> schedule_;
  bool use_lbfgs_ = false;
};

InstantonResult assemble(const ProblemSpec& spec, GridPtr grid, double z,
                         const InstantonConfig& cfg, StartOutcome best, int selected,
                         std::vector<double> start_objectives, double initial_grad) {
  InstantonResult res(grid, spec.noise_rank, spec.state_dim);
  res.eta = std::move(*best.eta);
  detail::ForwardCache fwd = detail::run_forward(spec, res.eta, cfg.integ);
  detail::AdjointCache adj = detail::run_backward(spec, fwd, best.lambda, cfg.integ);
  res.phi = std::move(fwd.phi);
  res.theta = std::move(adj.theta);
  res.lambda = best.lambda;
  res.z = z;
  res.obs = fwd.obs;
  res.obs_residual = fwd.obs - z;
  const double n = l2_norm(res.eta);
  res.rate = 0.5 * n * n;

  Path stheta(grid, spec.noise_rank);
  for (int k = 0; k < grid->n_nodes(); ++k) {
    stheta.values().row(k) = spec.sigma_adjoint(res.theta.node_copy(k)).transpose();
  }
  res.rate_adjoint = 0.5 * l2_norm(stheta) * l2_norm(stheta);
  Path diff = res.eta - stheta;
  res.first_order_residual = n > 0.0 ? l2_norm(diff) / n : l2_norm(diff);

  res.iterations = best.iterations;
  res.initial_grad_norm = initial_grad;
  res.final_grad_norm = best.history.empty() ? 0.0 : best.history.back();
  res.grad_norm_history = std::move(best.history);
  res.converged = best.feasible;
  res.selected_start = selected;
  res.start_objectives = std::move(start_objectives);
  return res;
}

InstantonResult solve_impl(const ProblemSpec& spec, GridPtr grid, double z,
                           const InstantonConfig& cfg,
                           const std::optional<std::pair<Path, double>>& warm) {
  spec.validate();
  Path zero(grid, spec.noise_rank);
  detail::ForwardCache base = detail::run_forward(spec, zero, cfg.integ);
  const double scale = std::max(1.0, std::abs(z));
  if (z < base.obs - 1e-12 * scale) {
    throw config_error("solve_instanton: target lies below the deterministic observable");
  }
  if (std::abs(z - base.obs) <= 1e-12 * scale) {
    StartOutcome trivial;
    trivial.eta = zero;
    trivial.obs = base.obs;
    trivial.feasible = true;
    trivial.score = 0.0;
    return assemble(spec, grid, z, cfg, std::move(trivial), 0, {0.0}, 0.0);
  }

  AlSolver solver(spec, grid, z, cfg);
  const int n_starts = warm ? 1 : std::max(1, cfg.n_starts);
  CounterRng rng(cfg.start_seed);

  std::optional<StartOutcome> best;
  int selected = 0;
  std::vector<double> scores;
  scores.reserve(n_starts);
  for (int s = 0; s < n_starts; ++s) {
    Path eta0 = zero;
    double lambda0 = 0.0;
    if (warm) {
      eta0 = warm->first;
      lambda0 = warm->second;
    } else if (s > 0) {
      for (int i = 0; i < grid->n_nodes(); ++i) {
        for (int c = 0; c < spec.noise_rank; ++c) {
          eta0.values()(i, c) =
              cfg.start_amplitude * rng.normal(static_cast<std::uint64_t>(s), i, c);
        }
      }
    }
    StartOutcome outcome = solver.run(std::move(eta0), lambda0);
    scores.push_back(outcome.score);
    if (!best || outcome.score < best->score - 1e-10) {
      best = std::move(outcome);
      selected = s;
    }
  }
  if (!best || !best->feasible) {
    throw numerical_error("solve_instanton: no start reached the observable constraint");
  }
  const double initial_grad = best->history.empty() ? 0.0 : best->history.front();
  return assemble(spec, grid, z, cfg, std::move(*best), selected, std::move(scores),
                  initial_grad);
}

}  // namespace

InstantonResult solve_instanton(const ProblemSpec& spec, GridPtr grid, double z,
                                const InstantonConfig& cfg) {
  return solve_impl(spec, std::move(grid), z, cfg, std::nullopt);
}

std::vector<InstantonResult> rate_function_sweep(const ProblemSpec& spec, GridPtr grid,
                                                 std::vector<double> zs,
                                                 const InstantonConfig& cfg) {
  std::sort(zs.begin(), zs.end());
  std::vector<InstantonResult> out;
  out.reserve(zs.size());
  for (double z : zs) {
    if (out.empty()) {
      out.push_back(solve_impl(spec, grid, z, cfg, std::nullopt));
    } else {
      out.push_back(solve_impl(spec, grid, z, cfg,
                               std::make_pair(out.back().eta, out.back().lambda)));
    }
  }
  return out;
}

}  // namespace ldt
