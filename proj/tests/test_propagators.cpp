#include <doctest.h>

#include <cmath>

#include "ldt/errors.hpp"
#include "ldt/problems/model2d.hpp"
#include "ldt/problems/ou.hpp"
#include "ldt/propagators.hpp"
#include "ldt/rng.hpp"

using namespace ldt;

namespace {

Path random_path(GridPtr grid, int width, std::uint64_t seed) {
  CounterRng rng(seed);
  Path p(grid, width);
  for (int i = 0; i < grid->n_nodes(); ++i)
    for (int c = 0; c < width; ++c)
      p.values()(i, c) = rng.normal(0, static_cast<std::uint64_t>(i), static_cast<std::uint32_t>(c));
  return p;
}

double ou_state_error(int n_steps, Scheme scheme) {
  ProblemSpec ou = make_ou(1.0);
  GridPtr g = make_uniform_grid(n_steps, 1.0);
  Path eta(g, 1);
  eta.values().setOnes();
  IntegratorConfig cfg;
  cfg.scheme = scheme;
  Path phi = solve_state(ou, eta, cfg);
  double err = 0.0;
  for (int i = 0; i <= n_steps; ++i) {
    const double exact = 1.0 - std::exp(-g->node(i));
    err = std::max(err, std::abs(phi.values()(i, 0) - exact));
  }
  return err;
}

}  // namespace

TEST_CASE("drift fixed point stays put") {
  ProblemSpec m = make_model2d();
  GridPtr g = make_uniform_grid(64, 1.0);
  Path eta(g, 2);
  for (Scheme s : {Scheme::euler_if, Scheme::rk2_if}) {
    IntegratorConfig cfg;
    cfg.scheme = s;
    Path phi = solve_state(m, eta, cfg);
    CHECK(phi.values().lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("forced scalar problem hits the analytic solution at second order") {
  // phi' = -phi + 1 from 0: phi(t) = 1 - exp(-t)
  const double e100 = ou_state_error(100, Scheme::rk2_if);
  const double e200 = ou_state_error(200, Scheme::rk2_if);
  CHECK(e200 <= 1e-4);
  CHECK(e100 / e200 == doctest::Approx(4.0).epsilon(0.15));

  const double f100 = ou_state_error(100, Scheme::euler_if);
  const double f200 = ou_state_error(200, Scheme::euler_if);
  CHECK(f100 / f200 == doctest::Approx(2.0).epsilon(0.15));
  CHECK(f200 > e200);  // first order really is worse
}

TEST_CASE("state solve flags blow-ups with the failing node") {
  ProblemSpec m = make_model2d();
  GridPtr g = make_uniform_grid(50, 1.0);
  Path eta(g, 2);
  eta.values().col(0).setConstant(1e8);
  IntegratorConfig cfg;
  CHECK_THROWS_AS((void)solve_state(m, eta, cfg), numerical_error);
}

TEST_CASE("linear-problem adjoint is exact for both schemes") {
  ProblemSpec ou = make_ou(1.0);
  GridPtr g = make_uniform_grid(50, 1.0);
  Path eta = random_path(g, 1, 3);
  for (Scheme s : {Scheme::euler_if, Scheme::rk2_if}) {
    IntegratorConfig cfg;
    cfg.scheme = s;
    Path phi = solve_state(ou, eta, cfg);
    Path theta = solve_adjoint(ou, phi, 1.0, cfg);
    for (int i = 0; i <= 50; ++i) {
      const double exact = std::exp(g->node(i) - 1.0);
      CHECK(theta.values()(i, 0) == doctest::Approx(exact).epsilon(1e-13));
    }
    Path zero_theta = solve_adjoint(ou, phi, 0.0, cfg);
    CHECK(zero_theta.values().lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("linear-problem gradient at the origin is the adjoint weight") {
  // d(lambda phi_T)/d eta in L2 coordinates equals exp(t - T) node-wise
  ProblemSpec ou = make_ou(1.0);
  GridPtr g = make_uniform_grid(40, 1.0);
  Path eta(g, 1);
  IntegratorConfig cfg;
  cfg.scheme = Scheme::rk2_if;
  Path grad = gradient(ou, eta, 1.0, cfg);
  for (int i = 0; i <= 40; ++i) {
    const double exact = std::exp(g->node(i) - 1.0);
    CHECK(grad.values()(i, 0) == doctest::Approx(exact).epsilon(1e-13));
  }
}

TEST_CASE("gradient matches central differences of the objective") {
  ProblemSpec m = make_model2d();
  GridPtr g = make_uniform_grid(60, 1.0);
  Path eta = random_path(g, 2, 11);
  Path deta = random_path(g, 2, 12);
  const double lambda = 0.7;
  for (Scheme s : {Scheme::euler_if, Scheme::rk2_if}) {
    IntegratorConfig cfg;
    cfg.scheme = s;
    Path grad = gradient(m, eta, lambda, cfg);
    const double pairing = l2_inner(grad, deta);

    auto objective = [&](double h) {
      Path shifted = eta;
      shifted += h * deta;
      return lambda * detail::run_forward(m, shifted, cfg).obs;
    };
    const double h = 1e-5;
    const double fd = (objective(h) - objective(-h)) / (2.0 * h);
    CHECK(fd == doctest::Approx(pairing).epsilon(1e-6));

    // truncation error scales like h^2
    const double err1 = std::abs((objective(1e-2) - objective(-1e-2)) / 2e-2 - pairing);
    const double err2 = std::abs((objective(1e-3) - objective(-1e-3)) / 2e-3 - pairing);
    CHECK(err1 / err2 > 30.0);
  }
}

TEST_CASE("zero direction gives zero linearization") {
  ProblemSpec m = make_model2d();
  GridPtr g = make_uniform_grid(30, 1.0);
  Path eta = random_path(g, 2, 21);
  Path deta(g, 2);
  IntegratorConfig cfg;
  auto [gamma, zeta] = solve_linearized_pair(m, eta, 1.3, deta, cfg);
  CHECK(gamma.values().lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(zeta.values().lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("linear problems have no second-order response") {
  ProblemSpec ou = make_ou(1.0);
  GridPtr g = make_uniform_grid(30, 1.0);
  Path eta = random_path(g, 1, 22);
  Path deta = random_path(g, 1, 23);
  IntegratorConfig cfg;
  auto [gamma, zeta] = solve_linearized_pair(ou, eta, 2.0, deta, cfg);
  CHECK(zeta.values().lpNorm<Eigen::Infinity>() <= 1e-14);
  CHECK(gamma.values().lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("linearized pair matches central differences of state and adjoint") {
  ProblemSpec m = make_model2d();
  GridPtr g = make_uniform_grid(40, 1.0);
  Path eta = random_path(g, 2, 31);
  Path deta = random_path(g, 2, 32);
  const double lambda = 0.9, h = 1e-5;
  for (Scheme s : {Scheme::euler_if, Scheme::rk2_if}) {
    IntegratorConfig cfg;
    cfg.scheme = s;
    auto [gamma, zeta] = solve_linearized_pair(m, eta, lambda, deta, cfg);

    auto states = [&](double step) {
      Path shifted = eta;
      shifted += step * deta;
      detail::ForwardCache fwd = detail::run_forward(m, shifted, cfg);
      detail::AdjointCache adj = detail::run_backward(m, fwd, lambda, cfg);
      return std::make_pair(fwd.phi, adj.theta);
    };
    auto [phi_p, theta_p] = states(h);
    auto [phi_m, theta_m] = states(-h);
    Matrix fd_gamma = (phi_p.values() - phi_m.values()) / (2.0 * h);
    Matrix fd_zeta = (theta_p.values() - theta_m.values()) / (2.0 * h);
    CHECK((fd_gamma - gamma.values()).lpNorm<Eigen::Infinity>() <=
          1e-6 * (1.0 + gamma.values().lpNorm<Eigen::Infinity>()));
    CHECK((fd_zeta - zeta.values()).lpNorm<Eigen::Infinity>() <=
          1e-6 * (1.0 + zeta.values().lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("hessian action matches central differences of the gradient") {
  ProblemSpec m = make_model2d();
  GridPtr g = make_uniform_grid(40, 1.0);
  Path eta = random_path(g, 2, 41);
  Path deta = random_path(g, 2, 42);
  const double lambda = 1.1, h = 1e-5;
  for (Scheme s : {Scheme::euler_if, Scheme::rk2_if}) {
    IntegratorConfig cfg;
    cfg.scheme = s;
    detail::ForwardCache fwd = detail::run_forward(m, eta, cfg);
    detail::AdjointCache adj = detail::run_backward(m, fwd, lambda, cfg);
    Path hvp = detail::run_hessian_action(m, fwd, adj.theta, lambda, deta, cfg);

    auto grad_at = [&](double step) {
      Path shifted = eta;
      shifted += step * deta;
      return gradient(m, shifted, lambda, cfg);
    };
    Matrix fd = (grad_at(h).values() - grad_at(-h).values()) / (2.0 * h);
    CHECK((fd - hvp.values()).lpNorm<Eigen::Infinity>() <=
          1e-6 * (1.0 + hvp.values().lpNorm<Eigen::Infinity>()));
  }
}
