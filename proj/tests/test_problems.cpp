#include <doctest.h>

#include <cmath>

#include "ldt/errors.hpp"
#include "ldt/problems/kdv.hpp"
#include "ldt/problems/model2d.hpp"
#include "ldt/problems/ou.hpp"
#include "ldt/rng.hpp"

using namespace ldt;

namespace {

Vector random_state(int n, std::uint64_t seed, double amp) {
  CounterRng rng(seed);
  Vector v(n);
  for (int i = 0; i < n; ++i) {
    v(i) = amp * rng.normal(0, 0, static_cast<std::uint32_t>(i));
  }
  return v;
}

// central difference of the jacobian action against the drift
double jacobian_fd_gap(const ProblemSpec& s, const Vector& x, const Vector& v, double h) {
  const Vector fd = (s.drift(x + h * v) - s.drift(x - h * v)) / (2.0 * h);
  return (s.jacobian_action(x, v) - fd).norm() / std::max(1.0, fd.norm());
}

double adjoint_gap(const ProblemSpec& s, const Vector& x, const Vector& v, const Vector& w) {
  const double a = s.jacobian_action(x, v).dot(w);
  const double b = s.jacobian_adjoint_action(x, w).dot(v);
  return std::abs(a - b) / std::max(1.0, std::abs(a));
}

double hessian_fd_gap(const ProblemSpec& s, const Vector& x, const Vector& theta,
                      const Vector& gamma, double h) {
  const Vector fd = (s.jacobian_adjoint_action(x + h * gamma, theta) -
                     s.jacobian_adjoint_action(x - h * gamma, theta)) /
                    (2.0 * h);
  return (s.hessian_bilinear(x, theta, gamma) - fd).norm() / std::max(1.0, fd.norm());
}

double split_gap(const ProblemSpec& s, const Vector& x) {
  if (!s.linear_part) {
    return 0.0;
  }
  return (s.linear_part->apply(x) + s.nonlinear_drift(x) - s.drift(x)).norm();
}

}  // namespace

TEST_CASE("planar model pieces") {
  ProblemSpec m = make_model2d();
  m.validate();
  CHECK(m.state_dim == 2);
  CHECK(m.noise_rank == 2);
  CHECK(m.initial_state.norm() == 0.0);

  Vector x(2);
  x << 1.0, 1.0;
  const Vector b = m.drift(x);
  CHECK(b(0) == doctest::Approx(-2.0));
  CHECK(b(1) == doctest::Approx(-3.0));
  CHECK(m.drift(Vector(Vector::Zero(2))).norm() == 0.0);

  // quadratic drift: the curvature form is exact for any probe size
  Vector theta(2), gamma(2);
  theta << 0.3, -0.7;
  gamma << 1.1, 0.4;
  Matrix curv(2, 2);
  curv << 2.0 * theta(1), -theta(0), -theta(0), 0.0;
  CHECK((m.hessian_bilinear(x, theta, gamma) - curv * gamma).norm() <= 1e-14);

  const Vector v = random_state(2, 3, 1.0);
  const Vector w = random_state(2, 4, 1.0);
  CHECK(jacobian_fd_gap(m, x, v, 1e-5) <= 1e-9);
  CHECK(adjoint_gap(m, x, v, w) <= 1e-14);
  CHECK(hessian_fd_gap(m, x, theta, gamma, 1e-4) <= 1e-10);

  // sigma = diag(1, 1/2)
  Vector u(2);
  u << 2.0, 2.0;
  CHECK(m.sigma_apply(u)(0) == doctest::Approx(2.0));
  CHECK(m.sigma_apply(u)(1) == doctest::Approx(1.0));
  Matrix a = m.covariance_matrix();
  CHECK(a(0, 0) == doctest::Approx(1.0));
  CHECK(a(1, 1) == doctest::Approx(0.25));
  CHECK(std::abs(a(0, 1)) <= 1e-15);

  CHECK(m.observable(x) == doctest::Approx(3.0));
  CHECK(m.obs_grad(x)(0) == doctest::Approx(1.0));
  CHECK(m.obs_grad(x)(1) == doctest::Approx(2.0));

  // stiff split consistent with the full drift
  REQUIRE(m.linear_part != nullptr);
  CHECK(split_gap(m, x) <= 1e-14);
  CHECK((m.linear_part->exp_apply(0.25, Vector(Vector::Ones(2)))(1)) ==
        doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("scalar relaxation oracle helpers") {
  ProblemSpec ou = make_ou(1.0);
  ou.validate();
  Vector x(1);
  x << 0.7;
  CHECK(ou.drift(x)(0) == doctest::Approx(-0.7));
  CHECK(ou.observable(x) == doctest::Approx(0.7));
  CHECK(ou.sigma_apply(Vector(Vector::Ones(1)))(0) == doctest::Approx(1.0));

  CHECK(ou_variance(1.0, 1.0) == doctest::Approx(0.43233235838169365).epsilon(1e-14));
  CHECK(ou_rate(1.0, 1.0, 1.0) == doctest::Approx(1.1565176427496657).epsilon(1e-14));
  CHECK(ou_lambda(1.0, 1.0, 1.0) == doctest::Approx(2.3130352854993313).epsilon(1e-14));
  CHECK(ou_prefactor(1.0, 1.0, 1.0) == doctest::Approx(0.6575198539828996).epsilon(1e-14));
  CHECK(ou_exact_tail(1.0, 1.0, 1.0, 0.5) ==
        doctest::Approx(1.574480203673e-2).epsilon(1e-10));
  CHECK(ou_exact_tail(1.0, 1.0, 1.0, 0.25) ==
        doctest::Approx(1.176101231397e-3).epsilon(1e-10));
  CHECK(ou_exact_tail(1.0, 1.0, 1.0, 0.1) ==
        doctest::Approx(7.569103842723e-7).epsilon(1e-10));
  CHECK_THROWS_AS((void)make_ou(0.0), config_error);
}

TEST_CASE("spectral wave problem pieces") {
  KdvConfig kc;
  kc.n_x = 32;
  ProblemSpec k = make_kdv(kc);
  k.validate();
  CHECK(k.state_dim == 32);
  CHECK(k.noise_rank == 2);

  const int n = kc.n_x;
  Vector u(n), sinx(n), cosx(n);
  for (int j = 0; j < n; ++j) {
    const double xj = 2.0 * M_PI * j / n;
    u(j) = std::cos(2.0 * xj);
    sinx(j) = std::sin(xj);
    cosx(j) = std::cos(xj);
  }

  // forcing is band-limited to the first mode with weight 1/sqrt(pi)
  Vector w(2);
  w << 1.0, 0.0;
  CHECK((k.sigma_apply(w) - sinx / std::sqrt(M_PI)).norm() <= 1e-12);
  w << 0.0, 1.0;
  CHECK((k.sigma_apply(w) - cosx / std::sqrt(M_PI)).norm() <= 1e-12);
  // adjoint pairing
  const Vector vr = random_state(n, 8, 0.5);
  w << 0.4, -1.3;
  CHECK(std::abs(k.sigma_apply(w).dot(vr) - k.sigma_adjoint(vr).dot(w)) <= 1e-12);

  // advection term of cos(2x) in closed form: -(u^2/2)_x = sin(4x)
  REQUIRE(k.linear_part != nullptr);
  Vector nl = k.nonlinear_drift(u);
  for (int j = 0; j < n; ++j) {
    const double xj = 2.0 * M_PI * j / n;
    CHECK(nl(j) == doctest::Approx(std::sin(4.0 * xj)).epsilon(1e-10));
  }
  // modes beyond the 2/3 cutoff carry no quadratic response
  Vector hi(n);
  for (int j = 0; j < n; ++j) {
    hi(j) = std::cos(12.0 * 2.0 * M_PI * j / n);
  }
  CHECK(k.nonlinear_drift(hi).norm() <= 1e-11);

  CHECK(split_gap(k, u) <= 1e-10);
  // the integrating factor is invertible: exp(L dt) exp(-L dt) = id
  const Vector back =
      k.linear_part->exp_apply(-0.1, k.linear_part->exp_apply(0.1, vr));
  CHECK((back - vr).norm() <= 1e-10);
  const Vector tback =
      k.linear_part->exp_apply_transpose(0.1, k.linear_part->exp_apply_transpose(-0.1, vr));
  CHECK((tback - vr).norm() <= 1e-10);
  // transpose pairing of the linear part
  const Vector vr2 = random_state(n, 9, 0.5);
  CHECK(std::abs(k.linear_part->apply(vr).dot(vr2) -
                 k.linear_part->apply_transpose(vr2).dot(vr)) <= 1e-10);

  // derivative consistency of the full drift
  const Vector dir = random_state(n, 10, 0.3);
  const Vector th = random_state(n, 11, 0.4);
  CHECK(jacobian_fd_gap(k, u, dir, 1e-5) <= 1e-8);
  CHECK(adjoint_gap(k, u, dir, th) <= 1e-12);
  CHECK(hessian_fd_gap(k, u, th, dir, 1e-4) <= 1e-8);

  // point observable at x = 0
  CHECK(k.observable(u) == doctest::Approx(u(0)));
  const Vector og = k.obs_grad(u);
  CHECK(og(0) == doctest::Approx(1.0));
  CHECK(og.tail(n - 1).norm() == 0.0);

  KdvConfig bad = kc;
  bad.n_x = 48;
  CHECK_THROWS_AS((void)make_kdv(bad), config_error);
  bad.n_x = 4;
  CHECK_THROWS_AS((void)make_kdv(bad), config_error);
  bad = kc;
  bad.nu = 0.0;
  CHECK_THROWS_AS((void)make_kdv(bad), config_error);
}
