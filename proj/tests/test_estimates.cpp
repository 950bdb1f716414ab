#include <doctest.h>

#include <cmath>

#include "ldt/errors.hpp"
#include "ldt/estimates.hpp"
#include "ldt/instanton.hpp"
#include "ldt/problems/model2d.hpp"
#include "ldt/problems/ou.hpp"
#include "ldt/propagators.hpp"
#include "ldt/second_variation.hpp"
#include "ldt/spectrum.hpp"

using namespace ldt;

namespace {
constexpr double kRate1 = 1.1565176427496657;  // z^2 / (2 Sigma) at z = 1
constexpr double kCf = 0.6575198539828996;     // sqrt(Sigma) / z
constexpr double kLambda1 = 2.3130352854993313;

InstantonResult scalar_result(double z, double rate, double lambda) {
  InstantonResult r(make_uniform_grid(1, 1.0), 1, 1);
  r.z = z;
  r.rate = rate;
  r.lambda = lambda;
  return r;
}
}  // namespace

TEST_CASE("prefactor from the eigenvalue product") {
  InstantonResult inst = scalar_result(1.0, kRate1, kLambda1);
  FredholmResult det;
  det.value = 1.0;
  CHECK(prefactor_fredholm(inst, det) == doctest::Approx(kCf).epsilon(1e-14));
  det.value = 0.5;
  CHECK(prefactor_fredholm(inst, det) ==
        doctest::Approx(kCf * std::sqrt(2.0)).epsilon(1e-14));
  det.value = -0.1;
  CHECK_THROWS_AS((void)prefactor_fredholm(inst, det), assumption_error);
  det.value = 1.0;
  inst.rate = 0.0;
  CHECK_THROWS_AS((void)prefactor_fredholm(inst, det), assumption_error);
}

TEST_CASE("tail and density formulas against frozen scalar values") {
  CHECK(tail_probability(kRate1, kCf, 0.5) ==
        doctest::Approx(0.018355468679524268).epsilon(1e-13));
  CHECK(tail_probability(kRate1, kCf, 0.25) ==
        doctest::Approx(0.0012844346686988536).epsilon(1e-13));
  CHECK(tail_probability(kRate1, kCf, 0.1) ==
        doctest::Approx(7.8727531092935161e-7).epsilon(1e-13));
  // deep tail: the probability underflows but its log stays finite
  CHECK(tail_probability(kRate1, kCf, 0.001) == 0.0);
  CHECK(log10_tail_probability(kRate1, kCf, 0.001) ==
        doctest::Approx(-504.35041153312064).epsilon(1e-13));
  // for a linear Gaussian problem the sharp density is the exact density
  const double sigma2 = 0.5 * (1.0 - std::exp(-2.0));
  const double exact =
      std::exp(-1.0 / (2.0 * 0.5 * sigma2)) / std::sqrt(2.0 * M_PI * 0.5 * sigma2);
  CHECK(pdf_estimate(kRate1, kLambda1, kCf, 0.5) == doctest::Approx(exact).epsilon(1e-13));
  CHECK_THROWS_AS((void)tail_probability(kRate1, kCf, 0.0), config_error);
  CHECK_THROWS_AS((void)pdf_estimate(kRate1, -1.0, kCf, 0.5), assumption_error);
}

TEST_CASE("report assembles all fields consistently") {
  InstantonResult inst = scalar_result(1.0, kRate1, kLambda1);
  FredholmResult det;
  det.value = 1.0;
  EstimateReport rep = make_estimate_report(inst, det, 0.5, 0.99 * kCf);
  CHECK(rep.z == 1.0);
  CHECK(rep.eps == 0.5);
  CHECK(rep.prefactor == doctest::Approx(kCf).epsilon(1e-14));
  REQUIRE(rep.prefactor_riccati.has_value());
  CHECK(*rep.prefactor_riccati == doctest::Approx(0.99 * kCf));
  CHECK(rep.tail == doctest::Approx(tail_probability(kRate1, kCf, 0.5)));
  CHECK(rep.log10_tail == doctest::Approx(std::log10(rep.tail)).epsilon(1e-12));
  CHECK(rep.pdf == doctest::Approx(pdf_estimate(kRate1, kLambda1, kCf, 0.5)));
}

TEST_CASE("finite-dimensional estimate on a linear map") {
  // F(x) = a . x has minimizer a z / |a|^2 and no curvature correction
  Vector a(2);
  a << 1.0, 2.0;
  FiniteDimProblem pb;
  pb.dim = 2;
  pb.value = [a](const Vector& x) { return a.dot(x); };
  pb.gradient = [a](const Vector&) { return a; };
  pb.hessian_action = [](const Vector&, const Vector& v) { return Vector(0.0 * v); };
  SormConfig cfg;
  SormResult r = finite_dim_sorm(pb, 3.0, cfg);
  CHECK(r.eta(0) == doctest::Approx(0.6).epsilon(1e-8));
  CHECK(r.eta(1) == doctest::Approx(1.2).epsilon(1e-8));
  CHECK(r.lambda == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(r.rate == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(r.det == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.prefactor == doctest::Approx(0.7453559924999299).epsilon(1e-8));
}

TEST_CASE("finite-dimensional estimate with known curvature") {
  // F(x) = x0 + c/2 x1^2: minimizer (z, 0), multiplier 1, one projected
  // Hessian eigenvalue c z
  const double c = 0.3;
  FiniteDimProblem pb;
  pb.dim = 2;
  pb.value = [c](const Vector& x) { return x(0) + 0.5 * c * x(1) * x(1); };
  pb.gradient = [c](const Vector& x) {
    Vector g(2);
    g << 1.0, c * x(1);
    return g;
  };
  pb.hessian_action = [c](const Vector&, const Vector& v) {
    Vector h(2);
    h << 0.0, c * v(1);
    return h;
  };
  SormConfig cfg;
  SormResult r = finite_dim_sorm(pb, 1.0, cfg);
  CHECK(r.rate == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.lambda == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.hessian_eigenvalues(0) == doctest::Approx(c).epsilon(1e-7));
  CHECK(std::abs(r.hessian_eigenvalues(1)) <= 1e-8);
  CHECK(r.det == doctest::Approx(0.7).epsilon(1e-7));
  CHECK(r.prefactor == doctest::Approx(1.1952286093343936).epsilon(1e-7));
}

TEST_CASE("eigenvalue reaching one is an assumption failure") {
  const double c = 1.2;
  FiniteDimProblem pb;
  pb.dim = 2;
  pb.value = [c](const Vector& x) { return x(0) + 0.5 * c * x(1) * x(1); };
  pb.gradient = [c](const Vector& x) {
    Vector g(2);
    g << 1.0, c * x(1);
    return g;
  };
  pb.hessian_action = [c](const Vector&, const Vector& v) {
    Vector h(2);
    h << 0.0, c * v(1);
    return h;
  };
  SormConfig cfg;
  CHECK_THROWS_AS((void)finite_dim_sorm(pb, 1.0, cfg), assumption_error);
}

namespace {

// The discretized path problem written out as a plain problem on R^N via
// x = sqrt(w) eta per node. Euclidean geometry on x then reproduces the
// weighted path geometry exactly, so the two estimate routes must agree.
struct FlattenedPathProblem {
  ProblemSpec spec;
  GridPtr grid;
  IntegratorConfig integ;
  int dim;

  explicit FlattenedPathProblem(ProblemSpec s, GridPtr g)
      : spec(std::move(s)), grid(std::move(g)), dim(grid->n_nodes() * spec.state_dim) {}

  Path to_path(const Vector& x) const {
    Path eta(grid, spec.state_dim);
    for (int i = 0; i < grid->n_nodes(); ++i) {
      eta.node(i) = x.segment(i * spec.state_dim, spec.state_dim) /
                    std::sqrt(grid->weight(i));
    }
    return eta;
  }

  Vector from_path(const Path& p) const {
    Vector x(dim);
    for (int i = 0; i < grid->n_nodes(); ++i) {
      x.segment(i * spec.state_dim, spec.state_dim) =
          p.node_copy(i) * std::sqrt(grid->weight(i));
    }
    return x;
  }

  FiniteDimProblem as_finite_dim() const {
    FiniteDimProblem pb;
    pb.dim = dim;
    pb.value = [this](const Vector& x) {
      return detail::run_forward(spec, to_path(x), integ).obs;
    };
    pb.gradient = [this](const Vector& x) {
      auto fwd = detail::run_forward(spec, to_path(x), integ);
      auto bwd = detail::run_backward(spec, fwd, 1.0, integ);
      return from_path(bwd.grad);
    };
    pb.hessian_action = [this](const Vector& x, const Vector& v) {
      auto fwd = detail::run_forward(spec, to_path(x), integ);
      auto bwd = detail::run_backward(spec, fwd, 1.0, integ);
      Path h = detail::run_hessian_action(spec, fwd, bwd.theta, 1.0, to_path(v), integ);
      return from_path(h);
    };
    return pb;
  }
};

}  // namespace

TEST_CASE("flattened discrete problem reproduces the path-space estimate") {
  ProblemSpec m = make_model2d();
  GridPtr g = make_uniform_grid(40, 1.0);
  const double z = 3.0;

  InstantonConfig icfg;
  InstantonResult inst = solve_instanton(m, g, z, icfg);
  SecondVariationOperator::Config svc;
  SecondVariationOperator sv(m, inst, svc);
  PathOperator op;
  op.grid = g;
  op.width = 2;
  op.apply = [&sv](const Path& p) { return sv.apply(p); };
  SpectrumConfig scfg;
  scfg.n_pairs = 80;
  scfg.tol = 1e-10;
  SpectrumResult sr = dominant_eigenpairs(op, scfg);
  FredholmResult fd = fredholm_determinant(sr);
  const double c_path = prefactor_fredholm(inst, fd);

  FlattenedPathProblem fp(m, g);
  SormConfig cfg;
  SormResult r = finite_dim_sorm(fp.as_finite_dim(), z, cfg);

  CHECK(std::abs(r.rate - inst.rate) / inst.rate <= 1e-6);
  CHECK(std::abs(r.lambda - inst.lambda) / inst.lambda <= 1e-5);
  CHECK(std::abs(r.det - fd.value) / fd.value <= 1e-4);
  CHECK(std::abs(r.prefactor - c_path) / c_path <= 1e-4);
}
