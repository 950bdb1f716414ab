#include <doctest.h>

#include <cmath>

#include "ldt/covariance.hpp"
#include "ldt/errors.hpp"
#include "ldt/instanton.hpp"
#include "ldt/problems/model2d.hpp"
#include "ldt/problems/ou.hpp"
#include "ldt/riccati.hpp"
#include "ldt/second_variation.hpp"
#include "ldt/spectrum.hpp"

using namespace ldt;

namespace {

InstantonConfig tight_config() {
  InstantonConfig c;
  c.grad_reduction_final = 1e12;
  c.constraint_tol = 1e-10;
  c.method = InstantonConfig::Method::lbfgs;
  c.lbfgs_memory = 10;
  return c;
}

SpectrumResult spectrum_for(const ProblemSpec& spec, const InstantonResult& inst,
                            int n_pairs) {
  SecondVariationOperator::Config svc;
  auto sv = std::make_shared<SecondVariationOperator>(spec, inst, svc);
  PathOperator op;
  op.grid = inst.eta.grid_ptr();
  op.width = spec.noise_rank;
  op.apply = [sv](const Path& p) { return sv->apply(p); };
  SpectrumConfig scfg;
  scfg.n_pairs = n_pairs;
  scfg.tol = 1e-9;
  return dominant_eigenpairs(op, scfg);
}

}  // namespace

TEST_CASE("conditioned covariance of the linear scalar problem") {
  ProblemSpec ou = make_ou(1.0);
  GridPtr g = make_uniform_grid(1000, 1.0);
  InstantonResult inst = solve_instanton(ou, g, 1.0, tight_config());
  SpectrumResult sr = spectrum_for(ou, inst, 5);
  TubeConfig tc;
  TubeModel tube = build_tube(ou, inst, sr, tc);
  const int last = g->n_steps();

  // no fluctuation at the pinned start, none left at the conditioned end
  CHECK(tube.covariance_at(0, 0)(0, 0) == 0.0);
  CHECK(std::abs(tube.covariance_at(last, last)(0, 0)) <= 1e-12);
  // bridge variance and two-time covariance against the closed form
  CHECK(tube.covariance_at(500, 500)(0, 0) ==
        doctest::Approx(0.23105857863000488).epsilon(1e-4));
  CHECK(tube.covariance_at(250, 750)(0, 0) ==
        doctest::Approx(0.054299623714075157).epsilon(1e-4));
  // marginals scale by eps around the optimal path
  TubeModel::Marginal m = tube.marginal(500, 0.25);
  CHECK(m.mean(0) == inst.phi.node_copy(500)(0));
  CHECK(m.covariance(0, 0) ==
        doctest::Approx(0.25 * tube.covariance_at(500, 500)(0, 0)));
  CHECK_THROWS_AS((void)tube.marginal(500, 0.0), config_error);
}

TEST_CASE("two-time blocks are transposes of each other") {
  ProblemSpec m = make_model2d();
  GridPtr g = make_uniform_grid(200, 1.0);
  InstantonResult inst = solve_instanton(m, g, 2.0, tight_config());
  SpectrumResult sr = spectrum_for(m, inst, 20);
  TubeConfig tc;
  TubeModel tube = build_tube(m, inst, sr, tc);
  const Matrix a = tube.covariance_at(40, 160);
  const Matrix b = tube.covariance_at(160, 40);
  CHECK((a - b.transpose()).norm() <= 1e-14);
  CHECK_THROWS_AS((void)tube.covariance_at(-1, 0), dimension_error);
  CHECK_THROWS_AS((void)tube.covariance_at(0, 201), dimension_error);
}

TEST_CASE("tube endpoint covariance matches the matrix sweep route") {
  ProblemSpec m = make_model2d();
  GridPtr g = make_uniform_grid(800, 1.0);
  InstantonResult inst = solve_instanton(m, g, 3.0, tight_config());
  SpectrumResult sr = spectrum_for(m, inst, 120);
  TubeConfig tc;
  TubeModel tube = build_tube(m, inst, sr, tc);
  const int last = g->n_steps();

  RiccatiConfig rc;
  RiccatiResult rr = solve_riccati(m, inst, rc);
  const Matrix c_tube = tube.covariance_at(last, last);
  const Matrix c_ricc = final_time_covariance_riccati(rr);
  CHECK((c_tube - c_ricc).norm() / c_ricc.norm() <= 1e-3);

  // conditioning annihilates the observable direction at the endpoint
  const Vector gf = tube.obs_grad_final();
  for (int i = 0; i < tube.n_modes(); ++i) {
    const Vector gt = tube.state_modes()[i].node_copy(last);
    if (gt.norm() > 1e-12) {
      CHECK(std::abs(gf.dot(gt)) / (gf.norm() * gt.norm()) <= 1e-8);
    }
  }
}

TEST_CASE("endpoint sampling is deterministic and respects the constraint") {
  ProblemSpec m = make_model2d();
  GridPtr g = make_uniform_grid(400, 1.0);
  InstantonResult inst = solve_instanton(m, g, 3.0, tight_config());
  SpectrumResult sr = spectrum_for(m, inst, 60);
  TubeConfig tc;
  TubeModel tube = build_tube(m, inst, sr, tc);
  const int last = g->n_steps();
  const double eps = 0.5;

  Matrix xs = sample_tube_endpoints(tube, eps, 11, 20000);
  Matrix again = sample_tube_endpoints(tube, eps, 11, 20000);
  CHECK((xs - again).norm() == 0.0);
  Matrix other = sample_tube_endpoints(tube, eps, 12, 20000);
  CHECK((xs - other).norm() > 0.0);

  const Vector mean_path = inst.phi.node_copy(last);
  const Vector gf = tube.obs_grad_final();
  const Vector unit = gf / gf.norm();
  double worst = 0.0;
  for (int s = 0; s < xs.rows(); ++s) {
    const Vector d = xs.row(s).transpose() - mean_path;
    worst = std::max(worst, std::abs(unit.dot(d)));
  }
  CHECK(worst <= 1e-10);

  // empirical moments agree with the deflated Gaussian model
  const Vector mean = xs.colwise().mean();
  const Matrix centered = xs.rowwise() - mean.transpose();
  const Matrix emp = centered.transpose() * centered / (xs.rows() - 1.0);
  const Matrix proj = Matrix::Identity(2, 2) - unit * unit.transpose();
  const Matrix target = eps * (proj * tube.covariance_at(last, last) * proj);
  CHECK((emp - target).norm() / target.norm() <= 0.03);
  const double se = std::sqrt(target(0, 0) / static_cast<double>(xs.rows()));
  CHECK(std::abs(mean(0) - mean_path(0)) <= 4.0 * std::max(se, 1e-12));

  CHECK_THROWS_AS((void)sample_tube_endpoints(tube, 0.0, 1, 10), config_error);
  CHECK_THROWS_AS((void)sample_tube_endpoints(tube, 1.0, 1, 0), config_error);
}

TEST_CASE("mode truncation and unit eigenvalues") {
  ProblemSpec m = make_model2d();
  GridPtr g = make_uniform_grid(200, 1.0);
  InstantonResult inst = solve_instanton(m, g, 2.0, tight_config());
  SpectrumResult sr = spectrum_for(m, inst, 20);

  TubeConfig keep_all;
  CHECK(build_tube(m, inst, sr, keep_all).n_modes() == 20);
  TubeConfig top_only;
  top_only.truncation = 0.9;
  CHECK(build_tube(m, inst, sr, top_only).n_modes() < 20);

  SpectrumResult bad = sr;
  bad.eigenvalues[0] = 1.5;
  TubeConfig tc;
  CHECK_THROWS_AS((void)build_tube(m, inst, bad, tc), assumption_error);
}
