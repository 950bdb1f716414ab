#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "ldt/errors.hpp"
#include "ldt/instanton.hpp"
#include "ldt/problems/model2d.hpp"
#include "ldt/second_variation.hpp"
#include "ldt/spectrum.hpp"

using namespace ldt;

namespace {

/// Node-diagonal test operator: scales node i, component c by diag(i, c).
PathOperator diagonal_operator(GridPtr grid, int width, const Matrix& diag) {
  PathOperator op;
  op.grid = grid;
  op.width = width;
  op.apply = [diag](const Path& p) {
    Path out = p;
    out.values() = p.values().cwiseProduct(diag);
    return out;
  };
  return op;
}

}  // namespace

TEST_CASE("diagonal operator spectrum is recovered exactly") {
  GridPtr g = make_uniform_grid(30, 1.0);
  Matrix diag = Matrix::Zero(31, 2);
  diag(3, 0) = 0.9;
  diag(7, 1) = -0.6;
  diag(12, 0) = 0.3;
  diag(20, 1) = 0.05;
  PathOperator op = diagonal_operator(g, 2, diag);
  SpectrumConfig cfg;
  cfg.n_pairs = 4;
  SpectrumResult sr = dominant_eigenpairs(op, cfg);
  REQUIRE(sr.eigenvalues.size() >= 4);
  CHECK(sr.converged);
  CHECK(sr.eigenvalues[0] == doctest::Approx(0.9).epsilon(1e-10));
  CHECK(sr.eigenvalues[1] == doctest::Approx(-0.6).epsilon(1e-10));
  CHECK(sr.eigenvalues[2] == doctest::Approx(0.3).epsilon(1e-10));
  CHECK(sr.eigenvalues[3] == doctest::Approx(0.05).epsilon(1e-9));
  // eigenvector of mu_1 concentrates on node 3, component 0
  const Path& v = sr.eigenvectors[0];
  const double total = l2_norm(v);
  Path masked = v;
  masked.values()(3, 0) = 0.0;
  CHECK(l2_norm(masked) <= 1e-8 * total);
  // orthonormality in the weighted product
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j <= i; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      CHECK(std::abs(l2_inner(sr.eigenvectors[i], sr.eigenvectors[j]) - want) <= 1e-9);
    }
  // partial products
  CHECK(sr.partial_products[0] == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(sr.partial_products[1] == doctest::Approx(0.16).epsilon(1e-9));
}

TEST_CASE("zero operator converges immediately with unit determinant") {
  GridPtr g = make_uniform_grid(20, 1.0);
  PathOperator op;
  op.grid = g;
  op.width = 1;
  op.apply = [g](const Path&) { return Path(g, 1); };
  SpectrumConfig cfg;
  cfg.n_pairs = 3;
  SpectrumResult sr = dominant_eigenpairs(op, cfg);
  CHECK(sr.converged);
  for (double mu : sr.eigenvalues) CHECK(std::abs(mu) <= 1e-12);
  FredholmResult det = fredholm_determinant(sr);
  CHECK(det.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("eigenvalues at one are flagged") {
  GridPtr g = make_uniform_grid(20, 1.0);
  Matrix diag = Matrix::Zero(21, 1);
  diag(5, 0) = 1.2;
  diag(9, 0) = 0.4;
  PathOperator op = diagonal_operator(g, 1, diag);
  SpectrumConfig cfg;
  cfg.n_pairs = 2;
  SpectrumResult sr = dominant_eigenpairs(op, cfg);
  CHECK(sr.eigenvalues[0] == doctest::Approx(1.2).epsilon(1e-9));
  CHECK_FALSE(sr.assumption_ok);
  CHECK_THROWS_AS((void)fredholm_determinant(sr), assumption_error);
}

TEST_CASE("fredholm determinant arithmetic and truncation flag") {
  SpectrumResult sr;
  sr.eigenvalues = {0.5, -0.5};
  sr.residuals = {0.0, 0.0};
  sr.partial_products = {0.5, 0.75};
  sr.converged = true;
  FredholmResult det = fredholm_determinant(sr);
  CHECK(det.value == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(det.factors_used == 2);
  // |mu_last| / |mu_1| = 1: truncated tail not negligible
  CHECK_FALSE(det.converged);

  sr.eigenvalues = {0.5, -0.5, 1e-9};
  sr.partial_products = {0.5, 0.75, 0.75};
  FredholmResult det2 = fredholm_determinant(sr);
  CHECK(det2.converged);
}

TEST_CASE("config validation") {
  GridPtr g = make_uniform_grid(10, 1.0);
  Matrix diag = Matrix::Zero(11, 1);
  PathOperator op = diagonal_operator(g, 1, diag);
  SpectrumConfig cfg;
  cfg.n_pairs = 0;
  CHECK_THROWS_AS((void)dominant_eigenpairs(op, cfg), config_error);
  cfg.n_pairs = 10;  // dim = 11 > n_pairs + 2 fails
  CHECK_THROWS_AS((void)dominant_eigenpairs(op, cfg), config_error);
  cfg.n_pairs = 2;
  cfg.tol = 0.0;
  CHECK_THROWS_AS((void)dominant_eigenpairs(op, cfg), config_error);
  PathOperator empty;
  CHECK_THROWS_AS((void)dominant_eigenpairs(empty, SpectrumConfig{}), config_error);
}

TEST_CASE("matrix-free spectrum matches the dense oracle") {
  // planar model at n_t = 50: the discrete noise space is 102-dimensional
  ProblemSpec m = make_model2d();
  const int n = 50, width = 2;
  GridPtr g = make_uniform_grid(n, 1.0);
  InstantonConfig icfg;
  InstantonResult inst = solve_instanton(m, g, 3.0, icfg);
  SecondVariationOperator::Config svc;
  SecondVariationOperator sv(m, inst, svc);
  const int dim = sv.dim();
  REQUIRE(dim == 102);

  // dense assembly in canonical coordinates, one operator column per basis path
  Matrix a_dense(dim, dim);
  for (int j = 0; j < dim; ++j) {
    Path e(g, width);
    e.values()(j / width, j % width) = 1.0;
    Path col = sv.apply(e);
    for (int i = 0; i < dim; ++i) a_dense(i, j) = col.values()(i / width, i % width);
  }

  // self-adjointness wrt W means W^1/2 A W^-1/2 is symmetric
  Vector wsqrt(dim);
  for (int i = 0; i < dim; ++i) wsqrt(i) = std::sqrt(g->weight(i / width));
  Matrix sym = wsqrt.asDiagonal() * a_dense * wsqrt.cwiseInverse().asDiagonal();
  CHECK((sym - sym.transpose()).lpNorm<Eigen::Infinity>() <= 1e-10);

  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()));
  REQUIRE(es.info() == Eigen::Success);
  Vector dense_mu = es.eigenvalues();

  // determinant of Id - A from an LU factorization
  const double dense_det = (Matrix::Identity(dim, dim) - sym).partialPivLu().determinant();
  double dense_product = 1.0;
  for (int i = 0; i < dim; ++i) dense_product *= 1.0 - dense_mu(i);
  CHECK(dense_det == doctest::Approx(dense_product).epsilon(1e-8));

  // matrix-free run over (almost) the whole space
  PathOperator op;
  op.grid = g;
  op.width = width;
  op.apply = [&sv](const Path& p) { return sv.apply(p); };
  SpectrumConfig cfg;
  cfg.n_pairs = dim - 2;
  cfg.tol = 1e-10;
  SpectrumResult sr = dominant_eigenpairs(op, cfg);
  FredholmResult det = fredholm_determinant(sr);
  CHECK(det.value == doctest::Approx(dense_det).epsilon(1e-8));

  // dominant eigenvalues agree pairwise
  std::vector<double> dense_sorted(dense_mu.data(), dense_mu.data() + dim);
  std::sort(dense_sorted.begin(), dense_sorted.end(),
            [](double x, double y) { return std::abs(x) > std::abs(y); });
  for (int k = 0; k < 10; ++k)
    CHECK(sr.eigenvalues[k] == doctest::Approx(dense_sorted[k]).epsilon(1e-8));
}
