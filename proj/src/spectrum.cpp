#include "ldt/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>

#include <Eigen/Eigenvalues>

#include "ldt/errors.hpp"
#include "ldt/problem.hpp"
#include "ldt/rng.hpp"

namespace ldt {

namespace {

Path linear_combination(const std::vector<Path>& basis, const Vector& coeffs, int count,
                        GridPtr grid, int width) {
  Path y(std::move(grid), width);
  for (int l = 0; l < count; ++l) {
    y += coeffs(l) * basis[l];
  }
  return y;
}

}  // namespace

SpectrumResult dominant_eigenpairs(const PathOperator& op, const SpectrumConfig& cfg) {
  if (!op.apply || !op.grid || op.width < 1) {
    throw config_error("dominant_eigenpairs: operator is not fully specified");
  }
  const GridPtr grid = op.grid;
  const int width = op.width;
  const int n_nodes = grid->n_nodes();
  const long dim = static_cast<long>(n_nodes) * width;
  const int m = cfg.n_pairs;
  if (m < 1) {
    throw config_error("dominant_eigenpairs: n_pairs must be positive");
  }
  if (m > dim - 2) {
    throw config_error("dominant_eigenpairs: n_pairs exceeds dim - 2");
  }
  if (!(cfg.tol > 0.0)) {
    throw config_error("dominant_eigenpairs: tol must be positive");
  }
  long basis_cap = cfg.max_basis > 0 ? cfg.max_basis : 2L * m + 20;
  basis_cap = std::min(basis_cap, dim);
  basis_cap = std::max(basis_cap, std::min<long>(dim, m + 2));
  const int nb_cap = static_cast<int>(basis_cap);

  SpectrumResult res;
  res.seed = cfg.seed;
  CounterRng rng(cfg.seed);
  std::uint64_t draws = 0;

  std::vector<Path> basis;
  basis.reserve(nb_cap);
  Matrix proj = Matrix::Zero(nb_cap, nb_cap);
  double scale = 0.0;
  long applies = 0;

  auto orthonormal_random = [&]() -> std::optional<Path> {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Path p(grid, width);
      for (int i = 0; i < n_nodes; ++i) {
        for (int c = 0; c < width; ++c) {
          p.values()(i, c) = rng.normal(draws, i, c);
        }
      }
      ++draws;
      for (int pass = 0; pass < 2; ++pass) {
        for (const Path& v : basis) {
          p -= l2_inner(v, p) * v;
        }
      }
      const double nrm = l2_norm(p);
      if (nrm > 1e-10) {
        p *= 1.0 / nrm;
        return p;
      }
    }
    return std::nullopt;
  };

  {
    auto p0 = orthonormal_random();
    if (!p0) {
      throw numerical_error("dominant_eigenpairs: could not seed a start vector");
    }
    basis.push_back(std::move(*p0));
  }

  double beta_last = 0.0;
  Path resid_path(grid, width);

  for (int cycle = 0;; ++cycle) {
    // Expansion: one operator application per newest basis vector, with
    // Galerkin coefficients recorded during full (two-pass) MGS cleanup.
    while (true) {
      const int i = static_cast<int>(basis.size()) - 1;
      Path w = op.apply(basis[i]);
      ++applies;
      for (int pass = 0; pass < 2; ++pass) {
        for (int l = 0; l <= i; ++l) {
          const double c = l2_inner(basis[l], w);
          if (pass == 0) {
            proj(l, i) = c;
            proj(i, l) = c;
            scale = std::max(scale, std::abs(c));
          }
          w -= c * basis[l];
        }
      }
      beta_last = l2_norm(w);
      if (static_cast<int>(basis.size()) == nb_cap) {
        resid_path = std::move(w);
        break;
      }
      if (beta_last > 1e-13 * std::max(1.0, scale)) {
        w *= 1.0 / beta_last;
        proj(i + 1, i) = beta_last;
        proj(i, i + 1) = beta_last;
        basis.push_back(std::move(w));
      } else {
        auto nd = orthonormal_random();
        if (!nd) {
          beta_last = 0.0;
          resid_path.values().setZero();
          break;
        }
        basis.push_back(std::move(*nd));  // decoupled continuation, zero coupling
      }
    }

    const int nb = static_cast<int>(basis.size());
    Matrix tsym = proj.topLeftCorner(nb, nb);
    tsym = (0.5 * (tsym + tsym.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(tsym);
    if (es.info() != Eigen::Success) {
      throw numerical_error("dominant_eigenpairs: projected eigensolve failed");
    }
    std::vector<int> order(nb);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b));
    });
    const double theta_max = nb > 0 ? std::abs(es.eigenvalues()(order.front())) : 0.0;
    auto residual_of = [&](int col) {
      return beta_last * std::abs(es.eigenvectors()(nb - 1, col));
    };
    bool top_ok = true;
    for (int j = 0; j < m; ++j) {
      const int c = order[j];
      const double thr =
          std::max(cfg.tol * std::abs(es.eigenvalues()(c)), 1e-14 * theta_max);
      if (residual_of(c) > thr) {
        top_ok = false;
        break;
      }
    }

    const bool exhausted = nb >= dim;
    std::optional<Path> vnext;
    bool restart_possible = !top_ok && !exhausted && cycle < cfg.max_restarts;
    if (restart_possible && beta_last <= 1e-13 * std::max(1.0, scale)) {
      vnext = orthonormal_random();
      restart_possible = vnext.has_value();
    }

    if (!restart_possible) {
      for (int j = 0; j < m; ++j) {
        const int c = order[j];
        res.eigenvalues.push_back(es.eigenvalues()(c));
        res.residuals.push_back(residual_of(c));
        Path y = linear_combination(basis, es.eigenvectors().col(c), nb, grid, width);
        const double nrm = l2_norm(y);
        if (nrm > 0.0) {
          y *= 1.0 / nrm;
        }
        res.eigenvectors.push_back(std::move(y));
      }
      double prod = 1.0;
      for (double mu : res.eigenvalues) {
        prod *= 1.0 - mu;
        res.partial_products.push_back(prod);
        if (mu >= 1.0) {
          res.assumption_ok = false;
        }
      }
      res.operator_applications = applies;
      res.converged = top_ok || exhausted;
      return res;
    }

    // Thick restart: keep the wanted pairs plus a buffer, then continue from
    // the current residual direction. Kept columns are exact by construction
    // (A y_j = theta_j y_j + border_j v_next), so only their diagonal and
    // border entries are preset; the border column is re-measured on the
    // next expansion.
    const int keep = std::min(m + 20, nb - 2);
    std::vector<Path> kept;
    kept.reserve(keep + 1);
    Vector kept_theta(keep);
    Vector border(keep);
    for (int j = 0; j < keep; ++j) {
      const int c = order[j];
      kept.push_back(linear_combination(basis, es.eigenvectors().col(c), nb, grid, width));
      kept_theta(j) = es.eigenvalues()(c);
      border(j) = beta_last * es.eigenvectors()(nb - 1, c);
    }
    if (!vnext) {
      Path v = std::move(resid_path);
      v *= 1.0 / beta_last;
      vnext = std::move(v);
    }
    basis = std::move(kept);
    basis.push_back(std::move(*vnext));
    proj.setZero();
    for (int j = 0; j < keep; ++j) {
      proj(j, j) = kept_theta(j);
      proj(keep, j) = border(j);
      proj(j, keep) = border(j);
    }
  }
}

FredholmResult fredholm_determinant(const SpectrumResult& sr, double truncation_tol) {
  FredholmResult out;
  if (sr.eigenvalues.empty()) {
    return out;
  }
  double prod = 1.0;
  for (double mu : sr.eigenvalues) {
    if (mu >= 1.0) {
      throw assumption_error(
          "fredholm_determinant: an eigenvalue reaches 1, Id - A is not positive definite");
    }
    prod *= 1.0 - mu;
  }
  out.value = prod;
  out.factors_used = static_cast<int>(sr.eigenvalues.size());
  const double mu_first = std::abs(sr.eigenvalues.front());
  const double mu_last = std::abs(sr.eigenvalues.back());
  out.converged = mu_first == 0.0 || mu_last <= truncation_tol * mu_first;
  return out;
}

}  // namespace ldt
