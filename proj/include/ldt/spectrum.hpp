#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ldt/path.hpp"

namespace ldt {

/// Any self-adjoint (in the weighted L2 product) operator on noise paths.
struct PathOperator {
  std::function<Path(const Path&)> apply;
  GridPtr grid;
  int width = 0;
};

struct SpectrumConfig {
  int n_pairs = 10;                 // requested dominant pairs m
  double tol = 1e-8;                // relative Ritz residual target
  int max_basis = 0;                // 0: min(dim, 2 m + 20)
  int max_restarts = 60;
  std::uint64_t seed = 7;
};

struct SpectrumResult {
  /// Eigenvalues sorted by decreasing |mu|, with L2-orthonormal vectors.
  std::vector<double> eigenvalues;
  std::vector<Path> eigenvectors;
  std::vector<double> residuals;
  /// partial_products[k] = prod_{i <= k} (1 - mu_i).
  std::vector<double> partial_products;
  long operator_applications = 0;
  std::uint64_t seed = 0;
  bool converged = false;
  /// False when some mu >= 1 (positive-definiteness of Id - A violated).
  bool assumption_ok = true;
};

/// Thick-restart Lanczos with full reorthogonalization, run in the weighted
/// L2 inner product. Deterministic for a fixed seed. Requires
/// n_pairs <= dim - 2.
SpectrumResult dominant_eigenpairs(const PathOperator& op, const SpectrumConfig& cfg);

struct FredholmResult {
  double value = 1.0;
  int factors_used = 0;
  /// True when the smallest retained |mu| is below truncation_tol * |mu_1|,
  /// i.e. the truncated tail is negligible.
  bool converged = false;
};

/// prod (1 - mu_i) over the computed dominant pairs. Throws assumption_error
/// if any mu >= 1.
FredholmResult fredholm_determinant(const SpectrumResult& sr, double truncation_tol = 1e-6);

}  // namespace ldt
