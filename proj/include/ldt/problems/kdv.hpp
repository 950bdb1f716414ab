#pragma once

#include "ldt/problem.hpp"

namespace ldt {

struct KdvConfig {
  int n_x = 128;            // spatial grid points on [0, 2 pi), power of two
  double nu = 4e-2;         // diffusion
  double kappa = 4e-2;      // dispersion
  bool dealias = true;      // 2/3-rule on the quadratic term
};

/// Stochastically forced Korteweg-de Vries-Burgers equation
///   u_t + u u_x - nu u_xx + kappa u_xxx = sqrt(eps) eta
/// on [0, 2 pi) periodic from u == 0, pseudo-spectral in space, forced in the
/// first Fourier mode only: eta = pi^{-1/2} (B1' sin x + B2' cos x), i.e.
/// noise rank 2. Observable f(u) = u(x = 0). The linear part is applied
/// spectrally as an integrating factor.
ProblemSpec make_kdv(const KdvConfig& cfg);

}  // namespace ldt
