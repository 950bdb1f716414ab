#pragma once

#include "ldt/problem.hpp"

namespace ldt {

/// Planar test diffusion
///   dX1 = (-X1 - X1 X2) dt + sqrt(eps) dB1
///   dX2 = (-4 X2 + X1^2) dt + sqrt(eps)/2 dB2
/// from the origin, with observable f(x) = x1 + 2 x2. Linear part
/// diag(-1, -4) is used as the integrating factor.
ProblemSpec make_model2d();

}  // namespace ldt
