#pragma once

#include <vector>

#include "tpst/mesh.hpp"
#include "tpst/types.hpp"

namespace tpst {

/// Quadrature rule on the reference tetrahedron in barycentric form.
/// Weights sum to 1; multiply by the tet volume to integrate. Every rule
/// integrates all polynomials of total degree <= `exact_degree` exactly.
struct TetQuadrature {
  std::vector<Bary> points;
  std::vector<double> weights;
  int exact_degree = 0;
};

/// Rule of the requested polynomial order. Orders 1-3 use closed-form
/// symmetric rules; higher orders use a collapsed tensor Gauss-Legendre rule
/// (positive weights, exact by construction). Supported orders: 1..20;
/// anything else throws UsageError.
const TetQuadrature& tet_quadrature(int order);

}  // namespace tpst
