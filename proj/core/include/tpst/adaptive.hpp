#pragma once

#include <vector>

#include "tpst/solver.hpp"

namespace tpst {

/// Controls for the adaptive (spatially weighted) smoother.
struct AdaptiveConfig {
  std::vector<double> c_grid;  // empty: 8 values 1.25, 1.50, ..., 3.00
  double tau = 2.0;
  int quad_order = 4;          // quadrature order for total variation
};

/// Per-tet total variation of a fitted field: integral over the tet of the
/// Euclidean norm of the spatial gradient, by quadrature.
std::vector<double> total_variation(const SplineField& field, int quad_order = 4);

/// Penalty weights omega_T = (C - eta_T / max eta)^tau with eta_T = TV_T /
/// V_T. A flat pilot field (max eta = 0) gets the uniform weight C^tau.
std::vector<double> adaptive_weights(const std::vector<double>& tv, const TetMesh& mesh,
                                     double c_value, double tau);

/// Adaptive fit: pilot fit with uniform weights, total variation of the
/// pilot, then one refit per candidate C (each re-selecting lambda over the
/// pilot's grid); returns the refit with the smallest GCV, ties resolving to
/// the smaller C. The result carries omega, tv, c_value and the (C, GCV) path.
FitResult fit_atpst(const FitContext& ctx, const Dataset& data, const FitConfig& config,
                    const AdaptiveConfig& adaptive = {});

FitResult fit_atpst(const TetMesh& mesh, const Dataset& data, const FitConfig& config,
                    const AdaptiveConfig& adaptive = {});

}  // namespace tpst
