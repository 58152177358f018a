#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tpst/bernstein.hpp"
#include "tpst/mesh.hpp"

namespace tpst {

/// Roughness penalty for one tet: P_T = sum over ordered derivative pairs
/// (g,g') in {x,y,z}^2 of C(g,g') L C(g,g')^T, where C(g,g') is the iterated
/// second-derivative transfer matrix in the tet's directional coordinates and
/// L is the degree-(d-2) mass matrix. Mixed pairs appear twice in the ordered
/// sum, which realises the multinomial weights of the energy
///   E(s) = sum_{i+j+k=2} 2!/(i!j!k!) int (D_x^i D_y^j D_z^k s)^2,
/// i.e. the integrated squared Frobenius norm of the Hessian. g^T P_T g is
/// that energy restricted to the tet.
Eigen::MatrixXd penalty_block(const TetMesh& mesh, int degree, int tet);

/// Per-tet penalty blocks plus nonnegative weights (all 1 by default; the
/// adaptive smoother rescales them). The full penalty is the block-diagonal
/// sum of weights[t] * blocks[t].
struct PenaltyBlocks {
  int degree = 0;
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<double> weights;

  Eigen::MatrixXd scaled_block(int t) const { return weights[t] * blocks[t]; }
  double trace() const;  // sum of weighted block traces
};

PenaltyBlocks assemble_penalty(const TetMesh& mesh, int degree,
                               const std::vector<double>& weights = {});

/// Weighted roughness energy sum_T w_T g_T' P_T g_T of a field.
double energy(const SplineField& field, const PenaltyBlocks& penalty);

}  // namespace tpst
