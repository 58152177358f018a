#pragma once

#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "tpst/bernstein.hpp"
#include "tpst/mesh.hpp"

namespace tpst {

/// How the coefficient blocks of the two tets incident to an interior face
/// line up. Side 0 is the "reference" side (its off-face vertex has the
/// smaller global node id, which makes the assembled constraints invariant
/// under tet reordering); side 1 is the side whose coefficients the
/// constraints express in terms of side 0. The three shared vertices are
/// enumerated in ascending global-id order on both sides, so position t in
/// shared_slot[0] and shared_slot[1] always names the same global node.
struct FaceCorrespondence {
  int face = -1;
  std::array<int, 2> tet{-1, -1};
  std::array<int, 2> opp_slot{-1, -1};
  std::array<std::array<int, 3>, 2> shared_slot{};
  // opp_bary[s]: barycentric coordinates of the OTHER side's off-face vertex
  // relative to tet[s], in tet[s]'s vertex-slot order. Sums to 1.
  std::array<Bary, 2> opp_bary{};
};

/// Build the correspondence for an interior face. Throws DataError for
/// boundary faces.
FaceCorrespondence face_correspondence(const TetMesh& mesh, int face);

/// One smoothness constraint row in sparse form. The row reads
///   coeff(side1 multi-index) - sum_q B^m_q(w) * coeff(side0 multi-index) = 0
/// where w is side 1's off-face vertex in side 0's barycentric coordinates.
struct ConstraintRow {
  int face = -1;
  int order = 0;               // m: 0 = value agreement, 1 = first derivative, ...
  std::array<int, 3> alpha{};  // face multi-index over the shared vertices
  std::vector<std::pair<int, double>> entries;  // (global column, value)
};

/// Rows enforcing order-m agreement across one interior face for a spline of
/// the given degree: one row per face multi-index of degree (degree - m).
std::vector<ConstraintRow> continuity_rows(const TetMesh& mesh, int degree,
                                           const FaceCorrespondence& fc, int m);

/// Smoothness constraint matrix H (rows x num_tets*basis_dim(degree)):
/// a coefficient vector g represents a C^smoothness function iff H g = 0.
/// Rows are ordered by interior face, then smoothness order, then face
/// multi-index. Redundant rows are kept (rank is resolved downstream).
struct ConstraintMatrix {
  Eigen::SparseMatrix<double, Eigen::RowMajor> H;
  std::vector<ConstraintRow> provenance;  // one entry per row, entries omitted
};

ConstraintMatrix assemble_smoothness(const TetMesh& mesh, int degree, int smoothness);

/// Debug dump in Matrix Market coordinate format.
void write_matrix_market(const Eigen::SparseMatrix<double, Eigen::RowMajor>& M,
                         const std::string& path);

}  // namespace tpst
