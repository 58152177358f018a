#include "tpst/smoothness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace tpst {

FaceCorrespondence face_correspondence(const TetMesh& mesh, int face) {
  const FaceRec& f = mesh.faces()[face];
  if (!f.interior())
    throw DataError("face " + std::to_string(face) +
                    " is a boundary face; no correspondence");
  FaceCorrespondence fc;
  fc.face = face;
  // Reference side = smaller global id of the off-face vertex, so the
  // assembled rows do not depend on the order tets appear in the input.
  int opp0 = mesh.tet(f.tets[0])[f.opp[0]];
  int opp1 = mesh.tet(f.tets[1])[f.opp[1]];
  int ref = opp0 <= opp1 ? 0 : 1;
  for (int s = 0; s < 2; ++s) {
    int side = (s == 0) ? ref : 1 - ref;
    fc.tet[s] = f.tets[side];
    fc.opp_slot[s] = f.opp[side];
  }
  // Shared vertices in ascending global-id order (f.nodes is sorted).
  for (int s = 0; s < 2; ++s) {
    const auto& tet = mesh.tet(fc.tet[s]);
    for (int t = 0; t < 3; ++t) {
      int slot = -1;
      for (int j = 0; j < 4; ++j)
        if (tet[j] == f.nodes[t]) slot = j;
      fc.shared_slot[s][t] = slot;
    }
  }
  for (int s = 0; s < 2; ++s) {
    int other_opp = mesh.tet(fc.tet[1 - s])[fc.opp_slot[1 - s]];
    fc.opp_bary[s] = mesh.barycentric(fc.tet[s], mesh.node(other_opp));
  }
  return fc;
}

std::vector<ConstraintRow> continuity_rows(const TetMesh& mesh, int degree,
                                           const FaceCorrespondence& fc, int m) {
  if (m < 0 || m >= degree)
    throw UsageError("continuity order must satisfy 0 <= m < degree");
  const int bs = basis_dim(degree);
  const BasisLayout& layout = BasisLayout::get(degree);
  const BasisLayout& qlayout = BasisLayout::get(m);
  // Weights B^m_q(w) at side 1's off-face vertex, in side 0 coordinates.
  Eigen::VectorXd w = eval_basis(qlayout, fc.opp_bary[0]);
  (void)mesh;

  std::vector<ConstraintRow> rows;
  const int fd = degree - m;
  for (int a0 = fd; a0 >= 0; --a0)
    for (int a1 = fd - a0; a1 >= 0; --a1) {
      int a2 = fd - a0 - a1;
      ConstraintRow row;
      row.face = fc.face;
      row.order = m;
      row.alpha = {a0, a1, a2};

      MultiIndex mi1{0, 0, 0, 0};
      mi1[fc.opp_slot[1]] = m;
      mi1[fc.shared_slot[1][0]] += a0;
      mi1[fc.shared_slot[1][1]] += a1;
      mi1[fc.shared_slot[1][2]] += a2;
      row.entries.emplace_back(fc.tet[1] * bs + layout.position(mi1), 1.0);

      for (int qp = 0; qp < qlayout.size(); ++qp) {
        const MultiIndex& q = qlayout.index(qp);
        MultiIndex mi0 = q;  // q is indexed by side 0's vertex slots
        mi0[fc.shared_slot[0][0]] += a0;
        mi0[fc.shared_slot[0][1]] += a1;
        mi0[fc.shared_slot[0][2]] += a2;
        row.entries.emplace_back(fc.tet[0] * bs + layout.position(mi0), -w[qp]);
      }
      rows.push_back(std::move(row));
    }
  return rows;
}

ConstraintMatrix assemble_smoothness(const TetMesh& mesh, int degree,
                                     int smoothness) {
  if (degree < 1) throw UsageError("spline degree must be >= 1");
  if (smoothness < 0 || smoothness >= degree)
    throw UsageError("smoothness must satisfy 0 <= r < degree");
  const int bs = basis_dim(degree);
  ConstraintMatrix out;
  std::vector<Eigen::Triplet<double>> trips;
  int nrows = 0;
  for (int face : mesh.interior_faces()) {
    FaceCorrespondence fc = face_correspondence(mesh, face);
    for (int m = 0; m <= smoothness; ++m) {
      for (auto& row : continuity_rows(mesh, degree, fc, m)) {
        for (auto [col, val] : row.entries) trips.emplace_back(nrows, col, val);
        row.entries.clear();
        out.provenance.push_back(std::move(row));
        ++nrows;
      }
    }
  }
  out.H.resize(nrows, static_cast<Eigen::Index>(mesh.num_tets()) * bs);
  out.H.setFromTriplets(trips.begin(), trips.end());
  out.H.makeCompressed();
  return out;
}

void write_matrix_market(const Eigen::SparseMatrix<double, Eigen::RowMajor>& M,
                         const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path + " for writing");
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << M.rows() << " " << M.cols() << " " << M.nonZeros() << "\n";
  char buf[64];
  for (int k = 0; k < M.outerSize(); ++k)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(M, k); it;
         ++it) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(it.row() + 1),
                    static_cast<long>(it.col() + 1), it.value());
      os << buf;
    }
}

}  // namespace tpst
