#include "tpst/penalty.hpp"

#include "tpst/parallel.hpp"

namespace tpst {

Eigen::MatrixXd penalty_block(const TetMesh& mesh, int degree, int tet) {
  if (degree < 2)
    throw UsageError("second-order penalty needs degree >= 2");
  if (mesh.volume(tet) <= 0)
    throw NumericalError("penalty block of a degenerate tet");
  static const Point3 kAxes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  Bary dir[3];
  for (int g = 0; g < 3; ++g) dir[g] = mesh.direction_coords(tet, kAxes[g]);
  Eigen::MatrixXd L = mass_matrix(degree - 2, mesh.volume(tet));
  const int bs = basis_dim(degree);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(bs, bs);
  for (int g = 0; g < 3; ++g)
    for (int h = 0; h < 3; ++h) {
      Eigen::MatrixXd C = diff_matrix(degree, {dir[g], dir[h]});
      P.noalias() += C * L * C.transpose();
    }
  // Symmetric by construction; tidy up the last bits of roundoff.
  return 0.5 * (P + P.transpose());
}

double PenaltyBlocks::trace() const {
  double tr = 0;
  for (std::size_t t = 0; t < blocks.size(); ++t) tr += weights[t] * blocks[t].trace();
  return tr;
}

PenaltyBlocks assemble_penalty(const TetMesh& mesh, int degree,
                               const std::vector<double>& weights) {
  if (!weights.empty() && static_cast<int>(weights.size()) != mesh.num_tets())
    throw UsageError("penalty weights must have one entry per tet");
  for (double w : weights)
    if (!(w >= 0)) throw UsageError("penalty weights must be nonnegative");
  PenaltyBlocks out;
  out.degree = degree;
  out.blocks.resize(mesh.num_tets());
  out.weights = weights.empty() ? std::vector<double>(mesh.num_tets(), 1.0) : weights;
  parallel_for(mesh.num_tets(),
               [&](std::size_t t) { out.blocks[t] = penalty_block(mesh, degree, t); });
  return out;
}

double energy(const SplineField& field, const PenaltyBlocks& penalty) {
  if (field.degree != penalty.degree)
    throw UsageError("field and penalty degree mismatch");
  double e = 0;
  for (int t = 0; t < field.mesh->num_tets(); ++t) {
    auto g = field.block(t);
    e += penalty.weights[t] * g.dot(penalty.blocks[t] * g);
  }
  return e;
}

}  // namespace tpst
