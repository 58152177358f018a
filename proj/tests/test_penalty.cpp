#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "doctest.h"
#include "test_helpers.hpp"
#include "tpst/bernstein.hpp"
#include "tpst/mesh.hpp"
#include "tpst/penalty.hpp"
#include "tpst/quadrature.hpp"

using namespace tpst;
using namespace tpst::testing;

namespace {

// Independent oracle: integrate the squared second directional derivatives
// with quadrature instead of the transfer-matrix algebra.
double energy_by_quadrature(const SplineField& field) {
  const TetMesh& mesh = *field.mesh;
  int d = field.degree;
  const BasisLayout& lower = BasisLayout::get(d - 2);
  const TetQuadrature& rule = tet_quadrature(2 * (d - 2) + 1);
  const Point3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  double total = 0;
  for (int t = 0; t < mesh.num_tets(); ++t) {
    Eigen::VectorXd g = field.block(t);
    for (const Point3& u1 : axes)
      for (const Point3& u2 : axes) {
        Bary a1 = mesh.direction_coords(t, u1);
        Bary a2 = mesh.direction_coords(t, u2);
        Eigen::VectorXd dd = diff_matrix(d, {a1, a2}).transpose() * g;
        double acc = 0;
        for (size_t q = 0; q < rule.points.size(); ++q) {
          double v = eval_bform(lower, dd.data(), rule.points[q]);
          acc += rule.weights[q] * v * v;
        }
        total += acc * mesh.volume(t);
      }
  }
  return total;
}

// Quadratic x^T A x + b . x + c as a sparse polynomial.
Polynomial quadratic_poly(const Eigen::Matrix3d& A, const Eigen::Vector3d& b,
                          double c) {
  Polynomial f;
  f.terms.push_back({0, 0, 0, c});
  f.terms.push_back({1, 0, 0, b[0]});
  f.terms.push_back({0, 1, 0, b[1]});
  f.terms.push_back({0, 0, 1, b[2]});
  f.terms.push_back({2, 0, 0, A(0, 0)});
  f.terms.push_back({0, 2, 0, A(1, 1)});
  f.terms.push_back({0, 0, 2, A(2, 2)});
  f.terms.push_back({1, 1, 0, A(0, 1) + A(1, 0)});
  f.terms.push_back({1, 0, 1, A(0, 2) + A(2, 0)});
  f.terms.push_back({0, 1, 1, A(1, 2) + A(2, 1)});
  return f;
}

}  // namespace

TEST_SUITE("penalty") {

TEST_CASE("x^2 on the reference tet has energy 2/3") {
  TetMesh mesh = unit_tet_mesh();
  Polynomial f{{{2, 0, 0, 1.0}}};
  SplineField field = bform_of_polynomial(mesh, 3, f);
  PenaltyBlocks penalty = assemble_penalty(mesh, 3);
  // Only D_xx = 2 survives: integral of 4 over a tet of volume 1/6.
  CHECK(energy(field, penalty) == doctest::Approx(2.0 / 3.0).epsilon(1e-11));
}

TEST_CASE("x^2 + y^2 + z^2 on the unit box has energy 12") {
  TetMesh mesh = generate_box_mesh({{0, 0, 0}, {1, 1, 1}}, {1, 1, 1});
  Polynomial f{{{2, 0, 0, 1.0}, {0, 2, 0, 1.0}, {0, 0, 2, 1.0}}};
  SplineField field = bform_of_polynomial(mesh, 3, f);
  PenaltyBlocks penalty = assemble_penalty(mesh, 3);
  CHECK(energy(field, penalty) == doctest::Approx(12.0).epsilon(1e-11));
}

TEST_CASE("linear fields have zero energy") {
  TetMesh mesh = generate_box_mesh({{0, 0, 0}, {2, 1, 1}}, {2, 1, 1});
  Polynomial f{{{0, 0, 0, 1.5}, {1, 0, 0, -2.0}, {0, 1, 0, 0.5}, {0, 0, 1, 3.0}}};
  SplineField field = bform_of_polynomial(mesh, 3, f);
  PenaltyBlocks penalty = assemble_penalty(mesh, 3);
  CHECK(std::abs(energy(field, penalty)) < 1e-10);
}

TEST_CASE("quadratics integrate the squared Hessian norm exactly") {
  // For f = x^T A x + ..., the Hessian is 2A everywhere, so the energy is
  // 4 |A|_F^2 * volume. Rotating A leaves the energy unchanged, so this also
  // pins rotation invariance.
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TetMesh mesh = generate_box_mesh({{0, 0, 0}, {2, 1, 1}}, {3, 2, 2},
                                   {{{0, 0, 0}, {2.0 / 3.0, 0.5, 0.5}}});
  double volume = 0;
  for (int t = 0; t < mesh.num_tets(); ++t) volume += mesh.volume(t);
  PenaltyBlocks penalty = assemble_penalty(mesh, 3);

  for (int trial = 0; trial < 5; ++trial) {
    Eigen::Matrix3d A;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) A(i, j) = u(rng);
    A = ((A + A.transpose()) / 2).eval();
    Eigen::Vector3d b(u(rng), u(rng), u(rng));
    SplineField field = bform_of_polynomial(mesh, 3, quadratic_poly(A, b, u(rng)));
    double want = 4.0 * A.squaredNorm() * volume;
    CHECK(energy(field, penalty) == doctest::Approx(want).epsilon(1e-10));

    // Same quadratic conjugated by a rotation: identical energy.
    Eigen::Matrix3d R =
        Eigen::AngleAxisd(u(rng) * 3.0, Eigen::Vector3d(1, 2, 0.5).normalized())
            .toRotationMatrix();
    Eigen::Matrix3d Ar = R * A * R.transpose();
    SplineField rotated =
        bform_of_polynomial(mesh, 3, quadratic_poly(Ar, b, 0.0));
    CHECK(energy(rotated, penalty) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("cubic fields match the quadrature oracle") {
  std::mt19937_64 rng(42);
  TetMesh mesh = generate_box_mesh({{0, 0, 0}, {2, 1, 1}}, {2, 1, 1});
  PenaltyBlocks penalty = assemble_penalty(mesh, 3);
  for (int trial = 0; trial < 3; ++trial) {
    SplineField field;
    field.mesh = &mesh;
    field.degree = 3;
    field.coeffs.resize(mesh.num_tets() * basis_dim(3));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < field.coeffs.size(); ++i) field.coeffs[i] = u(rng);
    CHECK(energy(field, penalty) ==
          doctest::Approx(energy_by_quadrature(field)).epsilon(1e-10));
  }
}

TEST_CASE("per-tet weights rescale the energy additively") {
  std::mt19937_64 rng(43);
  TetMesh mesh = generate_box_mesh({{0, 0, 0}, {1, 1, 1}}, {1, 1, 1});
  std::uniform_real_distribution<double> u(0.5, 3.0);
  std::vector<double> w(mesh.num_tets());
  for (double& wi : w) wi = u(rng);

  Polynomial f = random_polynomial(3, rng);
  SplineField field = bform_of_polynomial(mesh, 3, f);
  PenaltyBlocks plain = assemble_penalty(mesh, 3);
  PenaltyBlocks weighted = assemble_penalty(mesh, 3, w);

  // Weighted energy equals the weighted sum of per-tet energies.
  double want = 0;
  for (int t = 0; t < mesh.num_tets(); ++t) {
    Eigen::VectorXd g = field.block(t);
    want += w[t] * g.dot(plain.blocks[t] * g);
  }
  CHECK(energy(field, weighted) == doctest::Approx(want).epsilon(1e-12));

  double trace_want = 0;
  for (int t = 0; t < mesh.num_tets(); ++t)
    trace_want += w[t] * plain.blocks[t].trace();
  CHECK(weighted.trace() == doctest::Approx(trace_want).epsilon(1e-12));
  CHECK(weighted.scaled_block(0).isApprox(w[0] * plain.blocks[0], 1e-13));
}

TEST_CASE("penalty blocks are symmetric positive semidefinite") {
  TetMesh mesh = generate_box_mesh({{0, 0, 0}, {2, 1, 1}}, {2, 1, 1});
  for (int d = 2; d <= 3; ++d) {
    Eigen::MatrixXd P = penalty_block(mesh, d, 0);
    REQUIRE(P.rows() == basis_dim(d));
    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P);
    CHECK(eig.eigenvalues().minCoeff() > -1e-10 * eig.eigenvalues().maxCoeff());
  }
}

}  // TEST_SUITE("penalty")
