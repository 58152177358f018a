#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "tpst/mesh.hpp"
#include "tpst/types.hpp"

namespace tpst {

/// Exponent quadruple (i,j,k,l) of a Bernstein basis function
/// B_{ijkl} = d!/(i!j!k!l!) b1^i b2^j b3^k b4^l, with i+j+k+l = degree.
using MultiIndex = std::array<int, 4>;

inline int basis_dim(int degree) {
  return (degree + 1) * (degree + 2) * (degree + 3) / 6;
}

/// Enumeration of all multi-indices of one degree in descending
/// lexicographic order: (d,0,0,0), (d-1,1,0,0), (d-1,0,1,0), ...,
/// (0,0,0,d). Layouts are immutable and cached per degree.
class BasisLayout {
 public:
  static const BasisLayout& get(int degree);

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(indices_.size()); }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  const MultiIndex& index(int pos) const { return indices_[pos]; }

  /// Rank of mi in the lexicographic order, 0-based. O(1) arithmetic.
  int position(const MultiIndex& mi) const;

  /// d!/(i!j!k!l!) for the multi-index at `pos`.
  double multinomial(int pos) const { return multinomial_[pos]; }

 private:
  explicit BasisLayout(int degree);
  int degree_;
  std::vector<MultiIndex> indices_;
  std::vector<double> multinomial_;
};

/// All basis values B_{ijkl}(b) in layout order. Sums to 1 for any b with
/// sum(b) = 1, including points outside the tet (negative coordinates).
Eigen::VectorXd eval_basis(const BasisLayout& layout, const Bary& b);

/// Evaluate a single tet's B-form via de Casteljau pyramid reduction.
/// `coeffs` points at layout.size() coefficients in layout order.
double eval_bform(const BasisLayout& layout, const double* coeffs, const Bary& b);

/// Gradient of the pyramid: directional derivative along direction
/// coordinates a (sum 0), evaluated at b. Used by tests as an oracle.
double eval_bform_derivative(const BasisLayout& layout, const double* coeffs,
                             const Bary& b, const Bary& a);

/// Domain point xi_{ijkl} = (i v1 + j v2 + k v3 + l v4)/d of tet t.
Point3 domain_point(const TetMesh& mesh, int t, int degree, const MultiIndex& mi);

/// First-derivative coefficient transfer matrix C(a): for a spline piece of
/// degree d with coefficient vector g, the directional derivative along
/// direction coordinates a has degree-(d-1) coefficients C(a)^T g, i.e.
/// D_a s = g^T C(a) B_{d-1}. Shape: basis_dim(d) x basis_dim(d-1); the row
/// of (i,j,k,l) is d * sum_s a_s e_{pos(mi - e_s)}, dropping slots where the
/// decrement would go negative.
Eigen::MatrixXd diff_matrix_first(int degree, const Bary& a);

/// Iterated transfer matrix C(a1)C(a2)...C(am) for an m-th order mixed
/// directional derivative. Requires m <= degree.
Eigen::MatrixXd diff_matrix(int degree, const std::vector<Bary>& dirs);

/// Gram matrix of the degree-d basis over one tet of the given volume:
/// M[p][q] = choose(mi+mj, mi) / (choose(2d,d) * choose(2d+3,3)) * volume,
/// where the choose over quadruples is the product of componentwise binomials.
Eigen::MatrixXd mass_matrix(int degree, double volume);

/// Sparse trivariate polynomial sum c * x^px y^py z^pz.
struct Monomial {
  int px = 0, py = 0, pz = 0;
  double c = 0;
};
struct Polynomial {
  std::vector<Monomial> terms;
  double eval(const Point3& p) const;
  int degree() const;
};

/// Piecewise B-form over a mesh: one coefficient block of basis_dim(degree)
/// per tet, concatenated in tet order; lexicographic order inside a block.
/// `smoothness` records the continuity the coefficients were built to satisfy
/// (-1 when unconstrained).
struct SplineField {
  const TetMesh* mesh = nullptr;
  int degree = 0;
  int smoothness = -1;
  Eigen::VectorXd coeffs;

  Eigen::VectorBlock<const Eigen::VectorXd> block(int t) const {
    int bs = basis_dim(degree);
    return coeffs.segment(static_cast<Eigen::Index>(t) * bs, bs);
  }
};

/// Exact B-form of a polynomial of degree <= layout degree: on each tet the
/// coefficients interpolate f at the domain points (the interpolation matrix
/// depends only on the degree and is factored once). Throws UsageError if the
/// polynomial degree exceeds the layout degree.
SplineField bform_of_polynomial(const TetMesh& mesh, int degree, const Polynomial& f);

/// Evaluate a field at p (locate + de Casteljau). nullopt outside the mesh.
std::optional<double> eval_spline(const SplineField& field, const Point3& p,
                                  double tol = 1e-9);

}  // namespace tpst
