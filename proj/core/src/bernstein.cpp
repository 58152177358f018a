#include "tpst/bernstein.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace tpst {

namespace {

// Factorials are exact in double through 18!; degrees beyond that go through
// lgamma (never hit by the smoother itself, which caps at single digits).
double factorial(int n) {
  static const double table[] = {1.,
                                 1.,
                                 2.,
                                 6.,
                                 24.,
                                 120.,
                                 720.,
                                 5040.,
                                 40320.,
                                 362880.,
                                 3628800.,
                                 39916800.,
                                 479001600.,
                                 6227020800.,
                                 87178291200.,
                                 1307674368000.,
                                 20922789888000.,
                                 355687428096000.,
                                 6402373705728000.};
  if (n <= 18) return table[n];
  return std::exp(std::lgamma(n + 1.0));
}

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  if (n <= 18) return factorial(n) / (factorial(k) * factorial(n - k));
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                  std::lgamma(n - k + 1.0));
}

}  // namespace

BasisLayout::BasisLayout(int degree) : degree_(degree) {
  if (degree < 0) throw UsageError("basis degree must be >= 0");
  indices_.reserve(basis_dim(degree));
  for (int i = degree; i >= 0; --i)
    for (int j = degree - i; j >= 0; --j)
      for (int k = degree - i - j; k >= 0; --k)
        indices_.push_back({i, j, k, degree - i - j - k});
  multinomial_.reserve(indices_.size());
  for (const auto& mi : indices_)
    multinomial_.push_back(factorial(degree) / (factorial(mi[0]) * factorial(mi[1]) *
                                                factorial(mi[2]) * factorial(mi[3])));
}

const BasisLayout& BasisLayout::get(int degree) {
  static std::map<int, BasisLayout> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(degree);
  if (it == cache.end())
    it = cache.emplace(degree, BasisLayout(degree)).first;
  return it->second;
}

int BasisLayout::position(const MultiIndex& mi) const {
  // Count predecessors: all indices with larger first component come first,
  // then larger second component, then larger third.
  int d = degree_;
  int i = mi[0], j = mi[1], k = mi[2];
  // Indices with first component > i: sum of triangle numbers.
  int pos = 0;
  for (int m = 0; m < d - i; ++m) pos += (m + 1) * (m + 2) / 2;
  // Within first component i, indices with second component > j.
  for (int nn = 0; nn < d - i - j; ++nn) pos += nn + 1;
  // Within (i,j), indices with third component > k.
  pos += d - i - j - k;
  return pos;
}

Eigen::VectorXd eval_basis(const BasisLayout& layout, const Bary& b) {
  const int d = layout.degree();
  // pw[s][e] = b[s]^e
  std::array<std::vector<double>, 4> pw;
  for (int s = 0; s < 4; ++s) {
    pw[s].resize(d + 1);
    pw[s][0] = 1.0;
    for (int e = 1; e <= d; ++e) pw[s][e] = pw[s][e - 1] * b[s];
  }
  Eigen::VectorXd out(layout.size());
  for (int p = 0; p < layout.size(); ++p) {
    const MultiIndex& mi = layout.index(p);
    out[p] = layout.multinomial(p) * pw[0][mi[0]] * pw[1][mi[1]] * pw[2][mi[2]] *
             pw[3][mi[3]];
  }
  return out;
}

namespace {

// One de Casteljau sweep: degree-m coefficients -> degree-(m-1) coefficients.
void decasteljau_step(int m, const std::vector<double>& in, const Bary& b,
                      std::vector<double>& out) {
  const BasisLayout& lo = BasisLayout::get(m - 1);
  const BasisLayout& hi = BasisLayout::get(m);
  out.resize(lo.size());
  for (int p = 0; p < lo.size(); ++p) {
    MultiIndex mi = lo.index(p);
    double v = 0;
    for (int s = 0; s < 4; ++s) {
      ++mi[s];
      v += b[s] * in[hi.position(mi)];
      --mi[s];
    }
    out[p] = v;
  }
}

}  // namespace

double eval_bform(const BasisLayout& layout, const double* coeffs, const Bary& b) {
  const int d = layout.degree();
  if (d == 0) return coeffs[0];
  std::vector<double> cur(coeffs, coeffs + layout.size()), next;
  for (int m = d; m >= 1; --m) {
    decasteljau_step(m, cur, b, next);
    cur.swap(next);
  }
  return cur[0];
}

double eval_bform_derivative(const BasisLayout& layout, const double* coeffs,
                             const Bary& b, const Bary& a) {
  // D_a s = d * sum over degree-(d-1) indices of (a-weighted differences),
  // realised by one pyramid step along a followed by evaluation at b.
  const int d = layout.degree();
  if (d == 0) return 0.0;
  std::vector<double> cur(coeffs, coeffs + layout.size()), next;
  decasteljau_step(d, cur, a, next);
  for (double& v : next) v *= d;
  return eval_bform(BasisLayout::get(d - 1), next.data(), b);
}

Point3 domain_point(const TetMesh& mesh, int t, int degree, const MultiIndex& mi) {
  Point3 p{0, 0, 0};
  for (int s = 0; s < 4; ++s) p = p + mesh.vertex(t, s) * double(mi[s]);
  return p * (1.0 / degree);
}

Eigen::MatrixXd diff_matrix_first(int degree, const Bary& a) {
  if (degree < 1) throw UsageError("diff_matrix_first needs degree >= 1");
  const BasisLayout& hi = BasisLayout::get(degree);
  const BasisLayout& lo = BasisLayout::get(degree - 1);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(hi.size(), lo.size());
  for (int p = 0; p < hi.size(); ++p) {
    MultiIndex mi = hi.index(p);
    for (int s = 0; s < 4; ++s) {
      if (mi[s] == 0) continue;
      --mi[s];
      C(p, lo.position(mi)) += degree * a[s];
      ++mi[s];
    }
  }
  return C;
}

Eigen::MatrixXd diff_matrix(int degree, const std::vector<Bary>& dirs) {
  if (static_cast<int>(dirs.size()) > degree)
    throw UsageError("derivative order exceeds degree");
  if (dirs.empty())
    return Eigen::MatrixXd::Identity(basis_dim(degree), basis_dim(degree));
  Eigen::MatrixXd C = diff_matrix_first(degree, dirs[0]);
  for (std::size_t m = 1; m < dirs.size(); ++m)
    C = C * diff_matrix_first(degree - static_cast<int>(m), dirs[m]);
  return C;
}

Eigen::MatrixXd mass_matrix(int degree, double volume) {
  const BasisLayout& layout = BasisLayout::get(degree);
  const int n = layout.size();
  const double denom = binom(2 * degree, degree) * binom(2 * degree + 3, 3);
  Eigen::MatrixXd M(n, n);
  for (int p = 0; p < n; ++p) {
    const MultiIndex& mp = layout.index(p);
    for (int q = p; q < n; ++q) {
      const MultiIndex& mq = layout.index(q);
      double num = 1;
      for (int s = 0; s < 4; ++s) num *= binom(mp[s] + mq[s], mp[s]);
      M(p, q) = M(q, p) = num / denom * volume;
    }
  }
  return M;
}

double Polynomial::eval(const Point3& p) const {
  double v = 0;
  for (const auto& m : terms)
    v += m.c * std::pow(p.x, m.px) * std::pow(p.y, m.py) * std::pow(p.z, m.pz);
  return v;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& m : terms)
    if (m.c != 0) d = std::max(d, m.px + m.py + m.pz);
  return d;
}

namespace {

// Interpolation matrix at the domain points: A[p][q] = B_q(mi_p / d).
// Identical for every tet, so the LU factorisation is cached per degree.
const Eigen::PartialPivLU<Eigen::MatrixXd>& domain_interpolation_lu(int degree) {
  static std::map<int, Eigen::PartialPivLU<Eigen::MatrixXd>> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(degree);
  if (it == cache.end()) {
    const BasisLayout& layout = BasisLayout::get(degree);
    Eigen::MatrixXd A(layout.size(), layout.size());
    for (int p = 0; p < layout.size(); ++p) {
      const MultiIndex& mi = layout.index(p);
      Bary b{double(mi[0]) / degree, double(mi[1]) / degree, double(mi[2]) / degree,
             double(mi[3]) / degree};
      A.row(p) = eval_basis(layout, b).transpose();
    }
    it = cache.emplace(degree, Eigen::PartialPivLU<Eigen::MatrixXd>(A)).first;
  }
  return it->second;
}

}  // namespace

SplineField bform_of_polynomial(const TetMesh& mesh, int degree, const Polynomial& f) {
  if (f.degree() > degree)
    throw UsageError("polynomial degree " + std::to_string(f.degree()) +
                     " exceeds basis degree " + std::to_string(degree));
  const BasisLayout& layout = BasisLayout::get(degree);
  const auto& lu = domain_interpolation_lu(degree);
  SplineField field;
  field.mesh = &mesh;
  field.degree = degree;
  field.coeffs.resize(static_cast<Eigen::Index>(mesh.num_tets()) * layout.size());
  Eigen::VectorXd rhs(layout.size());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    for (int p = 0; p < layout.size(); ++p)
      rhs[p] = f.eval(domain_point(mesh, t, degree, layout.index(p)));
    field.coeffs.segment(static_cast<Eigen::Index>(t) * layout.size(),
                         layout.size()) = lu.solve(rhs);
  }
  return field;
}

std::optional<double> eval_spline(const SplineField& field, const Point3& p,
                                  double tol) {
  auto loc = field.mesh->locate(p, tol);
  if (!loc) return std::nullopt;
  const BasisLayout& layout = BasisLayout::get(field.degree);
  const double* block =
      field.coeffs.data() + static_cast<Eigen::Index>(loc->tet) * layout.size();
  return eval_bform(layout, block, loc->bary);
}

}  // namespace tpst
