#include "tpst/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>

namespace tpst {

namespace {

// Gauss-Legendre nodes/weights on [0,1] by Newton iteration on P_n.
void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev-based initial guess on [-1,1].
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (t * p1 - p0) / (t * t - 1.0);
    x[i] = 0.5 * (1.0 - t);  // map [-1,1] -> [0,1], reversed for ascending order
    w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
}

TetQuadrature centroid_rule() {
  TetQuadrature q;
  q.points = {{0.25, 0.25, 0.25, 0.25}};
  q.weights = {1.0};
  q.exact_degree = 1;
  return q;
}

// 4-point degree-2 rule: permutations of ((5+3√5)/20, (5-√5)/20 x3).
TetQuadrature degree2_rule() {
  const double a = (5.0 + 3.0 * std::sqrt(5.0)) / 20.0;
  const double b = (5.0 - std::sqrt(5.0)) / 20.0;
  TetQuadrature q;
  for (int i = 0; i < 4; ++i) {
    Bary p{b, b, b, b};
    p[i] = a;
    q.points.push_back(p);
    q.weights.push_back(0.25);
  }
  q.exact_degree = 2;
  return q;
}

// 8-point degree-3 rule with positive weights: face centroids (0, 1/3 x3)
// with weight 9/100 plus permutations of (5/8, 1/8 x3) with weight 4/25.
// Exactness check: a symmetric rule is degree-3 exact iff it matches the
// moments of 1, e2, e3 (elementary symmetric polynomials, with e1 = 1 on the
// simplex): 1, 3/10, 1/30. Both orbits together hit all three.
// The classic 5-point rule is avoided: its centroid weight is -4/5, and
// negative weights can push the quadrature of a nonnegative integrand below
// zero.
TetQuadrature degree3_rule() {
  TetQuadrature q;
  for (int i = 0; i < 4; ++i) {
    Bary p{1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3};
    p[i] = 0.0;
    q.points.push_back(p);
    q.weights.push_back(0.09);
  }
  for (int i = 0; i < 4; ++i) {
    Bary p{1.0 / 8, 1.0 / 8, 1.0 / 8, 1.0 / 8};
    p[i] = 5.0 / 8;
    q.points.push_back(p);
    q.weights.push_back(0.16);
  }
  q.exact_degree = 3;
  return q;
}

// Collapsed (Duffy) tensor Gauss-Legendre rule. With the map
//   b1 = u, b2 = v(1-u), b3 = w(1-u)(1-v), b4 = 1-b1-b2-b3
// a monomial of total degree p pulls back to a separable polynomial of degree
// <= p+2 per axis (the Jacobian contributes (1-u)^2 (1-v)), so n points per
// axis are exact for order <= 2n-3.
//
// The raw rule treats the four barycentric slots unequally, so a rule built
// this way would make integrals depend on how a tet happens to list its
// vertices. Averaging over all 24 slot permutations restores symmetry (each
// permuted copy is still exact) at the cost of 24x the points; rules are
// cached, and quadrature is not on any hot path.
TetQuadrature duffy_rule(int order) {
  int n = (order + 3 + 1) / 2;  // ceil((order+3)/2)
  std::vector<double> x, w;
  gauss_legendre_01(n, x, w);
  TetQuadrature base;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double u = x[i], v = x[j], ww = x[k];
        double b1 = u;
        double b2 = v * (1 - u);
        double b3 = ww * (1 - u) * (1 - v);
        double jac = (1 - u) * (1 - u) * (1 - v);
        base.points.push_back({b1, b2, b3, 1 - b1 - b2 - b3});
        // Factor 6: the reference tet has volume 1/6 of the unit cube image.
        base.weights.push_back(6.0 * w[i] * w[j] * w[k] * jac);
      }
  TetQuadrature q;
  q.exact_degree = order;
  std::array<int, 4> perm{0, 1, 2, 3};
  do {
    for (std::size_t p = 0; p < base.points.size(); ++p) {
      const Bary& src = base.points[p];
      q.points.push_back({src[perm[0]], src[perm[1]], src[perm[2]], src[perm[3]]});
      q.weights.push_back(base.weights[p] / 24.0);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return q;
}

}  // namespace

const TetQuadrature& tet_quadrature(int order) {
  if (order < 1 || order > 20)
    throw UsageError("unsupported quadrature order " + std::to_string(order) +
                     " (supported: 1..20)");
  static std::map<int, TetQuadrature> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;
  TetQuadrature q;
  switch (order) {
    case 1: q = centroid_rule(); break;
    case 2: q = degree2_rule(); break;
    case 3: q = degree3_rule(); break;
    default: q = duffy_rule(order); break;
  }
  return cache.emplace(order, std::move(q)).first->second;
}

}  // namespace tpst
