#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "doctest.h"
#include "test_helpers.hpp"
#include "tpst/bernstein.hpp"
#include "tpst/mesh.hpp"
#include "tpst/penalty.hpp"
#include "tpst/smoothness.hpp"
#include "tpst/solver.hpp"

using namespace tpst;
using namespace tpst::testing;

namespace {

struct Problem {
  TetMesh mesh;
  Polynomial truth;
  std::vector<Point3> points;
  Eigen::VectorXd clean;   // truth at the points
  Eigen::VectorXd noisy;
};

// Scattered cubic data on a small box mesh, fixed seed.
Problem make_problem(int n, double sigma, std::uint64_t seed) {
  Problem pr;
  pr.mesh = generate_box_mesh({{0, 0, 0}, {2, 1, 1}}, {2, 1, 1});
  std::mt19937_64 rng(seed);
  pr.truth = random_polynomial(3, rng);
  std::normal_distribution<double> noise(0.0, sigma);
  pr.points.reserve(n);
  pr.clean.resize(n);
  pr.noisy.resize(n);
  for (int i = 0; i < n; ++i) {
    pr.points.push_back(random_box_point(pr.mesh.bounding_box(), rng));
    pr.clean[i] = pr.truth.eval(pr.points[i]);
    pr.noisy[i] = pr.clean[i] + (sigma > 0 ? noise(rng) : 0.0);
  }
  return pr;
}

double max_prediction_gap(const SplineField& a, const SplineField& b,
                          const Box3& box, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double gap = 0;
  for (int i = 0; i < samples; ++i) {
    Point3 p = random_box_point(box, rng);
    auto va = eval_spline(a, p), vb = eval_spline(b, p);
    if (va && vb) gap = std::max(gap, std::abs(*va - *vb));
  }
  return gap;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("datasets drop points outside the mesh and validate shapes") {
  TetMesh mesh = generate_box_mesh({{0, 0, 0}, {1, 1, 1}}, {1, 1, 1});
  std::vector<Point3> pts = {{0.2, 0.2, 0.2}, {5, 5, 5}, {0.8, 0.6, 0.4}};
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  Dataset data = make_dataset(mesh, pts, y);
  CHECK(data.points.size() == 2);
  CHECK(data.dropped == 1);
  CHECK(data.values.size() == 2);
  CHECK(data.values[1] == 3);  // order preserved after the drop
  CHECK(data.weights.size() == 2);
  CHECK(data.weights.minCoeff() == 1.0);
  REQUIRE(data.locations.size() == 2);
  CHECK(data.locations[0].tet >= 0);

  Eigen::VectorXd wrong(2);
  wrong << 1, 2;
  CHECK_THROWS_AS(make_dataset(mesh, pts, wrong), DataError);
  Eigen::VectorXd negw(3);
  negw << 1, -1, 1;
  CHECK_THROWS_AS(make_dataset(mesh, pts, y, negw), DataError);
}

TEST_CASE("design matrix rows are unit partitions inside one block") {
  Problem pr = make_problem(100, 0.0, 51);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.clean);
  auto B = design_matrix(data, pr.mesh, 3);
  REQUIRE(B.rows() == static_cast<int>(data.points.size()));
  REQUIRE(B.cols() == pr.mesh.num_tets() * basis_dim(3));
  int bs = basis_dim(3);
  for (int i = 0; i < B.rows(); ++i) {
    double sum = 0;
    int block = data.locations[i].tet;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(B, i); it;
         ++it) {
      sum += it.value();
      CHECK(it.col() / bs == block);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("null-space basis is orthonormal and annihilated by H") {
  TetMesh mesh = generate_box_mesh({{0, 0, 0}, {2, 1, 1}}, {2, 1, 1});
  ConstraintMatrix cm = assemble_smoothness(mesh, 3, 1);
  int rank = 0;
  double residual = 0;
  Eigen::MatrixXd Q2 = nullspace_basis(cm.H, 0, rank, residual);
  CHECK(rank + Q2.cols() == cm.H.cols());
  CHECK(residual < 1e-10);
  CHECK((cm.H * Q2).cwiseAbs().maxCoeff() < 1e-10);
  Eigen::MatrixXd gram = Q2.transpose() * Q2;
  CHECK((gram - Eigen::MatrixXd::Identity(Q2.cols(), Q2.cols()))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("lambda zero reproduces a cubic exactly") {
  Problem pr = make_problem(600, 0.0, 52);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.clean);
  FitConfig cfg;
  cfg.select = Select::kFixed;
  cfg.fixed_lambda = 0;
  FitResult fit = fit_tpst(pr.mesh, data, cfg);
  CHECK(fit.rss < 1e-16 * pr.clean.squaredNorm() + 1e-18);
  CHECK(fit.constraint_residual < 1e-9);

  std::mt19937_64 rng(99);
  double fmax = 0, err = 0;
  for (int i = 0; i < 200; ++i) {
    Point3 p = random_box_point(pr.mesh.bounding_box(), rng);
    auto v = eval_spline(fit.field, p);
    REQUIRE(v.has_value());
    fmax = std::max(fmax, std::abs(pr.truth.eval(p)));
    err = std::max(err, std::abs(*v - pr.truth.eval(p)));
  }
  CHECK(err < 1e-7 * fmax);
}

TEST_CASE("huge lambda shrinks to the global linear least-squares fit") {
  Problem pr = make_problem(400, 0.05, 53);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.noisy);
  FitConfig cfg;
  cfg.select = Select::kFixed;
  cfg.fixed_lambda = 1e12;
  FitResult fit = fit_tpst(pr.mesh, data, cfg);

  // Direct least squares on (1, x, y, z).
  Eigen::MatrixXd X(data.points.size(), 4);
  for (size_t i = 0; i < data.points.size(); ++i)
    X.row(i) << 1, data.points[i].x, data.points[i].y, data.points[i].z;
  Eigen::Vector4d beta =
      (X.transpose() * X).ldlt().solve(X.transpose() * data.values);

  std::mt19937_64 rng(100);
  for (int i = 0; i < 200; ++i) {
    Point3 p = random_box_point(pr.mesh.bounding_box(), rng);
    auto v = eval_spline(fit.field, p);
    REQUIRE(v.has_value());
    double lin = beta[0] + beta[1] * p.x + beta[2] * p.y + beta[3] * p.z;
    CHECK(std::abs(*v - lin) < 1e-4);
  }
  CHECK(fit.edf == doctest::Approx(4.0).epsilon(0.01));  // linear space left
}

TEST_CASE("the lambda path trades fit for smoothness monotonically") {
  Problem pr = make_problem(500, 0.2, 54);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.noisy);
  FitContext ctx = make_fit_context(pr.mesh, 3, 1);
  PenaltyBlocks penalty = assemble_penalty(pr.mesh, 3);

  std::vector<double> grid = {1e-6, 1e-4, 1e-2, 1, 1e2, 1e4};
  double prev_rss = -1, prev_edf = 1e300, prev_energy = 1e300;
  for (double lam : grid) {
    FitConfig cfg;
    cfg.select = Select::kFixed;
    cfg.fixed_lambda = lam;
    FitResult fit = fit_tpst(ctx, data, cfg);
    CHECK(fit.rss >= prev_rss - 1e-9);
    CHECK(fit.edf <= prev_edf + 1e-9);
    double e = energy(fit.field, penalty);
    CHECK(e <= prev_energy * (1 + 1e-9) + 1e-12);
    prev_rss = fit.rss;
    prev_edf = fit.edf;
    prev_energy = e;
  }
}

TEST_CASE("gcv score matches its formula and guards the edf boundary") {
  CHECK(gcv_score(2.0, 100, 10.0) ==
        doctest::Approx(100 * 2.0 / (90.0 * 90.0)).epsilon(1e-14));
  CHECK(std::isinf(gcv_score(1.0, 10, 10.0)));
  CHECK(std::isinf(gcv_score(1.0, 10, 12.0)));
}

TEST_CASE("gcv selection returns the grid argmin and the full path") {
  Problem pr = make_problem(500, 0.3, 55);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.noisy);
  FitConfig cfg;
  cfg.select = Select::kGCV;
  cfg.lambda_grid = {1e-4, 1e-2, 1, 1e2};
  FitResult fit = fit_tpst(pr.mesh, data, cfg);
  REQUIRE(fit.path.size() == 4);
  double best = fit.path[0].score;
  double best_lambda = fit.path[0].lambda;
  for (const LambdaScore& s : fit.path) {
    CHECK(s.score == doctest::Approx(gcv_score(s.rss, fit.n_used, s.edf))
                         .epsilon(1e-12));
    if (s.score < best) {
      best = s.score;
      best_lambda = s.lambda;
    }
  }
  CHECK(fit.lambda == best_lambda);
  CHECK(fit.gcv == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("the fitted coefficients minimize the penalized objective") {
  Problem pr = make_problem(400, 0.2, 56);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.noisy);
  FitContext ctx = make_fit_context(pr.mesh, 3, 1);
  double lam = 0.5;
  FitConfig cfg;
  cfg.select = Select::kFixed;
  cfg.fixed_lambda = lam;
  FitResult fit = fit_tpst(ctx, data, cfg);
  PenaltyBlocks penalty = assemble_penalty(pr.mesh, 3);

  auto objective = [&](const SplineField& field) {
    double rss = 0;
    for (size_t i = 0; i < data.points.size(); ++i) {
      const Location& loc = data.locations[i];
      double v = eval_bform(BasisLayout::get(3),
                            field.coeffs.data() + loc.tet * basis_dim(3), loc.bary);
      rss += (data.values[i] - v) * (data.values[i] - v);
    }
    return rss + lam / data.points.size() * energy(field, penalty);
  };

  double at_min = objective(fit.field);
  std::mt19937_64 rng(57);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int k = ctx.Q2.cols();
  for (int trial = 0; trial < 8; ++trial) {
    Eigen::VectorXd step(k);
    for (int i = 0; i < k; ++i) step[i] = u(rng);
    step *= 1e-3 / step.norm();
    SplineField moved = fit.field;
    moved.coeffs += ctx.Q2 * step;  // stay inside the smooth subspace
    CHECK(objective(moved) >= at_min - 1e-12);
  }
}

TEST_CASE("cross-validation is deterministic and balanced") {
  Problem pr = make_problem(500, 0.3, 58);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.noisy);
  FitConfig cfg;
  cfg.select = Select::kCV;
  cfg.cv_folds = 4;
  cfg.seed = 7;
  cfg.lambda_grid = {1e-4, 1e-2, 1, 1e2};
  FitResult a = fit_tpst(pr.mesh, data, cfg);
  FitResult b = fit_tpst(pr.mesh, data, cfg);
  CHECK(a.lambda == b.lambda);
  REQUIRE(a.path.size() == b.path.size());
  for (size_t i = 0; i < a.path.size(); ++i) {
    CHECK(a.path[i].lambda == b.path[i].lambda);
    CHECK(a.path[i].score == b.path[i].score);  // bitwise reproducible
  }
  // A different shuffle seed may pick a different lambda but stays on grid.
  cfg.seed = 8;
  FitResult c = fit_tpst(pr.mesh, data, cfg);
  bool on_grid = false;
  for (double l : cfg.lambda_grid) on_grid |= (l == c.lambda);
  CHECK(on_grid);
}

TEST_CASE("cross-validation picks the first argmin, so ties go to smaller lambda") {
  Problem pr = make_problem(700, 0.0, 59);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.clean);
  FitConfig cfg;
  cfg.select = Select::kCV;
  cfg.cv_folds = 3;
  cfg.lambda_grid = {1e-9, 2e-9, 4e-9};
  FitResult fit = fit_tpst(pr.mesh, data, cfg);
  REQUIRE(fit.path.size() == 3);
  size_t best = 0;  // first strict improvement wins; equal scores keep the earlier
  for (size_t i = 1; i < fit.path.size(); ++i)
    if (fit.path[i].score < fit.path[best].score) best = i;
  CHECK(fit.lambda == fit.path[best].lambda);
  for (size_t i = 1; i < fit.path.size(); ++i)
    CHECK(fit.path[i].lambda > fit.path[i - 1].lambda);  // grid kept sorted
}

TEST_CASE("degenerate folds are rejected") {
  Problem pr = make_problem(300, 0.1, 60);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.noisy);
  FitConfig cfg;
  cfg.select = Select::kCV;
  cfg.cv_folds = 1;
  CHECK_THROWS_AS(fit_tpst(pr.mesh, data, cfg), UsageError);
  cfg.cv_folds = pr.mesh.num_tets() + 1;
  CHECK_THROWS_AS(fit_tpst(pr.mesh, data, cfg), UsageError);

  // All data inside one tet: the fold holding that tet has no training data.
  TetMesh mesh = generate_box_mesh({{0, 0, 0}, {2, 1, 1}}, {2, 1, 1});
  std::mt19937_64 rng(61);
  std::vector<Point3> pts;
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) {
    Bary b = random_interior_bary(rng, 0.05);
    Point3 p{0, 0, 0};
    for (int s = 0; s < 4; ++s) p = p + b[s] * mesh.vertex(0, s);
    pts.push_back(p);
    y[i] = p.x;
  }
  Dataset one_tet = make_dataset(mesh, pts, y);
  FitConfig cv;
  cv.select = Select::kCV;
  cv.cv_folds = 2;
  cv.lambda_grid = {1e-2, 1};
  CHECK_THROWS_AS(fit_tpst(mesh, one_tet, cv), DataError);
}

TEST_CASE("a weight of two equals duplicating the observation") {
  Problem pr = make_problem(300, 0.2, 62);
  int n = static_cast<int>(pr.points.size());

  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  w[0] = 2.0;
  Dataset weighted = make_dataset(pr.mesh, pr.points, pr.noisy, w);

  std::vector<Point3> dup_pts = pr.points;
  dup_pts.push_back(pr.points[0]);
  Eigen::VectorXd dup_y(n + 1);
  dup_y.head(n) = pr.noisy;
  dup_y[n] = pr.noisy[0];
  Dataset duplicated = make_dataset(pr.mesh, dup_pts, dup_y);

  // Match the effective lambda/n between the two problem sizes.
  double lam = 2.0;
  FitConfig cfg_w;
  cfg_w.select = Select::kFixed;
  cfg_w.fixed_lambda = lam;
  FitConfig cfg_d = cfg_w;
  cfg_d.fixed_lambda = lam * (n + 1) / static_cast<double>(n);

  FitResult fw = fit_tpst(pr.mesh, weighted, cfg_w);
  FitResult fd = fit_tpst(pr.mesh, duplicated, cfg_d);
  CHECK((fw.field.coeffs - fd.field.coeffs).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("stochastic trace estimation tracks the exact edf") {
  Problem pr = make_problem(500, 0.2, 63);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.noisy);
  FitConfig exact;
  exact.select = Select::kFixed;
  exact.fixed_lambda = 1.0;
  FitResult fe = fit_tpst(pr.mesh, data, exact);

  FitConfig est = exact;
  est.hutchinson_trace = true;
  est.hutchinson_probes = 128;
  est.seed = 5;
  FitResult fh = fit_tpst(pr.mesh, data, est);
  CHECK(fh.edf == doctest::Approx(fe.edf).epsilon(0.2));
  CHECK((fh.field.coeffs - fe.field.coeffs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("the default lambda grid is positive, sorted and spans decades") {
  Problem pr = make_problem(300, 0.2, 64);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.noisy);
  FitContext ctx = make_fit_context(pr.mesh, 3, 1);
  PenaltyBlocks penalty = assemble_penalty(pr.mesh, 3);
  ReducedProblem problem(pr.mesh, 3, ctx.Q2, penalty, data);
  std::vector<double> grid = problem.default_lambda_grid();
  REQUIRE(grid.size() == 20);
  for (size_t i = 0; i < grid.size(); ++i) {
    CHECK(grid[i] > 0);
    if (i > 0) CHECK(grid[i] > grid[i - 1]);
  }
  CHECK(grid.back() / grid.front() == doctest::Approx(1e10).epsilon(1e-6));
}

TEST_CASE("a shared fit context reproduces the wrapper results") {
  Problem pr = make_problem(300, 0.2, 65);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.noisy);
  FitConfig cfg;
  cfg.select = Select::kGCV;
  cfg.lambda_grid = {1e-3, 1e-1, 10};
  FitContext ctx = make_fit_context(pr.mesh, 3, 1);
  FitResult via_ctx = fit_tpst(ctx, data, cfg);
  FitResult via_mesh = fit_tpst(pr.mesh, data, cfg);
  CHECK(via_ctx.lambda == via_mesh.lambda);
  CHECK((via_ctx.field.coeffs - via_mesh.field.coeffs).cwiseAbs().maxCoeff() == 0);
  CHECK(via_ctx.nullspace_dim == via_mesh.nullspace_dim);
  CHECK(via_ctx.rank_H == via_mesh.rank_H);
}

TEST_CASE("predict matches point evaluation and flags exterior points") {
  Problem pr = make_problem(300, 0.0, 66);
  Dataset data = make_dataset(pr.mesh, pr.points, pr.clean);
  FitConfig cfg;
  cfg.select = Select::kFixed;
  cfg.fixed_lambda = 1e-3;
  FitResult fit = fit_tpst(pr.mesh, data, cfg);
  std::vector<Point3> query = {{0.3, 0.4, 0.5}, {9, 9, 9}, {1.7, 0.2, 0.9}};
  auto preds = predict(fit.field, query);
  REQUIRE(preds.size() == 3);
  CHECK(preds[0].has_value());
  CHECK_FALSE(preds[1].has_value());
  CHECK(preds[2].has_value());
  CHECK(*preds[0] == doctest::Approx(*eval_spline(fit.field, query[0])).epsilon(1e-14));
}

TEST_CASE("underdetermined fixed fits raise a numerical error") {
  TetMesh mesh = generate_box_mesh({{0, 0, 0}, {1, 1, 1}}, {1, 1, 1});
  std::vector<Point3> pts = {{0.2, 0.2, 0.2}, {0.8, 0.7, 0.6}, {0.5, 0.5, 0.1}};
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  Dataset data = make_dataset(mesh, pts, y);
  FitConfig cfg;
  cfg.select = Select::kFixed;
  cfg.fixed_lambda = 0;
  CHECK_THROWS_AS(fit_tpst(mesh, data, cfg), NumericalError);
}

}  // TEST_SUITE("solver")
