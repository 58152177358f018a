// Microbenchmarks for the smoother's hot paths: point location, B-form
// evaluation, constraint and penalty assembly, the null-space QR, and the
// per-lambda solve that dominates grid selection.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tpst/bernstein.hpp"
#include "tpst/mesh.hpp"
#include "tpst/penalty.hpp"
#include "tpst/rng.hpp"
#include "tpst/smoothness.hpp"
#include "tpst/solver.hpp"

namespace {

using namespace tpst;

const TetMesh& bench_mesh() {
  static const TetMesh mesh = generate_box_mesh({{0, 0, 0}, {2, 1, 1}}, {3, 2, 2});
  return mesh;
}

std::vector<Point3> random_points(int n, std::uint64_t label_index) {
  const Box3 box = bench_mesh().bounding_box();
  auto rng = make_rng(17, "bench:points", label_index);
  std::uniform_real_distribution<double> ux(box.lo.x, box.hi.x), uy(box.lo.y, box.hi.y),
      uz(box.lo.z, box.hi.z);
  std::vector<Point3> points;
  points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) points.push_back({ux(rng), uy(rng), uz(rng)});
  return points;
}

void BM_LocatePoint(benchmark::State& state) {
  const TetMesh& mesh = bench_mesh();
  const std::vector<Point3> points = random_points(4096, 0);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mesh.locate(points[i]));
    i = (i + 1) % points.size();
  }
}
BENCHMARK(BM_LocatePoint);

void BM_EvalBform(benchmark::State& state) {
  const int degree = static_cast<int>(state.range(0));
  const BasisLayout& layout = BasisLayout::get(degree);
  auto rng = make_rng(17, "bench:coeffs");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> coeffs(static_cast<std::size_t>(layout.size()));
  for (double& c : coeffs) c = u(rng);
  const Bary b{0.31, 0.27, 0.22, 0.20};
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_bform(layout, coeffs.data(), b));
  }
}
BENCHMARK(BM_EvalBform)->Arg(2)->Arg(3)->Arg(4);

void BM_AssembleSmoothness(benchmark::State& state) {
  const TetMesh& mesh = bench_mesh();
  const int degree = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_smoothness(mesh, degree, 1));
  }
}
BENCHMARK(BM_AssembleSmoothness)->Arg(2)->Arg(3);

void BM_AssemblePenalty(benchmark::State& state) {
  const TetMesh& mesh = bench_mesh();
  const int degree = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_penalty(mesh, degree));
  }
}
BENCHMARK(BM_AssemblePenalty)->Arg(2)->Arg(3);

void BM_NullspaceBasis(benchmark::State& state) {
  const TetMesh& mesh = bench_mesh();
  const int degree = static_cast<int>(state.range(0));
  const ConstraintMatrix cm = assemble_smoothness(mesh, degree, 1);
  for (auto _ : state) {
    int rank = 0;
    double residual = 0;
    benchmark::DoNotOptimize(nullspace_basis(cm.H, 0, rank, residual));
  }
}
BENCHMARK(BM_NullspaceBasis)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

// One regularised solve at the reduced dimension, the unit of work a lambda
// grid multiplies.
void BM_PenalizedSolve(benchmark::State& state) {
  const TetMesh& mesh = bench_mesh();
  static const FitContext ctx = make_fit_context(mesh, 2, 0);
  const std::vector<Point3> points = random_points(2000, 1);
  auto rng = make_rng(17, "bench:values");
  std::normal_distribution<double> gauss;
  Eigen::VectorXd y(points.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    y[i] = points[static_cast<std::size_t>(i)].x + gauss(rng) * 0.1;
  const Dataset data = make_dataset(mesh, points, y);
  const ReducedProblem problem(mesh, 2, ctx.Q2, ctx.blocks, data);
  for (auto _ : state) {
    benchmark::DoNotOptimize(problem.solve(1e-2));
  }
}
BENCHMARK(BM_PenalizedSolve)->Unit(benchmark::kMillisecond);

void BM_FitGcv(benchmark::State& state) {
  const TetMesh& mesh = bench_mesh();
  static const FitContext ctx = make_fit_context(mesh, 2, 0);
  const std::vector<Point3> points = random_points(1000, 2);
  auto rng = make_rng(17, "bench:fit");
  std::normal_distribution<double> gauss;
  Eigen::VectorXd y(points.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const Point3& p = points[static_cast<std::size_t>(i)];
    y[i] = p.x * p.y + p.z + gauss(rng) * 0.1;
  }
  const Dataset data = make_dataset(mesh, points, y);
  FitConfig cfg;
  cfg.degree = 2;
  cfg.smoothness = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_tpst(ctx, data, cfg));
  }
}
BENCHMARK(BM_FitGcv)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
