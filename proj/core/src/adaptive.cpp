#include "tpst/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tpst/parallel.hpp"
#include "tpst/quadrature.hpp"
#include "tpst/types.hpp"

namespace tpst {

std::vector<double> total_variation(const SplineField& field, int quad_order) {
  if (field.mesh == nullptr) throw UsageError("field has no mesh");
  if (field.degree < 1) throw UsageError("total variation needs degree >= 1");
  const TetMesh& mesh = *field.mesh;
  const BasisLayout& grad_layout = BasisLayout::get(field.degree - 1);
  const TetQuadrature& quad = tet_quadrature(quad_order);
  const Point3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  std::vector<double> tv(static_cast<std::size_t>(mesh.num_tets()), 0.0);
  parallel_for(tv.size(), [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    const auto gamma = field.block(t);
    // Degree-(d-1) coefficients of the three Cartesian partials on this tet.
    Eigen::VectorXd part[3];
    for (int g = 0; g < 3; ++g) {
      Eigen::MatrixXd C = diff_matrix_first(field.degree, mesh.direction_coords(t, axes[g]));
      part[g].noalias() = C.transpose() * gamma;
    }
    double acc = 0;
    for (std::size_t q = 0; q < quad.points.size(); ++q) {
      double sq = 0;
      for (int g = 0; g < 3; ++g) {
        const double dg = eval_bform(grad_layout, part[g].data(), quad.points[q]);
        sq += dg * dg;
      }
      acc += quad.weights[q] * std::sqrt(sq);
    }
    tv[ti] = acc * mesh.volume(t);
  });
  return tv;
}

std::vector<double> adaptive_weights(const std::vector<double>& tv, const TetMesh& mesh,
                                     double c_value, double tau) {
  if (tv.size() != static_cast<std::size_t>(mesh.num_tets())) {
    throw UsageError("total variation vector does not match tetrahedron count");
  }
  if (!(c_value > 1) || !std::isfinite(c_value)) {
    throw UsageError("adaptive constant C must be > 1");
  }
  if (!(tau >= 0) || !std::isfinite(tau)) throw UsageError("tau must be finite and >= 0");

  std::vector<double> eta(tv.size());
  double eta_max = 0;
  for (std::size_t t = 0; t < tv.size(); ++t) {
    eta[t] = tv[t] / mesh.volume(static_cast<int>(t));
    eta_max = std::max(eta_max, eta[t]);
  }
  std::vector<double> omega(tv.size());
  for (std::size_t t = 0; t < tv.size(); ++t) {
    // Flat pilot: no contrast to exploit, fall back to the uniform weight.
    const double rel = eta_max > 0 ? eta[t] / eta_max : 0.0;
    omega[t] = std::pow(c_value - rel, tau);
  }
  return omega;
}

namespace {

std::vector<double> default_c_grid() {
  std::vector<double> grid(8);
  for (int i = 0; i < 8; ++i) grid[static_cast<std::size_t>(i)] = 1.25 + 0.25 * i;
  return grid;
}

}  // namespace

FitResult fit_atpst(const FitContext& ctx, const Dataset& data, const FitConfig& config,
                    const AdaptiveConfig& adaptive) {
  std::vector<double> c_grid = adaptive.c_grid.empty() ? default_c_grid() : adaptive.c_grid;
  std::sort(c_grid.begin(), c_grid.end());
  for (double c : c_grid) {
    if (!(c > 1) || !std::isfinite(c)) throw UsageError("adaptive C grid values must be > 1");
  }

  // Stage 1: uniform-weight pilot. Its lambda grid is frozen so every refit
  // selects over the same candidates.
  FitResult pilot = fit_tpst(ctx, data, config);
  std::vector<double> lambda_grid;
  lambda_grid.reserve(pilot.path.size());
  for (const LambdaScore& s : pilot.path) lambda_grid.push_back(s.lambda);

  // Stage 2: contrast weights from the pilot's gradient field.
  std::vector<double> tv = total_variation(pilot.field, adaptive.quad_order);

  // Stage 3: one refit per C, each re-selecting lambda; keep the smallest
  // GCV, ties to the smaller C.
  FitConfig refit_cfg = config;
  refit_cfg.lambda_grid = lambda_grid;
  if (refit_cfg.select == Select::kFixed) refit_cfg.fixed_lambda = config.fixed_lambda;

  FitResult best;
  std::vector<double> best_omega;
  double best_c = c_grid.front();
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> c_path;
  bool have_best = false;
  for (double c : c_grid) {
    std::vector<double> omega = adaptive_weights(tv, *ctx.mesh, c, adaptive.tau);
    FitResult refit = fit_tpst(ctx, data, refit_cfg, omega);
    c_path.emplace_back(c, refit.gcv);
    if (!have_best || refit.gcv < best_score) {
      have_best = true;
      best_score = refit.gcv;
      best_c = c;
      best = std::move(refit);
      best_omega = std::move(omega);
    }
  }

  best.c_value = best_c;
  best.omega = std::move(best_omega);
  best.tv = std::move(tv);
  best.c_path = std::move(c_path);
  return best;
}

FitResult fit_atpst(const TetMesh& mesh, const Dataset& data, const FitConfig& config,
                    const AdaptiveConfig& adaptive) {
  FitContext ctx = make_fit_context(mesh, config.degree, config.smoothness,
                                    config.rank_rel_tol);
  return fit_atpst(ctx, data, config, adaptive);
}

}  // namespace tpst
