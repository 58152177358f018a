#include "tpst/solver.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tpst/parallel.hpp"
#include "tpst/rng.hpp"
#include "tpst/types.hpp"

namespace tpst {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

Dataset make_dataset(const TetMesh& mesh, const std::vector<Point3>& points,
                     const Eigen::VectorXd& values, const Eigen::VectorXd& weights,
                     double locate_tol) {
  if (static_cast<Eigen::Index>(points.size()) != values.size()) {
    throw DataError("point and value counts differ (" + std::to_string(points.size()) +
                    " vs " + std::to_string(values.size()) + ")");
  }
  const bool has_w = weights.size() > 0;
  if (has_w && weights.size() != values.size()) {
    throw DataError("weight count does not match observation count");
  }
  // Reject malformed weights up front, before any point is dropped, so bad
  // input fails the same way regardless of where the points land.
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0) || !std::isfinite(weights[i])) {
      throw DataError("observation weights must be finite and nonnegative");
    }
  }
  Dataset out;
  out.points.reserve(points.size());
  std::vector<double> vals, ws;
  for (std::size_t p = 0; p < points.size(); ++p) {
    auto loc = mesh.locate(points[p], locate_tol);
    if (!loc) {
      ++out.dropped;
      continue;
    }
    double w = has_w ? weights[static_cast<Eigen::Index>(p)] : 1.0;
    out.points.push_back(points[p]);
    out.locations.push_back(*loc);
    vals.push_back(values[static_cast<Eigen::Index>(p)]);
    ws.push_back(w);
  }
  out.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  out.weights = Eigen::Map<Eigen::VectorXd>(ws.data(), static_cast<Eigen::Index>(ws.size()));
  return out;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> design_matrix(const Dataset& data,
                                                           const TetMesh& mesh,
                                                           int degree) {
  const BasisLayout& layout = BasisLayout::get(degree);
  const int bs = layout.size();
  const Eigen::Index n = data.values.size();
  Eigen::SparseMatrix<double, Eigen::RowMajor> B(n, static_cast<Eigen::Index>(bs) * mesh.num_tets());
  B.reserve(Eigen::VectorXi::Constant(static_cast<int>(n), bs));
  for (Eigen::Index p = 0; p < n; ++p) {
    const Location& loc = data.locations[static_cast<std::size_t>(p)];
    Eigen::VectorXd basis = eval_basis(layout, loc.bary);
    for (int i = 0; i < bs; ++i) {
      B.insert(p, static_cast<Eigen::Index>(loc.tet) * bs + i) = basis[i];
    }
  }
  B.makeCompressed();
  return B;
}

Eigen::MatrixXd nullspace_basis(const Eigen::SparseMatrix<double, Eigen::RowMajor>& H,
                                double rank_rel_tol, int& rank, double& residual) {
  const int m = static_cast<int>(H.cols());
  const int nrows = static_cast<int>(H.rows());
  if (m <= 0) throw UsageError("constraint matrix has no columns");
  rank = 0;
  residual = 0;
  if (nrows == 0) return Eigen::MatrixXd::Identity(m, m);

  // Factor H^T so the null space of H comes out as trailing Q columns. The
  // buffer is m x max(m, nrows): dgeqp3 reads the first nrows columns and
  // dorgqr needs room for a full m x m Q.
  const int k = std::min(m, nrows);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, std::max(m, nrows));
  for (int r = 0; r < H.outerSize(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(H, r); it; ++it) {
      W(it.col(), r) = it.value();
    }
  }
  std::vector<lapack_int> jpvt(static_cast<std::size_t>(nrows), 0);
  std::vector<double> tau(static_cast<std::size_t>(k));
  lapack_int info = LAPACKE_dgeqp3(LAPACK_COL_MAJOR, m, nrows, W.data(), m,
                                   jpvt.data(), tau.data());
  if (info != 0) {
    throw NumericalError("QR of the constraint matrix failed (dgeqp3 info=" +
                         std::to_string(info) + ")");
  }
  // Column pivoting keeps |R_ii| non-increasing, so the rank cut is a prefix.
  const double dmax = std::abs(W(0, 0));
  const double tol = (rank_rel_tol > 0 ? rank_rel_tol : 1e-10) * dmax;
  for (int i = 0; i < k; ++i) {
    if (std::abs(W(i, i)) > tol) ++rank;
  }
  info = LAPACKE_dorgqr(LAPACK_COL_MAJOR, m, m, k, W.data(), m, tau.data());
  if (info != 0) {
    throw NumericalError("forming Q from the constraint QR failed (dorgqr info=" +
                         std::to_string(info) + ")");
  }
  Eigen::MatrixXd Q2 = W.block(0, rank, m, m - rank);

  // Row-at-a-time residual check so we never materialise H * Q2.
  Eigen::RowVectorXd row(Q2.cols());
  for (int r = 0; r < H.outerSize(); ++r) {
    row.setZero();
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(H, r); it; ++it) {
      row.noalias() += it.value() * Q2.row(it.col());
    }
    residual = std::max(residual, row.cwiseAbs().maxCoeff());
  }
  return Q2;
}

ReducedProblem::ReducedProblem(const TetMesh& mesh, int degree, const Eigen::MatrixXd& Q2,
                               const PenaltyBlocks& penalty, const Dataset& data)
    : mesh_(mesh), degree_(degree), Q2_(Q2) {
  const BasisLayout& layout = BasisLayout::get(degree);
  const int bs = layout.size();
  if (Q2_.rows() != static_cast<Eigen::Index>(bs) * mesh.num_tets()) {
    throw UsageError("null-space basis size does not match mesh and degree");
  }
  if (penalty.degree != degree) {
    throw UsageError("penalty degree does not match fit degree");
  }
  const Eigen::Index n = data.values.size();
  if (n == 0) throw DataError("no observations located inside the mesh");
  const Eigen::Index kdim = Q2_.cols();

  // U and y carry sqrt-weight scaling so that G = U^T U and RSS = |y - U
  // theta|^2 are the weighted quantities throughout.
  U_.resize(n, kdim);
  y_.resize(n);
  w_ = data.weights;
  point_tet_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index p = 0; p < n; ++p) {
    const Location& loc = data.locations[static_cast<std::size_t>(p)];
    point_tet_[static_cast<std::size_t>(p)] = loc.tet;
    Eigen::VectorXd basis = eval_basis(layout, loc.bary);
    const double sw = std::sqrt(w_[p]);
    U_.row(p).noalias() =
        sw * basis.transpose() * Q2_.middleRows(static_cast<Eigen::Index>(loc.tet) * bs, bs);
    y_[p] = sw * data.values[p];
    trace_BtB_ += w_[p] * basis.squaredNorm();
  }
  G_.setZero(kdim, kdim);
  G_.selfadjointView<Eigen::Lower>().rankUpdate(U_.transpose());
  G_ = G_.selfadjointView<Eigen::Lower>();
  c_.noalias() = U_.transpose() * y_;

  E_.setZero(kdim, kdim);
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const double w = penalty.weights[static_cast<std::size_t>(t)];
    if (w == 0) continue;
    auto rows = Q2_.middleRows(static_cast<Eigen::Index>(t) * bs, bs);
    E_.noalias() += w * rows.transpose() * penalty.blocks[static_cast<std::size_t>(t)] * rows;
  }
  E_ = 0.5 * (E_ + E_.transpose()).eval();
  trace_P_ = penalty.trace();
}

Eigen::LDLT<Eigen::MatrixXd> ReducedProblem::factor(double lambda) const {
  if (!(lambda >= 0) || !std::isfinite(lambda)) {
    throw UsageError("lambda must be finite and nonnegative");
  }
  Eigen::MatrixXd M = G_ + (lambda / static_cast<double>(n())) * E_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  const auto& D = ldlt.vectorD();
  const double dmax = D.maxCoeff();
  const double dmin = D.minCoeff();
  if (!std::isfinite(dmax) || dmax <= 0 || dmin <= dmax * 1e-14) {
    throw NumericalError(
        "penalized system is numerically singular at lambda=" + std::to_string(lambda) +
        " (reduced dim " + std::to_string(reduced_dim()) + ", n=" + std::to_string(n()) +
        "); add data or increase lambda");
  }
  return ldlt;
}

ReducedProblem::Solution ReducedProblem::solve(double lambda, bool want_edf) const {
  Eigen::LDLT<Eigen::MatrixXd> ldlt = factor(lambda);
  Solution sol;
  sol.theta = ldlt.solve(c_);
  sol.gamma.noalias() = Q2_ * sol.theta;
  sol.rss = (y_ - U_ * sol.theta).squaredNorm();
  if (want_edf) {
    sol.edf = ldlt.solve(G_).trace();
  }
  return sol;
}

double ReducedProblem::edf_estimate(double lambda, std::uint64_t seed, int probes) const {
  if (probes < 1) throw UsageError("trace estimation needs at least one probe");
  Eigen::LDLT<Eigen::MatrixXd> ldlt = factor(lambda);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);
  const Eigen::Index kdim = G_.cols();
  Eigen::VectorXd z(kdim);
  double acc = 0;
  for (int s = 0; s < probes; ++s) {
    for (Eigen::Index i = 0; i < kdim; ++i) z[i] = coin(rng) ? 1.0 : -1.0;
    acc += z.dot(ldlt.solve(G_ * z));
  }
  return acc / probes;
}

std::vector<double> ReducedProblem::default_lambda_grid(int count) const {
  if (count < 2) throw UsageError("lambda grid needs at least two points");
  const double scale = trace_P_ > 0 ? trace_BtB_ / trace_P_ : 1.0;
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double expo = -6.0 + 10.0 * i / (count - 1);
    grid[static_cast<std::size_t>(i)] = scale * std::pow(10.0, expo);
  }
  return grid;
}

std::vector<LambdaScore> ReducedProblem::cross_validate(const std::vector<double>& grid,
                                                        int folds, std::uint64_t seed,
                                                        int& skipped) const {
  if (folds < 2) throw UsageError("cross-validation needs at least two folds");
  if (folds > mesh_.num_tets()) {
    throw UsageError("more folds than tetrahedra (" + std::to_string(folds) + " > " +
                     std::to_string(mesh_.num_tets()) + ")");
  }
  skipped = 0;

  // Deal a seeded shuffle of tet ids round-robin so folds are as equal as
  // possible, then route each observation through its tet.
  std::vector<int> order(static_cast<std::size_t>(mesh_.num_tets()));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold_of_tet(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    fold_of_tet[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }
  std::vector<std::vector<Eigen::Index>> fold_rows(static_cast<std::size_t>(folds));
  for (Eigen::Index p = 0; p < y_.size(); ++p) {
    fold_rows[static_cast<std::size_t>(fold_of_tet[static_cast<std::size_t>(point_tet_[static_cast<std::size_t>(p)])])]
        .push_back(p);
  }
  for (int f = 0; f < folds; ++f) {
    if (static_cast<Eigen::Index>(fold_rows[static_cast<std::size_t>(f)].size()) == y_.size()) {
      throw DataError("cross-validation fold " + std::to_string(f) +
                      " holds every observation; training set is empty");
    }
  }

  const Eigen::Index kdim = G_.cols();
  std::vector<double> sq_sum(grid.size(), 0.0);
  std::vector<long> pt_count(grid.size(), 0);

  for (int f = 0; f < folds; ++f) {
    const auto& rows = fold_rows[static_cast<std::size_t>(f)];
    if (rows.empty()) continue;
    const Eigen::Index nf = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd Uf(nf, kdim);
    Eigen::VectorXd yf(nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
      Uf.row(i) = U_.row(rows[static_cast<std::size_t>(i)]);
      yf[i] = y_[rows[static_cast<std::size_t>(i)]];
    }
    Eigen::MatrixXd Gf = G_;
    Gf.noalias() -= Uf.transpose() * Uf;
    Eigen::VectorXd cf = c_ - Uf.transpose() * yf;
    const double n_train = static_cast<double>(y_.size() - nf);

    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      Eigen::MatrixXd M = Gf + (grid[gi] / n_train) * E_;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
      const auto& D = ldlt.vectorD();
      const double dmx = D.maxCoeff();
      if (!std::isfinite(dmx) || dmx <= 0 || D.minCoeff() <= dmx * 1e-14) {
        ++skipped;  // singular training fit: drop this fold/lambda pair
        continue;
      }
      Eigen::VectorXd theta = ldlt.solve(cf);
      sq_sum[gi] += (yf - Uf * theta).squaredNorm();
      pt_count[gi] += nf;
    }
  }

  std::vector<LambdaScore> out(grid.size());
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    out[gi].lambda = grid[gi];
    out[gi].score = pt_count[gi] > 0 ? sq_sum[gi] / static_cast<double>(pt_count[gi]) : kInf;
    out[gi].rss = kNaN;
    out[gi].edf = kNaN;
  }
  return out;
}

double gcv_score(double rss, int n, double edf) {
  const double denom = n - edf;
  if (!(denom > 1e-8 * n)) return kInf;
  return n * rss / (denom * denom);
}

FitContext make_fit_context(const TetMesh& mesh, int degree, int smoothness,
                            double rank_rel_tol) {
  if (degree < 2) {
    throw UsageError("smoothing requires degree >= 2 (penalty uses second derivatives)");
  }
  if (smoothness < 0 || smoothness >= degree) {
    throw UsageError("smoothness order must satisfy 0 <= r < degree");
  }
  FitContext ctx;
  ctx.mesh = &mesh;
  ctx.degree = degree;
  ctx.smoothness = smoothness;
  ctx.H = assemble_smoothness(mesh, degree, smoothness);
  ctx.Q2 = nullspace_basis(ctx.H.H, rank_rel_tol, ctx.rank_H, ctx.nullspace_residual);
  if (ctx.Q2.cols() == 0) {
    throw NumericalError("smoothness constraints leave no degrees of freedom");
  }
  ctx.blocks = assemble_penalty(mesh, degree);
  return ctx;
}

FitResult fit_tpst(const TetMesh& mesh, const Dataset& data, const FitConfig& config,
                   const std::vector<double>& penalty_weights) {
  FitContext ctx = make_fit_context(mesh, config.degree, config.smoothness,
                                    config.rank_rel_tol);
  return fit_tpst(ctx, data, config, penalty_weights);
}

FitResult fit_tpst(const FitContext& ctx, const Dataset& data, const FitConfig& config,
                   const std::vector<double>& penalty_weights) {
  if (ctx.mesh == nullptr) throw UsageError("fit context is not initialised");
  if (config.degree != ctx.degree || config.smoothness != ctx.smoothness) {
    throw UsageError("fit config degree/smoothness differ from the prepared context");
  }
  const TetMesh& mesh = *ctx.mesh;

  FitResult res;
  res.n_used = static_cast<int>(data.values.size());
  res.n_dropped = data.dropped;
  res.rank_H = ctx.rank_H;
  res.nullspace_residual = ctx.nullspace_residual;
  res.nullspace_dim = static_cast<int>(ctx.Q2.cols());

  PenaltyBlocks penalty = ctx.blocks;
  if (!penalty_weights.empty()) {
    if (penalty_weights.size() != static_cast<std::size_t>(mesh.num_tets())) {
      throw UsageError("penalty weight count does not match tetrahedron count");
    }
    for (double w : penalty_weights) {
      if (!(w >= 0) || !std::isfinite(w)) {
        throw UsageError("penalty weights must be finite and nonnegative");
      }
    }
    penalty.weights = penalty_weights;
  }
  ReducedProblem problem(mesh, config.degree, ctx.Q2, penalty, data);

  std::vector<double> grid;
  if (config.select == Select::kFixed) {
    grid = {config.fixed_lambda};
  } else if (!config.lambda_grid.empty()) {
    grid = config.lambda_grid;
    std::sort(grid.begin(), grid.end());
    for (double l : grid) {
      if (!(l >= 0) || !std::isfinite(l)) throw UsageError("lambda grid values must be finite and nonnegative");
    }
  } else {
    grid = problem.default_lambda_grid();
  }

  ReducedProblem::Solution best_sol;
  double best_lambda = grid.front();

  if (config.select == Select::kCV) {
    int skipped = 0;
    res.path = problem.cross_validate(grid, config.cv_folds, sub_seed(config.seed, "cv-folds", 0),
                                      skipped);
    std::size_t best = 0;
    for (std::size_t gi = 1; gi < res.path.size(); ++gi) {
      if (res.path[gi].score < res.path[best].score) best = gi;  // ties keep smaller lambda
    }
    if (!std::isfinite(res.path[best].score)) {
      throw NumericalError("every cross-validation fit was singular; increase lambda range or data");
    }
    best_lambda = grid[best];
    best_sol = problem.solve(best_lambda, !config.hutchinson_trace);
    if (config.hutchinson_trace) {
      best_sol.edf = problem.edf_estimate(best_lambda, sub_seed(config.seed, "edf-probe", best),
                                          config.hutchinson_probes);
    }
  } else {
    // GCV sweep (or the single fixed lambda, scored for reporting).
    res.path.resize(grid.size());
    std::vector<ReducedProblem::Solution> sols(grid.size());
    parallel_for(grid.size(), [&](std::size_t gi) {
      LambdaScore& sc = res.path[gi];
      sc.lambda = grid[gi];
      try {
        sols[gi] = problem.solve(grid[gi], !config.hutchinson_trace);
        if (config.hutchinson_trace) {
          sols[gi].edf = problem.edf_estimate(grid[gi], sub_seed(config.seed, "edf-probe", gi),
                                              config.hutchinson_probes);
        }
        sc.rss = sols[gi].rss;
        sc.edf = sols[gi].edf;
        sc.score = gcv_score(sc.rss, problem.n(), sc.edf);
      } catch (const NumericalError&) {
        if (config.select == Select::kFixed) throw;
        sc.rss = kNaN;
        sc.edf = kNaN;
        sc.score = kInf;  // singular at this lambda: never selected
      }
    });
    std::size_t best = 0;
    for (std::size_t gi = 1; gi < res.path.size(); ++gi) {
      if (res.path[gi].score < res.path[best].score) best = gi;
    }
    if (!std::isfinite(res.path[best].score) && config.select == Select::kGCV) {
      throw NumericalError("GCV was undefined on the whole lambda grid");
    }
    best_lambda = grid[best];
    best_sol = sols[best];
  }

  res.lambda = best_lambda;
  res.rss = best_sol.rss;
  res.edf = best_sol.edf;
  res.gcv = gcv_score(best_sol.rss, problem.n(), best_sol.edf);
  res.field.mesh = &mesh;
  res.field.degree = config.degree;
  res.field.smoothness = config.smoothness;
  res.field.coeffs = best_sol.gamma;

  double cres = 0;
  Eigen::VectorXd hg = ctx.H.H * best_sol.gamma;
  if (hg.size() > 0) cres = hg.cwiseAbs().maxCoeff();
  res.constraint_residual = cres;
  return res;
}

std::vector<std::optional<double>> predict(const SplineField& field,
                                           const std::vector<Point3>& points,
                                           double locate_tol) {
  std::vector<std::optional<double>> out(points.size());
  parallel_for(points.size(), [&](std::size_t p) {
    out[p] = eval_spline(field, points[p], locate_tol);
  });
  return out;
}

}  // namespace tpst
