#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <optional>
#include <vector>

#include "tpst/bernstein.hpp"
#include "tpst/mesh.hpp"
#include "tpst/penalty.hpp"
#include "tpst/smoothness.hpp"

namespace tpst {

/// Scattered observations bound to a mesh. Points that fail to locate are
/// dropped on construction and counted in `dropped`.
struct Dataset {
  std::vector<Point3> points;     // kept points only
  Eigen::VectorXd values;
  Eigen::VectorXd weights;        // per-point weights, all 1 unless supplied
  std::vector<Location> locations;
  int dropped = 0;
};

Dataset make_dataset(const TetMesh& mesh, const std::vector<Point3>& points,
                     const Eigen::VectorXd& values,
                     const Eigen::VectorXd& weights = Eigen::VectorXd(),
                     double locate_tol = 1e-9);

/// Design matrix: row p holds the degree-d basis values of point p inside its
/// tet's coefficient block; all other columns are zero. Row sums are 1.
Eigen::SparseMatrix<double, Eigen::RowMajor> design_matrix(const Dataset& data,
                                                           const TetMesh& mesh,
                                                           int degree);

/// Orthonormal basis Q2 of the null space of H via column-pivoted Householder
/// QR of H^T (LAPACK dgeqp3): H^T = Q R, numerical rank = #{|R_ii| >
/// rank_rel_tol * |R_00|}, Q2 = trailing columns of Q. rank_rel_tol <= 0
/// selects the default 1e-10. `residual` reports max |(H Q2)_ij|.
Eigen::MatrixXd nullspace_basis(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& H, double rank_rel_tol,
    int& rank, double& residual);

/// lambda selection strategies.
enum class Select { kGCV, kCV, kFixed };

struct FitConfig {
  int degree = 3;
  int smoothness = 1;
  Select select = Select::kGCV;
  double fixed_lambda = 0;          // for Select::kFixed
  std::vector<double> lambda_grid;  // empty: 20 log-spaced in [1e-6,1e4]*scale,
                                    // scale = tr(B^T B)/tr(P)
  int cv_folds = 5;
  std::uint64_t seed = 0;
  double rank_rel_tol = 0;          // 0: default 1e-10
  double locate_tol = 1e-9;
  bool hutchinson_trace = false;    // estimate tr(S) instead of exact solve
  int hutchinson_probes = 32;
};

struct LambdaScore {
  double lambda = 0;
  double score = 0;  // GCV value or pooled CV squared error
  double rss = 0;
  double edf = 0;    // tr(S_lambda); NaN on the CV path
};

struct FitResult {
  SplineField field;
  double lambda = 0;
  double rss = 0;
  double edf = 0;
  double gcv = 0;
  std::vector<LambdaScore> path;
  int nullspace_dim = 0;
  int rank_H = 0;
  double nullspace_residual = 0;   // max |(H Q2)_ij|
  double constraint_residual = 0;  // ||H g||_inf of the fitted coefficients
  int n_used = 0;
  int n_dropped = 0;
  // Filled by the adaptive smoother only:
  double c_value = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> omega;
  std::vector<double> tv;
  std::vector<std::pair<double, double>> c_path;  // (C, GCV at reselected lambda)
};

/// Penalized least squares reduced to the smoothness null space. Holds
///   U = B Q2 (n x k), G = U^T U, E = Q2^T P Q2, c = U^T y
/// so that a lambda sweep only refactors the k x k system
///   (G + lambda/n E) theta = c.
/// All heavy members are computed once per (mesh, data, weights).
class ReducedProblem {
 public:
  ReducedProblem(const TetMesh& mesh, int degree, const Eigen::MatrixXd& Q2,
                 const PenaltyBlocks& penalty, const Dataset& data);

  struct Solution {
    Eigen::VectorXd theta;
    Eigen::VectorXd gamma;
    double rss = 0;
    double edf = std::numeric_limits<double>::quiet_NaN();
  };

  /// Solve at one lambda. Throws NumericalError when the regularised system
  /// is numerically singular (typically lambda = 0 with too little data).
  Solution solve(double lambda, bool want_edf = true) const;

  /// Hutchinson probe estimate of tr(S_lambda) (optional large-n path).
  double edf_estimate(double lambda, std::uint64_t seed, int probes) const;

  /// Default grid: 20 log-spaced values in [1e-6, 1e4] * tr(B^T B)/tr(P).
  std::vector<double> default_lambda_grid(int count = 20) const;

  /// Pooled leave-tets-out cross-validation over the lambda grid. Folds are a
  /// seeded shuffle of tet ids dealt round-robin; held-out prediction error is
  /// pooled over all points. Singular fold solves are skipped (recorded in
  /// `skipped`); ties resolve to the smaller lambda.
  std::vector<LambdaScore> cross_validate(const std::vector<double>& grid, int folds,
                                          std::uint64_t seed, int& skipped) const;

  int n() const { return static_cast<int>(y_.size()); }
  int reduced_dim() const { return static_cast<int>(G_.cols()); }
  const Eigen::MatrixXd& Q2() const { return Q2_; }
  const Eigen::MatrixXd& G() const { return G_; }
  const Eigen::MatrixXd& E() const { return E_; }

 private:
  const TetMesh& mesh_;
  int degree_;
  Eigen::MatrixXd Q2_;
  Eigen::MatrixXd U_;
  Eigen::MatrixXd G_, E_;
  Eigen::VectorXd c_, y_, w_;
  std::vector<int> point_tet_;
  double trace_BtB_ = 0, trace_P_ = 0;

  Eigen::LDLT<Eigen::MatrixXd> factor(double lambda) const;
};

double gcv_score(double rss, int n, double edf);

/// Data-independent precomputation for a (mesh, degree, smoothness) triple:
/// smoothness constraints, their null-space basis, and unweighted penalty
/// blocks. Build once and fit many datasets against it.
struct FitContext {
  const TetMesh* mesh = nullptr;
  int degree = 0;
  int smoothness = 0;
  ConstraintMatrix H;
  Eigen::MatrixXd Q2;
  int rank_H = 0;
  double nullspace_residual = 0;
  PenaltyBlocks blocks;
};

FitContext make_fit_context(const TetMesh& mesh, int degree, int smoothness,
                            double rank_rel_tol = 0);

/// Full smoothing pipeline: constraints -> null-space basis -> penalty ->
/// lambda selection -> final fit. `penalty_weights` overrides the per-tet
/// penalty weights (used by the adaptive smoother).
FitResult fit_tpst(const TetMesh& mesh, const Dataset& data, const FitConfig& config,
                   const std::vector<double>& penalty_weights = {});

/// Same pipeline against a prebuilt context (degree/smoothness must match).
FitResult fit_tpst(const FitContext& ctx, const Dataset& data, const FitConfig& config,
                   const std::vector<double>& penalty_weights = {});

/// Evaluate a fitted field at arbitrary points; nullopt outside the mesh.
std::vector<std::optional<double>> predict(const SplineField& field,
                                           const std::vector<Point3>& points,
                                           double locate_tol = 1e-9);

}  // namespace tpst
