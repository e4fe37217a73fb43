#pragma once

#include "tsvs/data_model.hpp"

#include <cstdint>
#include <vector>

namespace tsvs::lasso {

struct LassoConfig {
  int n_lambdas = 100;
  double lambda_min_ratio = 1e-3;
  int folds = 10;
  double tol = 1e-7;     // on the largest coefficient change in a sweep
  int max_iter = 100000;  // sweeps per lambda
  std::uint64_t cv_seed = 0;
  /// The path stops once the fit explains this fraction of the variance of y,
  /// or once the support reaches N - 1 columns (the remaining, smaller
  /// lambdas are dropped).
  double saturation_r2 = 0.999;

  void validate(int n_rows) const;
};

struct CvPoint {
  double lambda = 0.0;
  double mean_error = 0.0;
  double se = 0.0;
};

struct LassoFit {
  double lambda = 0.0;
  Vector coefficients;
  double intercept = 0.0;
  IndexSet support;
  std::vector<CvPoint> cv_curve;  // descending lambda; empty for path fits
};

/// Per-sweep objective values recorded while fitting a path.
struct PathTrace {
  std::vector<std::vector<double>> sweep_objectives;  // one list per lambda
};

double soft_threshold(double z, double gamma);

/// Log-spaced grid from lambda_max = max_j |X_j'y|/N down to
/// lambda_max * lambda_min_ratio.
std::vector<double> lambda_grid(const Matrix& X, const Vector& y, const LassoConfig& config);

/// Objective sum((y - X b)^2) / (2N) + lambda * |b|_1.
double objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda);

/// Coordinate-descent solutions along `lambdas` (warm started, descending).
/// X is expected standardized and y centered; no intercept is fitted. The
/// returned path may be shorter than `lambdas` when the fit saturates.
std::vector<LassoFit> lasso_path(const Matrix& X, const Vector& y, const std::vector<double>& lambdas,
                                 const LassoConfig& config, PathTrace* trace = nullptr);

/// Path over the default grid.
std::vector<LassoFit> lasso_path(const Matrix& X, const Vector& y, const LassoConfig& config,
                                 PathTrace* trace = nullptr);

/// Largest KKT violation of `beta` at `lambda` for the objective above.
double kkt_residual(const Matrix& X, const Vector& y, const Vector& beta, double lambda);

/// K-fold cross-validated lasso with the CV-min rule. X is on its original
/// scale; standardization happens inside each training fold. The CV curve
/// covers the lambdas reached by every fold. The returned
/// coefficients and intercept are on the original scale of X.
LassoFit cv_select(const Matrix& X, const Vector& y, const LassoConfig& config);

/// Fold labels (0..folds-1) from a seeded permutation split into
/// contiguous blocks.
std::vector<int> fold_assignment(int n, int folds, std::uint64_t seed);

}  // namespace tsvs::lasso
