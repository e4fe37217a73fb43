#include "tsvs/lasso.hpp"

#include "tsvs/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace tsvs::lasso {

void LassoConfig::validate(int n_rows) const {
  require(n_lambdas >= 2, "n_lambdas must be at least 2");
  require(lambda_min_ratio > 0 && lambda_min_ratio < 1, "lambda_min_ratio must lie in (0, 1)");
  require(folds >= 2 && folds <= n_rows, "folds must lie in [2, N]");
  require(tol > 0, "tol must be positive");
  require(saturation_r2 > 0 && saturation_r2 <= 1, "saturation_r2 must lie in (0, 1]");
  require(max_iter > 0, "max_iter must be positive");
}

double soft_threshold(double z, double gamma) {
  require(gamma >= 0, "soft_threshold needs gamma >= 0");
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

std::vector<double> lambda_grid(const Matrix& X, const Vector& y, const LassoConfig& config) {
  const double n = static_cast<double>(X.rows());
  const double lambda_max = (X.transpose() * y).cwiseAbs().maxCoeff() / n;
  std::vector<double> grid(static_cast<std::size_t>(config.n_lambdas));
  if (!(lambda_max > 0)) {
    std::fill(grid.begin(), grid.end(), 0.0);
    return grid;
  }
  const double log_max = std::log(lambda_max);
  const double log_min = std::log(lambda_max * config.lambda_min_ratio);
  for (int k = 0; k < config.n_lambdas; ++k) {
    const double frac = static_cast<double>(k) / (config.n_lambdas - 1);
    grid[k] = std::exp(log_max + frac * (log_min - log_max));
  }
  grid.front() = lambda_max;
  return grid;
}

double objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda) {
  const double n = static_cast<double>(X.rows());
  return (y - X * beta).squaredNorm() / (2.0 * n) + lambda * beta.lpNorm<1>();
}

double kkt_residual(const Matrix& X, const Vector& y, const Vector& beta, double lambda) {
  const double n = static_cast<double>(X.rows());
  const Vector grad = X.transpose() * (y - X * beta) / n;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double v = beta(j) == 0.0 ? std::max(0.0, std::fabs(grad(j)) - lambda)
                                     : std::fabs(grad(j) - lambda * (beta(j) > 0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

namespace {

// Coordinate descent at one lambda; beta and the residual are updated in place.
class CoordinateDescent {
 public:
  CoordinateDescent(const Matrix& X, const LassoConfig& config)
      : X_(X), config_(config), n_(static_cast<double>(X.rows())) {
    col_scale_.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) col_scale_(j) = X.col(j).squaredNorm() / n_;
  }

  void solve(double lambda, Vector& beta, Vector& residual, std::vector<double>* objectives) {
    int sweeps = 0;
    auto record = [&] {
      if (objectives) {
        objectives->push_back(residual.squaredNorm() / (2.0 * n_) + lambda * beta.lpNorm<1>());
      }
    };
    record();
    while (true) {
      const double full_change = sweep(lambda, beta, residual, /*active_only=*/false);
      ++sweeps;
      record();
      if (full_change < config_.tol) return;
      int active_sweeps = 0;
      while (true) {
        if (sweeps >= config_.max_iter) {
          std::ostringstream msg;
          msg << "coordinate descent did not converge at lambda = " << lambda;
          fail(ErrorKind::NonConvergence, msg.str());
        }
        const double change = sweep(lambda, beta, residual, /*active_only=*/true);
        ++sweeps;
        record();
        if (change < config_.tol) break;
        if (++active_sweeps % kExactEvery == 0) {
          const bool settled = exact_step(lambda, beta, residual);
          record();
          if (settled) break;
        }
      }
      if (sweeps >= config_.max_iter) {
        std::ostringstream msg;
        msg << "coordinate descent did not converge at lambda = " << lambda;
        fail(ErrorKind::NonConvergence, msg.str());
      }
    }
  }

 private:
  static constexpr int kExactEvery = 10;

  // Slow convergence usually means the active set has nearly settled. For
  // the current sign pattern the minimizer is
  // b_A = (X_A'X_A)^{-1}(X_A'y - N lambda s_A). If some sign disagrees, the
  // step stops at the first coordinate that reaches zero and drops it; the
  // objective decreases along the segment either way.
  bool exact_step(double lambda, Vector& beta, Vector& residual) {
    std::vector<int> active;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      if (beta(j) != 0.0) active.push_back(static_cast<int>(j));
    }
    if (active.empty() || static_cast<Eigen::Index>(active.size()) >= X_.rows()) return false;
    const Matrix XA = X_(Eigen::all, active);
    const Vector bA = beta(active);
    const Vector y = residual + XA * bA;
    Vector rhs = XA.transpose() * y;
    for (std::size_t a = 0; a < active.size(); ++a) rhs(a) -= n_ * lambda * (bA(a) > 0 ? 1.0 : -1.0);
    const Eigen::LDLT<Matrix> ldlt(XA.transpose() * XA);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
    const Vector b = ldlt.solve(rhs);
    if (!b.allFinite()) return false;
    double t = 1.0;
    int crossing = -1;
    for (std::size_t a = 0; a < active.size(); ++a) {
      if (b(a) * bA(a) <= 0) {
        const double ta = bA(a) / (bA(a) - b(a));
        if (ta < t) {
          t = ta;
          crossing = static_cast<int>(a);
        }
      }
    }
    Vector next = bA + t * (b - bA);
    if (crossing >= 0) next(crossing) = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a) {
      if (next(a) * bA(a) < 0) next(a) = 0.0;
    }
    const Vector r = y - XA * next;
    const double before = residual.squaredNorm() / (2.0 * n_) + lambda * bA.lpNorm<1>();
    const double after = r.squaredNorm() / (2.0 * n_) + lambda * next.lpNorm<1>();
    if (!(after <= before)) return false;
    for (std::size_t a = 0; a < active.size(); ++a) beta(active[a]) = next(a);
    residual = r;
    return crossing < 0;
  }

  double sweep(double lambda, Vector& beta, Vector& residual, bool active_only) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < X_.cols(); ++j) {
      const double old = beta(j);
      if (active_only && old == 0.0) continue;
      const double scale = col_scale_(j);
      if (scale <= 0) continue;
      const double z = X_.col(j).dot(residual) / n_ + scale * old;
      const double updated = soft_threshold(z, lambda) / scale;
      const double delta = updated - old;
      if (delta != 0.0) {
        residual.noalias() -= delta * X_.col(j);
        beta(j) = updated;
        max_change = std::max(max_change, std::fabs(delta));
      }
    }
    return max_change;
  }

  const Matrix& X_;
  const LassoConfig& config_;
  double n_;
  Vector col_scale_;
};

IndexSet support_of(const Vector& beta) {
  IndexSet s;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta(j) != 0.0) s.insert(static_cast<int>(j));
  }
  return s;
}

}  // namespace

std::vector<LassoFit> lasso_path(const Matrix& X, const Vector& y, const std::vector<double>& lambdas,
                                 const LassoConfig& config, PathTrace* trace) {
  require(X.rows() == y.size(), "rows(X) must equal length(y)");
  require(std::is_sorted(lambdas.rbegin(), lambdas.rend()), "lambdas must be in descending order");
  CoordinateDescent cd(X, config);
  Vector beta = Vector::Zero(X.cols());
  Vector residual = y;
  std::vector<LassoFit> path;
  path.reserve(lambdas.size());
  if (trace) trace->sweep_objectives.clear();
  const double tss = y.squaredNorm();
  for (double lambda : lambdas) {
    std::vector<double>* objectives = nullptr;
    if (trace) objectives = &trace->sweep_objectives.emplace_back();
    cd.solve(lambda, beta, residual, objectives);
    LassoFit fit;
    fit.lambda = lambda;
    fit.coefficients = beta;
    fit.support = support_of(beta);
    path.push_back(std::move(fit));
    if (tss > 0 && 1.0 - residual.squaredNorm() / tss >= config.saturation_r2) break;
    if (static_cast<Eigen::Index>(path.back().support.size()) >= X.rows() - 1) break;
  }
  return path;
}

std::vector<LassoFit> lasso_path(const Matrix& X, const Vector& y, const LassoConfig& config,
                                 PathTrace* trace) {
  return lasso_path(X, y, lambda_grid(X, y, config), config, trace);
}

std::vector<int> fold_assignment(int n, int folds, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with explicit index draws keeps the permutation independent
  // of the standard library's shuffle implementation.
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<int> label(static_cast<std::size_t>(n));
  const int base = n / folds;
  const int extra = n % folds;
  int pos = 0;
  for (int f = 0; f < folds; ++f) {
    const int size = base + (f < extra ? 1 : 0);
    for (int k = 0; k < size; ++k) label[order[pos++]] = f;
  }
  return label;
}

namespace {

struct Scaled {
  Matrix X;
  Vector y;
  Vector means;
  Vector sds;
  double y_mean = 0.0;
};

// Centers and scales columns using the 1/N variance, as lasso solvers
// conventionally do; zero-variance columns are left at zero.
Scaled scale_training(const Matrix& X, const Vector& y) {
  Scaled s;
  const double n = static_cast<double>(X.rows());
  s.means = X.colwise().mean().transpose();
  s.X = X.rowwise() - s.means.transpose();
  s.sds.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double sd = std::sqrt(s.X.col(j).squaredNorm() / n);
    s.sds(j) = sd;
    if (sd > 1e-12) {
      s.X.col(j) /= sd;
    } else {
      s.X.col(j).setZero();
    }
  }
  s.y_mean = y.mean();
  s.y = y.array() - s.y_mean;
  return s;
}

Vector to_original_scale(const Vector& beta, const Scaled& s) {
  Vector out = Vector::Zero(beta.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (s.sds(j) > 1e-12) out(j) = beta(j) / s.sds(j);
  }
  return out;
}

}  // namespace

LassoFit cv_select(const Matrix& X, const Vector& y, const LassoConfig& config) {
  require(X.rows() == y.size(), "rows(X) must equal length(y)");
  const int n = static_cast<int>(X.rows());
  config.validate(n);
  if (n / config.folds < 2) {
    fail(ErrorKind::DegenerateFolds, "folds of fewer than 2 rows (N = " + std::to_string(n) +
                                         ", folds = " + std::to_string(config.folds) + ")");
  }

  const Scaled full = scale_training(X, y);
  const std::vector<double> lambdas = lambda_grid(full.X, full.y, config);
  const auto labels = fold_assignment(n, config.folds, config.cv_seed);

  // errors(i, k): squared prediction error of row i at lambda k.
  Matrix errors(n, config.n_lambdas);
  int reached = config.n_lambdas;
  for (int f = 0; f < config.folds; ++f) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) (labels[i] == f ? test : train).push_back(i);
    const Matrix X_train = X(train, Eigen::all);
    const Vector y_train = y(train);
    const Scaled s = scale_training(X_train, y_train);
    const auto path = lasso_path(s.X, s.y, lambdas, config);
    const Matrix X_test = X(test, Eigen::all);
    reached = std::min(reached, static_cast<int>(path.size()));
    for (int k = 0; k < static_cast<int>(path.size()); ++k) {
      const Vector beta = to_original_scale(path[k].coefficients, s);
      const double intercept = s.y_mean - s.means.dot(beta);
      const Vector pred = (X_test * beta).array() + intercept;
      for (std::size_t t = 0; t < test.size(); ++t) {
        const double e = y(test[t]) - pred(static_cast<Eigen::Index>(t));
        errors(test[t], k) = e * e;
      }
    }
  }

  std::vector<CvPoint> curve(static_cast<std::size_t>(reached));
  int best = 0;
  for (int k = 0; k < reached; ++k) {
    const double mean = errors.col(k).mean();
    const double var = (errors.col(k).array() - mean).square().sum() / (n - 1);
    curve[k] = {lambdas[k], mean, std::sqrt(var / n)};
    // Strict comparison: ties go to the larger lambda seen first.
    if (mean < curve[best].mean_error) best = k;
  }

  const std::vector<double> refit_grid(lambdas.begin(), lambdas.begin() + best + 1);
  const auto path = lasso_path(full.X, full.y, refit_grid, config);
  LassoFit fit;
  fit.lambda = path.back().lambda;
  fit.coefficients = to_original_scale(path.back().coefficients, full);
  fit.intercept = full.y_mean - full.means.dot(fit.coefficients);
  fit.support = path.back().support;
  fit.cv_curve = std::move(curve);
  return fit;
}

}  // namespace tsvs::lasso
