#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tsvs/lasso.hpp"

#include "support.hpp"

#include <algorithm>
#include <cmath>

using namespace tsvs;
using namespace tsvs::lasso;
using tsvs::testing::kind_of;
using tsvs::testing::random_matrix;
using tsvs::testing::random_vector;

namespace {

// Standardized X and centered y, the inputs lasso_path expects.
struct Problem {
  Matrix X;
  Vector y;
};

Problem standardized(Matrix X, Vector y) {
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    X.col(j).array() -= X.col(j).mean();
    X.col(j) /= std::sqrt(X.col(j).squaredNorm() / (X.rows() - 1));
  }
  y.array() -= y.mean();
  return {X, y};
}

Problem sparse_problem(int n, int p, std::uint64_t seed) {
  const Matrix X = random_matrix(n, p, seed);
  Vector beta = Vector::Zero(p);
  for (int j = 0; j < std::min(p, 4); ++j) beta(j) = (j % 2 ? -1.0 : 1.0) * (1.0 + j);
  return standardized(X, X * beta + random_vector(n, seed + 1000));
}

// Proximal gradient (ISTA) run to high precision: an independent solver.
Vector ista(const Matrix& X, const Vector& y, double lambda) {
  const double n = static_cast<double>(X.rows());
  const double step = 1.0 / (Eigen::SelfAdjointEigenSolver<Matrix>(X.transpose() * X / n).eigenvalues().maxCoeff());
  Vector b = Vector::Zero(X.cols());
  for (int it = 0; it < 200000; ++it) {
    const Vector grad = -X.transpose() * (y - X * b) / n;
    Vector next = b - step * grad;
    for (Eigen::Index j = 0; j < next.size(); ++j) next(j) = soft_threshold(next(j), step * lambda);
    const double change = (next - b).cwiseAbs().maxCoeff();
    b = next;
    if (change < 1e-14) break;
  }
  return b;
}

}  // namespace

TEST_CASE("soft_threshold") {
  CHECK(soft_threshold(3, 1) == 2);
  CHECK(soft_threshold(-0.5, 1) == 0);
  CHECK(soft_threshold(-2.5, 1) == -1.5);
  CHECK(soft_threshold(0.7, 0) == 0.7);
  CHECK(kind_of([] { soft_threshold(1, -1); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("config validation") {
  LassoConfig c;
  CHECK_NOTHROW(c.validate(100));
  c.folds = 1;
  CHECK(kind_of([&] { c.validate(100); }) == ErrorKind::InvalidArgument);
  c = {};
  c.lambda_min_ratio = 1.0;
  CHECK(kind_of([&] { c.validate(100); }) == ErrorKind::InvalidArgument);
  c = {};
  c.n_lambdas = 1;
  CHECK(kind_of([&] { c.validate(100); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("lambda grid is log-spaced from lambda_max") {
  const auto p = sparse_problem(60, 15, 3);
  LassoConfig c;
  const auto grid = lambda_grid(p.X, p.y, c);
  REQUIRE(grid.size() == 100);
  const double lmax = (p.X.transpose() * p.y).cwiseAbs().maxCoeff() / 60.0;
  CHECK(grid.front() == doctest::Approx(lmax).epsilon(1e-14));
  CHECK(grid.back() == doctest::Approx(lmax * 1e-3).epsilon(1e-12));
  for (std::size_t k = 1; k < grid.size(); ++k) {
    CHECK(grid[k] < grid[k - 1]);
    if (k >= 2) CHECK(std::log(grid[k - 1] / grid[k]) == doctest::Approx(std::log(grid[k - 2] / grid[k - 1])));
  }
}

TEST_CASE("support at lambda_max is empty") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p = sparse_problem(40, 30, seed);
    const auto path = lasso_path(p.X, p.y, LassoConfig{});
    REQUIRE(!path.empty());
    CHECK(path.front().support.empty());
    CHECK(path.front().coefficients.isZero(0.0));
  }
}

TEST_CASE("lambda = 0 reproduces OLS on a full-rank problem") {
  const auto p = sparse_problem(80, 8, 11);
  const auto path = lasso_path(p.X, p.y, std::vector<double>{0.0}, LassoConfig{});
  const Vector ols = (p.X.transpose() * p.X).ldlt().solve(p.X.transpose() * p.y);
  CHECK((path.back().coefficients - ols).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("single lambda agrees with a proximal-gradient oracle") {
  const auto p = sparse_problem(50, 10, 21);
  const double lambda = 0.1 * lambda_grid(p.X, p.y, LassoConfig{}).front();
  const auto fit = lasso_path(p.X, p.y, std::vector<double>{lambda}, LassoConfig{}).back();
  const Vector oracle = ista(p.X, p.y, lambda);
  CHECK(kkt_residual(p.X, p.y, fit.coefficients, lambda) < 1e-6);
  CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(objective(p.X, p.y, fit.coefficients, lambda) <= objective(p.X, p.y, oracle, lambda) + 1e-10);

  // Clipped OLS candidates are never better than the solution.
  const Vector ols = (p.X.transpose() * p.X).ldlt().solve(p.X.transpose() * p.y);
  Vector clipped = ols;
  for (Eigen::Index j = 0; j < clipped.size(); ++j) clipped(j) = soft_threshold(ols(j), lambda);
  CHECK(objective(p.X, p.y, fit.coefficients, lambda) <= objective(p.X, p.y, clipped, lambda) + 1e-12);
  CHECK(objective(p.X, p.y, fit.coefficients, lambda) <= objective(p.X, p.y, ols, lambda) + 1e-12);
}

TEST_CASE("KKT conditions hold along every path") {
  const std::vector<std::pair<int, int>> shapes{{50, 10}, {100, 20}, {60, 200}, {40, 120}};
  std::uint64_t seed = 100;
  for (auto [n, pp] : shapes) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto p = sparse_problem(n, pp, ++seed);
      const auto path = lasso_path(p.X, p.y, LassoConfig{});
      for (const auto& fit : path) {
        CHECK(kkt_residual(p.X, p.y, fit.coefficients, fit.lambda) < 1e-6);
        IndexSet nz;
        for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j)
          if (fit.coefficients(j) != 0.0) nz.insert(static_cast<int>(j));
        CHECK(nz == fit.support);
      }
    }
  }
}

TEST_CASE("objective never increases between sweeps") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto p = sparse_problem(50, seed % 2 ? 30 : 120, seed);
    PathTrace trace;
    const auto path = lasso_path(p.X, p.y, LassoConfig{}, &trace);
    REQUIRE(trace.sweep_objectives.size() == path.size());
    for (const auto& objs : trace.sweep_objectives) {
      for (std::size_t k = 1; k < objs.size(); ++k) CHECK(objs[k] <= objs[k - 1] * (1 + 1e-12) + 1e-15);
    }
  }
}

TEST_CASE("path stops when the fit saturates") {
  const Matrix X = standardized(random_matrix(30, 100, 5), random_vector(30, 6)).X;
  const Vector y = standardized(random_matrix(30, 100, 5), random_vector(30, 6)).y;
  const auto path = lasso_path(X, y, LassoConfig{});
  CHECK(path.size() <= 100);
  CHECK(static_cast<int>(path.back().support.size()) <= 29);
}

TEST_CASE("fold assignment") {
  const auto folds = fold_assignment(103, 10, 42);
  REQUIRE(folds.size() == 103);
  std::vector<int> counts(10, 0);
  for (int f : folds) {
    REQUIRE(f >= 0);
    REQUIRE(f < 10);
    ++counts[f];
  }
  CHECK(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()) <= 1);
  CHECK(fold_assignment(103, 10, 42) == folds);
  CHECK(fold_assignment(103, 10, 43) != folds);
}

TEST_CASE("cv_select rejects degenerate folds") {
  const Matrix X = random_matrix(15, 3, 1);
  LassoConfig c;
  c.folds = 10;
  CHECK(kind_of([&] { cv_select(X, X.col(0), c); }) == ErrorKind::DegenerateFolds);
}

TEST_CASE("cv_select output contract") {
  const Matrix X = random_matrix(80, 12, 7) * 2.0 + Matrix::Constant(80, 12, 3.0);
  const Vector y = 2.0 * X.col(1) - X.col(4) + random_vector(80, 8) + Vector::Constant(80, 5.0);
  LassoConfig c;
  c.cv_seed = 9;
  const auto fit = cv_select(X, y, c);
  REQUIRE(!fit.cv_curve.empty());
  for (std::size_t k = 1; k < fit.cv_curve.size(); ++k) CHECK(fit.cv_curve[k].lambda < fit.cv_curve[k - 1].lambda);
  const auto best = std::min_element(fit.cv_curve.begin(), fit.cv_curve.end(),
                                     [](const CvPoint& a, const CvPoint& b) { return a.mean_error < b.mean_error; });
  CHECK(fit.lambda == best->lambda);
  for (Eigen::Index j = 0; j < 12; ++j) CHECK((fit.coefficients(j) != 0.0) == (fit.support.count(static_cast<int>(j)) == 1));
  CHECK(fit.support.count(1));
  CHECK(fit.support.count(4));

  // Original-scale coefficients reproduce the standardized fit's predictions
  // (columns scaled by their 1/N standard deviation).
  Matrix Xs = X;
  Vector sd(12);
  for (int j = 0; j < 12; ++j) {
    Xs.col(j).array() -= X.col(j).mean();
    sd(j) = std::sqrt(Xs.col(j).squaredNorm() / 80.0);
    Xs.col(j) /= sd(j);
  }
  const Vector yc = (y.array() - y.mean()).matrix();
  const auto grid = lambda_grid(Xs, yc, c);
  std::size_t at = 0;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (std::fabs(grid[k] - fit.lambda) < std::fabs(grid[at] - fit.lambda)) at = k;
  CHECK(grid[at] == doctest::Approx(fit.lambda).epsilon(1e-10));
  const std::vector<double> head(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(at) + 1);
  const auto std_fit = lasso_path(Xs, yc, head, c).back();
  const Vector pred_std = Xs * std_fit.coefficients + Vector::Constant(80, y.mean());
  const Vector pred = X * fit.coefficients + Vector::Constant(80, fit.intercept);
  CHECK((pred - pred_std).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("cv_select is deterministic given the seed") {
  const Matrix X = random_matrix(100, 40, 17);
  const Vector y = X.col(0) * 0.5 + random_vector(100, 18);
  LassoConfig c;
  c.cv_seed = 7;
  const auto a = cv_select(X, y, c);
  const auto b = cv_select(X, y, c);
  CHECK(a.lambda == b.lambda);
  CHECK(a.support == b.support);
  CHECK(a.coefficients == b.coefficients);
}

TEST_CASE("cv_select keeps a strong signal in every run") {
  int hits = 0;
  for (int run = 0; run < 100; ++run) {
    const Matrix X = random_matrix(100, 20, 5000 + run);
    const Vector y = 5.0 * X.col(0) + 0.1 * random_vector(100, 9000 + run);
    LassoConfig c;
    c.cv_seed = static_cast<std::uint64_t>(run);
    hits += cv_select(X, y, c).support.count(0) ? 1 : 0;
  }
  CHECK(hits == 100);
}

// Reference: scikit-learn LassoCV (CV-min, 100 alphas, eps 1e-3, 10 shuffled
// folds) leaves the support empty in 41 of 100 such runs.
TEST_CASE("cv_select under the null matches the CV-min reference rate") {
  int empty = 0;
  for (int run = 0; run < 100; ++run) {
    const Matrix X = random_matrix(100, 50, 20000 + run);
    const Vector y = random_vector(100, 30000 + run);
    LassoConfig c;
    c.cv_seed = static_cast<std::uint64_t>(run);
    empty += cv_select(X, y, c).support.empty() ? 1 : 0;
  }
  MESSAGE("empty supports under the null: " << empty << "/100");
  CHECK(empty >= 25);
  CHECK(empty <= 60);
}

TEST_CASE("pure-noise response leaves the support empty") {
  int empty = 0;
  for (int run = 0; run < 100; ++run) {
    const Matrix X = random_matrix(100, 50, 20000 + run);
    const Vector y = random_vector(100, 30000 + run);
    LassoConfig c;
    c.cv_seed = static_cast<std::uint64_t>(run);
    empty += cv_select(X, y, c).support.empty() ? 1 : 0;
  }
  CHECK(empty >= 90);
}
