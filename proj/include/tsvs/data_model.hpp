#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace tsvs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexSet = std::set<int>;

/// Predictor matrix with named columns, a response, and an optional set of
/// columns that must stay in every model. Validated on construction and
/// immutable afterwards.
class Dataset {
 public:
  Dataset(Matrix predictors, Vector response, std::vector<std::string> column_names,
          IndexSet locked_in = {});

  const Matrix& predictors() const noexcept { return predictors_; }
  const Vector& response() const noexcept { return response_; }
  const std::vector<std::string>& column_names() const noexcept { return names_; }
  const IndexSet& locked_in() const noexcept { return locked_in_; }

  int rows() const noexcept { return static_cast<int>(predictors_.rows()); }
  int cols() const noexcept { return static_cast<int>(predictors_.cols()); }

  /// Index of a named column; throws MissingColumn.
  int column_index(const std::string& name) const;

  /// Sub-dataset keeping only `columns` (in that order). Locked-in indices
  /// are remapped; locked columns that are dropped are removed from the set.
  Dataset select_columns(const std::vector<int>& columns) const;

 private:
  Matrix predictors_;
  Vector response_;
  std::vector<std::string> names_;
  IndexSet locked_in_;
};

struct ColumnScaling {
  double mean = 0.0;
  double sd = 1.0;
};

struct Standardized {
  Dataset data;
  std::vector<ColumnScaling> scaling;
};

struct OlsFit {
  Vector coefficients;  // intercept first when requested
  Vector residuals;
  Vector fitted;
  Vector se;
  Vector t_stats;
  Vector p_values;
  double f_stat = 0.0;
  std::pair<int, int> f_df{0, 0};
  double f_p = 1.0;
  double r_squared = 0.0;
  double sigma2_hat = 0.0;
  int df_resid = 0;
  bool has_intercept = false;
  Matrix xtx_inv;  // (X'X)^{-1} of the design actually fitted
};

struct CorrelationMatrix {
  Matrix values;
};

/// Column-pivoted QR of a design matrix with an explicit rank check: the
/// design is declared rank deficient when |R_jj| < 1e-10 * |R_00|.
class QrSolver {
 public:
  explicit QrSolver(const Matrix& design);

  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;
  /// (X'X)^{-1}
  Matrix gram_inverse() const;
  /// Projection of `v` onto the column space of the design.
  Vector project(const Vector& v) const;
  Matrix project(const Matrix& v) const;
  /// |R_00| / |R_pp|, a cheap condition estimate.
  double condition_estimate() const noexcept { return condition_; }
  int cols() const noexcept { return static_cast<int>(qr_.cols()); }

 private:
  Eigen::ColPivHouseholderQR<Matrix> qr_;
  double condition_ = 1.0;
};

inline constexpr double kRankTolerance = 1e-10;

/// Reads a comma-separated file with a header row. The response column is
/// removed from the predictors; `locked_cols` are resolved to indices.
Dataset load_csv(const std::filesystem::path& path, const std::string& response_col,
                 const std::vector<std::string>& locked_cols = {});

/// Parses CSV text (same dialect as load_csv); used for in-memory input.
Dataset parse_csv(const std::string& text, const std::string& response_col,
                  const std::vector<std::string>& locked_cols = {});

/// Centers and scales each predictor column to mean 0 and sample sd 1.
/// The response is left untouched.
Standardized standardize(const Dataset& d);

/// Inverse of standardize for the predictor matrix.
Dataset unstandardize(const Dataset& d, const std::vector<ColumnScaling>& scaling);

/// Ordinary least squares with t-based inference and an overall F test of
/// all non-intercept slopes.
OlsFit ols_fit(const Matrix& X, const Vector& y, bool intercept);

/// Pearson correlations between the columns of X.
CorrelationMatrix pairwise_correlations(const Matrix& X);

/// Correlation of every column of X with the single column `j`.
Vector correlations_with(const Matrix& X, int j);

}  // namespace tsvs
