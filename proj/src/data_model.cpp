#include "tsvs/data_model.hpp"

#include "tsvs/error.hpp"
#include "tsvs/stats.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tsvs {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::EmptyData: return "EmptyData";
    case ErrorKind::ConstantColumn: return "ConstantColumn";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::DegenerateFolds: return "DegenerateFolds";
    case ErrorKind::DegenerateComponent: return "DegenerateComponent";
    case ErrorKind::NegativeVariance: return "NegativeVariance";
    case ErrorKind::NotOverIdentified: return "NotOverIdentified";
    case ErrorKind::InfeasibleDesign: return "InfeasibleDesign";
    case ErrorKind::EmptySelection: return "EmptySelection";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

// ---------------------------------------------------------------- Dataset

Dataset::Dataset(Matrix predictors, Vector response, std::vector<std::string> column_names,
                 IndexSet locked_in)
    : predictors_(std::move(predictors)),
      response_(std::move(response)),
      names_(std::move(column_names)),
      locked_in_(std::move(locked_in)) {
  if (predictors_.rows() < 2) fail(ErrorKind::EmptyData, "dataset needs at least 2 rows");
  require(predictors_.cols() >= 1, "dataset needs at least one predictor column");
  require(response_.size() == predictors_.rows(), "response length must equal row count");
  require(static_cast<Eigen::Index>(names_.size()) == predictors_.cols(),
          "column_names length must equal column count");
  for (int j : locked_in_) {
    require(j >= 0 && j < predictors_.cols(), "locked-in index out of range");
  }
  if (!predictors_.allFinite() || !response_.allFinite()) {
    fail(ErrorKind::ParseError, "dataset contains non-finite values");
  }
}

int Dataset::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (names_[j] == name) return static_cast<int>(j);
  }
  fail(ErrorKind::MissingColumn, "column '" + name + "' not found");
}

Dataset Dataset::select_columns(const std::vector<int>& columns) const {
  Matrix sub(rows(), static_cast<Eigen::Index>(columns.size()));
  std::vector<std::string> names;
  IndexSet locked;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const int j = columns[k];
    require(j >= 0 && j < cols(), "column index out of range");
    sub.col(static_cast<Eigen::Index>(k)) = predictors_.col(j);
    names.push_back(names_[j]);
    if (locked_in_.count(j)) locked.insert(static_cast<int>(k));
  }
  return Dataset(std::move(sub), response_, std::move(names), std::move(locked));
}

// ---------------------------------------------------------------- QrSolver

QrSolver::QrSolver(const Matrix& design) {
  if (design.cols() == 0) return;
  if (design.cols() > design.rows()) {
    fail(ErrorKind::RankDeficient, "design has more columns (" + std::to_string(design.cols()) +
                                       ") than rows (" + std::to_string(design.rows()) + ")");
  }
  qr_.compute(design);
  const auto diag = qr_.matrixQR().diagonal().cwiseAbs();
  const double largest = diag(0);
  const double smallest = diag.minCoeff();
  condition_ = smallest > 0 ? largest / smallest : std::numeric_limits<double>::infinity();
  if (!(largest > 0) || smallest < kRankTolerance * largest) {
    std::ostringstream msg;
    msg << "design is rank deficient (condition estimate " << condition_ << ")";
    fail(ErrorKind::RankDeficient, msg.str());
  }
}

Vector QrSolver::solve(const Vector& rhs) const {
  if (cols() == 0) return Vector(0);
  return qr_.solve(rhs);
}

Matrix QrSolver::solve(const Matrix& rhs) const {
  if (cols() == 0) return Matrix(0, rhs.cols());
  return qr_.solve(rhs);
}

Matrix QrSolver::gram_inverse() const {
  const auto p = qr_.cols();
  if (p == 0) return Matrix(0, 0);
  const Matrix r = qr_.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Matrix r_inv =
      r.template triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
  const Matrix inner = r_inv * r_inv.transpose();
  const auto& perm = qr_.colsPermutation();
  return perm * inner * perm.transpose();
}

Vector QrSolver::project(const Vector& v) const {
  if (cols() == 0) return Vector::Zero(v.size());
  Vector tmp = qr_.householderQ().transpose() * v;
  tmp.tail(tmp.size() - qr_.cols()).setZero();
  return qr_.householderQ() * tmp;
}

Matrix QrSolver::project(const Matrix& v) const {
  if (cols() == 0) return Matrix::Zero(v.rows(), v.cols());
  Matrix tmp = qr_.householderQ().transpose() * v;
  tmp.bottomRows(tmp.rows() - qr_.cols()).setZero();
  return qr_.householderQ() * tmp;
}

// ---------------------------------------------------------------- CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << "cannot parse '" << cell << "' as a finite real at row " << row << ", column " << col;
    fail(ErrorKind::ParseError, msg.str());
  }
  return value;
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& response_col,
                  const std::vector<std::string>& locked_cols) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::EmptyData, "input has no header row");
  std::vector<std::string> header;
  for (auto h : split_commas(line)) header.emplace_back(h);

  int response_idx = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == response_col) response_idx = static_cast<int>(j);
  }
  if (response_idx < 0) fail(ErrorKind::MissingColumn, "response column '" + response_col + "' not found");

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << "row " << row_no << " has " << cells.size() << " cells, header has " << header.size();
      fail(ErrorKind::ParseError, msg.str());
    }
    std::vector<double> values(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) values[j] = parse_cell(cells[j], row_no, j + 1);
    rows.push_back(std::move(values));
  }
  if (rows.size() < 2) fail(ErrorKind::EmptyData, "need at least 2 data rows, got " + std::to_string(rows.size()));
  if (header.size() < 2) fail(ErrorKind::EmptyData, "need at least one predictor column");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(header.size() - 1);
  Matrix X(n, p);
  Vector y(n);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (static_cast<int>(j) != response_idx) names.push_back(header[j]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (static_cast<int>(j) == response_idx) {
        y(i) = rows[i][j];
      } else {
        X(i, c++) = rows[i][j];
      }
    }
  }

  IndexSet locked;
  for (const auto& name : locked_cols) {
    bool found = false;
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == name) {
        locked.insert(static_cast<int>(j));
        found = true;
      }
    }
    if (!found) fail(ErrorKind::MissingColumn, "locked column '" + name + "' not found");
  }
  return Dataset(std::move(X), std::move(y), std::move(names), std::move(locked));
}

Dataset load_csv(const std::filesystem::path& path, const std::string& response_col,
                 const std::vector<std::string>& locked_cols) {
  std::ifstream file(path);
  if (!file) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << file.rdbuf();
  return parse_csv(buf.str(), response_col, locked_cols);
}

// ---------------------------------------------------------------- scaling

Standardized standardize(const Dataset& d) {
  const Matrix& X = d.predictors();
  const double n = static_cast<double>(X.rows());
  Matrix Z(X.rows(), X.cols());
  std::vector<ColumnScaling> scaling(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).mean();
    const Vector centered = X.col(j).array() - mean;
    const double sd = std::sqrt(centered.squaredNorm() / (n - 1.0));
    if (!(sd > 1e-12 * std::max(1.0, std::fabs(mean)))) {
      fail(ErrorKind::ConstantColumn, "column '" + d.column_names()[j] + "' is constant");
    }
    Z.col(j) = centered / sd;
    scaling[j] = {mean, sd};
  }
  return {Dataset(std::move(Z), d.response(), d.column_names(), d.locked_in()), std::move(scaling)};
}

Dataset unstandardize(const Dataset& d, const std::vector<ColumnScaling>& scaling) {
  require(static_cast<Eigen::Index>(scaling.size()) == d.predictors().cols(),
          "scaling record length must equal column count");
  Matrix X = d.predictors();
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    X.col(j) = (X.col(j).array() * scaling[j].sd + scaling[j].mean).matrix();
  }
  return Dataset(std::move(X), d.response(), d.column_names(), d.locked_in());
}

// ---------------------------------------------------------------- OLS

OlsFit ols_fit(const Matrix& X, const Vector& y, bool intercept) {
  require(X.rows() == y.size(), "rows(X) must equal length(y)");
  const Eigen::Index n = X.rows();
  Matrix design(n, X.cols() + (intercept ? 1 : 0));
  if (intercept) {
    design.col(0).setOnes();
    design.rightCols(X.cols()) = X;
  } else {
    design = X;
  }
  const Eigen::Index p = design.cols();
  require(p >= 1, "OLS needs at least one column");

  QrSolver qr(design);
  OlsFit fit;
  fit.has_intercept = intercept;
  fit.coefficients = qr.solve(y);
  fit.fitted = design * fit.coefficients;
  fit.residuals = y - fit.fitted;
  fit.df_resid = static_cast<int>(n - p);
  const double rss = fit.residuals.squaredNorm();
  fit.sigma2_hat = fit.df_resid > 0 ? rss / fit.df_resid : std::numeric_limits<double>::quiet_NaN();
  fit.xtx_inv = qr.gram_inverse();
  fit.se = (fit.sigma2_hat * fit.xtx_inv.diagonal().array()).sqrt();
  fit.t_stats = fit.coefficients.array() / fit.se.array();
  fit.p_values.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    fit.p_values(j) = stats::t_two_sided_p(fit.t_stats(j), fit.df_resid);
  }

  const double tss = intercept ? (y.array() - y.mean()).matrix().squaredNorm() : y.squaredNorm();
  fit.r_squared = tss > 0 ? 1.0 - rss / tss : 1.0;
  if (intercept) fit.r_squared = std::clamp(fit.r_squared, 0.0, 1.0);

  const int slopes = static_cast<int>(intercept ? p - 1 : p);
  fit.f_df = {slopes, fit.df_resid};
  if (slopes > 0 && fit.df_resid > 0) {
    fit.f_stat = ((tss - rss) / slopes) / (rss / fit.df_resid);
    fit.f_p = stats::f_upper_p(fit.f_stat, slopes, fit.df_resid);
  } else {
    fit.f_stat = std::numeric_limits<double>::quiet_NaN();
    fit.f_p = std::numeric_limits<double>::quiet_NaN();
  }
  return fit;
}

// ---------------------------------------------------------------- correlation

namespace {

Matrix centered_unit_columns(const Matrix& X) {
  Matrix C = X.rowwise() - X.colwise().mean();
  for (Eigen::Index j = 0; j < C.cols(); ++j) {
    const double norm = C.col(j).norm();
    const double scale = std::max(1.0, X.col(j).cwiseAbs().maxCoeff());
    if (!(norm > 1e-12 * scale * std::sqrt(static_cast<double>(X.rows())))) {
      fail(ErrorKind::ConstantColumn, "column " + std::to_string(j) + " is constant");
    }
    C.col(j) /= norm;
  }
  return C;
}

}  // namespace

CorrelationMatrix pairwise_correlations(const Matrix& X) {
  const Matrix C = centered_unit_columns(X);
  Matrix R = C.transpose() * C;
  for (Eigen::Index i = 0; i < R.rows(); ++i) {
    R(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < R.cols(); ++j) {
      const double r = std::clamp(0.5 * (R(i, j) + R(j, i)), -1.0, 1.0);
      R(i, j) = r;
      R(j, i) = r;
    }
  }
  return {std::move(R)};
}

Vector correlations_with(const Matrix& X, int j) {
  const Matrix C = centered_unit_columns(X);
  Vector r = (C.transpose() * C.col(j)).cwiseMax(-1.0).cwiseMin(1.0);
  r(j) = 1.0;
  return r;
}

}  // namespace tsvs
