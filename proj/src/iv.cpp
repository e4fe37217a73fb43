#include "tsvs/iv.hpp"

#include "tsvs/error.hpp"
#include "tsvs/stats.hpp"

#include <cmath>
#include <sstream>

namespace tsvs::iv {

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::OLS: return "OLS";
    case Method::TSLS: return "TSLS";
    case Method::LIML: return "LIML";
    case Method::FULLER: return "FULLER";
  }
  return "?";
}

void IvProblem::validate() const {
  const auto n = y.size();
  require(n >= 2, "IV problem needs at least 2 rows");
  require(Z.rows() == n && X_endog.rows() == n && X_exog.rows() == n, "IV blocks must have N rows");
  require(g() >= 1, "IV problem needs an endogenous regressor");
  require(q() >= 1, "X_exog must include the intercept column");
  require(m() >= g(), "order condition m >= g violated");
}

namespace {

Matrix hcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

double partial_f(double rss_r, double rss_u, int df1, int df2) {
  return ((rss_r - rss_u) / df1) / (rss_u / df2);
}

Vector residualize(const QrSolver& qr, const Vector& v) { return v - qr.project(v); }
Matrix residualize(const QrSolver& qr, const Matrix& v) { return v - qr.project(v); }

}  // namespace

FirstStage first_stage(const IvProblem& p) {
  p.validate();
  require(p.m() >= 1, "first stage needs at least one instrument");
  const Matrix Zbar = hcat(p.Z, p.X_exog);
  const QrSolver full(Zbar);
  const QrSolver exog(p.X_exog);
  const int df2 = p.n() - p.m() - p.q();
  require(df2 > 0, "first stage has no residual degrees of freedom");

  FirstStage out;
  out.X_hat = full.project(p.X_endog);
  out.f_df = {p.m(), df2};
  for (int j = 0; j < p.g(); ++j) {
    const Vector x = p.X_endog.col(j);
    out.fits.push_back(ols_fit(Zbar, x, false));
    const double rss_u = residualize(full, x).squaredNorm();
    const double rss_r = residualize(exog, x).squaredNorm();
    const double f = rss_u > 0 ? partial_f(rss_r, rss_u, p.m(), df2) : std::numeric_limits<double>::infinity();
    out.f_stat.push_back(f);
    out.f_p.push_back(stats::f_upper_p(f, p.m(), df2));
  }
  return out;
}

KClassEstimate kclass(const IvProblem& p, double k, Method method, RobustFlavor robust) {
  p.validate();
  require(k >= 0, "k must be non-negative");
  const Matrix X = hcat(p.X_endog, p.X_exog);
  const int n = p.n();
  const int cols = static_cast<int>(X.cols());
  const int df = n - cols;
  require(df > 0, "k-class estimate has no residual degrees of freedom");

  // (I - kM)X = X - k * (X - P X); the exogenous block lies in [Z, X_exog]
  // and is unaffected.
  Matrix Xk = X;
  if (k != 0.0) {
    const QrSolver zbar(hcat(p.Z, p.X_exog));
    Xk = X - k * residualize(zbar, X);
  }
  const Matrix A = Xk.transpose() * X;
  const Vector b = Xk.transpose() * p.y;
  const QrSolver solver(A);
  const Matrix A_inv = solver.solve(Matrix(Matrix::Identity(cols, cols)));

  KClassEstimate est;
  est.method = method;
  est.k = k;
  est.robust = robust;
  est.df_resid = df;
  est.beta = solver.solve(b);
  est.residuals = p.y - X * est.beta;

  const double sigma2 = est.residuals.squaredNorm() / df;
  const Matrix v_classical = sigma2 * A_inv;
  const Matrix meat = Xk.transpose() * est.residuals.array().square().matrix().asDiagonal() * Xk;
  Matrix v_robust = A_inv * meat * A_inv.transpose();
  if (robust == RobustFlavor::HC1) v_robust *= static_cast<double>(n) / df;

  est.se_classical.resize(cols);
  est.se_robust.resize(cols);
  for (int j = 0; j < cols; ++j) {
    if (!(v_classical(j, j) > 0) || !(v_robust(j, j) >= 0)) {
      std::ostringstream msg;
      msg << "non-positive variance for coefficient " << j << " (k = " << k << ")";
      fail(ErrorKind::NegativeVariance, msg.str());
    }
    est.se_classical(j) = std::sqrt(v_classical(j, j));
    est.se_robust(j) = std::sqrt(v_robust(j, j));
  }
  est.t_classical = est.beta.array() / est.se_classical.array();
  est.t_robust = est.beta.array() / est.se_robust.array();
  est.p_classical.resize(cols);
  est.p_robust.resize(cols);
  const double crit = stats::t_quantile(0.975, df);
  for (int j = 0; j < cols; ++j) {
    est.p_classical(j) = stats::t_two_sided_p(est.t_classical(j), df);
    est.p_robust(j) = stats::t_two_sided_p(est.t_robust(j), df);
    est.ci_95.push_back({est.beta(j) - crit * est.se_classical(j), est.beta(j) + crit * est.se_classical(j)});
  }
  return est;
}

KClassEstimate ols(const IvProblem& p, RobustFlavor robust) { return kclass(p, 0.0, Method::OLS, robust); }

KClassEstimate tsls(const IvProblem& p, RobustFlavor robust) { return kclass(p, 1.0, Method::TSLS, robust); }

double liml_k(const IvProblem& p) {
  p.validate();
  require(p.m() > 0, "LIML needs at least one instrument");
  const Matrix Y = hcat(p.y, p.X_endog);
  const QrSolver full(hcat(p.Z, p.X_exog));
  const QrSolver exog(p.X_exog);
  const Matrix R0 = residualize(full, Y);
  const Matrix R1 = residualize(exog, Y);
  const Matrix W0 = R0.transpose() * R0;
  const Matrix W1 = R1.transpose() * R1;
  Eigen::LLT<Matrix> chol(W0);
  if (chol.info() != Eigen::Success) fail(ErrorKind::RankDeficient, "LIML residual cross-product is singular");
  // Eigenvalues of W1 W0^{-1} equal those of L^{-1} W1 L^{-T}.
  const Matrix L_inv = chol.matrixL().solve(Matrix::Identity(W0.rows(), W0.cols()));
  const Matrix S = L_inv * W1 * L_inv.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

KClassEstimate liml(const IvProblem& p, RobustFlavor robust) {
  return kclass(p, liml_k(p), Method::LIML, robust);
}

KClassEstimate fuller(const IvProblem& p, double a, RobustFlavor robust) {
  require(a >= 0, "Fuller constant must be non-negative");
  const int denom = p.n() - p.m() - p.q();
  require(denom > 0, "Fuller needs N > m + q");
  return kclass(p, liml_k(p) - a / denom, Method::FULLER, robust);
}

TestResult sargan_test(const IvProblem& p, const Vector& tsls_residuals) {
  p.validate();
  require(tsls_residuals.size() == p.n(), "residual length must equal N");
  if (p.m() == p.g()) fail(ErrorKind::NotOverIdentified, "Sargan test needs m > g");
  const QrSolver full(hcat(p.Z, p.X_exog));
  const double rss = residualize(full, tsls_residuals).squaredNorm();
  const double tss = (tsls_residuals.array() - tsls_residuals.mean()).square().sum();
  TestResult r;
  r.stat = tss > 0 ? p.n() * (1.0 - rss / tss) : 0.0;
  r.df1 = p.m() - p.g();
  r.p = stats::chi2_upper_p(r.stat, r.df1);
  return r;
}

TestResult anderson_rubin_test(const IvProblem& p, const Vector& beta0) {
  require(p.m() > 0, "Anderson-Rubin test needs at least one instrument");
  p.validate();
  require(beta0.size() == p.g(), "beta0 must have one entry per endogenous regressor");
  const Vector u = p.y - p.X_endog * beta0;
  const QrSolver full(hcat(p.Z, p.X_exog));
  const QrSolver exog(p.X_exog);
  const int df2 = p.n() - p.m() - p.q();
  require(df2 > 0, "Anderson-Rubin test has no residual degrees of freedom");
  const double rss_u = residualize(full, u).squaredNorm();
  const double rss_r = residualize(exog, u).squaredNorm();
  TestResult r;
  r.stat = partial_f(rss_r, rss_u, p.m(), df2);
  r.df1 = p.m();
  r.df2 = df2;
  r.p = stats::f_upper_p(r.stat, r.df1, r.df2);
  return r;
}

IvDiagnostics diagnose(const IvProblem& p, const Vector& beta0) {
  IvDiagnostics d;
  const FirstStage fs = first_stage(p);
  d.first_stage_f = fs.f_stat.front();
  d.first_stage_df = fs.f_df;
  d.first_stage_p = fs.f_p.front();
  if (p.m() > p.g()) d.sargan = sargan_test(p, tsls(p).residuals);
  d.anderson_rubin = anderson_rubin_test(p, beta0);
  return d;
}

}  // namespace tsvs::iv
