#pragma once

#include "tsvs/data_model.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace tsvs::iv {

enum class Method { OLS, TSLS, LIML, FULLER };
enum class RobustFlavor { HC0, HC1 };

std::string_view to_string(Method m) noexcept;

/// Post-selection IV model. X_exog must contain the intercept column.
struct IvProblem {
  Matrix Z;        // N x m instruments
  Matrix X_endog;  // N x g
  Matrix X_exog;   // N x q
  Vector y;

  int n() const { return static_cast<int>(y.size()); }
  int m() const { return static_cast<int>(Z.cols()); }
  int g() const { return static_cast<int>(X_endog.cols()); }
  int q() const { return static_cast<int>(X_exog.cols()); }

  /// Dimension checks and the order condition m >= g.
  void validate() const;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double v) const { return lower <= v && v <= upper; }
};

/// Coefficients are ordered [X_endog, X_exog].
struct KClassEstimate {
  Method method = Method::TSLS;
  double k = 1.0;
  Vector beta;
  Vector se_classical;
  Vector se_robust;
  Vector t_classical;
  Vector t_robust;
  Vector p_classical;
  Vector p_robust;
  std::vector<Interval> ci_95;  // classical SEs
  int df_resid = 0;
  RobustFlavor robust = RobustFlavor::HC0;
  Vector residuals;
};

struct FirstStage {
  Matrix X_hat;
  std::vector<OlsFit> fits;  // one per endogenous column, design [Z, X_exog]
  std::vector<double> f_stat;  // joint test of the Z block, per endogenous column
  std::pair<int, int> f_df{0, 0};
  std::vector<double> f_p;
};

struct TestResult {
  double stat = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;  // 0 for chi-square tests
  double p = 1.0;
};

struct IvDiagnostics {
  double first_stage_f = 0.0;
  std::pair<int, int> first_stage_df{0, 0};
  double first_stage_p = 1.0;
  std::optional<TestResult> sargan;  // absent when m = g
  TestResult anderson_rubin;
};

FirstStage first_stage(const IvProblem& p);

/// beta(k) = (X'(I - k M)X)^{-1} X'(I - k M)y with M the annihilator of
/// [Z, X_exog]. Classical SEs use RSS/(N - g - q).
KClassEstimate kclass(const IvProblem& p, double k, Method method = Method::TSLS,
                      RobustFlavor robust = RobustFlavor::HC0);

KClassEstimate ols(const IvProblem& p, RobustFlavor robust = RobustFlavor::HC0);
KClassEstimate tsls(const IvProblem& p, RobustFlavor robust = RobustFlavor::HC0);

/// Smallest eigenvalue of W1 W0^{-1}, where W0 and W1 are the cross-products
/// of [y, X_endog] residualized on [Z, X_exog] and on X_exog.
double liml_k(const IvProblem& p);
KClassEstimate liml(const IvProblem& p, RobustFlavor robust = RobustFlavor::HC0);

/// k = k_LIML - a / (N - m - q).
KClassEstimate fuller(const IvProblem& p, double a = 1.0, RobustFlavor robust = RobustFlavor::HC0);

/// N R^2 of the TSLS residuals on [Z, X_exog]; chi-square with m - g df.
TestResult sargan_test(const IvProblem& p, const Vector& tsls_residuals);

/// F test of the Z block in the regression of y - X_endog beta0 on [Z, X_exog].
TestResult anderson_rubin_test(const IvProblem& p, const Vector& beta0);

/// First-stage F (first endogenous column), Sargan when over-identified, and
/// Anderson-Rubin at beta0.
IvDiagnostics diagnose(const IvProblem& p, const Vector& beta0);

}  // namespace tsvs::iv
