#include "tsvs/mediation.hpp"

#include "tsvs/error.hpp"

namespace tsvs::mediation {

std::string_view to_string(Classification c) noexcept {
  switch (c) {
    case Classification::Complete: return "complete";
    case Classification::Partial: return "partial";
    case Classification::None: return "none";
  }
  return "?";
}

void MediationDesign::validate() const {
  const auto n = y.size();
  require(n >= 3, "mediation design needs at least 3 rows");
  require(x.rows() == n && mediators.rows() == n, "mediation blocks must have N rows");
  require(x.cols() >= 1 && mediators.cols() >= 1, "mediation design needs exposures and mediators");
  if (scenario == Scenario::MultipleM) require(x.cols() == 1, "multiple-M scenario has a single exposure");
  if (scenario == Scenario::MultipleX) require(mediators.cols() == 1, "multiple-X scenario has a single mediator");
}

namespace {

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index count) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < count; ++j) names.push_back(prefix + std::to_string(j + 1));
  return names;
}

Selection run_semms(const Matrix& X, const Vector& y, const IndexSet& locked_in, const semms::SemmsConfig& cfg) {
  const Dataset d(X, y, numbered("v", X.cols()), locked_in);
  const auto r = semms::semms_fit(d, cfg);
  return {r.selected, r.locked_out};
}

Selection run_lasso(const Matrix& X, const Vector& y, const lasso::LassoConfig& cfg) {
  return {lasso::cv_select(X, y, cfg).support, {}};
}

PathEstimate path(const OlsFit& fit, Eigen::Index j) {
  return {fit.coefficients(j), fit.se(j), fit.t_stats(j), fit.p_values(j)};
}

}  // namespace

Selection select_mediators(const MediationDesign& d) {
  d.validate();
  require(d.scenario == Scenario::MultipleM, "select_mediators needs the multiple-M scenario");
  const Eigen::Index pm = d.mediators.cols();
  if (d.selector == Selector::Semms) {
    Matrix X(d.y.size(), pm + 1);
    X << d.mediators, d.x.col(0);
    Selection s = run_semms(X, d.y, {static_cast<int>(pm)}, d.semms);
    return s;
  }
  switch (d.lasso_strategy) {
    case LassoStrategy::ExposureAsResponse:
      return run_lasso(d.mediators, d.x.col(0), d.lasso);
    case LassoStrategy::MediatorsOnly:
      return run_lasso(d.mediators, d.y, d.lasso);
    case LassoStrategy::ExposureAsCandidate: {
      Matrix X(d.y.size(), pm + 1);
      X << d.mediators, d.x.col(0);
      Selection s = run_lasso(X, d.y, d.lasso);
      s.selected.erase(static_cast<int>(pm));
      return s;
    }
  }
  return {};
}

Selection select_main_effects(const MediationDesign& d) {
  d.validate();
  require(d.scenario == Scenario::MultipleX, "select_main_effects needs the multiple-X scenario");
  const Vector m = d.mediators.col(0);
  if (d.selector == Selector::Semms) return run_semms(d.x, m, {}, d.semms);
  return run_lasso(d.x, m, d.lasso);
}

MediationFit mediation_fit(const Vector& y, const Matrix& x, const Matrix& mediators, double alpha) {
  require(alpha > 0 && alpha < 1, "alpha must lie in (0, 1)");
  require(x.rows() == y.size() && mediators.rows() == y.size(), "mediation blocks must have N rows");
  require(x.cols() >= 1, "mediation_fit needs an exposure");
  require(mediators.cols() >= 1, "mediation_fit needs at least one selected mediator");
  const Eigen::Index kx = x.cols();
  const Eigen::Index km = mediators.cols();

  MediationFit fit;
  fit.alpha = alpha;
  fit.a.assign(static_cast<std::size_t>(kx), {});
  for (Eigen::Index j = 0; j < km; ++j) {
    const OlsFit step1 = ols_fit(x, mediators.col(j), true);
    for (Eigen::Index i = 0; i < kx; ++i) fit.a[i].push_back(path(step1, i + 1));
  }

  Matrix design(y.size(), km + kx);
  design << mediators, x;
  const OlsFit step2 = ols_fit(design, y, true);
  fit.df_resid = step2.df_resid;
  for (Eigen::Index j = 0; j < km; ++j) fit.b.push_back(path(step2, 1 + j));
  for (Eigen::Index i = 0; i < kx; ++i) fit.c_prime.push_back(path(step2, 1 + km + i));

  const OlsFit total = ols_fit(x, y, true);
  for (Eigen::Index i = 0; i < kx; ++i) fit.total.push_back(path(total, 1 + i));

  fit.indirect.assign(static_cast<std::size_t>(kx), std::vector<double>(static_cast<std::size_t>(km)));
  for (Eigen::Index i = 0; i < kx; ++i)
    for (Eigen::Index j = 0; j < km; ++j) fit.indirect[i][j] = fit.a[i][j].estimate * fit.b[j].estimate;
  fit.classification = classify(fit);
  return fit;
}

Classification classify(double p_a, double p_b, double p_c_prime, double alpha) {
  const bool a = p_a < alpha;
  const bool b = p_b < alpha;
  const bool c = p_c_prime < alpha;
  if (a && b) return c ? Classification::Partial : Classification::Complete;
  return Classification::None;
}

Classification classify(const MediationFit& fit) {
  bool pair = false;
  for (std::size_t i = 0; i < fit.a.size(); ++i)
    for (std::size_t j = 0; j < fit.b.size(); ++j)
      if (fit.a[i][j].p < fit.alpha && fit.b[j].p < fit.alpha) pair = true;
  if (!pair) return Classification::None;
  for (const auto& c : fit.c_prime)
    if (c.p < fit.alpha) return Classification::Partial;
  return Classification::Complete;
}

}  // namespace tsvs::mediation
