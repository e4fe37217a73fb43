#pragma once

#include "tsvs/data_model.hpp"

#include <map>
#include <vector>

namespace tsvs::semms {

/// Parameters of the three-component mixture on the scaled coefficients
/// gamma_k * u_k, with gamma_k in {-1, 0, 1} and u_k ~ N(mu, sigma2), plus the
/// error variance of the response model.
struct MixtureParams {
  double p_left = 0.05;
  double p_null = 0.90;
  double p_right = 0.05;
  double mu = 0.0;
  double sigma2 = 1.0;
  double sigma2_e = 1.0;
};

/// Posterior membership of one candidate in C_L, C_0, C_R.
struct PosteriorRow {
  int index = 0;
  double w_left = 0.0;
  double w_null = 1.0;
  double w_right = 0.0;
};

using PosteriorTable = std::vector<PosteriorRow>;

struct SemmsConfig {
  double lockout_threshold = 0.7;
  double tol = 1e-6;
  int max_em_iter = 500;
  int max_greedy_iter = 0;  // 0 means 2 * P
  bool greedy = true;
  /// Number of top marginally-screened candidates placed in the model before
  /// the add/remove search starts. 0 starts from the empty model.
  int initial_screen = 0;
  /// Dirichlet pseudo-count added to each component when estimating
  /// (p_L, p_0, p_R) from the current memberships.
  double prior_pseudocount = 0.0;

  void validate() const;
};

struct LockOut {
  int index = 0;
  int trigger = 0;  // selected column responsible for the exclusion
  double r = 0.0;   // correlation with the trigger
};

struct SemmsResult {
  IndexSet selected;
  IndexSet locked_in;
  std::vector<LockOut> locked_out;
  std::map<int, int> signs;
  MixtureParams mixture;
  PosteriorTable posteriors;
  double final_loglik = 0.0;
  std::vector<double> loglik_trace;  // after every accepted move
  /// OLS of the response on [intercept, locked_in ∪ selected] (ascending
  /// column order); coefficients on the original scale when produced by
  /// semms_fit.
  OlsFit ols_refit;
  std::vector<int> refit_columns;
  bool converged = true;
  bool degenerate_component = false;
  int iterations = 0;
};

/// State consumed and produced by em_step.
struct EmState {
  MixtureParams params;
  PosteriorTable posteriors;
};

struct EmStepResult {
  MixtureParams params;
  PosteriorTable posteriors;
  double loglik = 0.0;
  bool degenerate_component = false;
};

/// Starting state: p = (0.05, 0.9, 0.05), mu from the mean absolute marginal
/// slope of the ten strongest candidates, sigma2 from their variance,
/// sigma2_e = var(y), and every candidate in C_0.
EmState initial_state(const Matrix& X, const Vector& y, const IndexSet& locked_in);

/// One alternating step: memberships are updated coordinate-wise to their
/// conditional maximizers under the current parameters (the posterior table
/// records each conditional), then the parameters are re-estimated for the
/// new memberships. The returned observed-data log-likelihood never
/// decreases across repeated calls.
EmStepResult em_step(const Matrix& X, const Vector& y, const IndexSet& locked_in, const EmState& state,
                     const SemmsConfig& config = {});

/// Observed-data log-likelihood of a membership assignment (selected column
/// -> sign) with the remaining parameters at their maximizers.
double profile_loglik(const Matrix& X, const Vector& y, const IndexSet& locked_in,
                      const std::map<int, int>& membership, const SemmsConfig& config = {});

/// Greedy add/remove search on standardized X.
SemmsResult greedy_search(const Matrix& X, const Vector& y, const IndexSet& locked_in,
                          const SemmsConfig& config = {});

/// Standardizes internally, runs the search, and refits OLS on the original
/// scale.
SemmsResult semms_fit(const Dataset& d, const SemmsConfig& config = {});

}  // namespace tsvs::semms
