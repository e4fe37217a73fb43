#pragma once

// Distribution helpers shared by the estimators and the simulation harness.

namespace tsvs::stats {

/// Two-sided p-value of a t statistic.
double t_two_sided_p(double t, double df);

/// Upper-tail probability of the F distribution.
double f_upper_p(double f, double df1, double df2);

/// Upper-tail probability of the chi-square distribution.
double chi2_upper_p(double x, double df);

/// Quantile of Student's t.
double t_quantile(double p, double df);

double normal_cdf(double z);

}  // namespace tsvs::stats
