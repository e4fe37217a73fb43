#include "tsvs/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>

namespace tsvs::stats {

namespace bm = boost::math;

double t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return std::isnan(t) ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  if (df <= 0) return std::numeric_limits<double>::quiet_NaN();
  bm::students_t dist(df);
  return 2.0 * bm::cdf(bm::complement(dist, std::fabs(t)));
}

double f_upper_p(double f, double df1, double df2) {
  if (std::isnan(f) || df1 <= 0 || df2 <= 0) return std::numeric_limits<double>::quiet_NaN();
  if (f <= 0) return 1.0;
  if (!std::isfinite(f)) return 0.0;
  bm::fisher_f dist(df1, df2);
  return bm::cdf(bm::complement(dist, f));
}

double chi2_upper_p(double x, double df) {
  if (std::isnan(x) || df <= 0) return std::numeric_limits<double>::quiet_NaN();
  if (x <= 0) return 1.0;
  if (!std::isfinite(x)) return 0.0;
  bm::chi_squared dist(df);
  return bm::cdf(bm::complement(dist, x));
}

double t_quantile(double p, double df) {
  bm::students_t dist(df);
  return bm::quantile(dist, p);
}

double normal_cdf(double z) {
  bm::normal dist;
  return bm::cdf(dist, z);
}

}  // namespace tsvs::stats
