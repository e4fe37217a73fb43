#pragma once

#include "tsvs/data_model.hpp"
#include "tsvs/lasso.hpp"
#include "tsvs/mediation.hpp"
#include "tsvs/semms.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tsvs::sim {

/// Denominator scale in the concentration-parameter equation.
enum class ConcentrationScale { SampleSize, Instruments };

struct IvSimSpec {
  int n = 100;
  int P = 500;
  int L = 5;
  double mu2 = 180.0;
  double beta = 1.0;
  double rho = 0.5;
  double endog_corr = 0.6;  // corr(e, v)
  int B = 100;
  std::uint64_t master_seed = 1;
  ConcentrationScale scale = ConcentrationScale::SampleSize;

  void validate() const;
};

struct MediationSimSpec {
  mediation::Scenario scenario = mediation::Scenario::MultipleM;
  int setting = 1;
  double beta1 = 3.0;
  double beta2 = 1.0;
  int N = 100;
  int P = 500;
  /// Target correlation of the decoys with V_1. Unset uses the fixed 0.3
  /// decoy noise sd; set, the noise sd is sd(V_1) * sqrt(1/rho^2 - 1).
  std::optional<double> rho;
  double error_variance = 0.2;
  int B = 100;
  std::uint64_t master_seed = 1;

  void validate() const;
};

/// Seed of the random stream used by replication `rep`.
std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t rep);

/// AR(1)-type covariance sigma_ij = rho^|i-j|.
Matrix toeplitz_sigma(int P, double rho);

/// C = sqrt(mu2 / (s (scale + mu2))) with s = 1_L' Sigma 1_L; scale is P or
/// n. Throws InfeasibleDesign when C^2 s >= 1.
double solve_concentration_C(double scale, int L, double mu2, const Matrix& Sigma);

struct IvData {
  Matrix Z;
  Vector x;
  Vector y;
  IndexSet true_support;
  double C = 0.0;
  double sigma_v2 = 0.0;
};

IvData gen_iv_dataset(const IvSimSpec& spec, int rep);

struct MediationData {
  Vector y;
  Matrix x;          // N x 1 (multiple M) or N x P (multiple X)
  Matrix mediators;  // N x P (multiple M) or N x 1 (multiple X)
  IndexSet true_set;  // V_T, indices into the high-dimensional block
};

MediationData gen_mediation_dataset(const MediationSimSpec& spec, int rep);

/// SEMMS settings used by the studies: the search starts from the five
/// strongest marginal candidates and the component proportions carry a
/// pseudo-count of 8.
semms::SemmsConfig study_semms_config();

struct Selectors {
  bool semms = true;
  bool lasso = true;
  semms::SemmsConfig semms_config = study_semms_config();
  lasso::LassoConfig lasso_config;
};

struct IvEstimators {
  bool tsls = true;
  bool fuller = true;
  bool liml = true;
};

/// One row per selector x estimator. Averages exclude empty selections and
/// failed replications; contributing + n_zero + failures = B.
struct IvRow {
  std::string selector;
  std::string estimator;
  int n_zero = 0;
  int failures = 0;
  int contributing = 0;
  double bias = 0.0;
  double mad = 0.0;
  double tp = 0.0;
  double fp = 0.0;
  double mean_p = 0.0;  // p-value of H0: beta = beta_true
  double cp = 0.0;
};

struct IvStudyMetrics {
  IvSimSpec spec;
  std::vector<IvRow> rows;
};

/// One row per selector. TP and FP are averaged over all B replications;
/// the estimation columns are conditional on V_1 being found.
struct MediationRow {
  std::string selector;
  int n_zero = 0;  // V_1 not found
  int failures = 0;
  int contributing = 0;
  double tp = 0.0;
  double fp = 0.0;
  double b_rate = 0.0;        // among contributing replications
  double c_prime_rate = 0.0;  // among contributing replications
  double b_rate_all = 0.0;    // significant b with V_1 found, over B
  double bias = 0.0;
  double mad = 0.0;
  double cp = 0.0;
};

struct MediationStudyMetrics {
  MediationSimSpec spec;
  std::vector<MediationRow> rows;
};

IvStudyMetrics run_iv_study(const IvSimSpec& spec, const Selectors& selectors = {},
                            const IvEstimators& estimators = {}, int threads = 1);

MediationStudyMetrics run_mediation_study(const MediationSimSpec& spec, const Selectors& selectors = {},
                                          int threads = 1);

}  // namespace tsvs::sim
