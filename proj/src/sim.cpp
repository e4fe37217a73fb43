#include "tsvs/sim.hpp"

#include "tsvs/error.hpp"
#include "tsvs/iv.hpp"
#include "tsvs/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

namespace tsvs::sim {

void IvSimSpec::validate() const {
  require(n >= 10, "n must be at least 10");
  require(P >= 1, "P must be positive");
  require(L >= 1 && L <= P, "L must lie in [1, P]");
  require(mu2 > 0, "mu2 must be positive");
  require(rho > -1 && rho < 1, "rho must lie in (-1, 1)");
  require(std::fabs(endog_corr) < 1, "|endog_corr| must be below 1");
  require(B >= 1, "B must be positive");
}

void MediationSimSpec::validate() const {
  require(setting >= 1 && setting <= 4, "setting must lie in 1..4");
  require(N >= 10, "N must be at least 10");
  require(P >= 10, "P must be at least 10");
  require(error_variance > 0, "error_variance must be positive");
  require(B >= 1, "B must be positive");
  if (rho) require(*rho > 0 && *rho < 1, "rho must lie in (0, 1)");
}

semms::SemmsConfig study_semms_config() {
  semms::SemmsConfig c;
  c.initial_screen = 5;
  c.prior_pseudocount = 8.0;
  return c;
}

std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t rep) {
  // splitmix64 finalizer over a counter derived from (master, rep)
  std::uint64_t z = master_seed + 0x9E3779B97F4A7C15ULL * (rep + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Matrix toeplitz_sigma(int P, double rho) {
  Matrix S(P, P);
  for (int i = 0; i < P; ++i)
    for (int j = 0; j < P; ++j) S(i, j) = std::pow(rho, std::abs(i - j));
  return S;
}

double solve_concentration_C(double scale, int L, double mu2, const Matrix& Sigma) {
  require(L >= 1 && L <= Sigma.rows(), "L must lie in [1, P]");
  require(mu2 >= 0, "mu2 must be non-negative");
  require(scale > 0, "scale must be positive");
  const double s = Sigma.topLeftCorner(L, L).sum();
  require(s > 0, "1_L' Sigma 1_L must be positive");
  const double c2 = mu2 / (s * (scale + mu2));
  if (!(1.0 - c2 * s > 0)) {
    std::ostringstream msg;
    msg << "sigma_v^2 = " << 1.0 - c2 * s << " is not positive";
    fail(ErrorKind::InfeasibleDesign, msg.str());
  }
  return std::sqrt(c2);
}

namespace {

using Rng = std::mt19937_64;

Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> z;
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = z(rng);
  return out;
}

Vector uniform_vector(Rng& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = u(rng);
  return out;
}

Vector normal_vector(Rng& rng, Eigen::Index n, double sd) {
  std::normal_distribution<double> z(0.0, sd);
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = z(rng);
  return out;
}

// Square-root factor of a 2x2 covariance; negative eigenvalues are clamped
// to zero so that a marginally indefinite matrix is replaced by its nearest
// positive semidefinite one.
Eigen::Matrix2d psd_factor(const Eigen::Matrix2d& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const Eigen::Vector2d root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

double concentration_scale(const IvSimSpec& spec) {
  return spec.scale == ConcentrationScale::Instruments ? spec.P : spec.n;
}

}  // namespace

IvData gen_iv_dataset(const IvSimSpec& spec, int rep) {
  spec.validate();
  const Matrix Sigma = toeplitz_sigma(spec.P, spec.rho);
  IvData d;
  d.C = solve_concentration_C(concentration_scale(spec), spec.L, spec.mu2, Sigma);
  d.sigma_v2 = 1.0 - d.C * d.C * Sigma.topLeftCorner(spec.L, spec.L).sum();

  Rng rng(stream_seed(spec.master_seed, static_cast<std::uint64_t>(rep)));
  const Eigen::LLT<Matrix> chol(Sigma);
  d.Z = normal_matrix(rng, spec.n, spec.P) * chol.matrixL().transpose();

  Eigen::Matrix2d cov;
  const double cov_ev = spec.endog_corr * std::sqrt(d.sigma_v2);
  cov << 1.0, cov_ev, cov_ev, d.sigma_v2;
  const Eigen::Matrix2d F = psd_factor(cov);
  const Matrix w = normal_matrix(rng, spec.n, 2);
  const Matrix ev = w * F.transpose();

  const Vector zgamma = d.C * d.Z.leftCols(spec.L).rowwise().sum();
  d.x = zgamma + ev.col(1);
  d.y = spec.beta * d.x + ev.col(0);
  for (int j = 0; j < spec.L; ++j) d.true_support.insert(j);
  return d;
}

MediationData gen_mediation_dataset(const MediationSimSpec& spec, int rep) {
  spec.validate();
  using mediation::Scenario;
  Rng rng(stream_seed(spec.master_seed, static_cast<std::uint64_t>(rep)));
  const int n = spec.N;
  const double err_sd = std::sqrt(spec.error_variance);

  const Vector x1 = uniform_vector(rng, n);
  const Vector m1 = (1.0 + spec.beta1 * x1.array()).matrix() + normal_vector(rng, n, err_sd);
  const Vector y = (1.0 + spec.beta2 * m1.array()).matrix() + normal_vector(rng, n, err_sd);

  const bool multiple_m = spec.scenario == Scenario::MultipleM;
  const Vector& v1 = multiple_m ? m1 : x1;
  double noise_sd = 0.3;
  if (spec.rho) {
    const double var_v1 =
        multiple_m ? spec.beta1 * spec.beta1 / 12.0 + spec.error_variance : 1.0 / 12.0;
    noise_sd = std::sqrt(var_v1) * std::sqrt(1.0 / (*spec.rho * *spec.rho) - 1.0);
  }

  Matrix V(n, spec.P);
  V.col(0) = v1;
  const int block = spec.setting == 1 ? 1 : std::min(10, spec.P);
  for (int j = 1; j < block; ++j) {
    const Vector noise = normal_vector(rng, n, noise_sd);
    switch (spec.setting) {
      case 2: V.col(j) = V.col(j - 1) + noise; break;
      case 3: V.col(j) = v1 + noise; break;
      case 4: V.col(j) = (j <= 3 ? v1 : Vector(-v1)) + noise; break;
      default: break;
    }
  }
  for (int j = block; j < spec.P; ++j) V.col(j) = uniform_vector(rng, n);

  MediationData d;
  d.y = y;
  if (multiple_m) {
    d.x = x1;
    d.mediators = std::move(V);
  } else {
    d.x = std::move(V);
    d.mediators = m1;
  }
  for (int j = 0; j < block; ++j) d.true_set.insert(j);
  return d;
}

namespace {

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::vector<std::string> column_names(Eigen::Index p) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < p; ++j) names.push_back("z" + std::to_string(j + 1));
  return names;
}

struct Selected {
  bool failed = false;
  IndexSet set;
  std::vector<semms::LockOut> locked_out;
};

Selected select_semms(const Matrix& X, const Vector& y, const IndexSet& locked_in, const semms::SemmsConfig& cfg) {
  Selected s;
  try {
    const Dataset d(X, y, column_names(X.cols()), locked_in);
    const auto r = semms::semms_fit(d, cfg);
    s.set = r.selected;
    s.locked_out = r.locked_out;
  } catch (const Error&) {
    s.failed = true;
  }
  return s;
}

Selected select_lasso(const Matrix& X, const Vector& y, lasso::LassoConfig cfg, std::uint64_t seed) {
  Selected s;
  cfg.cv_seed = seed;
  try {
    s.set = lasso::cv_select(X, y, cfg).support;
  } catch (const Error&) {
    s.failed = true;
  }
  return s;
}

std::uint64_t cv_seed_for(std::uint64_t master, int rep) {
  return stream_seed(master ^ 0xC2B2AE3D27D4EB4FULL, static_cast<std::uint64_t>(rep));
}

// ------------------------------------------------------------------ IV study

struct EstimateOutcome {
  bool failed = false;
  double beta = 0.0;
  double p = 0.0;
  bool covered = false;
};

struct IvRep {
  // indexed [selector][estimator]
  std::vector<Selected> selections;
  std::vector<std::vector<EstimateOutcome>> estimates;
};

struct Accumulator {
  int n_zero = 0;
  int failures = 0;
  int contributing = 0;
  double bias = 0.0;
  double mad = 0.0;
  double tp = 0.0;
  double fp = 0.0;
  double p = 0.0;
  double cp = 0.0;
};

}  // namespace

IvStudyMetrics run_iv_study(const IvSimSpec& spec, const Selectors& selectors, const IvEstimators& estimators,
                            int threads) {
  spec.validate();
  solve_concentration_C(concentration_scale(spec), spec.L, spec.mu2, toeplitz_sigma(spec.L, spec.rho));

  std::vector<std::string> selector_names;
  if (selectors.semms) selector_names.push_back("SEMMS");
  if (selectors.lasso) selector_names.push_back("LASSO");
  std::vector<iv::Method> methods;
  if (estimators.tsls) methods.push_back(iv::Method::TSLS);
  if (estimators.fuller) methods.push_back(iv::Method::FULLER);
  if (estimators.liml) methods.push_back(iv::Method::LIML);
  require(!selector_names.empty() && !methods.empty(), "at least one selector and one estimator are required");

  std::vector<IvRep> reps(static_cast<std::size_t>(spec.B));
  parallel_for(spec.B, threads, [&](int rep) {
    const IvData data = gen_iv_dataset(spec, rep);
    IvRep& out = reps[rep];
    for (const auto& name : selector_names) {
      Selected sel = name == "SEMMS" ? select_semms(data.Z, data.x, {}, selectors.semms_config)
                                     : select_lasso(data.Z, data.x, selectors.lasso_config,
                                                    cv_seed_for(spec.master_seed, rep));
      std::vector<EstimateOutcome> outcomes(methods.size());
      if (!sel.failed && !sel.set.empty()) {
        iv::IvProblem prob;
        prob.Z = data.Z(Eigen::all, std::vector<int>(sel.set.begin(), sel.set.end()));
        prob.X_endog = data.x;
        prob.X_exog = Matrix::Ones(spec.n, 1);
        prob.y = data.y;
        for (std::size_t e = 0; e < methods.size(); ++e) {
          try {
            iv::KClassEstimate est;
            switch (methods[e]) {
              case iv::Method::TSLS: est = iv::tsls(prob); break;
              case iv::Method::FULLER: est = iv::fuller(prob); break;
              default: est = iv::liml(prob); break;
            }
            const double b = est.beta(0);
            const double t = (b - spec.beta) / est.se_classical(0);
            outcomes[e] = {false, b, stats::t_two_sided_p(t, est.df_resid), est.ci_95[0].contains(spec.beta)};
          } catch (const Error&) {
            outcomes[e].failed = true;
          }
        }
      }
      out.selections.push_back(std::move(sel));
      out.estimates.push_back(std::move(outcomes));
    }
  });

  IvStudyMetrics metrics;
  metrics.spec = spec;
  for (std::size_t s = 0; s < selector_names.size(); ++s) {
    for (std::size_t e = 0; e < methods.size(); ++e) {
      Accumulator acc;
      for (int rep = 0; rep < spec.B; ++rep) {
        const Selected& sel = reps[rep].selections[s];
        const EstimateOutcome& est = reps[rep].estimates[s][e];
        if (sel.failed || (!sel.set.empty() && est.failed)) {
          ++acc.failures;
          continue;
        }
        if (sel.set.empty()) {
          ++acc.n_zero;
          continue;
        }
        ++acc.contributing;
        int tp = 0;
        for (int j : sel.set) tp += j < spec.L ? 1 : 0;
        acc.tp += tp;
        acc.fp += static_cast<double>(sel.set.size()) - tp;
        acc.bias += est.beta - spec.beta;
        acc.mad += std::fabs(est.beta - spec.beta);
        acc.p += est.p;
        acc.cp += est.covered ? 1.0 : 0.0;
      }
      IvRow row;
      row.selector = selector_names[s];
      row.estimator = std::string(iv::to_string(methods[e]));
      row.n_zero = acc.n_zero;
      row.failures = acc.failures;
      row.contributing = acc.contributing;
      const double k = acc.contributing > 0 ? acc.contributing : std::numeric_limits<double>::quiet_NaN();
      row.bias = acc.bias / k;
      row.mad = acc.mad / k;
      row.tp = acc.tp / k;
      row.fp = acc.fp / k;
      row.mean_p = acc.p / k;
      row.cp = acc.cp / k;
      metrics.rows.push_back(row);
    }
  }
  return metrics;
}

// ------------------------------------------------------------ mediation study

namespace {

struct MediationOutcome {
  bool failed = false;
  int tp = 0;
  int fp = 0;
  bool found = false;
  bool b_significant = false;
  bool c_significant = false;
  double b = 0.0;
  bool covered = false;
};

// The true predictor or mediator counts as found when V_1 is selected, when
// V_1 was locked out by a selected member of V_T, or when any other member of
// V_T is selected; the returned index stands in for V_1 in the step-2 model.
std::optional<int> focal_variable(const Selected& sel, const IndexSet& true_set) {
  if (sel.set.count(0)) return 0;
  for (const auto& lo : sel.locked_out) {
    if (lo.index == 0 && sel.set.count(lo.trigger) && true_set.count(lo.trigger)) return lo.trigger;
  }
  for (int j : sel.set) {
    if (true_set.count(j)) return j;
  }
  return std::nullopt;
}

MediationOutcome mediation_outcome(const MediationSimSpec& spec, const MediationData& data, const Selected& sel) {
  MediationOutcome out;
  if (sel.failed) {
    out.failed = true;
    return out;
  }
  for (int j : sel.set) (data.true_set.count(j) ? out.tp : out.fp) += 1;
  const auto focal = focal_variable(sel, data.true_set);
  if (!focal) return out;
  out.found = true;
  const std::vector<int> cols(sel.set.begin(), sel.set.end());
  const auto pos = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), *focal) - cols.begin());
  try {
    mediation::MediationFit fit;
    mediation::PathEstimate b;
    mediation::PathEstimate c;
    if (spec.scenario == mediation::Scenario::MultipleM) {
      fit = mediation::mediation_fit(data.y, data.x, data.mediators(Eigen::all, cols));
      b = fit.b[pos];
      c = fit.c_prime[0];
    } else {
      fit = mediation::mediation_fit(data.y, data.x(Eigen::all, cols), data.mediators);
      b = fit.b[0];
      c = fit.c_prime[pos];
    }
    const double crit = stats::t_quantile(0.975, fit.df_resid);
    out.b = b.estimate;
    out.b_significant = b.p < 0.05;
    out.c_significant = c.p < 0.05;
    out.covered = std::fabs(b.estimate - spec.beta2) <= crit * b.se;
  } catch (const Error&) {
    out.failed = true;
  }
  return out;
}

}  // namespace

MediationStudyMetrics run_mediation_study(const MediationSimSpec& spec, const Selectors& selectors, int threads) {
  spec.validate();
  std::vector<std::string> names;
  if (selectors.semms) names.push_back("SEMMS");
  if (selectors.lasso) names.push_back("LASSO");
  require(!names.empty(), "at least one selector is required");

  std::vector<std::vector<MediationOutcome>> reps(static_cast<std::size_t>(spec.B));
  parallel_for(spec.B, threads, [&](int rep) {
    const MediationData data = gen_mediation_dataset(spec, rep);
    const std::uint64_t cv_seed = cv_seed_for(spec.master_seed, rep);
    for (const auto& name : names) {
      Selected sel;
      if (spec.scenario == mediation::Scenario::MultipleM) {
        if (name == "SEMMS") {
          Matrix X(spec.N, spec.P + 1);
          X << data.mediators, data.x;
          sel = select_semms(X, data.y, {spec.P}, selectors.semms_config);
        } else {
          sel = select_lasso(data.mediators, data.x.col(0), selectors.lasso_config, cv_seed);
        }
      } else {
        const Vector m = data.mediators.col(0);
        sel = name == "SEMMS" ? select_semms(data.x, m, {}, selectors.semms_config)
                              : select_lasso(data.x, m, selectors.lasso_config, cv_seed);
      }
      reps[rep].push_back(mediation_outcome(spec, data, sel));
    }
  });

  MediationStudyMetrics metrics;
  metrics.spec = spec;
  for (std::size_t s = 0; s < names.size(); ++s) {
    MediationRow row;
    row.selector = names[s];
    double tp = 0, fp = 0, b_sig = 0, c_sig = 0, bias = 0, mad = 0, cp = 0;
    for (int rep = 0; rep < spec.B; ++rep) {
      const auto& o = reps[rep][s];
      if (o.failed) {
        ++row.failures;
        continue;
      }
      tp += o.tp;
      fp += o.fp;
      if (!o.found) {
        ++row.n_zero;
        continue;
      }
      ++row.contributing;
      b_sig += o.b_significant;
      c_sig += o.c_significant;
      bias += o.b - spec.beta2;
      mad += std::fabs(o.b - spec.beta2);
      cp += o.covered;
    }
    const double all = spec.B - row.failures;
    const double k = row.contributing > 0 ? row.contributing : std::numeric_limits<double>::quiet_NaN();
    row.tp = tp / all;
    row.fp = fp / all;
    row.b_rate = b_sig / k;
    row.c_prime_rate = c_sig / k;
    row.b_rate_all = b_sig / all;
    row.bias = bias / k;
    row.mad = mad / k;
    row.cp = cp / k;
    metrics.rows.push_back(row);
  }
  return metrics;
}

}  // namespace tsvs::sim
