#include "tsvs/semms.hpp"

#include "tsvs/error.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <unordered_map>

namespace tsvs::semms {

void SemmsConfig::validate() const {
  require(lockout_threshold > 0 && lockout_threshold <= 1, "lockout_threshold must lie in (0, 1]");
  require(tol >= 0, "tol must be non-negative");
  require(max_em_iter > 0, "max_em_iter must be positive");
  require(max_greedy_iter >= 0, "max_greedy_iter must be non-negative");
  require(initial_screen >= 0, "initial_screen must be non-negative");
  require(prior_pseudocount >= 0, "prior_pseudocount must be non-negative");
}

namespace {

constexpr double kSigma2Floor = 1e-12;
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

struct Member {
  int index;
  int sign;
};
using Membership = std::vector<Member>;  // sorted by index

// Residualized sufficient statistics. The locked-in columns and an intercept
// are projected out of both the response and the candidates, so the
// remaining model has no fixed effects.
class Workspace {
 public:
  Workspace(const Matrix& X, const Vector& y, const IndexSet& locked_in)
      : X_(X), locked_in_(locked_in) {
    require(X.rows() == y.size(), "rows(X) must equal length(y)");
    const Eigen::Index n = X.rows();
    Matrix W(n, 1 + static_cast<Eigen::Index>(locked_in.size()));
    W.col(0).setOnes();
    Eigen::Index c = 1;
    for (int j : locked_in) {
      require(j >= 0 && j < X.cols(), "locked-in index out of range");
      W.col(c++) = X.col(j);
    }
    QrSolver qr(W);
    n_eff_ = static_cast<double>(n - W.cols());
    require(n_eff_ >= 1, "too few rows for the locked-in columns");
    Xr_ = X - qr.project(X);
    const Vector yr = y - qr.project(y);
    yy_ = yr.squaredNorm();
    xy_ = Xr_.transpose() * yr;
    diag_ = Xr_.colwise().squaredNorm().transpose();
    for (int j = 0; j < X.cols(); ++j) {
      if (!locked_in.count(j)) candidates_.push_back(j);
    }
    for (int j : locked_in) {
      xy_(j) = 0.0;
      diag_(j) = 0.0;
    }
  }

  int cols() const { return static_cast<int>(X_.cols()); }
  double n_eff() const { return n_eff_; }
  double yy() const { return yy_; }
  double xy(int j) const { return xy_(j); }
  double diag(int j) const { return diag_(j); }
  const std::vector<int>& candidates() const { return candidates_; }
  int n_candidates() const { return static_cast<int>(candidates_.size()); }
  const IndexSet& locked_in() const { return locked_in_; }

  /// Column j of the residualized Gram matrix.
  const Vector& gram_col(int j) {
    auto it = gram_.find(j);
    if (it == gram_.end()) it = gram_.emplace(j, Xr_.transpose() * Xr_.col(j)).first;
    return it->second;
  }

  /// Pearson correlation of every column of the original X with column j.
  const Vector& corr_col(int j) {
    auto it = corr_.find(j);
    if (it == corr_.end()) it = corr_.emplace(j, correlations_with(X_, j)).first;
    return it->second;
  }

  double marginal_score(int j) const {
    return diag_(j) > 0 ? xy_(j) / std::sqrt(diag_(j)) : 0.0;
  }

 private:
  const Matrix& X_;
  IndexSet locked_in_;
  Matrix Xr_;
  Vector xy_;
  Vector diag_;
  double yy_ = 0.0;
  double n_eff_ = 0.0;
  std::vector<int> candidates_;
  std::unordered_map<int, Vector> gram_;
  std::unordered_map<int, Vector> corr_;
};

// Spectral form of the selected block: with A = D G_SS D and c = D X_S'y
// (D = diag(signs)), A = Q diag(evals) Q', and the likelihood only needs
// Q'1 and Q'c.
struct Spectral {
  Vector evals;
  Vector one_t;
  Vector c_t;
  Matrix Q;
  double one_c = 0.0;   // 1'c
  double one_a1 = 0.0;  // 1'A1
  int size() const { return static_cast<int>(evals.size()); }
};

Spectral spectral_of(Workspace& ws, const Membership& S) {
  Spectral sp;
  const auto s = static_cast<Eigen::Index>(S.size());
  if (s == 0) return sp;
  Matrix A(s, s);
  Vector c(s);
  for (Eigen::Index a = 0; a < s; ++a) {
    const Vector& col = ws.gram_col(S[a].index);
    for (Eigen::Index b = 0; b < s; ++b) A(b, a) = S[a].sign * S[b].sign * col(S[b].index);
    c(a) = S[a].sign * ws.xy(S[a].index);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(A);
  sp.evals = eig.eigenvalues().cwiseMax(0.0);
  sp.Q = eig.eigenvectors();
  sp.one_t = sp.Q.transpose() * Vector::Ones(s);
  sp.c_t = sp.Q.transpose() * c;
  sp.one_c = c.sum();
  sp.one_a1 = A.sum();
  return sp;
}

struct Gaussian {
  double loglik = 0.0;
  double lambda = 0.0;  // sigma2 / sigma2_e
  double mu = 0.0;
  double sigma2_e = 1.0;
  bool degenerate = false;
  double sigma2() const { return lambda * sigma2_e; }
};

// Quadratic form (y - mu X1)'(I + lambda XX')^{-1}(y - mu X1).
double quad_form(const Workspace& ws, const Spectral& sp, double lambda, double mu) {
  double q = ws.yy() - 2.0 * mu * sp.one_c + mu * mu * sp.one_a1;
  for (int i = 0; i < sp.size(); ++i) {
    const double r = sp.c_t(i) - mu * sp.evals(i) * sp.one_t(i);
    q -= lambda * r * r / (1.0 + lambda * sp.evals(i));
  }
  return std::max(q, 1e-300);
}

double log_det(const Spectral& sp, double lambda) {
  double out = 0.0;
  for (int i = 0; i < sp.size(); ++i) out += std::log1p(lambda * sp.evals(i));
  return out;
}

double gls_mu(const Spectral& sp, double lambda) {
  double num = 0.0;
  double den = 0.0;
  for (int i = 0; i < sp.size(); ++i) {
    const double d = 1.0 + lambda * sp.evals(i);
    num += sp.one_t(i) * sp.c_t(i) / d;
    den += sp.one_t(i) * sp.one_t(i) * sp.evals(i) / d;
  }
  return den > 0 ? num / den : 0.0;
}

double loglik_fixed(const Workspace& ws, const Spectral& sp, double lambda, double mu, double sigma2_e) {
  const double n = ws.n_eff();
  return -0.5 * (n * (kLog2Pi + std::log(sigma2_e)) + log_det(sp, lambda) +
                 quad_form(ws, sp, lambda, mu) / sigma2_e);
}

// Log-likelihood with mu and sigma2_e at their conditional maximizers.
Gaussian profile_at(const Workspace& ws, const Spectral& sp, double lambda) {
  Gaussian g;
  const double n = ws.n_eff();
  g.lambda = lambda;
  g.mu = gls_mu(sp, lambda);
  g.sigma2_e = quad_form(ws, sp, lambda, g.mu) / n;
  g.loglik = -0.5 * (n * (kLog2Pi + std::log(g.sigma2_e) + 1.0) + log_det(sp, lambda));
  return g;
}

// Maximizes the likelihood over (lambda, mu, sigma2_e) for a fixed membership.
Gaussian maximize(const Workspace& ws, const Spectral& sp) {
  if (sp.size() == 0) return profile_at(ws, sp, 0.0);
  const double scale = sp.evals.maxCoeff();
  if (!(scale > 0)) return profile_at(ws, sp, 0.0);
  constexpr double lo = -25.0;
  constexpr double hi = 14.0;
  constexpr double step = 1.5;
  auto at = [&](double tau) { return profile_at(ws, sp, std::exp(tau) / scale); };

  double best_tau = lo;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (double tau = lo; tau <= hi + 1e-9; tau += step) {
    const double ll = at(tau).loglik;
    if (ll > best_ll) {
      best_ll = ll;
      best_tau = tau;
    }
  }
  const double a = std::max(lo, best_tau - step);
  const double b = std::min(hi, best_tau + step);
  const auto [tau, neg] = boost::math::tools::brent_find_minima(
      [&](double t) { return -at(t).loglik; }, a, b, 40);
  Gaussian g = (-neg > best_ll) ? at(tau) : at(best_tau);
  // A collapsed slab variance (optimum at the lower end of the search range)
  // is floored and reported.
  if (g.sigma2() < kSigma2Floor || std::exp(lo + step) / scale >= g.lambda) {
    g.degenerate = true;
    g.lambda = std::max(g.lambda, kSigma2Floor / g.sigma2_e);
  }
  return g;
}

// ---------------------------------------------------------------- proportions

struct Counts {
  double left = 0;
  double null = 0;
  double right = 0;
};

Counts counts_of(const Membership& S, int n_candidates) {
  Counts c;
  for (const auto& m : S) (m.sign < 0 ? c.left : c.right) += 1;
  c.null = n_candidates - c.left - c.right;
  return c;
}

struct Proportions {
  double left, null, right;
};

Proportions map_proportions(const Counts& c, double kappa) {
  const double total = c.left + c.null + c.right + 3 * kappa;
  if (total <= 0) return {0.0, 1.0, 0.0};
  return {(c.left + kappa) / total, (c.null + kappa) / total, (c.right + kappa) / total};
}

double xlogy(double x, double y) {
  if (x == 0) return 0.0;
  if (y <= 0) return -std::numeric_limits<double>::infinity();
  return x * std::log(y);
}

// Membership log-probability plus the Dirichlet log-prior (up to a constant).
double membership_term(const Counts& c, const Proportions& p, double kappa) {
  return xlogy(c.left + kappa, p.left) + xlogy(c.null + kappa, p.null) + xlogy(c.right + kappa, p.right);
}

double membership_term_map(const Counts& c, double kappa) {
  return membership_term(c, map_proportions(c, kappa), kappa);
}

// ---------------------------------------------------------------- membership edits

Membership with_member(Membership S, int index, int sign) {
  auto it = std::lower_bound(S.begin(), S.end(), index, [](const Member& m, int i) { return m.index < i; });
  if (it != S.end() && it->index == index) {
    if (sign == 0) {
      S.erase(it);
    } else {
      it->sign = sign;
    }
  } else if (sign != 0) {
    S.insert(it, Member{index, sign});
  }
  return S;
}

int sign_of(const Membership& S, int index) {
  auto it = std::lower_bound(S.begin(), S.end(), index, [](const Member& m, int i) { return m.index < i; });
  return (it != S.end() && it->index == index) ? it->sign : 0;
}

// Total objective of a membership with every parameter at its maximizer.
struct Evaluation {
  Gaussian gaussian;
  double total = 0.0;
};

Evaluation evaluate(Workspace& ws, const Membership& S, double kappa) {
  Evaluation e;
  e.gaussian = maximize(ws, spectral_of(ws, S));
  e.total = e.gaussian.loglik + membership_term_map(counts_of(S, ws.n_candidates()), kappa);
  return e;
}

// Conditional log-probabilities of gamma_k in {-1, 0, 1} with every
// parameter and the other memberships held fixed.
std::array<double, 3> conditional_scores(Workspace& ws, const Membership& S, int k, const Gaussian& g,
                                         const Proportions& p) {
  std::array<double, 3> out{};
  const std::array<int, 3> signs{-1, 0, 1};
  const std::array<double, 3> log_p{std::log(p.left), std::log(p.null), std::log(p.right)};
  for (int c = 0; c < 3; ++c) {
    const Membership T = with_member(S, k, signs[c]);
    out[c] = loglik_fixed(ws, spectral_of(ws, T), g.lambda, g.mu, g.sigma2_e) + log_p[c];
  }
  return out;
}

PosteriorRow posterior_from(int k, const std::array<double, 3>& scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  std::array<double, 3> w{};
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    w[c] = std::isfinite(scores[c]) ? std::exp(scores[c] - top) : 0.0;
    total += w[c];
  }
  return {k, w[0] / total, w[1] / total, w[2] / total};
}

PosteriorTable posterior_table(Workspace& ws, const Membership& S, const Gaussian& g, const Proportions& p) {
  PosteriorTable table;
  table.reserve(ws.candidates().size());
  for (int k : ws.candidates()) table.push_back(posterior_from(k, conditional_scores(ws, S, k, g, p)));
  return table;
}

MixtureParams params_of(const Gaussian& g, const Proportions& p) {
  MixtureParams m;
  m.p_left = p.left;
  m.p_null = p.null;
  m.p_right = p.right;
  m.mu = g.mu;
  m.sigma2 = std::max(g.sigma2(), kSigma2Floor);
  m.sigma2_e = g.sigma2_e;
  return m;
}

// ---------------------------------------------------------------- lock-out

class LockOutBook {
 public:
  explicit LockOutBook(double threshold) : threshold_(threshold) {}

  bool contains(int j) const { return entries_.count(j) > 0; }

  void after_add(Workspace& ws, const Membership& S, int added) {
    const Vector& r = ws.corr_col(added);
    for (int j : ws.candidates()) {
      if (j == added || sign_of(S, j) != 0 || contains(j)) continue;
      if (std::fabs(r(j)) > threshold_) entries_[j] = LockOut{j, added, r(j)};
    }
  }

  void after_remove(Workspace& ws, const Membership& S, int removed) {
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (it->second.trigger != removed) {
        ++it;
        continue;
      }
      std::optional<LockOut> replacement;
      for (const auto& m : S) {
        const double r = ws.corr_col(m.index)(it->first);
        if (std::fabs(r) > threshold_) {
          replacement = LockOut{it->first, m.index, r};
          break;
        }
      }
      if (replacement) {
        it->second = *replacement;
        ++it;
      } else {
        it = entries_.erase(it);
      }
    }
  }

  std::vector<LockOut> list() const {
    std::vector<LockOut> out;
    for (const auto& [j, entry] : entries_) out.push_back(entry);
    return out;
  }

 private:
  double threshold_;
  std::map<int, LockOut> entries_;
};

// ---------------------------------------------------------------- helpers

Membership membership_from(const PosteriorTable& table) {
  Membership S;
  for (const auto& row : table) {
    if (row.w_left > row.w_null && row.w_left >= row.w_right) {
      S.push_back({row.index, -1});
    } else if (row.w_right > row.w_null && row.w_right > row.w_left) {
      S.push_back({row.index, 1});
    }
  }
  std::sort(S.begin(), S.end(), [](const Member& a, const Member& b) { return a.index < b.index; });
  return S;
}

std::vector<int> top_screened(const Workspace& ws, int count) {
  std::vector<int> order = ws.candidates();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::fabs(ws.marginal_score(a)) > std::fabs(ws.marginal_score(b));
  });
  if (static_cast<int>(order.size()) > count) order.resize(static_cast<std::size_t>(count));
  return order;
}

int marginal_sign(const Workspace& ws, int j) { return ws.xy(j) < 0 ? -1 : 1; }

}  // namespace

// ---------------------------------------------------------------- public API

EmState initial_state(const Matrix& X, const Vector& y, const IndexSet& locked_in) {
  Workspace ws(X, y, locked_in);
  EmState state;
  const auto top = top_screened(ws, 10);
  std::vector<double> slopes;
  for (int j : top) {
    if (ws.diag(j) > 0) slopes.push_back(std::fabs(ws.xy(j) / ws.diag(j)));
  }
  if (!slopes.empty()) {
    double mean = 0.0;
    for (double s : slopes) mean += s;
    mean /= static_cast<double>(slopes.size());
    double var = 0.0;
    for (double s : slopes) var += (s - mean) * (s - mean);
    var = slopes.size() > 1 ? var / static_cast<double>(slopes.size() - 1) : 0.0;
    state.params.mu = mean;
    state.params.sigma2 = std::max(var, kSigma2Floor);
  }
  const double n = static_cast<double>(y.size());
  state.params.sigma2_e = std::max((y.array() - y.mean()).square().sum() / (n - 1.0), kSigma2Floor);
  for (int k : ws.candidates()) state.posteriors.push_back({k, 0.0, 1.0, 0.0});
  return state;
}

EmStepResult em_step(const Matrix& X, const Vector& y, const IndexSet& locked_in, const EmState& state,
                     const SemmsConfig& config) {
  config.validate();
  const auto& in = state.params;
  require(std::fabs(in.p_left + in.p_null + in.p_right - 1.0) < 1e-9, "mixture proportions must sum to 1");
  require(in.sigma2 > 0 && in.sigma2_e > 0, "variances must be positive");
  Workspace ws(X, y, locked_in);

  Gaussian g;
  g.mu = in.mu;
  g.sigma2_e = in.sigma2_e;
  g.lambda = in.sigma2 / in.sigma2_e;
  const Proportions p{in.p_left, in.p_null, in.p_right};

  // Membership step: coordinate-wise conditional maximization.
  Membership S = membership_from(state.posteriors);
  EmStepResult out;
  out.posteriors.reserve(ws.candidates().size());
  for (int k : ws.candidates()) {
    const auto scores = conditional_scores(ws, S, k, g, p);
    const int current = sign_of(S, k);
    int best = current + 1;
    for (int c = 0; c < 3; ++c) {
      if (scores[c] > scores[best]) best = c;
    }
    out.posteriors.push_back(posterior_from(k, scores));
    if (best - 1 != current) S = with_member(S, k, best - 1);
  }

  // Parameter step.
  const Counts counts = counts_of(S, ws.n_candidates());
  const Proportions p_new = map_proportions(counts, config.prior_pseudocount);
  Gaussian g_new = maximize(ws, spectral_of(ws, S));
  out.params = params_of(g_new, p_new);
  out.degenerate_component = g_new.degenerate;
  out.loglik = g_new.loglik + membership_term(counts, p_new, config.prior_pseudocount);
  return out;
}

double profile_loglik(const Matrix& X, const Vector& y, const IndexSet& locked_in,
                      const std::map<int, int>& membership, const SemmsConfig& config) {
  Workspace ws(X, y, locked_in);
  Membership S;
  for (const auto& [j, sign] : membership) {
    require(!locked_in.count(j), "locked-in columns cannot be members");
    require(sign == 1 || sign == -1, "membership signs must be +1 or -1");
    S.push_back({j, sign});
  }
  return evaluate(ws, S, config.prior_pseudocount).total;
}

SemmsResult greedy_search(const Matrix& X, const Vector& y, const IndexSet& locked_in,
                          const SemmsConfig& config) {
  config.validate();
  Workspace ws(X, y, locked_in);
  const double kappa = config.prior_pseudocount;
  const int max_iter = config.max_greedy_iter > 0 ? config.max_greedy_iter : 2 * ws.cols();

  SemmsResult result;
  result.locked_in = locked_in;
  LockOutBook lockouts(config.lockout_threshold);

  Membership S;
  for (int j : top_screened(ws, config.initial_screen)) {
    if (lockouts.contains(j)) continue;
    S = with_member(S, j, marginal_sign(ws, j));
    lockouts.after_add(ws, S, j);
  }
  Evaluation current = evaluate(ws, S, kappa);
  result.loglik_trace.push_back(current.total);

  auto signs_to_try = [&](int k) -> std::vector<int> {
    if (S.empty()) return {marginal_sign(ws, k)};
    return {1, -1};
  };

  result.converged = false;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    bool changed = false;
    if (config.greedy) {
      double best_gain = config.tol;
      std::optional<std::pair<Membership, Evaluation>> best;
      int best_index = -1;
      int best_sign = 0;
      for (int k : ws.candidates()) {
        const int current_sign = sign_of(S, k);
        if (current_sign != 0) {
          Membership T = with_member(S, k, 0);
          Evaluation e = evaluate(ws, T, kappa);
          if (e.total - current.total > best_gain) {
            best_gain = e.total - current.total;
            best.emplace(std::move(T), e);
            best_index = k;
            best_sign = 0;
          }
          continue;
        }
        if (lockouts.contains(k)) continue;
        for (int sign : signs_to_try(k)) {
          Membership T = with_member(S, k, sign);
          Evaluation e = evaluate(ws, T, kappa);
          if (e.total - current.total > best_gain) {
            best_gain = e.total - current.total;
            best.emplace(std::move(T), e);
            best_index = k;
            best_sign = sign;
          }
        }
      }
      if (best) {
        S = std::move(best->first);
        current = best->second;
        if (best_sign != 0) {
          lockouts.after_add(ws, S, best_index);
        } else {
          lockouts.after_remove(ws, S, best_index);
        }
        changed = true;
      }
    } else {
      // Sweep mode: visit candidates in order and apply any improving change.
      for (int k : ws.candidates()) {
        const int current_sign = sign_of(S, k);
        if (current_sign == 0 && lockouts.contains(k)) continue;
        std::vector<int> options;
        if (current_sign != 0) {
          options = {0, -current_sign};
        } else {
          options = signs_to_try(k);
        }
        for (int sign : options) {
          Membership T = with_member(S, k, sign);
          Evaluation e = evaluate(ws, T, kappa);
          if (e.total - current.total > config.tol) {
            S = std::move(T);
            current = e;
            if (sign != 0 && current_sign == 0) lockouts.after_add(ws, S, k);
            if (sign == 0) lockouts.after_remove(ws, S, k);
            changed = true;
            break;
          }
        }
      }
    }
    if (!changed) {
      result.converged = true;
      break;
    }
    result.loglik_trace.push_back(current.total);
  }
  result.iterations = iter;

  // Report with mu >= 0 so that the membership sign is the sign of the effect.
  Gaussian g = current.gaussian;
  if (g.mu < 0) {
    g.mu = -g.mu;
    for (auto& m : S) m.sign = -m.sign;
  }
  const Counts counts = counts_of(S, ws.n_candidates());
  const Proportions p = map_proportions(counts, kappa);
  result.mixture = params_of(g, p);
  result.degenerate_component = g.degenerate;
  result.final_loglik = current.total;
  result.posteriors = posterior_table(ws, S, g, p);
  for (const auto& m : S) result.selected.insert(m.index);
  for (const auto& row : result.posteriors) {
    if (result.selected.count(row.index)) result.signs[row.index] = row.w_right >= row.w_left ? 1 : -1;
  }
  result.locked_out = lockouts.list();

  std::vector<int> cols(locked_in.begin(), locked_in.end());
  cols.insert(cols.end(), result.selected.begin(), result.selected.end());
  std::sort(cols.begin(), cols.end());
  result.refit_columns = cols;
  result.ols_refit = ols_fit(X(Eigen::all, cols), y, true);
  return result;
}

SemmsResult semms_fit(const Dataset& d, const SemmsConfig& config) {
  const Standardized st = standardize(d);
  SemmsResult result = greedy_search(st.data.predictors(), d.response(), d.locked_in(), config);
  result.ols_refit = ols_fit(d.predictors()(Eigen::all, result.refit_columns), d.response(), true);
  return result;
}

}  // namespace tsvs::semms
