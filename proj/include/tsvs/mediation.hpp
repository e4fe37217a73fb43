#pragma once

#include "tsvs/data_model.hpp"
#include "tsvs/lasso.hpp"
#include "tsvs/semms.hpp"

#include <string_view>
#include <vector>

namespace tsvs::mediation {

enum class Scenario { MultipleM, MultipleX };
enum class Selector { Semms, Lasso };
enum class Classification { Complete, Partial, None };

/// How the lasso handles the exposure when screening mediators. The default
/// regresses the exposure on the mediators; the alternatives treat the
/// exposure as one more candidate or ignore it.
enum class LassoStrategy { ExposureAsResponse, ExposureAsCandidate, MediatorsOnly };

std::string_view to_string(Classification c) noexcept;

struct MediationDesign {
  Vector y;
  Matrix x;          // exposures, N x 1 in the multiple-M scenario
  Matrix mediators;  // N x P_M
  Scenario scenario = Scenario::MultipleM;
  Selector selector = Selector::Semms;
  LassoStrategy lasso_strategy = LassoStrategy::ExposureAsResponse;
  semms::SemmsConfig semms;
  lasso::LassoConfig lasso;

  void validate() const;
};

/// Selection with the lock-out bookkeeping needed to credit a locked-out
/// variable to the selected variable that excluded it.
struct Selection {
  IndexSet selected;
  std::vector<semms::LockOut> locked_out;  // empty for the lasso
};

struct PathEstimate {
  double estimate = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p = 1.0;
};

struct MediationFit {
  /// a(i, j): exposure i -> mediator j, from M_j ~ x.
  std::vector<std::vector<PathEstimate>> a;
  /// b(j): mediator j -> y, from y ~ mediators + x.
  std::vector<PathEstimate> b;
  /// c'(i): direct effect of exposure i, same regression.
  std::vector<PathEstimate> c_prime;
  /// Total effect of each exposure, from y ~ x.
  std::vector<PathEstimate> total;
  /// a(i, j) * b(j).
  std::vector<std::vector<double>> indirect;
  Classification classification = Classification::None;
  double alpha = 0.05;
  int df_resid = 0;  // of the y ~ mediators + x regression
};

/// Multiple-M scenario: SEMMS locks the exposure in and selects among the
/// mediators; the lasso follows `lasso_strategy`. Indices refer to columns
/// of `mediators`.
Selection select_mediators(const MediationDesign& d);

/// Multiple-X scenario: the single mediator is the response and the columns
/// of `x` are the candidates.
Selection select_main_effects(const MediationDesign& d);

/// Fits the mediation paths for the given exposures and selected mediators.
MediationFit mediation_fit(const Vector& y, const Matrix& x, const Matrix& mediators, double alpha = 0.05);

/// Single-mediator rule: complete when a and b are significant and c' is
/// not, partial when all three are, none otherwise.
Classification classify(double p_a, double p_b, double p_c_prime, double alpha);

/// Several paths: some (a, b) pair must be jointly significant; the outcome
/// is complete when no c' is significant and partial otherwise.
Classification classify(const MediationFit& fit);

}  // namespace tsvs::mediation
