#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tsvs/sim.hpp"

#include "support.hpp"

#include <cmath>
#include <cstring>

using namespace tsvs;
using namespace tsvs::sim;
using tsvs::testing::kind_of;

namespace {

// mu2 = scale C^2 s / (1 - C^2 s), solved for C by bisection.
double bisect_C(double scale, double s, double mu2) {
  auto f = [&](double c) { return scale * c * c * s / (1.0 - c * c * s) - mu2; };
  double lo = 0.0, hi = 1.0 / std::sqrt(s) * (1.0 - 1e-15);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double mu2_of(double scale, double s, double C) { return scale * C * C * s / (1.0 - C * C * s); }

double corr(const Vector& a, const Vector& b) {
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

double variance(const Vector& a) { return (a.array() - a.mean()).square().sum() / static_cast<double>(a.size() - 1); }

}  // namespace

TEST_CASE("concentration constant") {
  const Matrix S = toeplitz_sigma(500, 0.5);
  CHECK(S.topLeftCorner(5, 5).sum() == doctest::Approx(11.125));
  const double C = solve_concentration_C(500, 5, 30, S);
  CHECK(C == doctest::Approx(0.071325).epsilon(1e-5));
  CHECK(C == doctest::Approx(bisect_C(500, 11.125, 30)).epsilon(1e-12));
  for (double mu2 : {1.0, 30.0, 180.0, 1000.0}) {
    for (int L : {5, 10, 20}) {
      for (double scale : {100.0, 250.0, 500.0}) {
        const double s = S.topLeftCorner(L, L).sum();
        const double c = solve_concentration_C(scale, L, mu2, S);
        CHECK(std::fabs(mu2_of(scale, s, c) - mu2) < 1e-10 * mu2);
      }
    }
  }
  CHECK(solve_concentration_C(500, 5, 1e-12, S) < 1e-6);
  CHECK(solve_concentration_C(500, 5, 0, S) == 0.0);
}

TEST_CASE("infeasible designs are rejected") {
  const Matrix S = toeplitz_sigma(10, 0.5);
  CHECK(kind_of([&] { solve_concentration_C(0, 5, 30, S); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { solve_concentration_C(100, 11, 30, S); }) == ErrorKind::InvalidArgument);
  Matrix singular(2, 2);
  singular << 1, -1, -1, 1;
  CHECK(kind_of([&] { solve_concentration_C(100, 2, 30, singular); }) == ErrorKind::InvalidArgument);
  // sigma_v^2 = scale / (scale + mu2) underflows to zero.
  CHECK(kind_of([&] { solve_concentration_C(100, 5, 1e20, S); }) == ErrorKind::InfeasibleDesign);
  IvSimSpec spec;
  spec.L = 0;
  CHECK(kind_of([&] { spec.validate(); }) == ErrorKind::InvalidArgument);
  spec = {};
  spec.endog_corr = 1.0;
  CHECK(kind_of([&] { spec.validate(); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("IV generator marginals") {
  IvSimSpec spec;
  spec.n = 10000;
  spec.P = 20;
  spec.L = 5;
  spec.mu2 = 30;
  const auto d = gen_iv_dataset(spec, 0);
  CHECK(d.Z.rows() == 10000);
  CHECK(d.true_support == IndexSet{0, 1, 2, 3, 4});
  CHECK(std::fabs(variance(d.x) - 1.0) < 0.05);

  // Four pooled replications: at 10000 rows a diagonal entry alone has
  // sampling sd 0.014.
  Matrix cov = Matrix::Zero(20, 20);
  for (int rep = 0; rep < 4; ++rep) {
    const Matrix Z = rep == 0 ? d.Z : gen_iv_dataset(spec, rep).Z;
    const Matrix Zc = Z.rowwise() - Z.colwise().mean();
    cov += Zc.transpose() * Zc / (4 * 9999.0);
  }
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) CHECK(std::fabs(cov(i, j) - std::pow(0.5, std::abs(i - j))) < 0.03);

  const Vector v = d.x - d.C * d.Z.leftCols(5).rowwise().sum();
  const Vector e = d.y - spec.beta * d.x;
  CHECK(std::fabs(corr(e, v) - 0.6) < 0.03);
  CHECK(variance(e) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(variance(v) == doctest::Approx(d.sigma_v2).epsilon(0.05));
  // OLS is biased upward by the endogeneity.
  CHECK(d.x.dot(d.y) / d.x.squaredNorm() > spec.beta + 0.2);
}

TEST_CASE("generators are deterministic") {
  IvSimSpec iv;
  iv.P = 50;
  const auto a = gen_iv_dataset(iv, 3);
  const auto b = gen_iv_dataset(iv, 3);
  CHECK(a.Z == b.Z);
  CHECK(a.y == b.y);
  CHECK(gen_iv_dataset(iv, 4).y != a.y);
  iv.master_seed = 2;
  CHECK(gen_iv_dataset(iv, 3).y != a.y);

  MediationSimSpec med;
  med.setting = 3;
  const auto m1 = gen_mediation_dataset(med, 7);
  const auto m2 = gen_mediation_dataset(med, 7);
  CHECK(m1.mediators == m2.mediators);
  CHECK(m1.y == m2.y);
  CHECK(stream_seed(1, 0) != stream_seed(1, 1));
  CHECK(stream_seed(1, 0) != stream_seed(2, 0));
}

TEST_CASE("mediation generator") {
  MediationSimSpec spec;
  spec.N = 10000;
  spec.P = 20;

  SUBCASE("setting 1") {
    const auto d = gen_mediation_dataset(spec, 0);
    CHECK(d.true_set == IndexSet{0});
    CHECK(d.x.cols() == 1);
    CHECK(d.mediators.cols() == 20);
    CHECK(d.x.minCoeff() >= 0.0);
    CHECK(d.x.maxCoeff() <= 1.0);
    Matrix X1(spec.N, 2);
    X1 << Vector::Ones(spec.N), d.x;
    const Vector total = X1.colPivHouseholderQr().solve(d.y);
    CHECK(total(1) == doctest::Approx(3.0).epsilon(0.05));
    const Vector resid = d.mediators.col(0) - d.x * 3.0;
    CHECK(variance(resid) == doctest::Approx(0.2).epsilon(0.05));
  }
  SUBCASE("setting 3") {
    spec.setting = 3;
    spec.scenario = mediation::Scenario::MultipleX;
    const auto d = gen_mediation_dataset(spec, 0);
    CHECK(d.true_set.size() == 10);
    for (int j = 1; j < 10; ++j) CHECK(std::fabs(corr(d.x.col(0), d.x.col(j)) - 0.7) < 0.03);
    CHECK(std::fabs(corr(d.x.col(0), d.x.col(15))) < 0.05);
  }
  SUBCASE("setting 2 chains the decoys") {
    spec.setting = 2;
    spec.scenario = mediation::Scenario::MultipleX;
    const auto d = gen_mediation_dataset(spec, 0);
    CHECK(corr(d.x.col(0), d.x.col(1)) > corr(d.x.col(0), d.x.col(9)));
  }
  SUBCASE("setting 4 mixes signs") {
    spec.setting = 4;
    spec.scenario = mediation::Scenario::MultipleX;
    const auto d = gen_mediation_dataset(spec, 0);
    for (int j = 1; j <= 3; ++j) CHECK(corr(d.x.col(0), d.x.col(j)) > 0.5);
    for (int j = 4; j < 10; ++j) CHECK(corr(d.x.col(0), d.x.col(j)) < -0.5);
  }
  SUBCASE("target correlation") {
    spec.setting = 3;
    spec.rho = 0.9;
    spec.beta1 = 0.5;
    spec.beta2 = 0.5;
    for (auto scenario : {mediation::Scenario::MultipleX, mediation::Scenario::MultipleM}) {
      spec.scenario = scenario;
      const auto d = gen_mediation_dataset(spec, 0);
      const Matrix& V = scenario == mediation::Scenario::MultipleX ? d.x : d.mediators;
      for (int j = 1; j < 10; ++j) CHECK(std::fabs(corr(V.col(0), V.col(j)) - 0.9) < 0.02);
    }
  }
}

TEST_CASE("IV study smoke run and accounting") {
  IvSimSpec spec;
  spec.P = 60;
  spec.B = 1;
  const auto m = run_iv_study(spec);
  CHECK(m.rows.size() == 6);
  spec.B = 12;
  const auto big = run_iv_study(spec);
  for (const auto& r : big.rows) {
    CHECK(r.contributing + r.n_zero + r.failures == 12);
    if (r.contributing > 0) {
      CHECK(r.cp >= 0.0);
      CHECK(r.cp <= 1.0);
      CHECK(r.tp <= spec.L);
      CHECK(r.mad >= std::fabs(r.bias));
    }
  }
  IvEstimators only_liml{false, false, true};
  Selectors only_semms;
  only_semms.lasso = false;
  const auto one = run_iv_study(spec, only_semms, only_liml);
  REQUIRE(one.rows.size() == 1);
  CHECK(one.rows[0].selector == "SEMMS");
  CHECK(one.rows[0].estimator == "LIML");
}

TEST_CASE("mediation study smoke run and accounting") {
  MediationSimSpec spec;
  spec.P = 60;
  spec.B = 10;
  spec.setting = 2;
  const auto m = run_mediation_study(spec);
  REQUIRE(m.rows.size() == 2);
  for (const auto& r : m.rows) {
    CHECK(r.contributing + r.n_zero + r.failures == 10);
    CHECK(r.tp <= 10.0);
    if (r.contributing > 0) {
      CHECK(r.b_rate_all <= r.b_rate);
      CHECK(r.mad >= std::fabs(r.bias));
    }
  }
}

TEST_CASE("studies do not depend on the thread count") {
  IvSimSpec iv;
  iv.P = 60;
  iv.B = 8;
  const auto a = run_iv_study(iv, {}, {}, 1);
  const auto b = run_iv_study(iv, {}, {}, 4);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].n_zero == b.rows[i].n_zero);
    CHECK(std::memcmp(&a.rows[i].bias, &b.rows[i].bias, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.rows[i].cp, &b.rows[i].cp, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.rows[i].fp, &b.rows[i].fp, sizeof(double)) == 0);
  }
  MediationSimSpec med;
  med.P = 60;
  med.B = 8;
  const auto c = run_mediation_study(med, {}, 1);
  const auto d = run_mediation_study(med, {}, 4);
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    CHECK(std::memcmp(&c.rows[i].bias, &d.rows[i].bias, sizeof(double)) == 0);
    CHECK(c.rows[i].tp == d.rows[i].tp);
  }
}
