#include <doctest.h>

#include "cmeta/classical.hpp"
#include "support.hpp"

#include <cmath>

using namespace cmeta;

namespace {

std::vector<StudyEffect> effects(std::initializer_list<std::pair<double, double>> xs, Measure m = Measure::RD) {
  std::vector<StudyEffect> out;
  for (auto [t, v] : xs) out.push_back({t, v, m, false});
  return out;
}

HeterogeneityEstimate fixed_tau(double tau2) { return {tau2, 0.0, TauMethod::DerSimonianLaird, false}; }

const MetaDataset kTwo{"two", {{"s1", 10, 10, 5, 15}, {"s2", 30, 70, 40, 60}}};

}  // namespace

TEST_CASE("fixed effects") {
  auto one = pool_fixed(effects({{0.3, 0.04}}));
  CHECK(one.point == 0.3);
  CHECK(one.variance == 0.04);
  CHECK(one.weights(0) == 1.0);
  CHECK_FALSE(one.tau2.has_value());

  auto two = pool_fixed(effects({{1, 1}, {3, 1}}));
  CHECK(two.point == 2.0);
  CHECK(two.variance == 0.5);

  auto same = pool_fixed(effects({{1, 1}, {1, 9}}));
  CHECK(same.point == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(same.ci_low <= same.point);
  CHECK(same.point <= same.ci_high);
}

TEST_CASE("fixed effects rejects mixed measures") {
  auto e = effects({{1, 1}, {3, 1}});
  e[1].measure = Measure::LogRR;
  try {
    pool_fixed(e);
    FAIL("expected MixedMeasures");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::MixedMeasures);
  }
}

TEST_CASE("DerSimonian-Laird") {
  auto zero = tau2_dersimonian_laird(effects({{0.5, 1}, {0.5, 2}, {0.5, 3}}));
  CHECK(zero.q == 0.0);
  CHECK(zero.tau2 == 0.0);

  auto het = tau2_dersimonian_laird(effects({{0, 1}, {2, 1}}));
  CHECK(het.q == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(het.tau2 == doctest::Approx(1.0).epsilon(1e-15));

  auto trunc = tau2_dersimonian_laird(effects({{0, 10}, {0.1, 10}}));
  CHECK(trunc.q < 1.0);
  CHECK(trunc.tau2 == 0.0);
}

TEST_CASE("random effects with a given tau2") {
  // weights 1/(1+1) and 1/(3+1) normalise to (2/3, 1/3), point 5/3
  auto re = pool_random(effects({{1, 1}, {3, 3}}), fixed_tau(1.0));
  CHECK(re.weights(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(re.weights(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(re.point == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(re.variance == doctest::Approx(1.0 / 0.75).epsilon(1e-15));
  CHECK(re.tau2.value() == 1.0);
}

TEST_CASE("random effects with tau2 = 0 reproduces fixed effects exactly") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto ds = testing::random_dataset(rng);
    for (Measure m : {Measure::RD, Measure::RR, Measure::OR}) {
      const auto e = study_effects(ds, m);
      const auto fe = pool_fixed(e);
      const auto re = pool_random(e, fixed_tau(0.0));
      CHECK(re.point == fe.point);
      CHECK(re.variance == fe.variance);
      CHECK(re.ci_low == fe.ci_low);
      CHECK(re.ci_high == fe.ci_high);
      CHECK(re.weights == fe.weights);
    }
  }
}

TEST_CASE("huge tau2 gives uniform weights") {
  auto re = pool_random(effects({{0.1, 0.2}, {0.5, 1.0}, {0.9, 0.01}}), fixed_tau(1e9));
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(std::abs(re.weights(k) - 1.0 / 3.0) < 1e-6);
}

TEST_CASE("single study random effects degrades with a warning") {
  const MetaDataset ds{"one", {{"s1", 10, 10, 5, 15}}};
  const auto e = study_effects(ds, Measure::RR);
  const auto re = pool_random(e);
  const auto fe = pool_fixed(e);
  CHECK(re.point == fe.point);
  CHECK(re.ci_low == fe.ci_low);
  CHECK(re.ci_high == fe.ci_high);
  CHECK(re.tau2.value() == 0.0);
  CHECK_FALSE(re.warnings.empty());
  CHECK(re.point == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(re.ci_low == doctest::Approx(0.8324556265274535).epsilon(1e-13));
  CHECK(re.ci_high == doctest::Approx(4.805060921608274).epsilon(1e-13));
}

TEST_CASE("golden random-effects values on the two-study dataset") {
  struct Row {
    Measure m;
    double point, lo, hi, tau2;
  };
  const Row rows[] = {
      {Measure::RD, 0.0501785714285714, -0.2893474818645391, 0.38970462472168194, 0.0480625},
      {Measure::RR, 1.1278569154466638, 0.43726915626998575, 2.9091034743265696, 0.3618463451151038},
      {Measure::OR, 1.22862896281296, 0.27678974416261887, 5.453703253455718, 0.9085092716131418},
  };
  for (const auto& r : rows) {
    CAPTURE(to_string(r.m));
    const auto re = pool_random(study_effects(kTwo, r.m, CorrectionPolicy::Haldane));
    CHECK(re.point == doctest::Approx(r.point).epsilon(1e-12));
    CHECK(re.ci_low == doctest::Approx(r.lo).epsilon(1e-12));
    CHECK(re.ci_high == doctest::Approx(r.hi).epsilon(1e-12));
    CHECK(re.tau2.value() == doctest::Approx(r.tau2).epsilon(1e-12));
    CHECK(re.scale == pooling_scale(r.m));
  }
}

TEST_CASE("Paule-Mandel solves the generalised Q equation") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 100; ++t) {
    const auto ds = testing::random_dataset(rng, 10, 1, 200);
    if (ds.size() < 2) continue;
    const auto e = study_effects(ds, Measure::LogOR);
    const auto pm = tau2_paule_mandel(e);
    CHECK(pm.tau2 >= 0);
    double q = 0, sw = 0, swt = 0;
    for (const auto& x : e) {
      sw += 1 / (x.sigma2_hat + pm.tau2);
      swt += x.theta_hat / (x.sigma2_hat + pm.tau2);
    }
    for (const auto& x : e) q += std::pow(x.theta_hat - swt / sw, 2) / (x.sigma2_hat + pm.tau2);
    if (pm.tau2 > 0) {
      CHECK(q == doctest::Approx(double(e.size() - 1)).epsilon(1e-6));
    } else {
      CHECK(q <= double(e.size() - 1) + 1e-9);
    }
  }
}

TEST_CASE("property: RE weight spread shrinks as tau2 grows") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> v(0.01, 2.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<StudyEffect> e;
    for (int k = 0; k < 5; ++k) e.push_back({0.0, v(rng), Measure::RD, false});
    const auto fe = pool_fixed(e);
    double prev = fe.weights.maxCoeff() / fe.weights.minCoeff();
    for (double tau2 : {0.01, 0.1, 1.0, 10.0}) {
      const auto re = pool_random(e, fixed_tau(tau2));
      const double ratio = re.weights.maxCoeff() / re.weights.minCoeff();
      CHECK(ratio < prev);
      CHECK(ratio > 1.0);
      CHECK(re.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
      prev = ratio;
    }
  }
}

TEST_CASE("property: risk difference scale equivariance") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> th(-1, 1), v(0.01, 1), c(0.1, 10);
  for (int t = 0; t < 200; ++t) {
    std::vector<StudyEffect> e, s;
    const double k = c(rng);
    for (int i = 0; i < 4; ++i) {
      e.push_back({th(rng), v(rng), Measure::RD, false});
      s.push_back({k * e.back().theta_hat, k * k * e.back().sigma2_hat, Measure::RD, false});
    }
    CHECK(pool_fixed(s).point == doctest::Approx(k * pool_fixed(e).point).epsilon(1e-12));
    CHECK(pool_random(s).point == doctest::Approx(k * pool_random(e).point).epsilon(1e-12));
  }
}
