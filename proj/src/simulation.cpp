#include "cmeta/simulation.hpp"

#include "cmeta/classical.hpp"
#include "cmeta/contrast.hpp"
#include "cmeta/quadrature.hpp"
#include "cmeta/stats.hpp"

#include <cmath>
#include <random>

namespace cmeta {
namespace {

bool open_unit(double p) { return p > 0.0 && p < 1.0; }

bool has_empty_arm(const MetaDataset& ds) {
  for (const auto& s : ds.studies)
    if (s.treated() == 0 || s.control() == 0) return true;
  return false;
}

template <typename Draw>
SimulatedMeta draw_with_policy(Draw&& draw, std::uint64_t seed, DegeneratePolicy policy, int max_resamples) {
  SimulatedMeta out;
  for (int attempt = 0;; ++attempt) {
    out.dataset = draw(attempt == 0 ? seed : derive_seed(seed, std::uint64_t(attempt)));
    if (!has_empty_arm(out.dataset)) return out;
    if (policy == DegeneratePolicy::Fail)
      throw Error(ErrorCode::DegenerateDraw, "a simulated study has an empty arm");
    if (++out.resamples > max_resamples)
      throw Error(ErrorCode::DegenerateDraw, "too many degenerate draws; the design is too small");
  }
}

}  // namespace

void MismatchDGP::validate() const {
  if (!(eta > 0)) throw Error(ErrorCode::ConfigError, "eta must be positive");
  if (n < 4) throw Error(ErrorCode::ConfigError, "n must be at least 4");
  if (!open_unit(p_study) || !open_unit(p_treat))
    throw Error(ErrorCode::ConfigError, "p_study and p_treat must lie in (0, 1)");
  if (!m1.allFinite() || !m2.allFinite() || !beta1.allFinite() || !beta0.allFinite())
    throw Error(ErrorCode::ConfigError, "DGP vectors must be finite");
}

MuTable MuTable::from(double treated_x1, double treated_x0, double control_x1, double control_x0) {
  MuTable t;
  t.mu(1, 1) = treated_x1;
  t.mu(1, 0) = treated_x0;
  t.mu(0, 1) = control_x1;
  t.mu(0, 0) = control_x0;
  return t;
}

double logistic(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

SimulatedMeta simulate_meta(const MismatchDGP& dgp, std::uint64_t seed, DegeneratePolicy policy,
                            int max_resamples) {
  dgp.validate();
  auto draw = [&](std::uint64_t s) {
    std::mt19937_64 rng(s);
    std::bernoulli_distribution study(dgp.p_study), treat(dgp.p_treat);
    std::normal_distribution<double> noise(0.0, dgp.eta);
    // cells[k] = (n11, n10, n01, n00)
    Count cells[2][4] = {};
    for (Count i = 0; i < dgp.n; ++i) {
      const int k = study(rng) ? 0 : 1;
      const Eigen::Vector2d& m = k == 0 ? dgp.m1 : dgp.m2;
      const double x0 = m(0) + noise(rng);
      const double x1 = m(1) + noise(rng);
      const bool treated = treat(rng);
      const Eigen::Vector2d& beta = treated ? dgp.beta1 : dgp.beta0;
      const bool event = std::bernoulli_distribution(logistic(x0 * beta(0) + x1 * beta(1)))(rng);
      ++cells[k][(treated ? 0 : 2) + (event ? 0 : 1)];
    }
    MetaDataset ds;
    ds.name = "mismatch";
    for (int k = 0; k < 2; ++k)
      ds.studies.push_back({"study" + std::to_string(k + 1), cells[k][0], cells[k][1], cells[k][2], cells[k][3]});
    return ds;
  };
  return draw_with_policy(draw, seed, policy, max_resamples);
}

double expected_logistic(const Eigen::Vector2d& mean, double eta, const Eigen::Vector2d& beta, int nodes) {
  return expect_standard_normal_2d<double>(
      [&](const Eigen::Vector2d& z) { return logistic((mean + eta * z).dot(beta)); }, nodes);
}

double expected_logistic_mc(const Eigen::Vector2d& mean, double eta, const Eigen::Vector2d& beta,
                            std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Eigen::Vector2d x = mean + eta * Eigen::Vector2d(z(rng), z(rng));
    total += logistic(x.dot(beta));
  }
  return total / double(draws);
}

ArmRates true_arm_rates(const MismatchDGP& dgp, const WeightScheme& w, int nodes) {
  dgp.validate();
  Eigen::Vector2d alpha = Eigen::Vector2d::Constant(0.5);
  switch (w.kind) {
    case WeightScheme::Kind::Uniform: alpha << 0.5, 0.5; break;
    case WeightScheme::Kind::Pooled: alpha << dgp.p_study, 1 - dgp.p_study; break;
    case WeightScheme::Kind::Custom:
      if (w.custom.size() != 2)
        throw Error(ErrorCode::WeightLengthMismatch, "the generator has exactly two studies");
      alpha << w.custom[0], w.custom[1];
      break;
  }
  auto arm = [&](const Eigen::Vector2d& beta) {
    return alpha(0) * expected_logistic(dgp.m1, dgp.eta, beta, nodes) +
           alpha(1) * expected_logistic(dgp.m2, dgp.eta, beta, nodes);
  };
  return {arm(dgp.beta1), arm(dgp.beta0)};
}

double true_effect(const MismatchDGP& dgp, Measure m, const WeightScheme& w, int nodes) {
  const ArmRates r = true_arm_rates(dgp, w, nodes);
  return contrast_value(m, r.treated, r.control);
}

double log_rr_at(double p, const MuTable& mu) {
  const double treated = p * mu(1, 1) + (1 - p) * mu(1, 0);
  const double control = p * mu(0, 1) + (1 - p) * mu(0, 0);
  return std::log(treated) - std::log(control);
}

double random_effects_log_rr(double p1, double p2, const MuTable& mu) {
  return 0.5 * log_rr_at(p1, mu) + 0.5 * log_rr_at(p2, mu);
}

std::optional<double> solve_pstar(double p1, double p2, const MuTable& mu) {
  if (!open_unit(p1) || !open_unit(p2)) throw Error(ErrorCode::DomainError, "p1 and p2 must lie in (0, 1)");
  if (!((mu.mu.array() > 0).all() && (mu.mu.array() < 1).all()))
    throw Error(ErrorCode::DomainError, "mu values must lie in (0, 1)");
  const double target = std::exp(random_effects_log_rr(p1, p2, mu));
  // p (mu11 - mu10) + mu10 = T (p (mu01 - mu00) + mu00)
  const double slope = (mu(1, 1) - mu(1, 0)) - target * (mu(0, 1) - mu(0, 0));
  const double rhs = target * mu(0, 0) - mu(1, 0);
  const double scale = std::max({std::abs(mu(1, 1) - mu(1, 0)), std::abs(target * (mu(0, 1) - mu(0, 0))), 1e-300});
  if (std::abs(slope) <= 64 * std::numeric_limits<double>::epsilon() * scale)
    throw Error(ErrorCode::DegenerateEquation, "the equation for p* has no unique solution");
  const double p = rhs / slope;
  if (!(p >= 0.0 && p <= 1.0)) return std::nullopt;
  return p;
}

void RateSpec::validate() const {
  const auto k = study_prob.size();
  if (k < 1 || treat_prob.size() != k || psi_treated.size() != k || psi_control.size() != k)
    throw Error(ErrorCode::ConfigError, "rate specification vectors must share one non-zero length");
  if ((study_prob.array() < 0).any() || std::abs(study_prob.sum() - 1.0) > 1e-12)
    throw Error(ErrorCode::ConfigError, "study probabilities must be non-negative and sum to 1");
  auto in_unit = [](const Eigen::VectorXd& v) { return (v.array() >= 0).all() && (v.array() <= 1).all(); };
  if (!in_unit(psi_treated) || !in_unit(psi_control))
    throw Error(ErrorCode::ConfigError, "event probabilities must lie in [0, 1]");
  if (!((treat_prob.array() > 0).all() && (treat_prob.array() < 1).all()))
    throw Error(ErrorCode::ConfigError, "treatment probabilities must lie in (0, 1)");
  if (n < 4) throw Error(ErrorCode::ConfigError, "n must be at least 4");
}

ArmRates RateSpec::target_rates() const { return {study_prob.dot(psi_treated), study_prob.dot(psi_control)}; }

RateSpec default_rate_spec() {
  RateSpec s;
  s.study_prob = Eigen::Vector2d(0.4, 0.6);
  s.treat_prob = Eigen::Vector2d(0.5, 0.3);
  s.psi_treated = Eigen::Vector2d(0.30, 0.60);
  s.psi_control = Eigen::Vector2d(0.20, 0.35);
  s.n = 2000;
  return s;
}

SimulatedMeta simulate_rates(const RateSpec& spec, std::uint64_t seed, DegeneratePolicy policy, int max_resamples) {
  spec.validate();
  auto draw = [&](std::uint64_t s) {
    std::mt19937_64 rng(s);
    MetaDataset ds;
    ds.name = "rates";
    Count remaining = spec.n;
    double mass = 1.0;
    const Eigen::Index k = spec.study_prob.size();
    for (Eigen::Index i = 0; i < k; ++i) {
      // sequential binomials give a multinomial split of n over studies
      Count nk = remaining;
      if (i + 1 < k) {
        const double p = mass > 0 ? std::clamp(spec.study_prob(i) / mass, 0.0, 1.0) : 0.0;
        nk = std::binomial_distribution<Count>(remaining, p)(rng);
      }
      remaining -= nk;
      mass -= spec.study_prob(i);
      const Count n1 = std::binomial_distribution<Count>(nk, spec.treat_prob(i))(rng);
      const Count n0 = nk - n1;
      const Count e1 = std::binomial_distribution<Count>(n1, spec.psi_treated(i))(rng);
      const Count e0 = std::binomial_distribution<Count>(n0, spec.psi_control(i))(rng);
      ds.studies.push_back({"study" + std::to_string(i + 1), e1, n1 - e1, e0, n0 - e0});
    }
    return ds;
  };
  return draw_with_policy(draw, seed, policy, max_resamples);
}

std::vector<CalibrationReport> calibrate_causal_variance(const RateSpec& spec, std::span<const Measure> measures,
                                                         int replications, std::uint64_t seed, double ci_level) {
  spec.validate();
  if (replications < 1000) throw Error(ErrorCode::ConfigError, "calibration needs at least 1000 replications");
  const std::size_t reps = std::size_t(replications);
  const std::size_t nm = measures.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  // row r holds (point, sigma2) per measure
  Eigen::MatrixXd points = Eigen::MatrixXd::Constant(Eigen::Index(reps), Eigen::Index(nm), nan);
  Eigen::MatrixXd sigma2 = Eigen::MatrixXd::Constant(Eigen::Index(reps), Eigen::Index(nm), nan);
  std::vector<int> resamples(reps, 0);

  parallel_for(reps, [&](std::size_t r) {
    const SimulatedMeta sim = simulate_rates(spec, derive_seed(seed, r));
    resamples[r] = sim.resamples;
    const CountMatrix counts = count_matrix(sim.dataset);
    const ArmRates rates = pooled_arm_rates(counts, resolve_weights(WeightScheme::pooled(), counts));
    for (std::size_t j = 0; j < nm; ++j) {
      if (!in_domain(measures[j], rates.treated, rates.control)) continue;
      const CausalVarianceParts parts = causal_variance_parts(counts, measures[j]);
      points(Eigen::Index(r), Eigen::Index(j)) = contrast_value(measures[j], rates.treated, rates.control);
      sigma2(Eigen::Index(r), Eigen::Index(j)) = parts.sigma2_total;
    }
  });

  const ArmRates truth = spec.target_rates();
  const double z = z_for_level(ci_level);
  const double n = double(spec.n);
  int total_resamples = 0;
  for (int c : resamples) total_resamples += c;

  std::vector<CalibrationReport> out;
  for (std::size_t j = 0; j < nm; ++j) {
    CalibrationReport rep;
    rep.measure = measures[j];
    rep.true_value = contrast_value(measures[j], truth.treated, truth.control);
    rep.resamples = total_resamples;
    std::vector<double> pts, s2;
    int covered = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const double p = points(Eigen::Index(r), Eigen::Index(j));
      const double v = sigma2(Eigen::Index(r), Eigen::Index(j));
      if (!std::isfinite(p)) {
        ++rep.skipped;
        continue;
      }
      pts.push_back(p);
      s2.push_back(v);
      if (std::abs(p - rep.true_value) <= z * std::sqrt(v / n)) ++covered;
    }
    rep.replications = int(pts.size());
    rep.mean_point = mean(pts);
    rep.point_se = sample_sd(pts) / std::sqrt(double(pts.size()));
    rep.empirical_variance = n * sample_variance(pts);
    rep.mean_sigma2 = mean(s2);
    rep.ratio = rep.empirical_variance / rep.mean_sigma2;
    rep.coverage = double(covered) / double(pts.size());
    out.push_back(rep);
  }
  return out;
}

const EstimateSeries& MismatchReport::get(Method method, Measure measure) const {
  for (const auto& s : series)
    if (s.method == method && s.measure == measure) return s;
  throw Error(ErrorCode::ConfigError, "no series for the requested estimator and measure");
}

double MismatchReport::true_value(Measure measure) const {
  for (const auto& [m, v] : truth)
    if (m == measure) return v;
  throw Error(ErrorCode::ConfigError, "no true value for the requested measure");
}

MismatchReport run_mismatch_experiment(const MismatchDGP& dgp, int replications, std::uint64_t seed,
                                       CorrectionPolicy correction, DegeneratePolicy policy) {
  dgp.validate();
  if (replications < 1) throw Error(ErrorCode::ConfigError, "replications must be positive");
  constexpr Measure measures[] = {Measure::RD, Measure::RR, Measure::OR};
  constexpr Method methods[] = {Method::FixedEffects, Method::RandomEffects, Method::Causal};
  const std::size_t reps = std::size_t(replications);

  // values(r, 3 * measure + method)
  Eigen::MatrixXd values(Eigen::Index(reps), 9);
  std::vector<int> resamples(reps, 0);
  parallel_for(reps, [&](std::size_t r) {
    const SimulatedMeta sim = simulate_meta(dgp, derive_seed(seed, r), policy);
    resamples[r] = sim.resamples;
    for (int mi = 0; mi < 3; ++mi) {
      const Measure m = measures[mi];
      const auto effects = study_effects(sim.dataset, m, correction);
      CausalOptions opt;
      opt.correction = correction;
      const Eigen::Index row = Eigen::Index(r);
      values(row, 3 * mi + 0) = pool_fixed(effects).point;
      values(row, 3 * mi + 1) = pool_random(effects, TauMethod::DerSimonianLaird).point;
      values(row, 3 * mi + 2) = pool_causal(sim.dataset, m, WeightScheme::pooled(), opt).point;
    }
  });

  MismatchReport report;
  report.replications = replications;
  report.seed = seed;
  for (int c : resamples) report.resamples += c;
  for (int mi = 0; mi < 3; ++mi) {
    for (int ei = 0; ei < 3; ++ei) {
      EstimateSeries s;
      s.method = methods[ei];
      s.measure = measures[mi];
      const Eigen::VectorXd col = values.col(3 * mi + ei);
      s.values.assign(col.data(), col.data() + col.size());
      s.median = median(s.values);
      report.series.push_back(std::move(s));
    }
    report.truth.emplace_back(measures[mi], true_effect(dgp, measures[mi], WeightScheme::pooled()));
  }
  for (std::size_t r = 0; r < reps; ++r) {
    const Eigen::Index row = Eigen::Index(r);
    const auto sign = [](double v) { return (v > 0) - (v < 0); };
    const int s_rd = sign(values(row, 2));
    const int s_rr = sign(std::log(values(row, 5)));
    const int s_or = sign(std::log(values(row, 8)));
    if (s_rd == s_rr && s_rr == s_or) ++report.sign_consistent;
  }
  return report;
}

}  // namespace cmeta
