#pragma once

#include "cmeta/causal.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace cmeta {

/// Two-study covariate-shift generator: H picks study k, X | H = k is
/// N(m_k, eta^2 I_2), A ~ Bernoulli(p_treat) and Y | X, A = a is
/// Bernoulli(logistic(X . beta_a)). Outcome functions are shared across
/// studies, so heterogeneity comes only from the covariate shift.
struct MismatchDGP {
  Eigen::Vector2d m1{1.0, 0.0};
  Eigen::Vector2d m2{0.0, 1.0};
  double eta = 0.1;
  Eigen::Vector2d beta1{0.36, -1.38};
  Eigen::Vector2d beta0{2.94, -4.60};
  Count n = 1000;
  double p_study = 0.5;  // P(H = 1)
  double p_treat = 0.5;  // P(A = 1)

  void validate() const;
};

/// mu(a, x) for a binary covariate; row a, column x.
struct MuTable {
  Eigen::Matrix2d mu = Eigen::Matrix2d::Constant(0.5);

  static MuTable from(double treated_x1, double treated_x0, double control_x1, double control_x0);
  double operator()(int a, int x) const { return mu(a, x); }
};

enum class DegeneratePolicy { Resample, Fail };

struct SimulatedMeta {
  MetaDataset dataset;
  int resamples = 0;  // draws discarded because an arm came out empty
};

/// logistic(t) = e^t / (1 + e^t), evaluated without overflow for either sign.
double logistic(double t);

/// One meta-analysis of dgp.n individuals aggregated into two study tables.
/// Deterministic in (dgp, seed).
SimulatedMeta simulate_meta(const MismatchDGP& dgp, std::uint64_t seed,
                            DegeneratePolicy policy = DegeneratePolicy::Resample, int max_resamples = 1000);

/// E[logistic(X . beta)] for X ~ N(mean, eta^2 I_2) by tensor Gauss-Hermite.
double expected_logistic(const Eigen::Vector2d& mean, double eta, const Eigen::Vector2d& beta, int nodes = 40);

/// Plain Monte Carlo version of expected_logistic, for cross-checking.
double expected_logistic_mc(const Eigen::Vector2d& mean, double eta, const Eigen::Vector2d& beta,
                            std::size_t draws, std::uint64_t seed);

/// Target-population mean outcome per arm, psi(a) = sum_k alpha_k E[mu(a, X) | H = k].
/// Uniform gives (1/2, 1/2); Pooled uses the expected study shares (p_study, 1 - p_study).
ArmRates true_arm_rates(const MismatchDGP& dgp, const WeightScheme& w, int nodes = 40);

/// Phi(psi(1), psi(0)) on the target population.
double true_effect(const MismatchDGP& dgp, Measure m, const WeightScheme& w, int nodes = 40);

/// log RR of the binary-covariate population with P(X = 1) = p.
double log_rr_at(double p, const MuTable& mu);

/// Large-sample random-effects log RR over two equally likely populations.
double random_effects_log_rr(double p1, double p2, const MuTable& mu);

/// The covariate share p* whose log RR equals the random-effects log RR of
/// populations p1 and p2; nullopt when p* falls outside [0, 1].
/// Throws DegenerateEquation when the linear equation in p* has no unique root.
std::optional<double> solve_pstar(double p1, double p2, const MuTable& mu);

/// Fixed per-study rates: study shares, treatment probabilities and event
/// probabilities per arm. Used for calibration where the truth is exact.
struct RateSpec {
  Eigen::VectorXd study_prob;
  Eigen::VectorXd treat_prob;
  Eigen::VectorXd psi_treated;
  Eigen::VectorXd psi_control;
  Count n = 2000;

  void validate() const;
  ArmRates target_rates() const;  // weighted by study_prob
};

/// A heterogeneous two-study specification used by the calibration defaults.
RateSpec default_rate_spec();

SimulatedMeta simulate_rates(const RateSpec& spec, std::uint64_t seed,
                             DegeneratePolicy policy = DegeneratePolicy::Resample, int max_resamples = 1000);

struct CalibrationReport {
  Measure measure = Measure::RD;
  int replications = 0;
  int skipped = 0;                  // replications outside the contrast's domain
  double true_value = 0.0;
  double mean_point = 0.0;
  double point_se = 0.0;            // Monte Carlo standard error of mean_point
  double empirical_variance = 0.0;  // sample variance of sqrt(n) (theta_hat - theta)
  double mean_sigma2 = 0.0;         // average plug-in asymptotic variance
  double ratio = 0.0;               // empirical_variance / mean_sigma2
  double coverage = 0.0;            // share of normal intervals covering true_value
  int resamples = 0;
};

/// Monte Carlo check of the pooled-weight asymptotic variance. Measures are
/// evaluated on the scale given (pass LogRR/LogOR for the ratio family).
std::vector<CalibrationReport> calibrate_causal_variance(const RateSpec& spec, std::span<const Measure> measures,
                                                         int replications, std::uint64_t seed,
                                                         double ci_level = 0.95);

struct EstimateSeries {
  Method method = Method::Causal;
  Measure measure = Measure::RD;
  std::vector<double> values;  // reporting scale, one per replication
  double median = 0.0;
};

struct MismatchReport {
  int replications = 0;
  int resamples = 0;
  std::uint64_t seed = 0;
  std::vector<EstimateSeries> series;  // (fe, re, causal) x (rd, rr, or)
  std::vector<std::pair<Measure, double>> truth;
  int sign_consistent = 0;  // replications where the causal RD, log RR, log OR agree in sign

  const EstimateSeries& get(Method method, Measure measure) const;
  double true_value(Measure measure) const;
};

/// Repeats simulate_meta and pools each replicate with fixed effects, random
/// effects (DerSimonian-Laird) and the pooled-weight causal estimator.
MismatchReport run_mismatch_experiment(const MismatchDGP& dgp, int replications, std::uint64_t seed,
                                       CorrectionPolicy correction = CorrectionPolicy::Haldane,
                                       DegeneratePolicy policy = DegeneratePolicy::Resample);

}  // namespace cmeta
