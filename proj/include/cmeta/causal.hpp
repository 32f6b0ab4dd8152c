#pragma once

#include "cmeta/effects.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cmeta {

// Arm-based causal aggregation.
//
// Each arm's event rate is averaged across studies with target-population
// weights alpha_k, and the contrast is applied to the two pooled rates:
//
//   psi(a) = sum_k alpha_k * n_k(a,1) / n_k(a),   theta = Phi(psi(1), psi(0)).
//
// The estimand is the effect on the mixture population sum_k alpha_k P_k. It
// presumes randomisation within each study and outcome functions that do not
// depend on the study given the covariates; those are preconditions of the
// data, not something the code can check.

/// Target-population weights over studies.
struct WeightScheme {
  enum class Kind { Uniform, Pooled, Custom };

  Kind kind = Kind::Pooled;
  std::vector<double> custom;

  static WeightScheme uniform() { return {Kind::Uniform, {}}; }
  static WeightScheme pooled() { return {Kind::Pooled, {}}; }
  static WeightScheme from_values(std::vector<double> w) { return {Kind::Custom, std::move(w)}; }
};

/// "uniform" | "pooled" | "custom:w1,w2,..."
WeightScheme parse_weight_scheme(std::string_view text);
std::string to_string(const WeightScheme& w);

/// Concrete alpha_k for the given table of counts: 1/K, n_k/n or the custom values.
Eigen::VectorXd resolve_weights(const WeightScheme& w, const CountMatrix& counts);

/// Per-study event rates, column 0 treated and column 1 control.
Eigen::Matrix<double, Eigen::Dynamic, 2> study_arm_rates(const CountMatrix& counts);

struct ArmRates {
  double treated = 0.0;
  double control = 0.0;
};

ArmRates pooled_arm_rates(const CountMatrix& counts, const Eigen::Ref<const Eigen::VectorXd>& alpha);
ArmRates pooled_arm_rates(const MetaDataset& ds, const WeightScheme& w);

/// Pieces of the delta-method variance of sqrt(n) * theta_hat.
struct CausalVarianceParts {
  Eigen::Vector2d sigma2_arm = Eigen::Vector2d::Zero();  // (treated, control)
  double gamma = 0.0;                                     // between-arm covariance term
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();     // grad Phi at the pooled rates
  double sigma2_total = 0.0;
  double n = 0.0;       // total sample size the parts are scaled by
  bool clamped = false;  // sigma2_total came out negative and was set to 0
};

/// Asymptotic variance under pooling weights alpha_k = n_k / n:
///
///   sigma2(a) = sum_k n_k^2 / (n n_k(a)) psi_k(a)(1 - psi_k(a))
///             + sum_k (n_k / n) psi_k(a)^2 - psi(a)^2
///   gamma     = sum_k (n_k / n) psi_k(1) psi_k(0) - psi(1) psi(0)
///   sigma2    = sigma2(1) v(1)^2 + sigma2(0) v(0)^2 + 2 gamma v(1) v(0)
///
/// with (v(1), v(0)) the gradient of Phi. Var(theta_hat) ~ sigma2 / n.
CausalVarianceParts causal_variance_parts(const CountMatrix& counts, Measure m);
CausalVarianceParts causal_variance_parts(const MetaDataset& ds, Measure m);

/// Variance for deterministic weights (uniform or user supplied). The arms are
/// independent given the study and there is no between-study term, so
/// n Var(psi(a)) = n sum_k alpha_k^2 psi_k(a)(1 - psi_k(a)) / n_k(a) and gamma = 0.
/// This goes beyond the pooled-weight result and is flagged as such in warnings.
CausalVarianceParts fixed_weight_variance_parts(const CountMatrix& counts,
                                                const Eigen::Ref<const Eigen::VectorXd>& alpha, Measure m);

enum class VarianceMethod {
  Auto,          // asymptotic formula for pooled weights, fixed-weight formula otherwise
  PooledOnly,    // refuse non-pooled weights (VarianceUnavailable)
  Bootstrap,     // resample individuals within arms
};

struct CausalOptions {
  double ci_level = 0.95;
  CorrectionPolicy correction = CorrectionPolicy::Haldane;
  VarianceMethod variance = VarianceMethod::Auto;
  int bootstrap_replicates = 2000;
  std::uint64_t seed = 0;
};

/// Nonparametric bootstrap variance of the pooling-scale estimate. Resampling
/// individuals within an arm is a binomial draw of that arm's event count.
double bootstrap_causal_variance(const CountMatrix& counts, const WeightScheme& w, Measure m, int replicates,
                                 std::uint64_t seed);

/// Arm-based estimate with a normal-approximation interval. Ratio measures get
/// their interval on the log scale and exponentiated endpoints.
PooledEstimate pool_causal(const MetaDataset& ds, Measure m, const WeightScheme& w, const CausalOptions& opt = {});

/// Same target under pooling weights written as a weighted mean of per-study
/// effects: RD with weights n_k/n, RR with weights (n_k/n) psi_k(0)/psi(0).
/// The weights field holds those collapsibility weights.
PooledEstimate pool_causal_collapsibility(const MetaDataset& ds, Measure m, const CausalOptions& opt = {});

}  // namespace cmeta
