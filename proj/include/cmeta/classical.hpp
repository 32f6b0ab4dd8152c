#pragma once

#include "cmeta/effects.hpp"

#include <span>

namespace cmeta {

enum class TauMethod { DerSimonianLaird, PauleMandel };

std::string_view to_string(TauMethod m);
TauMethod parse_tau_method(std::string_view text);

struct HeterogeneityEstimate {
  double tau2 = 0.0;
  double q = 0.0;  // Cochran's Q at the fixed-effects mean
  TauMethod method = TauMethod::DerSimonianLaird;
  bool insufficient_studies = false;  // K < 2, tau2 forced to 0
};

/// Normalised inverse-variance combination of a vector of estimates.
struct InverseVarianceFit {
  double mean = 0.0;
  double variance = 0.0;  // 1 / sum of precisions
  Eigen::VectorXd weights;
};

InverseVarianceFit inverse_variance_pool(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                         const Eigen::Ref<const Eigen::VectorXd>& variance);

/// Cochran's Q and the DerSimonian-Laird moment estimator of tau^2.
HeterogeneityEstimate tau2_dersimonian_laird(std::span<const StudyEffect> effects);

/// Paule-Mandel: the tau^2 at which the generalised Q statistic equals K - 1,
/// found by bracketing and bisection.
HeterogeneityEstimate tau2_paule_mandel(std::span<const StudyEffect> effects, double tol = 1e-10);

HeterogeneityEstimate estimate_heterogeneity(std::span<const StudyEffect> effects, TauMethod method);

PooledEstimate pool_fixed(std::span<const StudyEffect> effects, double ci_level = 0.95);

PooledEstimate pool_random(std::span<const StudyEffect> effects, const HeterogeneityEstimate& het,
                           double ci_level = 0.95);

/// Estimates tau^2 with `method` and pools. K = 1 degrades to the fixed-effects
/// result with tau2 = 0 and a warning.
PooledEstimate pool_random(std::span<const StudyEffect> effects, TauMethod method = TauMethod::DerSimonianLaird,
                           double ci_level = 0.95);

/// Fills point and CI on the reporting scale from a pooling-scale estimate.
void finish_interval(PooledEstimate& est, double pooled_value, double ci_level);

}  // namespace cmeta
