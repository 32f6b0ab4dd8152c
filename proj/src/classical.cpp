#include "cmeta/classical.hpp"

#include "cmeta/stats.hpp"

#include <cmath>

namespace cmeta {
namespace {

Measure common_measure(std::span<const StudyEffect> effects) {
  if (effects.empty()) throw Error(ErrorCode::EmptyDataset, "no study effects to pool");
  const Measure m = effects.front().measure;
  for (const auto& e : effects)
    if (e.measure != m)
      throw Error(ErrorCode::MixedMeasures, "study effects mix different measures");
  return m;
}

void unpack(std::span<const StudyEffect> effects, Eigen::VectorXd& theta, Eigen::VectorXd& var) {
  const auto k = static_cast<Eigen::Index>(effects.size());
  theta.resize(k);
  var.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    theta(i) = effects[std::size_t(i)].theta_hat;
    var(i) = effects[std::size_t(i)].sigma2_hat;
    if (!(var(i) > 0))
      throw Error(ErrorCode::DegenerateStudy, "study " + std::to_string(i) + " has a non-positive variance");
  }
}

// Generalised Q statistic at a given tau^2.
double generalised_q(const Eigen::VectorXd& theta, const Eigen::VectorXd& var, double tau2) {
  const Eigen::ArrayXd w = (var.array() + tau2).inverse();
  const double mu = (w * theta.array()).sum() / w.sum();
  return (w * (theta.array() - mu).square()).sum();
}

}  // namespace

std::string_view to_string(TauMethod m) { return m == TauMethod::DerSimonianLaird ? "dl" : "pm"; }

TauMethod parse_tau_method(std::string_view text) {
  if (text == "dl") return TauMethod::DerSimonianLaird;
  if (text == "pm") return TauMethod::PauleMandel;
  throw Error(ErrorCode::ConfigError, "unknown tau2 estimator '" + std::string(text) + "'");
}

InverseVarianceFit inverse_variance_pool(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                         const Eigen::Ref<const Eigen::VectorXd>& variance) {
  const Eigen::ArrayXd precision = variance.array().inverse();
  const double total = precision.sum();
  InverseVarianceFit fit;
  fit.weights = (precision / total).matrix();
  fit.mean = fit.weights.dot(theta);
  fit.variance = 1.0 / total;
  return fit;
}

HeterogeneityEstimate tau2_dersimonian_laird(std::span<const StudyEffect> effects) {
  common_measure(effects);
  HeterogeneityEstimate het;
  het.method = TauMethod::DerSimonianLaird;
  if (effects.size() < 2) {
    het.insufficient_studies = true;
    return het;
  }
  Eigen::VectorXd theta, var;
  unpack(effects, theta, var);
  const Eigen::ArrayXd w = var.array().inverse();
  const double sw = w.sum();
  const double fe = (w * theta.array()).sum() / sw;
  het.q = (w * (theta.array() - fe).square()).sum();
  const double c = sw - w.square().sum() / sw;
  const double df = double(effects.size() - 1);
  het.tau2 = c > 0 ? std::max(0.0, (het.q - df) / c) : 0.0;
  return het;
}

HeterogeneityEstimate tau2_paule_mandel(std::span<const StudyEffect> effects, double tol) {
  common_measure(effects);
  HeterogeneityEstimate het;
  het.method = TauMethod::PauleMandel;
  if (effects.size() < 2) {
    het.insufficient_studies = true;
    return het;
  }
  Eigen::VectorXd theta, var;
  unpack(effects, theta, var);
  const double df = double(effects.size() - 1);
  het.q = generalised_q(theta, var, 0.0);
  if (het.q <= df) return het;

  double lo = 0.0;
  double hi = std::max(het.q, 1e-8);
  // generalised Q decreases monotonically in tau^2
  for (int it = 0; it < 200 && generalised_q(theta, var, hi) > df; ++it) hi *= 2;
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (generalised_q(theta, var, mid) > df ? lo : hi) = mid;
  }
  het.tau2 = 0.5 * (lo + hi);
  return het;
}

HeterogeneityEstimate estimate_heterogeneity(std::span<const StudyEffect> effects, TauMethod method) {
  return method == TauMethod::DerSimonianLaird ? tau2_dersimonian_laird(effects) : tau2_paule_mandel(effects);
}

void finish_interval(PooledEstimate& est, double pooled_value, double ci_level) {
  const double half = z_for_level(ci_level) * std::sqrt(std::max(0.0, est.variance));
  double lo = pooled_value - half;
  double hi = pooled_value + half;
  est.scale = pooling_scale(est.measure);
  if (reports_exponentiated(est.measure)) {
    lo = std::exp(lo);
    hi = std::exp(hi);
  }
  est.ci_low = std::min(lo, est.point);
  est.ci_high = std::max(hi, est.point);
}

PooledEstimate pool_fixed(std::span<const StudyEffect> effects, double ci_level) {
  const Measure m = common_measure(effects);
  Eigen::VectorXd theta, var;
  unpack(effects, theta, var);
  const InverseVarianceFit fit = inverse_variance_pool(theta, var);
  PooledEstimate est;
  est.method = Method::FixedEffects;
  est.measure = m;
  est.variance = fit.variance;
  est.weights = fit.weights;
  est.point = reports_exponentiated(m) ? std::exp(fit.mean) : fit.mean;
  finish_interval(est, fit.mean, ci_level);
  return est;
}

PooledEstimate pool_random(std::span<const StudyEffect> effects, const HeterogeneityEstimate& het,
                           double ci_level) {
  const Measure m = common_measure(effects);
  if (!(het.tau2 >= 0)) throw Error(ErrorCode::DomainError, "tau2 must be non-negative");
  Eigen::VectorXd theta, var;
  unpack(effects, theta, var);
  const InverseVarianceFit fit = inverse_variance_pool(theta, (var.array() + het.tau2).matrix());
  PooledEstimate est;
  est.method = Method::RandomEffects;
  est.measure = m;
  est.variance = fit.variance;
  est.weights = fit.weights;
  est.tau2 = het.tau2;
  est.point = reports_exponentiated(m) ? std::exp(fit.mean) : fit.mean;
  if (het.insufficient_studies)
    est.warnings.push_back("single study: random-effects model degrades to fixed effects (tau2 = 0)");
  finish_interval(est, fit.mean, ci_level);
  return est;
}

PooledEstimate pool_random(std::span<const StudyEffect> effects, TauMethod method, double ci_level) {
  return pool_random(effects, estimate_heterogeneity(effects, method), ci_level);
}

}  // namespace cmeta
