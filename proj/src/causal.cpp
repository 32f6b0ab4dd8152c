#include "cmeta/causal.hpp"

#include "cmeta/classical.hpp"
#include "cmeta/contrast.hpp"
#include "cmeta/stats.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace cmeta {
namespace {

using RateMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2>;

Eigen::ArrayXd arm_sizes(const CountMatrix& c, int arm) {
  return arm == 1 ? (c.col(0) + c.col(1)).array() : (c.col(2) + c.col(3)).array();
}

void require_domain(Measure m, const ArmRates& r) {
  if (!in_domain(m, r.treated, r.control)) {
    std::ostringstream msg;
    msg << "pooled rates (" << r.treated << ", " << r.control << ") are outside the domain of "
        << to_string(m);
    throw Error(ErrorCode::DomainError, msg.str());
  }
}

CausalVarianceParts combine(Eigen::Vector2d sigma2_arm, double gamma, const ArmRates& r, Measure m, double n) {
  CausalVarianceParts parts;
  parts.sigma2_arm = sigma2_arm.cwiseMax(0.0);
  parts.gamma = gamma;
  parts.gradient = contrast_gradient(m, r.treated, r.control);
  const Eigen::Vector2d& v = parts.gradient;
  const double total = parts.sigma2_arm(0) * v(0) * v(0) + parts.sigma2_arm(1) * v(1) * v(1) +
                       2 * gamma * v(0) * v(1);
  parts.clamped = total < 0;
  parts.sigma2_total = std::max(0.0, total);
  parts.n = n;
  return parts;
}

// Applies the continuity correction to the studies that need it for `m`.
int correct_rows(CountMatrix& counts, Measure m) {
  int corrected = 0;
  for (Eigen::Index k = 0; k < counts.rows(); ++k) {
    if (needs_correction(Eigen::RowVector4d(counts.row(k)), m)) {
      counts.row(k).array() += 0.5;
      ++corrected;
    }
  }
  return corrected;
}

}  // namespace

WeightScheme parse_weight_scheme(std::string_view text) {
  if (text == "uniform") return WeightScheme::uniform();
  if (text == "pooled") return WeightScheme::pooled();
  constexpr std::string_view prefix = "custom:";
  if (text.substr(0, prefix.size()) == prefix) {
    std::vector<double> values;
    std::string_view rest = text.substr(prefix.size());
    while (true) {
      const auto comma = rest.find(',');
      const std::string item(rest.substr(0, comma));
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size())
        throw Error(ErrorCode::ConfigError, "custom weight '" + item + "' is not a number");
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    return WeightScheme::from_values(std::move(values));
  }
  throw Error(ErrorCode::ConfigError, "weights must be uniform, pooled or custom:w1,w2,...; got '" +
                                          std::string(text) + "'");
}

std::string to_string(const WeightScheme& w) {
  switch (w.kind) {
    case WeightScheme::Kind::Uniform: return "uniform";
    case WeightScheme::Kind::Pooled: return "pooled";
    case WeightScheme::Kind::Custom: {
      std::ostringstream out;
      out.precision(17);
      out << "custom:";
      for (std::size_t i = 0; i < w.custom.size(); ++i) out << (i ? "," : "") << w.custom[i];
      return out.str();
    }
  }
  return "?";
}

Eigen::VectorXd resolve_weights(const WeightScheme& w, const CountMatrix& counts) {
  const Eigen::Index k = counts.rows();
  if (k == 0) throw Error(ErrorCode::EmptyDataset, "no studies to weight");
  switch (w.kind) {
    case WeightScheme::Kind::Uniform: return Eigen::VectorXd::Constant(k, 1.0 / double(k));
    case WeightScheme::Kind::Pooled: {
      const Eigen::VectorXd nk = counts.rowwise().sum();
      return nk / nk.sum();
    }
    case WeightScheme::Kind::Custom: {
      if (static_cast<Eigen::Index>(w.custom.size()) != k)
        throw Error(ErrorCode::WeightLengthMismatch, std::to_string(w.custom.size()) + " custom weights for " +
                                                         std::to_string(k) + " studies");
      const Eigen::VectorXd alpha = Eigen::Map<const Eigen::VectorXd>(w.custom.data(), k);
      if ((alpha.array() < 0).any() || !alpha.allFinite())
        throw Error(ErrorCode::InvalidWeights, "custom weights must be finite and non-negative");
      if (std::abs(alpha.sum() - 1.0) > 1e-12)
        throw Error(ErrorCode::InvalidWeights, "custom weights must sum to 1");
      return alpha;
    }
  }
  return {};
}

RateMatrix study_arm_rates(const CountMatrix& c) {
  RateMatrix psi(c.rows(), 2);
  psi.col(0) = (c.col(0).array() / arm_sizes(c, 1)).matrix();
  psi.col(1) = (c.col(2).array() / arm_sizes(c, 0)).matrix();
  return psi;
}

ArmRates pooled_arm_rates(const CountMatrix& counts, const Eigen::Ref<const Eigen::VectorXd>& alpha) {
  if (alpha.size() != counts.rows())
    throw Error(ErrorCode::WeightLengthMismatch, "weight vector length differs from the number of studies");
  const RateMatrix psi = study_arm_rates(counts);
  const Eigen::RowVector2d pooled = alpha.transpose() * psi;
  // guard against rounding just outside [0, 1]
  return {std::clamp(pooled(0), 0.0, 1.0), std::clamp(pooled(1), 0.0, 1.0)};
}

ArmRates pooled_arm_rates(const MetaDataset& ds, const WeightScheme& w) {
  const CountMatrix counts = count_matrix(ds);
  return pooled_arm_rates(counts, resolve_weights(w, counts));
}

CausalVarianceParts causal_variance_parts(const CountMatrix& c, Measure m) {
  const RateMatrix psi = study_arm_rates(c);
  const Eigen::ArrayXd n1 = arm_sizes(c, 1), n0 = arm_sizes(c, 0);
  const Eigen::ArrayXd nk = n1 + n0;
  const double n = nk.sum();
  const Eigen::ArrayXd alpha = nk / n;
  const ArmRates r = pooled_arm_rates(c, alpha.matrix());
  require_domain(m, r);

  auto arm_variance = [&](const Eigen::ArrayXd& p, const Eigen::ArrayXd& na, double pooled) {
    const double within = (nk.square() / (n * na) * p * (1 - p)).sum();
    const double between = (alpha * p.square()).sum() - pooled * pooled;
    return within + between;
  };
  const Eigen::ArrayXd p1 = psi.col(0).array(), p0 = psi.col(1).array();
  const Eigen::Vector2d sigma2(arm_variance(p1, n1, r.treated), arm_variance(p0, n0, r.control));
  const double gamma = (alpha * p1 * p0).sum() - r.treated * r.control;
  return combine(sigma2, gamma, r, m, n);
}

CausalVarianceParts causal_variance_parts(const MetaDataset& ds, Measure m) {
  return causal_variance_parts(count_matrix(ds), m);
}

CausalVarianceParts fixed_weight_variance_parts(const CountMatrix& c, const Eigen::Ref<const Eigen::VectorXd>& alpha,
                                                Measure m) {
  const RateMatrix psi = study_arm_rates(c);
  const Eigen::ArrayXd n1 = arm_sizes(c, 1), n0 = arm_sizes(c, 0);
  const double n = (n1 + n0).sum();
  const ArmRates r = pooled_arm_rates(c, alpha);
  require_domain(m, r);
  const Eigen::ArrayXd a2 = alpha.array().square();
  const Eigen::ArrayXd p1 = psi.col(0).array(), p0 = psi.col(1).array();
  const Eigen::Vector2d sigma2(n * (a2 * p1 * (1 - p1) / n1).sum(), n * (a2 * p0 * (1 - p0) / n0).sum());
  return combine(sigma2, 0.0, r, m, n);
}

double bootstrap_causal_variance(const CountMatrix& counts, const WeightScheme& w, Measure m, int replicates,
                                 std::uint64_t seed) {
  if (replicates < 2) throw Error(ErrorCode::ConfigError, "bootstrap needs at least 2 replicates");
  const Measure pm = log_measure(m);
  const RateMatrix psi = study_arm_rates(counts);
  const Eigen::ArrayXd n1 = arm_sizes(counts, 1), n0 = arm_sizes(counts, 0);
  std::vector<double> draws(std::size_t(replicates), std::numeric_limits<double>::quiet_NaN());

  parallel_for(draws.size(), [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(seed, b));
    CountMatrix rep(counts.rows(), 4);
    for (Eigen::Index k = 0; k < counts.rows(); ++k) {
      const auto t1 = static_cast<long long>(std::llround(n1(k)));
      const auto t0 = static_cast<long long>(std::llround(n0(k)));
      const long long e1 = std::binomial_distribution<long long>(t1, psi(k, 0))(rng);
      const long long e0 = std::binomial_distribution<long long>(t0, psi(k, 1))(rng);
      rep.row(k) << double(e1), double(t1 - e1), double(e0), double(t0 - e0);
    }
    ArmRates r = pooled_arm_rates(rep, resolve_weights(w, rep));
    if (!in_domain(pm, r.treated, r.control)) {
      correct_rows(rep, m);
      r = pooled_arm_rates(rep, resolve_weights(w, rep));
      if (!in_domain(pm, r.treated, r.control)) return;
    }
    draws[b] = contrast_value(pm, r.treated, r.control);
  });

  std::vector<double> kept;
  kept.reserve(draws.size());
  for (double d : draws)
    if (std::isfinite(d)) kept.push_back(d);
  if (kept.size() < 2) throw Error(ErrorCode::VarianceUnavailable, "bootstrap replicates were all degenerate");
  return sample_variance(kept);
}

PooledEstimate pool_causal(const MetaDataset& ds, Measure m, const WeightScheme& w, const CausalOptions& opt) {
  CountMatrix counts = count_matrix(ds);
  Eigen::VectorXd alpha = resolve_weights(w, counts);
  const Measure pm = log_measure(m);
  ArmRates r = pooled_arm_rates(counts, alpha);

  PooledEstimate est;
  est.method = Method::Causal;
  est.measure = m;

  auto usable = [&](const ArmRates& x) {
    return in_domain(m, x.treated, x.control) && in_domain(pm, x.treated, x.control);
  };
  if (!usable(r)) {
    if (opt.correction == CorrectionPolicy::Reject) {
      require_domain(pm, r);
      require_domain(m, r);
    }
    const int corrected = correct_rows(counts, m);
    if (corrected > 0) {
      alpha = resolve_weights(w, counts);
      r = pooled_arm_rates(counts, alpha);
      est.warnings.push_back("continuity correction applied to " + std::to_string(corrected) + " studies");
    }
    require_domain(pm, r);
  }

  CausalVarianceParts parts;
  const bool pooled = w.kind == WeightScheme::Kind::Pooled;
  switch (opt.variance) {
    case VarianceMethod::PooledOnly:
      if (!pooled)
        throw Error(ErrorCode::VarianceUnavailable, "the asymptotic variance formula requires pooled weights");
      parts = causal_variance_parts(counts, pm);
      est.variance = parts.sigma2_total / parts.n;
      break;
    case VarianceMethod::Auto:
      if (pooled) {
        parts = causal_variance_parts(counts, pm);
      } else {
        parts = fixed_weight_variance_parts(counts, alpha, pm);
        est.warnings.push_back("variance for non-pooled weights treats the weights as fixed");
      }
      est.variance = parts.sigma2_total / parts.n;
      break;
    case VarianceMethod::Bootstrap:
      est.variance = bootstrap_causal_variance(counts, w, m, opt.bootstrap_replicates, opt.seed);
      break;
  }
  if (parts.clamped) est.warnings.push_back("negative variance from cancellation clamped to 0");

  est.weights = alpha;
  est.point = contrast_value(m, r.treated, r.control);
  finish_interval(est, contrast_value(pm, r.treated, r.control), opt.ci_level);
  return est;
}

PooledEstimate pool_causal_collapsibility(const MetaDataset& ds, Measure m, const CausalOptions& opt) {
  if (m != Measure::RD && m != Measure::RR)
    throw Error(ErrorCode::DomainError, "the collapsibility form exists only for RD and RR");
  const CountMatrix counts = count_matrix(ds);
  const RateMatrix psi = study_arm_rates(counts);
  const Eigen::VectorXd alpha = resolve_weights(WeightScheme::pooled(), counts);

  Eigen::VectorXd weights;
  Eigen::VectorXd effects;
  if (m == Measure::RD) {
    weights = alpha;
    effects = psi.col(0) - psi.col(1);
  } else {
    if ((psi.col(1).array() <= 0).any())
      throw Error(ErrorCode::DomainError, "risk-ratio collapsibility needs a positive control rate in every study");
    const double control = alpha.dot(psi.col(1));
    weights = (alpha.array() * psi.col(1).array() / control).matrix();
    effects = (psi.col(0).array() / psi.col(1).array()).matrix();
  }

  PooledEstimate est = pool_causal(ds, m, WeightScheme::pooled(), opt);
  est.point = weights.dot(effects);
  est.weights = weights;
  est.ci_low = std::min(est.ci_low, est.point);
  est.ci_high = std::max(est.ci_high, est.point);
  return est;
}

}  // namespace cmeta
