#include "cmeta/effects.hpp"

#include <cmath>

namespace cmeta {

std::string_view to_string(CorrectionPolicy p) { return p == CorrectionPolicy::Reject ? "reject" : "haldane"; }

CorrectionPolicy parse_correction(std::string_view text) {
  if (text == "reject") return CorrectionPolicy::Reject;
  if (text == "haldane") return CorrectionPolicy::Haldane;
  throw Error(ErrorCode::ConfigError, "unknown correction policy '" + std::string(text) + "'");
}

std::pair<ArmSummary, ArmSummary> arm_rates(const StudyTable& s) {
  return {ArmSummary{double(s.n11) / double(s.treated()), s.treated()},
          ArmSummary{double(s.n01) / double(s.control()), s.control()}};
}

bool needs_correction(const Eigen::Ref<const Eigen::RowVector4d>& c, Measure m) {
  const double n11 = c(0), n10 = c(1), n01 = c(2), n00 = c(3);
  switch (m) {
    case Measure::RD: {
      // both arms on {0, 1} leaves a zero variance
      const bool treated_degenerate = n11 == 0 || n10 == 0;
      const bool control_degenerate = n01 == 0 || n00 == 0;
      return treated_degenerate && control_degenerate;
    }
    case Measure::RR:
    case Measure::LogRR: return n11 == 0 || n01 == 0 || (n10 == 0 && n00 == 0);
    case Measure::OR:
    case Measure::LogOR: return n11 == 0 || n10 == 0 || n01 == 0 || n00 == 0;
  }
  return false;
}

bool needs_correction(const StudyTable& s, Measure m) {
  return needs_correction(Eigen::RowVector4d(double(s.n11), double(s.n10), double(s.n01), double(s.n00)), m);
}

StudyEffect study_effect(const Eigen::Ref<const Eigen::RowVector4d>& c, Measure m) {
  const double n11 = c(0), n10 = c(1), n01 = c(2), n00 = c(3);
  const double n1 = n11 + n10, n0 = n01 + n00;
  const double p1 = n11 / n1, p0 = n01 / n0;
  StudyEffect e;
  e.measure = m;
  switch (m) {
    case Measure::RD:
      e.theta_hat = p1 - p0;
      e.sigma2_hat = risk_difference_variance(p1, n1, p0, n0);
      break;
    case Measure::RR:
    case Measure::LogRR:
      e.theta_hat = std::log(p1) - std::log(p0);
      e.sigma2_hat = 1 / n11 - 1 / n1 + 1 / n01 - 1 / n0;
      break;
    case Measure::OR:
    case Measure::LogOR:
      e.theta_hat = (std::log(n11) - std::log(n10)) - (std::log(n01) - std::log(n00));
      e.sigma2_hat = 1 / n11 + 1 / n10 + 1 / n01 + 1 / n00;
      break;
  }
  return e;
}

StudyEffect study_effect(const StudyTable& s, Measure m, CorrectionPolicy policy) {
  Eigen::RowVector4d cells(double(s.n11), double(s.n10), double(s.n01), double(s.n00));
  bool corrected = false;
  if (needs_correction(cells, m)) {
    if (policy == CorrectionPolicy::Reject)
      throw Error(ErrorCode::ZeroCellUnresolvable,
                  "study '" + s.label + "' has a zero cell and the correction policy is reject");
    cells.array() += 0.5;
    corrected = true;
  }
  StudyEffect e = study_effect(cells, m);
  e.corrected = corrected;
  if (!std::isfinite(e.theta_hat) || !(e.sigma2_hat > 0))
    throw Error(ErrorCode::DegenerateStudy, "study '" + s.label + "' yields a non-finite effect");
  return e;
}

std::vector<StudyEffect> study_effects(const MetaDataset& ds, Measure m, CorrectionPolicy policy) {
  std::vector<StudyEffect> out;
  out.reserve(ds.size());
  for (const auto& s : ds.studies) out.push_back(study_effect(s, m, policy));
  return out;
}

}  // namespace cmeta
