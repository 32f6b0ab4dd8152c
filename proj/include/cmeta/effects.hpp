#pragma once

#include "cmeta/core.hpp"

#include <utility>
#include <vector>

namespace cmeta {

/// What to do when a study has a zero cell that the measure cannot absorb.
/// Haldane adds 0.5 to all four cells of the affected study only.
enum class CorrectionPolicy { Reject, Haldane };

std::string_view to_string(CorrectionPolicy p);
CorrectionPolicy parse_correction(std::string_view text);

/// Per-study contrast on the pooling scale (natural for RD, log for the ratio
/// measures) with its estimated sampling variance.
struct StudyEffect {
  double theta_hat = 0.0;
  double sigma2_hat = 0.0;
  Measure measure = Measure::RD;
  bool corrected = false;
};

/// Observed event rate per arm: (treated, control).
std::pair<ArmSummary, ArmSummary> arm_rates(const StudyTable& study);

/// Whether the table needs a continuity correction before `m` can be computed
/// with a finite value and a strictly positive variance.
bool needs_correction(const StudyTable& study, Measure m);
bool needs_correction(const Eigen::Ref<const Eigen::RowVector4d>& cells, Measure m);

/// Sampling variance of a risk difference from arm rates and arm sizes.
/// Zero exactly when both rates sit on {0, 1}.
inline double risk_difference_variance(double p1, double n1, double p0, double n0) {
  return p1 * (1 - p1) / n1 + p0 * (1 - p0) / n0;
}

StudyEffect study_effect(const StudyTable& study, Measure m, CorrectionPolicy policy = CorrectionPolicy::Haldane);

/// Same computation on a (possibly fractional) row of cells n11, n10, n01, n00.
StudyEffect study_effect(const Eigen::Ref<const Eigen::RowVector4d>& cells, Measure m);

std::vector<StudyEffect> study_effects(const MetaDataset& ds, Measure m,
                                       CorrectionPolicy policy = CorrectionPolicy::Haldane);

}  // namespace cmeta
