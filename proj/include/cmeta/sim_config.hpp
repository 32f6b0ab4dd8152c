#pragma once

#include "cmeta/simulation.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace cmeta {

enum class Experiment { Mismatch, Calibrate, Draw };

std::string_view to_string(Experiment e);
Experiment parse_experiment(std::string_view text);

/// Settings for one simulation run. Read from `key = value` lines; '#' starts
/// a comment. Keys:
///
///   experiment    mismatch | calibrate | draw
///   replications  positive integer
///   seed          unsigned integer
///   correction    reject | haldane
///   degenerate    resample | fail
///   ci_level      probability
///   n             patients per meta-analysis (all experiments)
///   m1 m2 beta1 beta0          two comma-separated reals (mismatch, draw)
///   eta p_study p_treat        reals (mismatch, draw)
///   study_prob treat_prob psi_treated psi_control   comma-separated reals (calibrate)
///   measures      comma-separated measures (calibrate)
///
/// Unknown keys, repeated keys and malformed values raise ConfigError with the line number.
struct SimulationConfig {
  Experiment experiment = Experiment::Mismatch;
  int replications = 100;
  std::uint64_t seed = 0;
  CorrectionPolicy correction = CorrectionPolicy::Haldane;
  DegeneratePolicy degenerate = DegeneratePolicy::Resample;
  double ci_level = 0.95;
  MismatchDGP dgp;
  RateSpec rates = default_rate_spec();
  std::vector<Measure> measures{Measure::RD, Measure::LogRR, Measure::LogOR};

  void validate() const;
};

SimulationConfig parse_sim_config(std::string_view text);
/// Applies `key = value` pairs on top of an existing configuration.
void apply_sim_setting(SimulationConfig& cfg, std::string_view key, std::string_view value);

std::string_view to_string(DegeneratePolicy p);

std::string mismatch_report_json(const MismatchReport& report, const SimulationConfig& cfg, int indent = 2);
std::string mismatch_report_text(const MismatchReport& report);
/// Long format: replication,method,measure,value. Feeds boxplots.
std::string mismatch_boxplot_csv(const MismatchReport& report);

std::string calibration_report_json(const std::vector<CalibrationReport>& reports, const SimulationConfig& cfg,
                                    int indent = 2);
std::string calibration_report_text(const std::vector<CalibrationReport>& reports);

}  // namespace cmeta
