#pragma once

#include "cmeta/classical.hpp"
#include "cmeta/causal.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cmeta {

struct Interval {
  double low = 0.0;
  double high = 0.0;

  double length() const { return high - low; }
};

/// |a ∩ b| / |a ∪ b| for closed intervals. The union must have positive length.
double jaccard(const Interval& a, const Interval& b);

/// Random effects against the causal estimator for one dataset and measure.
/// Points and intervals are on the natural scale (RR and OR exponentiated).
struct ComparisonRecord {
  std::string dataset;
  Measure measure = Measure::RD;
  double point_re = 0.0;
  double point_causal = 0.0;
  Interval ci_re;
  Interval ci_causal;
  double discrepancy = 0.0;
  double len_re = 0.0;
  double len_causal = 0.0;
  double jaccard = 0.0;
  double tau2 = 0.0;
  std::vector<std::string> warnings;
};

struct CompareConfig {
  double ci_level = 0.95;
  CorrectionPolicy correction = CorrectionPolicy::Haldane;
  TauMethod tau = TauMethod::DerSimonianLaird;
};

ComparisonRecord compare_one(const MetaDataset& ds, Measure m, const CompareConfig& cfg = {});

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single value
};

MetricSummary summarize(std::span<const double> values);

struct MeasureSummary {
  Measure measure = Measure::RD;
  int count = 0;
  MetricSummary discrepancy;
  MetricSummary len_re;
  MetricSummary len_causal;
  MetricSummary jaccard;
};

struct SkippedInput {
  std::string source;
  std::string reason;
};

struct BatchResult {
  std::vector<ComparisonRecord> records;  // sorted by dataset name, then measure order
  std::vector<MeasureSummary> summaries;  // one per requested measure
  std::vector<SkippedInput> skipped;
  int datasets = 0;                        // datasets that contributed records
};

/// Datasets that fail to pool for any requested measure are skipped whole, so
/// every summary row covers the same datasets. Throws NoValidDatasets when
/// nothing is left.
BatchResult compare_datasets(std::span<const MetaDataset> datasets, std::span<const Measure> measures,
                             const CompareConfig& cfg = {});

/// Every *.csv and *.json file directly inside `dir`. Unreadable or invalid
/// files are reported in `skipped`.
BatchResult compare_batch(const std::filesystem::path& dir, std::span<const Measure> measures,
                          const CompareConfig& cfg = {});

/// Aligned table with one row per measure: discrepancy, CI lengths and overlap
/// as "mean (± sd)", followed by a footer counting skipped inputs.
std::string format_summary_table(const BatchResult& result);
std::string batch_to_json(const BatchResult& result, int indent = 2);
/// One row per record, columns named after ComparisonRecord fields.
std::string records_to_csv(const BatchResult& result);

}  // namespace cmeta
