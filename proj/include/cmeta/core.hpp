#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cmeta {

enum class ErrorCode {
  EmptyArm,
  NegativeCount,
  DuplicateLabel,
  EmptyDataset,
  ZeroCellUnresolvable,
  DegenerateStudy,
  MixedMeasures,
  WeightLengthMismatch,
  InvalidWeights,
  DomainError,
  VarianceUnavailable,
  DegenerateDraw,
  DegenerateEquation,
  NoValidDatasets,
  ParseError,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every recoverable failure in the library is reported as an Error carrying
/// a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

using Count = std::int64_t;

/// One study's treatment-by-outcome table. Rows are arms (1 = treated,
/// 0 = control), columns are outcomes (1 = event, 0 = no event).
struct StudyTable {
  std::string label;
  Count n11 = 0;
  Count n10 = 0;
  Count n01 = 0;
  Count n00 = 0;

  Count treated() const { return n11 + n10; }
  Count control() const { return n01 + n00; }
  Count total() const { return treated() + control(); }

  bool operator==(const StudyTable&) const = default;
};

struct MetaDataset {
  std::string name;
  std::vector<StudyTable> studies;

  std::size_t size() const { return studies.size(); }
  Count total() const;

  bool operator==(const MetaDataset&) const = default;
};

/// Returns the dataset unchanged if every table is well formed, throws otherwise.
MetaDataset validate_dataset(MetaDataset raw);

enum class Measure { RD, RR, LogRR, OR, LogOR };
enum class Scale { Natural, Log };

std::string_view to_string(Measure m);
Measure parse_measure(std::string_view text);

inline bool is_ratio(Measure m) { return m != Measure::RD; }

/// Scale on which a measure is pooled and its variance is expressed.
inline Scale pooling_scale(Measure m) { return is_ratio(m) ? Scale::Log : Scale::Natural; }

/// The contrast whose value lives on the pooling scale (RR -> LogRR, OR -> LogOR).
Measure log_measure(Measure m);

/// True when the reported point is the exponential of the pooling-scale value.
inline bool reports_exponentiated(Measure m) { return m == Measure::RR || m == Measure::OR; }

/// Null-effect value on the reporting scale.
inline double null_value(Measure m) { return reports_exponentiated(m) ? 1.0 : 0.0; }

struct ArmSummary {
  double psi_hat = 0.0;
  Count n_arm = 0;
};

enum class Method { FixedEffects, RandomEffects, Causal };
std::string_view to_string(Method m);

struct PooledEstimate {
  Method method = Method::FixedEffects;
  Measure measure = Measure::RD;
  double point = 0.0;
  /// Variance of the point estimate on `scale` (log scale for ratio measures).
  double variance = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  Eigen::VectorXd weights;
  std::optional<double> tau2;
  Scale scale = Scale::Natural;
  std::vector<std::string> warnings;
};

/// K x 4 matrix of per-study counts in column order (n11, n10, n01, n00).
/// Stored as doubles so that continuity-corrected tables share the layout.
using CountMatrix = Eigen::Matrix<double, Eigen::Dynamic, 4>;

CountMatrix count_matrix(const MetaDataset& ds);

}  // namespace cmeta
