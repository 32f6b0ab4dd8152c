#include "cmeta/core.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace cmeta {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyArm: return "EmptyArm";
    case ErrorCode::NegativeCount: return "NegativeCount";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ZeroCellUnresolvable: return "ZeroCellUnresolvable";
    case ErrorCode::DegenerateStudy: return "DegenerateStudy";
    case ErrorCode::MixedMeasures: return "MixedMeasures";
    case ErrorCode::WeightLengthMismatch: return "WeightLengthMismatch";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::VarianceUnavailable: return "VarianceUnavailable";
    case ErrorCode::DegenerateDraw: return "DegenerateDraw";
    case ErrorCode::DegenerateEquation: return "DegenerateEquation";
    case ErrorCode::NoValidDatasets: return "NoValidDatasets";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

Count MetaDataset::total() const {
  Count n = 0;
  for (const auto& s : studies) n += s.total();
  return n;
}

MetaDataset validate_dataset(MetaDataset raw) {
  if (raw.studies.empty()) throw Error(ErrorCode::EmptyDataset, "dataset '" + raw.name + "' has no studies");
  std::unordered_set<std::string> seen;
  for (const auto& s : raw.studies) {
    if (s.n11 < 0 || s.n10 < 0 || s.n01 < 0 || s.n00 < 0)
      throw Error(ErrorCode::NegativeCount, "study '" + s.label + "' has a negative count");
    if (s.treated() == 0 || s.control() == 0)
      throw Error(ErrorCode::EmptyArm, "study '" + s.label + "' has an empty arm");
    if (!seen.insert(s.label).second)
      throw Error(ErrorCode::DuplicateLabel, "label '" + s.label + "' appears more than once");
  }
  return raw;
}

std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::RD: return "rd";
    case Measure::RR: return "rr";
    case Measure::LogRR: return "logrr";
    case Measure::OR: return "or";
    case Measure::LogOR: return "logor";
  }
  return "?";
}

Measure parse_measure(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "rd") return Measure::RD;
  if (t == "rr") return Measure::RR;
  if (t == "logrr") return Measure::LogRR;
  if (t == "or") return Measure::OR;
  if (t == "logor") return Measure::LogOR;
  throw Error(ErrorCode::ConfigError, "unknown measure '" + t + "'");
}

Measure log_measure(Measure m) {
  switch (m) {
    case Measure::RR:
    case Measure::LogRR: return Measure::LogRR;
    case Measure::OR:
    case Measure::LogOR: return Measure::LogOR;
    case Measure::RD: return Measure::RD;
  }
  return m;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::FixedEffects: return "fe";
    case Method::RandomEffects: return "re";
    case Method::Causal: return "causal";
  }
  return "?";
}

CountMatrix count_matrix(const MetaDataset& ds) {
  CountMatrix c(static_cast<Eigen::Index>(ds.size()), 4);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto& s = ds.studies[k];
    c.row(static_cast<Eigen::Index>(k)) << double(s.n11), double(s.n10), double(s.n01), double(s.n00);
  }
  return c;
}

}  // namespace cmeta
