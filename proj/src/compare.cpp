#include "cmeta/compare.hpp"

#include "cmeta/io.hpp"
#include "cmeta/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace cmeta {

double jaccard(const Interval& a, const Interval& b) {
  if (!(a.low <= a.high) || !(b.low <= b.high))
    throw Error(ErrorCode::DomainError, "interval endpoints are out of order");
  const double inter = std::max(0.0, std::min(a.high, b.high) - std::max(a.low, b.low));
  // measure of the union, which is smaller than the hull when the intervals are disjoint
  const double uni = a.length() + b.length() - inter;
  if (!(uni > 0)) throw Error(ErrorCode::DomainError, "both intervals have zero length");
  return std::clamp(inter / uni, 0.0, 1.0);
}

ComparisonRecord compare_one(const MetaDataset& ds, Measure m, const CompareConfig& cfg) {
  validate_dataset(ds);
  const auto effects = study_effects(ds, m, cfg.correction);
  const PooledEstimate re = pool_random(effects, cfg.tau, cfg.ci_level);
  CausalOptions opt;
  opt.ci_level = cfg.ci_level;
  opt.correction = cfg.correction;
  const PooledEstimate causal = pool_causal(ds, m, WeightScheme::pooled(), opt);

  ComparisonRecord r;
  r.dataset = ds.name;
  r.measure = m;
  r.point_re = re.point;
  r.point_causal = causal.point;
  r.ci_re = {re.ci_low, re.ci_high};
  r.ci_causal = {causal.ci_low, causal.ci_high};
  r.discrepancy = std::abs(re.point - causal.point);
  r.len_re = r.ci_re.length();
  r.len_causal = r.ci_causal.length();
  r.jaccard = jaccard(r.ci_re, r.ci_causal);
  r.tau2 = re.tau2.value_or(0.0);
  for (const auto& w : re.warnings) r.warnings.push_back("re: " + w);
  for (const auto& w : causal.warnings) r.warnings.push_back("causal: " + w);
  return r;
}

MetricSummary summarize(std::span<const double> values) {
  return {mean(values), sample_sd(values)};
}

namespace {

struct Outcome {
  std::vector<ComparisonRecord> records;
  std::optional<SkippedInput> skipped;
};

Outcome run_one(const MetaDataset& ds, std::span<const Measure> measures, const CompareConfig& cfg) {
  Outcome out;
  try {
    for (Measure m : measures) out.records.push_back(compare_one(ds, m, cfg));
  } catch (const Error& e) {
    out.records.clear();
    out.skipped = SkippedInput{ds.name, std::string(e.what())};
  }
  return out;
}

BatchResult assemble(std::vector<Outcome> outcomes, std::vector<SkippedInput> skipped,
                     std::span<const Measure> measures) {
  BatchResult result;
  result.skipped = std::move(skipped);
  std::vector<std::vector<ComparisonRecord>> groups;
  for (auto& o : outcomes) {
    if (o.skipped) {
      result.skipped.push_back(*o.skipped);
    } else {
      groups.push_back(std::move(o.records));
    }
  }
  if (groups.empty()) throw Error(ErrorCode::NoValidDatasets, "no dataset could be compared");
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return a.front().dataset < b.front().dataset; });
  result.datasets = int(groups.size());
  for (auto& g : groups)
    for (auto& r : g) result.records.push_back(std::move(r));

  for (std::size_t j = 0; j < measures.size(); ++j) {
    std::vector<double> disc, lre, lca, jac;
    for (const auto& g : groups) {
      const auto& r = g[j];
      disc.push_back(r.discrepancy);
      lre.push_back(r.len_re);
      lca.push_back(r.len_causal);
      jac.push_back(r.jaccard);
    }
    MeasureSummary s;
    s.measure = measures[j];
    s.count = int(groups.size());
    s.discrepancy = summarize(disc);
    s.len_re = summarize(lre);
    s.len_causal = summarize(lca);
    s.jaccard = summarize(jac);
    result.summaries.push_back(s);
  }
  std::stable_sort(result.skipped.begin(), result.skipped.end(),
                   [](const auto& a, const auto& b) { return a.source < b.source; });
  return result;
}

void require_measures(std::span<const Measure> measures) {
  if (measures.empty()) throw Error(ErrorCode::ConfigError, "at least one measure is required");
}

}  // namespace

BatchResult compare_datasets(std::span<const MetaDataset> datasets, std::span<const Measure> measures,
                             const CompareConfig& cfg) {
  require_measures(measures);
  std::vector<Outcome> outcomes(datasets.size());
  parallel_for(datasets.size(), [&](std::size_t i) { outcomes[i] = run_one(datasets[i], measures, cfg); });
  return assemble(std::move(outcomes), {}, measures);
}

BatchResult compare_batch(const std::filesystem::path& dir, std::span<const Measure> measures,
                          const CompareConfig& cfg) {
  require_measures(measures);
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw Error(ErrorCode::IoError, dir.string() + ": not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".csv" || ext == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<Outcome> outcomes(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    try {
      const MetaDataset ds = load_dataset(files[i]);
      outcomes[i] = run_one(ds, measures, cfg);
      if (outcomes[i].skipped) outcomes[i].skipped->source = files[i].filename().string();
    } catch (const Error& e) {
      outcomes[i].skipped = SkippedInput{files[i].filename().string(), std::string(e.what())};
    }
  });
  return assemble(std::move(outcomes), {}, measures);
}

namespace {

std::string fmt(const char* pattern, double a, double b) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

std::string label_upper(Measure m) {
  std::string s(to_string(m));
  for (auto& c : s) c = char(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string format_summary_table(const BatchResult& result) {
  const std::vector<std::string> header = {"Measure", "Discrepancy", "CI length (RE)", "CI length (causal)",
                                           "CI overlap"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : result.summaries) {
    rows.push_back({label_upper(s.measure), fmt("%.4g (± %.4g)", s.discrepancy.mean, s.discrepancy.sd),
                    fmt("%.4g (± %.4g)", s.len_re.mean, s.len_re.sd),
                    fmt("%.4g (± %.4g)", s.len_causal.mean, s.len_causal.sd),
                    fmt("%.1f%% (± %.1f%%)", 100 * s.jaccard.mean, 100 * s.jaccard.sd)});
  }
  // width in code points; "±" is two bytes in UTF-8
  auto width = [](const std::string& s) {
    return std::size_t(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> w(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    w[c] = width(header[c]);
    for (const auto& r : rows) w[c] = std::max(w[c], width(r[c]));
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out << "  ";
      out << cells[c];
      if (c + 1 < cells.size()) out << std::string(w[c] - width(cells[c]), ' ');
    }
    out << '\n';
  };
  line(header);
  std::vector<std::string> rule;
  for (auto x : w) rule.push_back(std::string(x, '-'));
  line(rule);
  for (const auto& r : rows) line(r);
  out << "\n" << result.datasets << " datasets compared, " << result.skipped.size() << " skipped\n";
  for (const auto& s : result.skipped) out << "  skipped " << s.source << ": " << s.reason << '\n';
  return out.str();
}

std::string batch_to_json(const BatchResult& result, int indent) {
  using nlohmann::json;
  auto metric = [](const MetricSummary& m) { return json{{"mean", m.mean}, {"sd", m.sd}}; };
  auto interval = [](const Interval& i) { return json::array({i.low, i.high}); };
  json j;
  j["datasets"] = result.datasets;
  j["summary"] = json::array();
  for (const auto& s : result.summaries) {
    j["summary"].push_back({{"measure", to_string(s.measure)},
                            {"count", s.count},
                            {"discrepancy", metric(s.discrepancy)},
                            {"len_re", metric(s.len_re)},
                            {"len_causal", metric(s.len_causal)},
                            {"jaccard", metric(s.jaccard)}});
  }
  j["records"] = json::array();
  for (const auto& r : result.records) {
    j["records"].push_back({{"dataset", r.dataset},
                            {"measure", to_string(r.measure)},
                            {"point_re", r.point_re},
                            {"point_causal", r.point_causal},
                            {"ci_re", interval(r.ci_re)},
                            {"ci_causal", interval(r.ci_causal)},
                            {"discrepancy", r.discrepancy},
                            {"len_re", r.len_re},
                            {"len_causal", r.len_causal},
                            {"jaccard", r.jaccard},
                            {"tau2", r.tau2},
                            {"warnings", r.warnings}});
  }
  j["skipped"] = json::array();
  for (const auto& s : result.skipped) j["skipped"].push_back({{"source", s.source}, {"reason", s.reason}});
  return j.dump(indent) + "\n";
}

std::string records_to_csv(const BatchResult& result) {
  std::ostringstream out;
  out << "dataset,measure,point_re,point_causal,ci_re_low,ci_re_high,ci_causal_low,ci_causal_high,"
         "discrepancy,len_re,len_causal,jaccard\n";
  out.precision(17);
  for (const auto& r : result.records) {
    std::string name = r.dataset;
    if (name.find_first_of(",\"\r\n") != std::string::npos) {
      std::string q = "\"";
      for (char c : name) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      name = q + "\"";
    }
    out << name << ',' << to_string(r.measure) << ',' << r.point_re << ',' << r.point_causal << ','
        << r.ci_re.low << ',' << r.ci_re.high << ',' << r.ci_causal.low << ',' << r.ci_causal.high << ','
        << r.discrepancy << ',' << r.len_re << ',' << r.len_causal << ',' << r.jaccard << '\n';
  }
  return out.str();
}

}  // namespace cmeta
