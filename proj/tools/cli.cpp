#include "cli.hpp"

#include "cmeta/classical.hpp"
#include "cmeta/causal.hpp"
#include "cmeta/compare.hpp"
#include "cmeta/forest.hpp"
#include "cmeta/io.hpp"
#include "cmeta/sim_config.hpp"
#include "cmeta/stats.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <sstream>

namespace cmeta::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Output { Text, Json, Csv, Svg };

Output parse_output(std::string_view text) {
  if (text == "text") return Output::Text;
  if (text == "json") return Output::Json;
  if (text == "csv") return Output::Csv;
  if (text == "svg") return Output::Svg;
  throw Error(ErrorCode::ConfigError, "unknown output format '" + std::string(text) + "'");
}

void require_output(Output o, std::initializer_list<Output> allowed, std::string_view command) {
  if (std::find(allowed.begin(), allowed.end(), o) == allowed.end())
    throw Error(ErrorCode::ConfigError, "this output format is not available for " + std::string(command));
}

std::vector<Method> parse_models(std::string_view text) {
  if (text == "all") return {Method::FixedEffects, Method::RandomEffects, Method::Causal};
  if (text == "fe") return {Method::FixedEffects};
  if (text == "re") return {Method::RandomEffects};
  if (text == "causal") return {Method::Causal};
  throw Error(ErrorCode::ConfigError, "unknown model '" + std::string(text) + "'");
}

VarianceMethod parse_variance(std::string_view text) {
  if (text == "auto") return VarianceMethod::Auto;
  if (text == "pooled") return VarianceMethod::PooledOnly;
  if (text == "bootstrap") return VarianceMethod::Bootstrap;
  throw Error(ErrorCode::ConfigError, "unknown variance method '" + std::string(text) + "'");
}

double checked_level(double level) {
  if (!(level > 0 && level < 1)) throw Error(ErrorCode::ConfigError, "--ci-level must lie in (0, 1)");
  return level;
}

std::string g4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string upper(std::string_view s) {
  std::string o(s);
  for (auto& c : o) c = char(std::toupper(static_cast<unsigned char>(c)));
  return o;
}

std::string left(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string percent(double level) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%g%%", 100 * level);
  return buf;
}

json to_json_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// Raw strings from the command line; parsed into typed settings before any work starts.
struct CommonFlags {
  std::string measure = "rd";
  std::string model = "all";
  std::string weights = "pooled";
  double ci_level = 0.95;
  std::string correction = "haldane";
  std::uint64_t seed = 0;
  std::string output = "text";
};

void add_common(CLI::App* sub, CommonFlags& f, bool model_flags) {
  sub->add_option("--measure", f.measure, "Effect measure: rd, rr or or")->capture_default_str();
  if (model_flags) {
    sub->add_option("--model", f.model, "Pooling model: fe, re, causal or all")->capture_default_str();
    sub->add_option("--weights", f.weights, "Causal weights: uniform, pooled or custom:w1,w2,...")
        ->capture_default_str();
  }
  sub->add_option("--ci-level", f.ci_level, "Confidence level")->capture_default_str();
  sub->add_option("--correction", f.correction, "Zero-cell handling: reject or haldane")->capture_default_str();
  sub->add_option("--seed", f.seed, "Random seed")->capture_default_str();
  sub->add_option("--output", f.output, "Output format")->capture_default_str();
}

// ---------------------------------------------------------------- analyze

struct AnalyzeResult {
  MetaDataset ds;
  Measure measure;
  std::vector<StudyEffect> effects;
  std::vector<PooledEstimate> pooled;
};

json estimate_json(const PooledEstimate& e) {
  json j = {{"method", to_string(e.method)},
            {"point", e.point},
            {"variance", e.variance},
            {"scale", e.scale == Scale::Log ? "log" : "natural"},
            {"ci", json::array({e.ci_low, e.ci_high})},
            {"weights", to_json_vector(e.weights)},
            {"warnings", e.warnings}};
  j["tau2"] = e.tau2 ? json(*e.tau2) : json(nullptr);
  return j;
}

std::pair<double, double> study_interval(const StudyEffect& e, Measure m, double z) {
  const double half = z * std::sqrt(e.sigma2_hat);
  double lo = e.theta_hat - half, hi = e.theta_hat + half;
  if (reports_exponentiated(m)) return {std::exp(lo), std::exp(hi)};
  return {lo, hi};
}

double study_point(const StudyEffect& e, Measure m) {
  return reports_exponentiated(m) ? std::exp(e.theta_hat) : e.theta_hat;
}

int cmd_analyze(const std::string& input, const CommonFlags& f, const std::string& variance, int bootstrap,
                std::ostream& out) {
  const Measure m = parse_measure(f.measure);
  const auto models = parse_models(f.model);
  const WeightScheme weights = parse_weight_scheme(f.weights);
  const double level = checked_level(f.ci_level);
  const CorrectionPolicy correction = parse_correction(f.correction);
  const Output output = parse_output(f.output);
  require_output(output, {Output::Text, Output::Json, Output::Csv}, "analyze");
  CausalOptions copt;
  copt.ci_level = level;
  copt.correction = correction;
  copt.variance = parse_variance(variance);
  copt.bootstrap_replicates = bootstrap;
  copt.seed = f.seed;

  AnalyzeResult res{load_dataset(input), m, {}, {}};
  res.effects = study_effects(res.ds, m, correction);
  for (Method method : models) {
    switch (method) {
      case Method::FixedEffects: res.pooled.push_back(pool_fixed(res.effects, level)); break;
      case Method::RandomEffects:
        res.pooled.push_back(pool_random(res.effects, TauMethod::DerSimonianLaird, level));
        break;
      case Method::Causal: res.pooled.push_back(pool_causal(res.ds, m, weights, copt)); break;
    }
  }
  const double z = z_for_level(level);

  if (output == Output::Json) {
    json j;
    j["dataset"] = res.ds.name;
    j["measure"] = to_string(m);
    j["ci_level"] = level;
    j["correction"] = to_string(correction);
    j["weights"] = to_string(weights);
    j["studies"] = json::array();
    for (std::size_t k = 0; k < res.effects.size(); ++k) {
      const auto& s = res.ds.studies[k];
      const auto& e = res.effects[k];
      const auto [lo, hi] = study_interval(e, m, z);
      j["studies"].push_back({{"label", s.label},
                              {"counts", {s.n11, s.n10, s.n01, s.n00}},
                              {"theta", e.theta_hat},
                              {"variance", e.sigma2_hat},
                              {"point", study_point(e, m)},
                              {"ci", json::array({lo, hi})},
                              {"corrected", e.corrected}});
    }
    j["pooled"] = json::array();
    for (const auto& p : res.pooled) j["pooled"].push_back(estimate_json(p));
    out << j.dump(2) << '\n';
    return 0;
  }

  if (output == Output::Csv) {
    std::ostringstream o;
    o.precision(17);
    o << "row,label,point,ci_low,ci_high,variance,tau2\n";
    for (std::size_t k = 0; k < res.effects.size(); ++k) {
      const auto [lo, hi] = study_interval(res.effects[k], m, z);
      std::string label = res.ds.studies[k].label;
      if (label.find_first_of(",\"\r\n") != std::string::npos) {
        std::string q = "\"";
        for (char c : label) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        label = q + "\"";
      }
      o << "study," << label << ',' << study_point(res.effects[k], m) << ',' << lo << ',' << hi << ','
        << res.effects[k].sigma2_hat << ",\n";
    }
    for (const auto& p : res.pooled) {
      o << "pooled," << to_string(p.method) << ',' << p.point << ',' << p.ci_low << ',' << p.ci_high << ','
        << p.variance << ',';
      if (p.tau2) o << *p.tau2;
      o << '\n';
    }
    out << o.str();
    return 0;
  }

  const std::string mname = upper(to_string(m));
  out << "dataset " << res.ds.name << ": " << res.ds.size() << " studies, " << res.ds.total() << " participants\n";
  out << "measure " << mname << ", " << percent(level) << " intervals, correction " << to_string(correction);
  if (is_ratio(m)) out << ", variances on the log scale";
  out << "\n\n";
  std::size_t lw = 5;
  for (const auto& s : res.ds.studies) lw = std::max(lw, s.label.size());
  out << left("study", lw) << "  " << left("n11", 7) << left("n10", 7) << left("n01", 7) << left("n00", 7)
      << left(mname, 11) << left("CI", 24) << "variance\n";
  for (std::size_t k = 0; k < res.effects.size(); ++k) {
    const auto& s = res.ds.studies[k];
    const auto& e = res.effects[k];
    const auto [lo, hi] = study_interval(e, m, z);
    out << left(s.label, lw) << "  " << left(std::to_string(s.n11), 7) << left(std::to_string(s.n10), 7)
        << left(std::to_string(s.n01), 7) << left(std::to_string(s.n00), 7) << left(g4(study_point(e, m)), 11)
        << left("[" + g4(lo) + ", " + g4(hi) + "]", 24) << g4(e.sigma2_hat) << (e.corrected ? "  (corrected)" : "")
        << '\n';
  }
  out << '\n' << left("model", 8) << left(mname, 11) << left("CI", 24) << left("variance", 11) << "tau2\n";
  for (const auto& p : res.pooled) {
    out << left(std::string(to_string(p.method)), 8) << left(g4(p.point), 11)
        << left("[" + g4(p.ci_low) + ", " + g4(p.ci_high) + "]", 24) << left(g4(p.variance), 11)
        << (p.tau2 ? g4(*p.tau2) : std::string("-")) << '\n';
  }
  for (const auto& p : res.pooled) {
    out << "weights " << to_string(p.method) << ':';
    for (Eigen::Index k = 0; k < p.weights.size(); ++k) out << ' ' << g4(p.weights(k));
    out << '\n';
  }
  for (const auto& p : res.pooled)
    for (const auto& w : p.warnings) out << "warning (" << to_string(p.method) << "): " << w << '\n';
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateFlags {
  std::string experiment;
  std::string config;
  int replications = 0;
  std::vector<std::string> settings;
  std::string out_dir;
};

int cmd_simulate(const CommonFlags& f, const SimulateFlags& s, const CLI::App& sub, std::ostream& out) {
  SimulationConfig cfg;
  if (!s.config.empty()) cfg = parse_sim_config(read_text_file(s.config));
  for (const auto& kv : s.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "--set expects key=value, got '" + kv + "'");
    apply_sim_setting(cfg, std::string_view(kv).substr(0, eq), std::string_view(kv).substr(eq + 1));
  }
  if (sub.count("--experiment")) cfg.experiment = parse_experiment(s.experiment);
  if (sub.count("--replications")) cfg.replications = s.replications;
  if (sub.count("--seed")) cfg.seed = f.seed;
  if (sub.count("--correction")) cfg.correction = parse_correction(f.correction);
  if (sub.count("--ci-level")) cfg.ci_level = checked_level(f.ci_level);
  const Output output = parse_output(f.output);
  require_output(output, {Output::Text, Output::Json}, "simulate");
  cfg.validate();

  fs::path dir = s.out_dir;
  if (dir.empty()) {
    const char* env = std::getenv("CMETA_OUTPUT_DIR");
    dir = env && *env ? fs::path(env) : fs::path(".");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, dir.string() + ": " + ec.message());

  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    write_text_file(dir / name, content);
    written.push_back(dir / name);
  };

  std::string json_text, text;
  switch (cfg.experiment) {
    case Experiment::Mismatch: {
      const MismatchReport report =
          run_mismatch_experiment(cfg.dgp, cfg.replications, cfg.seed, cfg.correction, cfg.degenerate);
      json_text = mismatch_report_json(report, cfg);
      text = mismatch_report_text(report);
      emit("mismatch_report.json", json_text);
      emit("mismatch_boxplot.csv", mismatch_boxplot_csv(report));
      break;
    }
    case Experiment::Calibrate: {
      const auto reports =
          calibrate_causal_variance(cfg.rates, cfg.measures, cfg.replications, cfg.seed, cfg.ci_level);
      json_text = calibration_report_json(reports, cfg);
      text = calibration_report_text(reports);
      emit("calibration_report.json", json_text);
      break;
    }
    case Experiment::Draw: {
      const SimulatedMeta sim = simulate_meta(cfg.dgp, cfg.seed, cfg.degenerate);
      json_text = to_json(sim.dataset) + "\n";
      text = to_csv(sim.dataset);
      emit("draw.csv", text);
      break;
    }
  }
  if (output == Output::Json) {
    out << json_text;
  } else {
    out << text;
    for (const auto& p : written) out << "wrote " << p.string() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- compare

int cmd_compare(const std::string& dir, const CommonFlags& f, const std::string& measures_text,
                const std::string& records, std::ostream& out) {
  std::vector<Measure> measures;
  std::size_t start = 0;
  while (true) {
    const auto comma = measures_text.find(',', start);
    measures.push_back(parse_measure(measures_text.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  CompareConfig cfg;
  cfg.ci_level = checked_level(f.ci_level);
  cfg.correction = parse_correction(f.correction);
  const Output output = parse_output(f.output);
  require_output(output, {Output::Text, Output::Json, Output::Csv}, "compare");

  const BatchResult result = compare_batch(dir, measures, cfg);
  if (!records.empty()) write_text_file(records, records_to_csv(result));
  switch (output) {
    case Output::Json: out << batch_to_json(result); break;
    case Output::Csv: out << records_to_csv(result); break;
    default: out << format_summary_table(result); break;
  }
  return 0;
}

// ---------------------------------------------------------------- forest

int cmd_forest(const std::string& input, const CommonFlags& f, const std::string& file, std::ostream& out) {
  const Measure m = parse_measure(f.measure);
  const auto models = parse_models(f.model);
  ForestOptions opt;
  opt.weights = parse_weight_scheme(f.weights);
  opt.ci_level = checked_level(f.ci_level);
  opt.correction = parse_correction(f.correction);
  const Output output = parse_output(f.output);
  require_output(output, {Output::Text, Output::Svg}, "forest");

  const ForestPlot plot = build_forest(load_dataset(input), m, models, opt);
  const std::string rendered = output == Output::Svg ? render_forest_svg(plot) : render_forest_text(plot);
  if (file.empty()) {
    out << rendered;
  } else {
    write_text_file(file, rendered);
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Classical and causal meta-analysis of two-arm binary-outcome studies", "cmeta"};
  app.require_subcommand(1);

  CommonFlags analyze_flags, forest_flags, compare_flags, simulate_flags;
  std::string analyze_input, forest_input, compare_dir, forest_file, compare_records;
  std::string variance = "auto";
  int bootstrap = 2000;
  std::string compare_measures = "rd,rr,or";
  SimulateFlags sim;

  auto* analyze = app.add_subcommand("analyze", "Per-study effects and pooled estimates for one dataset");
  analyze->add_option("input", analyze_input, "CSV or JSON dataset")->required();
  add_common(analyze, analyze_flags, true);
  analyze->add_option("--variance", variance, "Causal variance: auto, pooled or bootstrap")->capture_default_str();
  analyze->add_option("--bootstrap-replicates", bootstrap, "Bootstrap replicates")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "Run a simulation experiment and write its report");
  simulate->add_option("--experiment", sim.experiment, "mismatch, calibrate or draw");
  simulate->add_option("--config", sim.config, "key = value configuration file");
  simulate->add_option("--replications", sim.replications, "Number of replications");
  simulate->add_option("--set", sim.settings, "Override a configuration key (key=value)");
  simulate->add_option("--out-dir", sim.out_dir, "Directory for report files (default $CMETA_OUTPUT_DIR or .)");
  simulate->add_option("--seed", simulate_flags.seed, "Random seed");
  simulate->add_option("--correction", simulate_flags.correction, "Zero-cell handling: reject or haldane");
  simulate->add_option("--ci-level", simulate_flags.ci_level, "Confidence level");
  simulate->add_option("--output", simulate_flags.output, "text or json")->capture_default_str();

  auto* compare = app.add_subcommand("compare", "Random effects against causal estimates over a directory of datasets");
  compare->add_option("dir", compare_dir, "Directory of CSV or JSON datasets")->required();
  compare->add_option("--measure", compare_measures, "Comma-separated measures")->capture_default_str();
  compare->add_option("--ci-level", compare_flags.ci_level, "Confidence level")->capture_default_str();
  compare->add_option("--correction", compare_flags.correction, "Zero-cell handling")->capture_default_str();
  compare->add_option("--output", compare_flags.output, "text, json or csv")->capture_default_str();
  compare->add_option("--records", compare_records, "Also write per-dataset records as CSV to this file");

  auto* forest = app.add_subcommand("forest", "Forest plot of study and pooled estimates");
  forest->add_option("input", forest_input, "CSV or JSON dataset")->required();
  add_common(forest, forest_flags, true);
  forest->add_option("--file", forest_file, "Write the plot here instead of standard output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (analyze->parsed()) return cmd_analyze(analyze_input, analyze_flags, variance, bootstrap, out);
    if (simulate->parsed()) return cmd_simulate(simulate_flags, sim, *simulate, out);
    if (compare->parsed()) return cmd_compare(compare_dir, compare_flags, compare_measures, compare_records, out);
    if (forest->parsed()) return cmd_forest(forest_input, forest_flags, forest_file, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace cmeta::cli
