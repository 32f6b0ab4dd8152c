#include "cmeta/sim_config.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace cmeta {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view what) {
  throw Error(ErrorCode::ConfigError,
              std::string(key) + ": " + std::string(what) + " (got '" + std::string(value) + "')");
}

double to_real(std::string_view key, std::string_view text) {
  text = trim(text);
  double v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || p != text.data() + text.size() || !std::isfinite(v))
    bad(key, text, "expected a real number");
  return v;
}

template <typename Int>
Int to_integer(std::string_view key, std::string_view text) {
  text = trim(text);
  Int v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || p != text.data() + text.size()) bad(key, text, "expected an integer");
  return v;
}

std::vector<std::string_view> split(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    parts.push_back(trim(text.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return parts;
}

Eigen::VectorXd to_vector(std::string_view key, std::string_view text) {
  const auto parts = split(text);
  Eigen::VectorXd v(Eigen::Index(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v(Eigen::Index(i)) = to_real(key, parts[i]);
  return v;
}

Eigen::Vector2d to_pair(std::string_view key, std::string_view text) {
  const Eigen::VectorXd v = to_vector(key, text);
  if (v.size() != 2) bad(key, text, "expected two comma-separated reals");
  return v;
}

}  // namespace

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::Mismatch: return "mismatch";
    case Experiment::Calibrate: return "calibrate";
    case Experiment::Draw: return "draw";
  }
  return "?";
}

Experiment parse_experiment(std::string_view text) {
  if (text == "mismatch") return Experiment::Mismatch;
  if (text == "calibrate") return Experiment::Calibrate;
  if (text == "draw") return Experiment::Draw;
  throw Error(ErrorCode::ConfigError, "unknown experiment '" + std::string(text) + "'");
}

std::string_view to_string(DegeneratePolicy p) { return p == DegeneratePolicy::Resample ? "resample" : "fail"; }

void SimulationConfig::validate() const {
  if (replications < 1) throw Error(ErrorCode::ConfigError, "replications must be positive");
  if (!(ci_level > 0 && ci_level < 1)) throw Error(ErrorCode::ConfigError, "ci_level must lie in (0, 1)");
  switch (experiment) {
    case Experiment::Mismatch:
    case Experiment::Draw: dgp.validate(); break;
    case Experiment::Calibrate:
      rates.validate();
      if (measures.empty()) throw Error(ErrorCode::ConfigError, "measures must not be empty");
      if (replications < 1000) throw Error(ErrorCode::ConfigError, "calibration needs at least 1000 replications");
      break;
  }
}

void apply_sim_setting(SimulationConfig& cfg, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "experiment") {
    cfg.experiment = parse_experiment(value);
  } else if (key == "replications") {
    cfg.replications = to_integer<int>(key, value);
  } else if (key == "seed") {
    cfg.seed = to_integer<std::uint64_t>(key, value);
  } else if (key == "correction") {
    cfg.correction = parse_correction(value);
  } else if (key == "degenerate") {
    if (value == "resample") cfg.degenerate = DegeneratePolicy::Resample;
    else if (value == "fail") cfg.degenerate = DegeneratePolicy::Fail;
    else bad(key, value, "expected resample or fail");
  } else if (key == "ci_level") {
    cfg.ci_level = to_real(key, value);
  } else if (key == "n") {
    cfg.dgp.n = cfg.rates.n = to_integer<Count>(key, value);
  } else if (key == "m1") {
    cfg.dgp.m1 = to_pair(key, value);
  } else if (key == "m2") {
    cfg.dgp.m2 = to_pair(key, value);
  } else if (key == "beta1") {
    cfg.dgp.beta1 = to_pair(key, value);
  } else if (key == "beta0") {
    cfg.dgp.beta0 = to_pair(key, value);
  } else if (key == "eta") {
    cfg.dgp.eta = to_real(key, value);
  } else if (key == "p_study") {
    cfg.dgp.p_study = to_real(key, value);
  } else if (key == "p_treat") {
    cfg.dgp.p_treat = to_real(key, value);
  } else if (key == "study_prob") {
    cfg.rates.study_prob = to_vector(key, value);
  } else if (key == "treat_prob") {
    cfg.rates.treat_prob = to_vector(key, value);
  } else if (key == "psi_treated") {
    cfg.rates.psi_treated = to_vector(key, value);
  } else if (key == "psi_control") {
    cfg.rates.psi_control = to_vector(key, value);
  } else if (key == "measures") {
    cfg.measures.clear();
    for (auto part : split(value)) cfg.measures.push_back(parse_measure(part));
  } else {
    throw Error(ErrorCode::ConfigError, "unknown key '" + std::string(key) + "'");
  }
}

SimulationConfig parse_sim_config(std::string_view text) {
  SimulationConfig cfg;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw Error(ErrorCode::ConfigError, where + "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    if (!seen.insert(std::string(key)).second)
      throw Error(ErrorCode::ConfigError, where + "key '" + std::string(key) + "' given twice");
    try {
      apply_sim_setting(cfg, key, line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(e.code(), where + e.detail());
    }
  }
  return cfg;
}

namespace {

nlohmann::json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string g4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

}  // namespace

std::string mismatch_report_json(const MismatchReport& report, const SimulationConfig& cfg, int indent) {
  using nlohmann::json;
  json j;
  j["experiment"] = "mismatch";
  j["replications"] = report.replications;
  j["seed"] = report.seed;
  j["dgp"] = {{"m1", vec(cfg.dgp.m1)},       {"m2", vec(cfg.dgp.m2)},         {"eta", cfg.dgp.eta},
              {"beta1", vec(cfg.dgp.beta1)}, {"beta0", vec(cfg.dgp.beta0)},   {"n", cfg.dgp.n},
              {"p_study", cfg.dgp.p_study},  {"p_treat", cfg.dgp.p_treat}};
  j["correction"] = to_string(cfg.correction);
  j["degenerate_draws"] = {{"policy", to_string(cfg.degenerate)},
                           {"resamples", report.resamples},
                           {"note", "draws with an empty arm are replaced by a fresh draw; this policy is an assumption"}};
  j["truth"] = json::object();
  for (const auto& [m, v] : report.truth) j["truth"][std::string(to_string(m))] = v;
  j["medians"] = json::array();
  for (const auto& s : report.series)
    j["medians"].push_back({{"method", to_string(s.method)}, {"measure", to_string(s.measure)}, {"median", s.median}});
  j["sign_consistent"] = report.sign_consistent;
  return j.dump(indent) + "\n";
}

std::string mismatch_report_text(const MismatchReport& report) {
  std::ostringstream out;
  out << "mismatch experiment: " << report.replications << " replications, seed " << report.seed << ", "
      << report.resamples << " degenerate draws resampled\n\n";
  out << "measure      truth         fe         re     causal   (medians)\n";
  for (const auto& [m, truth] : report.truth) {
    out << pad(std::string(to_string(m)), 7) << pad(g4(truth), 11);
    for (Method method : {Method::FixedEffects, Method::RandomEffects, Method::Causal})
      out << pad(g4(report.get(method, m).median), 11);
    out << '\n';
  }
  out << "\ncausal RD, log RR and log OR share a sign in " << report.sign_consistent << " of " << report.replications
      << " replications\n";
  return out.str();
}

std::string mismatch_boxplot_csv(const MismatchReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "replication,method,measure,value\n";
  for (const auto& s : report.series)
    for (std::size_t r = 0; r < s.values.size(); ++r)
      out << r << ',' << to_string(s.method) << ',' << to_string(s.measure) << ',' << s.values[r] << '\n';
  return out.str();
}

std::string calibration_report_json(const std::vector<CalibrationReport>& reports, const SimulationConfig& cfg,
                                    int indent) {
  using nlohmann::json;
  json j;
  j["experiment"] = "calibrate";
  j["replications"] = cfg.replications;
  j["seed"] = cfg.seed;
  j["ci_level"] = cfg.ci_level;
  j["rates"] = {{"study_prob", vec(cfg.rates.study_prob)},
                {"treat_prob", vec(cfg.rates.treat_prob)},
                {"psi_treated", vec(cfg.rates.psi_treated)},
                {"psi_control", vec(cfg.rates.psi_control)},
                {"n", cfg.rates.n}};
  j["results"] = json::array();
  for (const auto& r : reports) {
    j["results"].push_back({{"measure", to_string(r.measure)},
                            {"replications", r.replications},
                            {"skipped", r.skipped},
                            {"true_value", r.true_value},
                            {"mean_point", r.mean_point},
                            {"point_se", r.point_se},
                            {"empirical_variance", r.empirical_variance},
                            {"mean_sigma2", r.mean_sigma2},
                            {"ratio", r.ratio},
                            {"coverage", r.coverage},
                            {"resamples", r.resamples}});
  }
  return j.dump(indent) + "\n";
}

std::string calibration_report_text(const std::vector<CalibrationReport>& reports) {
  std::ostringstream out;
  out << "measure      truth  mean est.  emp. var  mean s2    ratio  coverage\n";
  for (const auto& r : reports) {
    out << pad(std::string(to_string(r.measure)), 7) << pad(g4(r.true_value), 11) << pad(g4(r.mean_point), 11)
        << pad(g4(r.empirical_variance), 10) << pad(g4(r.mean_sigma2), 9) << pad(g4(r.ratio), 9)
        << pad(g4(r.coverage), 10) << '\n';
  }
  return out.str();
}

}  // namespace cmeta
