#include <doctest.h>

#include "cli.hpp"
#include "cmeta/forest.hpp"
#include "cmeta/io.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace cmeta;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cmeta");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / "cmeta_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string file(const std::string& name, const std::string& content) const {
    write_text_file(dir / name, content);
    return (dir / name).string();
  }
};

const char* kHeader = "label,n11,n10,n01,n00\n";

int count_lines(const std::string& s, const std::string& needle) {
  int n = 0;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);)
    if (line.rfind(needle, 0) == 0) ++n;
  return n;
}

}  // namespace

TEST_CASE("analyze reports every model by default") {
  Workspace ws;
  const auto path = ws.file("data.csv", std::string(kHeader) + "s1,10,10,5,15\ns2,30,70,40,60\n");
  const Run r = invoke({"analyze", path, "--measure", "rr", "--output", "json"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  REQUIRE(j["pooled"].size() == 3);
  CHECK(j["pooled"][0]["method"] == "fe");
  CHECK(j["pooled"][1]["method"] == "re");
  CHECK(j["pooled"][2]["method"] == "causal");
  CHECK(j["pooled"][1]["point"].get<double>() == doctest::Approx(1.1278569154466638).epsilon(1e-12));
  CHECK(j["pooled"][2]["point"].get<double>() == doctest::Approx(0.8888888888888887).epsilon(1e-12));
  CHECK(j["pooled"][1]["tau2"].is_number());
  CHECK(j["pooled"][0]["tau2"].is_null());
  CHECK(j["studies"][0]["theta"].get<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const Run text = invoke({"analyze", path, "--measure", "rr"});
  REQUIRE(text.code == 0);
  CHECK(count_lines(text.out, "fe ") == 1);
  CHECK(count_lines(text.out, "re ") == 1);
  CHECK(count_lines(text.out, "causal ") == 1);
  CHECK(text.out.find("1.128") != std::string::npos);  // four significant digits

  const Run csv = invoke({"analyze", path, "--output", "csv", "--model", "causal"});
  REQUIRE(csv.code == 0);
  CHECK(count_lines(csv.out, "study,") == 2);
  CHECK(count_lines(csv.out, "pooled,causal") == 1);
}

TEST_CASE("custom weights of the wrong length exit with a validation error") {
  Workspace ws;
  const auto path = ws.file("three.csv", std::string(kHeader) + "a,1,2,3,4\nb,5,6,7,8\nc,9,10,11,12\n");
  const Run r = invoke({"analyze", path, "--model", "causal", "--weights", "custom:0.3,0.7"});
  CHECK(r.code == 2);
  CHECK(r.err.find("WeightLengthMismatch") != std::string::npos);
}

TEST_CASE("single-study random effects carries the warning and fixed-effects values") {
  Workspace ws;
  const auto path = ws.file("single_study.csv", std::string(kHeader) + "only,10,10,5,15\n");
  const Run re = invoke({"analyze", path, "--model", "re", "--measure", "rr", "--output", "json"});
  const Run fe = invoke({"analyze", path, "--model", "fe", "--measure", "rr", "--output", "json"});
  REQUIRE(re.code == 0);
  REQUIRE(fe.code == 0);
  const json a = json::parse(re.out)["pooled"][0], b = json::parse(fe.out)["pooled"][0];
  CHECK(a["point"] == b["point"]);
  CHECK(a["ci"] == b["ci"]);
  CHECK(a["variance"] == b["variance"]);
  CHECK(a["tau2"].get<double>() == 0.0);
  REQUIRE(a["warnings"].size() == 1);
  CHECK(a["point"].get<double>() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(a["ci"][0].get<double>() == doctest::Approx(0.8324556265274535).epsilon(1e-13));
  CHECK(a["ci"][1].get<double>() == doctest::Approx(4.805060921608274).epsilon(1e-13));

  const std::string golden = read_text_file(fs::path(CMETA_TEST_DATA) / "single_study_re.txt");
  const Run text = invoke({"analyze", path, "--model", "re", "--measure", "rr"});
  CHECK(text.out == golden);
}

TEST_CASE("malformed inputs honour the exit-code contract") {
  Workspace ws;
  const auto good = ws.file("good.csv", std::string(kHeader) + "a,10,10,5,15\nb,30,70,40,60\n");
  const std::vector<std::pair<std::string, std::string>> bad_files = {
      {"header.csv", "study,a,b,c,d\nx,1,1,1,1\n"},
      {"short.csv", std::string(kHeader) + "a,1,2,3\n"},
      {"long.csv", std::string(kHeader) + "a,1,2,3,4,5\n"},
      {"negative.csv", std::string(kHeader) + "a,-1,2,3,4\n"},
      {"fraction.csv", std::string(kHeader) + "a,1.5,2,3,4\n"},
      {"text.csv", std::string(kHeader) + "a,one,2,3,4\n"},
      {"empty_arm.csv", std::string(kHeader) + "a,0,0,3,4\n"},
      {"duplicate.csv", std::string(kHeader) + "a,1,2,3,4\na,1,2,3,4\n"},
      {"no_rows.csv", kHeader},
      {"empty.csv", ""},
      {"quote.csv", std::string(kHeader) + "\"a,1,2,3,4\n"},
      {"bad.json", "{\"studies\": [ {\"label\": \"a\"} ]}"},
      {"garbage.json", "{{{"},
      {"overflow.csv", std::string(kHeader) + "a,99999999999999999999999,2,3,4\n"},
  };
  for (const auto& [name, content] : bad_files) {
    const auto path = ws.file(name, content);
    for (const char* cmd : {"analyze", "forest"}) {
      CAPTURE(name);
      CAPTURE(cmd);
      const Run r = invoke({cmd, path});
      CHECK(r.code == 2);
      CHECK_FALSE(r.err.empty());
      CHECK(r.out.empty());
    }
  }
  const std::vector<std::vector<std::string>> bad_args = {
      {"analyze", (ws.dir / "missing.csv").string()},
      {"analyze", good, "--measure", "nnt"},
      {"analyze", good, "--model", "bayes"},
      {"analyze", good, "--weights", "custom:0.5,0.6"},
      {"analyze", good, "--weights", "custom:x,y"},
      {"analyze", good, "--ci-level", "1.5"},
      {"analyze", good, "--ci-level", "abc"},
      {"analyze", good, "--correction", "none"},
      {"analyze", good, "--output", "svg"},
      {"analyze", good, "--variance", "magic"},
      {"analyze", good, "--unknown-flag"},
      {"analyze"},
      {"frobnicate"},
      {},
      {"forest", good, "--output", "json"},
      {"compare", (ws.dir / "nowhere").string()},
      {"simulate", "--replications", "0", "--out-dir", ws.dir.string()},
      {"simulate", "--experiment", "teleport", "--out-dir", ws.dir.string()},
      {"simulate", "--set", "colour=red", "--out-dir", ws.dir.string()},
      {"simulate", "--set", "eta", "--out-dir", ws.dir.string()},
      {"simulate", "--set", "eta=-1", "--out-dir", ws.dir.string()},
      {"simulate", "--config", (ws.dir / "missing.cfg").string(), "--out-dir", ws.dir.string()},
      {"simulate", "--experiment", "calibrate", "--replications", "10", "--out-dir", ws.dir.string()},
      {"simulate", "--output", "csv", "--out-dir", ws.dir.string()},
  };
  for (const auto& args : bad_args) {
    std::string joined;
    for (const auto& a : args) joined += a + " ";
    CAPTURE(joined);
    const Run r = invoke(args);
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
  }
  // Reject policy on a zero cell
  const auto zero = ws.file("zero.csv", std::string(kHeader) + "a,0,10,5,5\n");
  CHECK(invoke({"analyze", zero, "--measure", "rr", "--correction", "reject"}).code == 2);
  CHECK(invoke({"analyze", zero, "--measure", "rr"}).code == 0);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("simulate writes deterministic reports") {
  Workspace ws;
  const std::string out1 = (ws.dir / "one").string(), out2 = (ws.dir / "two").string();
  const Run a = invoke({"simulate", "--replications", "20", "--seed", "5", "--out-dir", out1, "--output", "json"});
  const Run b = invoke({"simulate", "--replications", "20", "--seed", "5", "--out-dir", out2, "--output", "json"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out == b.out);
  CHECK(read_text_file(fs::path(out1) / "mismatch_report.json") ==
        read_text_file(fs::path(out2) / "mismatch_report.json"));
  CHECK(read_text_file(fs::path(out1) / "mismatch_boxplot.csv") ==
        read_text_file(fs::path(out2) / "mismatch_boxplot.csv"));
  const json j = json::parse(a.out);
  CHECK(j["medians"].size() == 9);
  CHECK(j["replications"] == 20);

  // config file then flags; flags win
  const auto cfg = ws.file("run.cfg", "experiment = draw\nseed = 3\nn = 200\n");
  const Run d = invoke({"simulate", "--config", cfg, "--seed", "4", "--out-dir", out1});
  REQUIRE(d.code == 0);
  const auto drawn = parse_csv(read_text_file(fs::path(out1) / "draw.csv"), "d");
  CHECK(drawn.total() == 200);

  // the output directory defaults to the environment variable
  const std::string env_dir = (ws.dir / "env").string();
  ::setenv("CMETA_OUTPUT_DIR", env_dir.c_str(), 1);
  const Run e = invoke({"simulate", "--experiment", "draw"});
  ::unsetenv("CMETA_OUTPUT_DIR");
  REQUIRE(e.code == 0);
  CHECK(fs::exists(fs::path(env_dir) / "draw.csv"));
}

TEST_CASE("compare command") {
  Workspace ws;
  ws.file("x.csv", std::string(kHeader) + "s1,10,10,5,15\ns2,30,70,40,60\n");
  ws.file("y.csv", std::string(kHeader) + "s1,12,18,7,33\ns2,20,20,20,20\ns3,5,45,9,41\n");
  ws.file("z.csv", "garbage\n");
  const std::string records = (ws.dir / "records.out").string();
  const Run r = invoke({"compare", ws.dir.string(), "--records", records});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("CI overlap") != std::string::npos);
  CHECK(r.out.find("1 skipped") != std::string::npos);
  CHECK(count_lines(read_text_file(records), "x,") == 3);
  const Run j = invoke({"compare", ws.dir.string(), "--measure", "rd", "--output", "json"});
  REQUIRE(j.code == 0);
  CHECK(json::parse(j.out)["records"].size() == 2);
}

TEST_CASE("forest plots") {
  Workspace ws;
  const auto path = ws.file("two.csv", std::string(kHeader) + "s1,10,10,5,15\ns2,30,70,40,60\n");
  const Run text = invoke({"forest", path});
  REQUIRE(text.code == 0);
  CHECK(count_lines(text.out, "s1 ") == 1);
  CHECK(count_lines(text.out, "s2 ") == 1);
  CHECK(count_lines(text.out, "Fixed effects") == 1);
  CHECK(count_lines(text.out, "Random effects") == 1);
  CHECK(count_lines(text.out, "Causal") == 1);
  const Run one_model = invoke({"forest", path, "--model", "causal"});
  CHECK(count_lines(one_model.out, "Random effects") == 0);

  const Run svg1 = invoke({"forest", path, "--output", "svg", "--measure", "or"});
  const Run svg2 = invoke({"forest", path, "--output", "svg", "--measure", "or"});
  REQUIRE(svg1.code == 0);
  CHECK(svg1.out == svg2.out);
  CHECK(svg1.out.rfind("<svg", 0) == 0);
  CHECK(svg1.out.find("log scale") != std::string::npos);
  const std::string file = (ws.dir / "plot.svg").string();
  CHECK(invoke({"forest", path, "--output", "svg", "--measure", "or", "--file", file}).code == 0);
  CHECK(read_text_file(file) == svg1.out);

  const MetaDataset null{"null", {{"a", 5, 5, 5, 5}, {"b", 10, 30, 10, 30}}};
  const std::vector<Method> all{Method::FixedEffects, Method::RandomEffects, Method::Causal};
  for (Measure m : {Measure::RD, Measure::RR, Measure::OR}) {
    const ForestPlot plot = build_forest(null, m, all);
    REQUIRE(plot.rows.size() == 5);
    for (const auto& row : plot.rows) CHECK(row.point == doctest::Approx(plot.null_value).scale(1));
    const std::string strip = render_forest_text(plot);
    CHECK(strip.find('|') == std::string::npos);  // every marker sits on the null line
  }
}
