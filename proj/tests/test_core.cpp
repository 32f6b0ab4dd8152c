#include <doctest.h>

#include "cmeta/contrast.hpp"
#include "cmeta/io.hpp"
#include "cmeta/stats.hpp"
#include "support.hpp"

#include <atomic>
#include <cmath>

using namespace cmeta;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected cmeta::Error");
  return ErrorCode::IoError;
}

MetaDataset one(StudyTable s) { return {"d", {s}}; }

}  // namespace

TEST_CASE("validate_dataset accepts a well formed table") {
  const MetaDataset ds = one({"a", 10, 10, 5, 15});
  CHECK(validate_dataset(ds).studies == ds.studies);
}

TEST_CASE("validate_dataset errors") {
  CHECK(code_of([] { validate_dataset(one({"a", 10, 0, 0, 0})); }) == ErrorCode::EmptyArm);
  CHECK(code_of([] { validate_dataset(one({"a", 0, 0, 3, 4})); }) == ErrorCode::EmptyArm);
  CHECK(code_of([] { validate_dataset(one({"a", -1, 2, 3, 4})); }) == ErrorCode::NegativeCount);
  CHECK(code_of([] { validate_dataset({"d", {}}); }) == ErrorCode::EmptyDataset);
  CHECK(code_of([] { validate_dataset({"d", {{"A", 1, 1, 1, 1}, {"A", 2, 2, 2, 2}}}); }) ==
        ErrorCode::DuplicateLabel);
}

TEST_CASE("dataset totals") {
  const MetaDataset ds{"d", {{"a", 10, 10, 5, 15}, {"b", 30, 70, 40, 60}}};
  CHECK(ds.size() == 2);
  CHECK(ds.total() == 240);
  CHECK(ds.studies[0].treated() == 20);
  CHECK(ds.studies[0].control() == 20);
  const CountMatrix c = count_matrix(ds);
  CHECK(c(1, 2) == 40.0);
}

TEST_CASE("measure names round trip") {
  for (Measure m : {Measure::RD, Measure::RR, Measure::LogRR, Measure::OR, Measure::LogOR})
    CHECK(parse_measure(to_string(m)) == m);
  CHECK(parse_measure("RR") == Measure::RR);
  CHECK(code_of([] { parse_measure("nnt"); }) == ErrorCode::ConfigError);
}

TEST_CASE("csv parsing") {
  const auto ds = parse_csv("\xEF\xBB\xBFlabel,n11,n10,n01,n00\r\n\"Smith, 2001\",10,10,5,15\r\nB,+1,2,3,4\n", "x");
  REQUIRE(ds.size() == 2);
  CHECK(ds.studies[0].label == "Smith, 2001");
  CHECK(ds.studies[1].n11 == 1);
  CHECK(ds.name == "x");

  const auto quoted = parse_csv("label,n11,n10,n01,n00\n\"two\nlines\",1,1,1,1\n", "q");
  CHECK(quoted.studies[0].label == "two\nlines");

  CHECK(code_of([] { parse_csv("label,a,b,c,d\n", "x"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_csv("label,n11,n10,n01,n00\nA,1.5,1,1,1\n", "x"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_csv("label,n11,n10,n01,n00\nA,1,1,1\n", "x"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_csv("label,n11,n10,n01,n00\n\"A,1,1,1,1\n", "x"); }) == ErrorCode::ParseError);
  try {
    parse_csv("label,n11,n10,n01,n00\nA,1,1,1,1\nB,x,1,1,1\n", "x");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  // negatives parse and are caught by validation
  CHECK(code_of([] { validate_dataset(parse_csv("label,n11,n10,n01,n00\nA,-1,1,1,1\n", "x")); }) ==
        ErrorCode::NegativeCount);
}

TEST_CASE("json parsing") {
  const auto ds = parse_json(R"({"name":"j","studies":[{"label":"a","n11":1,"n10":2,"n01":3,"n00":4}]})");
  CHECK(ds.name == "j");
  CHECK(ds.studies[0] == StudyTable{"a", 1, 2, 3, 4});
  const auto arr = parse_json(R"([{"label":"a","n11":1,"n10":2,"n01":3,"n00":4}])", "arr");
  CHECK(arr.name == "arr");
  CHECK(code_of([] { parse_json(R"([{"label":"a","n11":1.5,"n10":2,"n01":3,"n00":4}])"); }) ==
        ErrorCode::ParseError);
  CHECK(code_of([] { parse_json(R"([{"label":"a","n11":1,"n10":2,"n01":3,"n00":4,"x":1}])"); }) ==
        ErrorCode::ParseError);
  CHECK(code_of([] { parse_json("{"); }) == ErrorCode::ParseError);
}

TEST_CASE("property: serialisation round trips") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    MetaDataset ds = testing::random_dataset(rng, 10, 0, 100000);
    ds.name = "rt";
    if (t % 3 == 0) ds.studies[0].label = "needs \"quoting\", here";
    CHECK(parse_csv(to_csv(ds), "rt").studies == ds.studies);
    const auto back = parse_json(to_json(ds));
    CHECK(back.studies == ds.studies);
    CHECK(back.name == ds.name);
  }
}

TEST_CASE("contrast values") {
  CHECK(contrast_value(Measure::RD, 0.5, 0.25) == 0.25);
  CHECK(contrast_value(Measure::RR, 0.5, 0.25) == 2.0);
  CHECK(contrast_value(Measure::OR, 0.5, 0.25) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(contrast_value(Measure::LogRR, 0.5, 0.25) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(contrast_value(Measure::LogOR, 0.5, 0.25) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("property: null effect values") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1e-6, 1 - 1e-6);
  for (int t = 0; t < 1000; ++t) {
    const double p = u(rng);
    CHECK(contrast_value(Measure::RD, p, p) == 0.0);
    CHECK(contrast_value(Measure::RR, p, p) == 1.0);
    CHECK(contrast_value(Measure::OR, p, p) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(contrast_value(Measure::LogRR, p, p) == 0.0);
    CHECK(contrast_value(Measure::LogOR, p, p) == 0.0);
  }
}

TEST_CASE("property: gradients match central differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const double h = 1e-5;
  for (Measure m : {Measure::RD, Measure::RR, Measure::LogRR, Measure::OR, Measure::LogOR}) {
    const ContrastFunction f{m};
    for (int t = 0; t < 100; ++t) {
      const double x = u(rng), y = u(rng);
      const Eigen::Vector2d g = f.gradient(x, y);
      const double dx = (f.value(x + h, y) - f.value(x - h, y)) / (2 * h);
      const double dy = (f.value(x, y + h) - f.value(x, y - h)) / (2 * h);
      CHECK(testing::relative_error(g(0), dx) < 1e-6);
      CHECK(testing::relative_error(g(1), dy) < 1e-6);
    }
  }
}

TEST_CASE("contrast domains") {
  CHECK(in_domain(Measure::RD, 0.0, 1.0));
  CHECK_FALSE(in_domain(Measure::RD, -0.1, 0.5));
  CHECK(in_domain(Measure::RR, 1.0, 0.5));
  CHECK_FALSE(in_domain(Measure::RR, 0.5, 0.0));
  CHECK_FALSE(in_domain(Measure::LogOR, 1.0, 0.5));
  CHECK(ContrastFunction{Measure::OR}.contains(0.3, 0.4));
}

TEST_CASE("normal quantiles") {
  CHECK(z_for_level(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1e-10, 1 - 1e-10);
  for (int t = 0; t < 1000; ++t) {
    const double p = u(rng);
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(code_of([] { z_for_level(1.0); }) == ErrorCode::ConfigError);
}

TEST_CASE("summary statistics") {
  const std::vector<double> xs{1, 2, 3, 4};
  CHECK(mean(xs) == 2.5);
  CHECK(sample_variance(xs) == doctest::Approx(5.0 / 3.0));
  CHECK(median(xs) == 2.5);
  CHECK(median({3, 1, 2}) == 2);
  CHECK(sample_variance(std::vector<double>{7}) == 0.0);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(100, [](std::size_t i) {
                    if (i == 37) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}

TEST_CASE("derive_seed is deterministic and spreads streams") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}
