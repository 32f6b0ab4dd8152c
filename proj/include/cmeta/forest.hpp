#pragma once

#include "cmeta/causal.hpp"

#include <span>
#include <string>
#include <vector>

namespace cmeta {

struct ForestRow {
  std::string label;
  double point = 0.0;  // reporting scale
  double low = 0.0;
  double high = 0.0;
  bool pooled = false;
  Method method = Method::FixedEffects;  // meaningful for pooled rows only
};

struct ForestPlot {
  Measure measure = Measure::RD;
  double ci_level = 0.95;
  double null_value = 0.0;
  bool log_axis = false;
  std::vector<ForestRow> rows;  // studies in input order, then pooled rows in request order
  std::vector<std::string> warnings;
};

struct ForestOptions {
  double ci_level = 0.95;
  CorrectionPolicy correction = CorrectionPolicy::Haldane;
  WeightScheme weights = WeightScheme::pooled();
};

/// Per-study effects with Wald intervals and one pooled row per requested model.
ForestPlot build_forest(const MetaDataset& ds, Measure m, std::span<const Method> models,
                        const ForestOptions& opt = {});

/// Table of estimates with an ASCII strip per row; '|' marks the null value.
std::string render_forest_text(const ForestPlot& plot, int strip_width = 41);

/// Fixed 760-pixel-wide canvas; output depends only on the plot contents.
std::string render_forest_svg(const ForestPlot& plot);

}  // namespace cmeta
