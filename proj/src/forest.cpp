#include "cmeta/forest.hpp"

#include "cmeta/classical.hpp"
#include "cmeta/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace cmeta {

ForestPlot build_forest(const MetaDataset& ds, Measure m, std::span<const Method> models, const ForestOptions& opt) {
  validate_dataset(ds);
  ForestPlot plot;
  plot.measure = m;
  plot.ci_level = opt.ci_level;
  plot.null_value = null_value(m);
  plot.log_axis = reports_exponentiated(m);

  const double z = z_for_level(opt.ci_level);
  const auto effects = study_effects(ds, m, opt.correction);
  for (std::size_t k = 0; k < effects.size(); ++k) {
    const auto& e = effects[k];
    const double half = z * std::sqrt(e.sigma2_hat);
    ForestRow row{ds.studies[k].label, e.theta_hat, e.theta_hat - half, e.theta_hat + half, false,
                  Method::FixedEffects};
    if (plot.log_axis) {
      row.point = std::exp(row.point);
      row.low = std::exp(row.low);
      row.high = std::exp(row.high);
    }
    if (e.corrected) plot.warnings.push_back(row.label + ": continuity correction applied");
    plot.rows.push_back(row);
  }

  for (Method method : models) {
    PooledEstimate est;
    std::string label;
    switch (method) {
      case Method::FixedEffects:
        est = pool_fixed(effects, opt.ci_level);
        label = "Fixed effects";
        break;
      case Method::RandomEffects:
        est = pool_random(effects, TauMethod::DerSimonianLaird, opt.ci_level);
        label = "Random effects";
        break;
      case Method::Causal: {
        CausalOptions co;
        co.ci_level = opt.ci_level;
        co.correction = opt.correction;
        est = pool_causal(ds, m, opt.weights, co);
        label = "Causal (" + to_string(opt.weights) + ")";
        break;
      }
    }
    for (const auto& w : est.warnings) plot.warnings.push_back(std::string(to_string(method)) + ": " + w);
    plot.rows.push_back({label, est.point, est.ci_low, est.ci_high, true, method});
  }
  return plot;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;

  double map(double v) const {
    const double t = log ? std::log(v) : v;
    return (t - lo) / (hi - lo);
  }
};

Axis make_axis(const ForestPlot& plot) {
  Axis a;
  a.log = plot.log_axis;
  auto tr = [&](double v) { return a.log ? std::log(v) : v; };
  double lo = tr(plot.null_value), hi = lo;
  for (const auto& r : plot.rows) {
    for (double v : {r.low, r.high, r.point}) {
      if (!(a.log ? v > 0 : true) || !std::isfinite(tr(v))) continue;
      lo = std::min(lo, tr(v));
      hi = std::max(hi, tr(v));
    }
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  a.lo = lo - pad;
  a.hi = hi + pad;
  return a;
}

}  // namespace

std::string render_forest_text(const ForestPlot& plot, int strip_width) {
  strip_width = std::max(strip_width, 11);
  const Axis axis = make_axis(plot);
  auto col = [&](double v) {
    const double t = std::clamp(axis.map(v), 0.0, 1.0);
    return int(std::lround(t * (strip_width - 1)));
  };

  std::size_t label_w = 5;
  for (const auto& r : plot.rows) label_w = std::max(label_w, r.label.size());
  std::ostringstream out;
  std::string measure(to_string(plot.measure));
  for (auto& c : measure) c = char(std::toupper(static_cast<unsigned char>(c)));
  char level[16];
  std::snprintf(level, sizeof level, "%g%%", 100 * plot.ci_level);

  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s += std::string(w - s.size(), ' ');
    return s;
  };
  out << pad("Study", label_w) << "  " << pad(measure, 10) << "  " << pad(std::string(level) + " CI", 22) << '\n';
  bool divider = false;
  for (const auto& r : plot.rows) {
    if (r.pooled && !divider) {
      out << std::string(label_w + 36 + std::size_t(strip_width), '-') << '\n';
      divider = true;
    }
    std::string strip(std::size_t(strip_width), ' ');
    const int a = col(r.low), b = col(r.high), p = col(r.point);
    for (int i = a; i <= b; ++i) strip[std::size_t(i)] = '-';
    strip[std::size_t(col(plot.null_value))] = '|';
    strip[std::size_t(a)] = '[';
    strip[std::size_t(b)] = ']';
    strip[std::size_t(p)] = r.pooled ? '<' : '*';
    if (r.pooled && p + 1 < strip_width && p + 1 <= b) strip[std::size_t(p + 1)] = '>';
    out << pad(r.label, label_w) << "  " << pad(num(r.point), 10) << "  "
        << pad("[" + num(r.low) + ", " + num(r.high) + "]", 22) << "  " << strip << '\n';
  }
  out << pad("", label_w + 36) << pad(num(axis.log ? std::exp(axis.lo) : axis.lo), std::size_t(strip_width / 2))
      << num(axis.log ? std::exp(axis.hi) : axis.hi) << '\n';
  for (const auto& w : plot.warnings) out << "warning: " << w << '\n';
  return out.str();
}

std::string render_forest_svg(const ForestPlot& plot) {
  constexpr double width = 760, left = 200, right = 560, row_h = 24, top = 40;
  const Axis axis = make_axis(plot);
  const double height = top + row_h * double(plot.rows.size() + 1) + 50;
  auto x = [&](double v) { return left + std::clamp(axis.map(v), 0.0, 1.0) * (right - left); };
  auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  auto esc = [](const std::string& s) {
    std::string o;
    for (char c : s) {
      switch (c) {
        case '&': o += "&amp;"; break;
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '"': o += "&quot;"; break;
        default: o += c;
      }
    }
    return o;
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f(width) << "\" height=\"" << f(height)
      << "\" viewBox=\"0 0 " << f(width) << ' ' << f(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << f(width) << "\" height=\"" << f(height) << "\" fill=\"white\"/>\n";
  std::string measure(to_string(plot.measure));
  for (auto& c : measure) c = char(std::toupper(static_cast<unsigned char>(c)));
  out << "<text x=\"10\" y=\"20\" font-weight=\"bold\">Study</text>\n";
  out << "<text x=\"" << f(right + 20) << "\" y=\"20\" font-weight=\"bold\">" << measure << " [" << f(100 * plot.ci_level)
      << "% CI]</text>\n";

  const double y_end = top + row_h * double(plot.rows.size());
  out << "<line x1=\"" << f(x(plot.null_value)) << "\" y1=\"" << f(top - 10) << "\" x2=\"" << f(x(plot.null_value))
      << "\" y2=\"" << f(y_end) << "\" stroke=\"grey\" stroke-dasharray=\"4 3\"/>\n";

  for (std::size_t i = 0; i < plot.rows.size(); ++i) {
    const auto& r = plot.rows[i];
    const double y = top + row_h * double(i) + row_h / 2;
    out << "<text x=\"10\" y=\"" << f(y + 4) << "\"" << (r.pooled ? " font-weight=\"bold\"" : "") << '>' << esc(r.label)
        << "</text>\n";
    if (r.pooled) {
      const double h = 7;
      out << "<polygon points=\"" << f(x(r.low)) << ',' << f(y) << ' ' << f(x(r.point)) << ',' << f(y - h) << ' '
          << f(x(r.high)) << ',' << f(y) << ' ' << f(x(r.point)) << ',' << f(y + h) << "\" fill=\"black\"/>\n";
    } else {
      out << "<line x1=\"" << f(x(r.low)) << "\" y1=\"" << f(y) << "\" x2=\"" << f(x(r.high)) << "\" y2=\"" << f(y)
          << "\" stroke=\"black\"/>\n";
      out << "<rect x=\"" << f(x(r.point) - 4) << "\" y=\"" << f(y - 4)
          << "\" width=\"8\" height=\"8\" fill=\"black\"/>\n";
    }
    out << "<text x=\"" << f(right + 20) << "\" y=\"" << f(y + 4) << "\">" << num(r.point) << " [" << num(r.low)
        << ", " << num(r.high) << "]</text>\n";
  }

  const double ay = y_end + 10;
  out << "<line x1=\"" << f(left) << "\" y1=\"" << f(ay) << "\" x2=\"" << f(right) << "\" y2=\"" << f(ay)
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double u = axis.lo + (axis.hi - axis.lo) * t / 4.0;
    const double v = axis.log ? std::exp(u) : u;
    const double px = left + (right - left) * t / 4.0;
    out << "<line x1=\"" << f(px) << "\" y1=\"" << f(ay) << "\" x2=\"" << f(px) << "\" y2=\"" << f(ay + 5)
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << f(px) << "\" y=\"" << f(ay + 18) << "\" text-anchor=\"middle\">" << num(v) << "</text>\n";
  }
  if (axis.log)
    out << "<text x=\"" << f((left + right) / 2) << "\" y=\"" << f(ay + 34)
        << "\" text-anchor=\"middle\">log scale</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace cmeta
