#include "fairaudit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

namespace fairaudit {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json opt_num(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json gap_value(const GapResult& gap) { return opt_num(gap.value); }

}  // namespace

std::string run_id_for(const nlohmann::ordered_json& config_echo,
                       const Provenance& provenance) {
  const std::string payload = config_echo.dump() + "\n" + provenance.source +
                              "\n" + std::to_string(provenance.rows);
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : payload) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::ordered_json build_report(
    const AuditCohort& cohort, const AuditConfig& config,
    const FairnessPanel& panel, const CounterfactualResult* counterfactual,
    const std::vector<std::string>& pipeline_warnings) {
  if (counterfactual) {
    if (counterfactual->config.seed != config.seed ||
        counterfactual->axis_name != config.counterfactual.axis) {
      throw ValidationError(
          "report: counterfactual results do not match this run's config");
    }
  }

  ordered_json report;
  report["schema_version"] = kReportSchemaVersion;
  report["tool"] = kToolVersion;
  const ordered_json echo = config.echo();
  report["run_id"] = run_id_for(echo, cohort.provenance);
  report["config"] = echo;

  auto& summary = report["cohort"];
  summary["source"] = cohort.provenance.source;
  summary["records"] = cohort.size();
  summary["axes"] = ordered_json::array();
  for (const auto& axis : panel.axes) {
    ordered_json a;
    a["axis"] = axis.axis.name;
    a["subgroups"] = ordered_json::array();
    for (const auto& g : axis.confusion.groups) {
      ordered_json s;
      s["subgroup"] = g.key.label();
      s["masked"] = false;
      s["n"] = g.n;
      a["subgroups"].push_back(std::move(s));
    }
    for (const auto& key : axis.masked) {
      ordered_json s;
      s["subgroup"] = key.label();
      s["masked"] = true;  // no count for masked cells, by policy
      a["subgroups"].push_back(std::move(s));
    }
    summary["axes"].push_back(std::move(a));
  }

  auto& perf = report["performance"];
  perf["accuracy"] = panel.accuracy;
  perf["auroc"] = opt_num(panel.auroc);

  report["observational"] = ordered_json::array();
  for (const auto& axis : panel.axes) {
    ordered_json a;
    a["axis"] = axis.axis.name;
    auto& gaps = a["gaps"];
    gaps["dp_gap"] = gap_value(axis.gaps.dp);
    gaps["eo_fpr_gap"] = gap_value(axis.gaps.eo_fpr);
    gaps["eod_gap"] = gap_value(axis.gaps.eod);
    if (axis.gaps.eo_max) gaps["eo_max"] = gap_value(*axis.gaps.eo_max);
    a["groups"] = ordered_json::array();
    for (size_t i = 0; i < axis.confusion.groups.size(); ++i) {
      const auto& g = axis.confusion.groups[i];
      ordered_json s;
      s["subgroup"] = g.key.label();
      s["n"] = g.n;
      s["ppr"] = g.ppr;
      s["accuracy"] = g.accuracy;
      s["tpr"] = opt_num(g.tpr);
      s["fpr"] = opt_num(g.fpr);
      s["fnr"] = opt_num(g.fnr);
      s["auroc"] = opt_num(axis.group_auroc[i]);
      a["groups"].push_back(std::move(s));
    }
    a["masked"] = ordered_json::array();
    for (const auto& key : axis.masked) a["masked"].push_back(key.label());
    report["observational"].push_back(std::move(a));
  }

  if (counterfactual) {
    const auto& cf = *counterfactual;
    ordered_json c;
    c["axis"] = cf.axis_name;
    c["method"] = method_name(cf.config.method);
    c["epsilon"] = cf.config.epsilon;
    c["rates"] = ordered_json::array();
    for (const auto& rates : cf.rates) {
      ordered_json r;
      r["method"] = method_name(rates.method);
      r["side"] = side_name(rates.side);
      r["defined"] = rates.defined;
      r["estimates"] = ordered_json::array();
      for (const auto& est : rates.estimates) {
        ordered_json e;
        e["subgroup"] = est.key.label();
        e["point"] = est.point;
        e["lo"] = est.lo;
        e["hi"] = est.hi;
        e["skipped_replicates"] = est.skipped_replicates;
        e["ci_widened"] = est.ci_widened;
        e["fit_warning"] = est.fit_warning;
        r["estimates"].push_back(std::move(e));
      }
      r["excluded"] = ordered_json::array();
      for (const auto& key : rates.excluded) r["excluded"].push_back(key.label());
      c["rates"].push_back(std::move(r));
    }
    c["u_values"] = ordered_json::array();
    for (const auto& uset : cf.u_value_sets) {
      ordered_json u;
      u["method"] = method_name(uset.method);
      u["epsilon"] = uset.epsilon;
      auto emit_side = [](const std::optional<UValueSide>& side) {
        if (!side) return ordered_json(nullptr);
        ordered_json s;
        s["mean_pairwise"] = side->mean_pairwise;
        s["max_pairwise"] = side->max_pairwise;
        s["sd"] = side->sd;
        s["u_avg"] = side->u_avg;
        s["u_max"] = side->u_max;
        s["u_var"] = side->u_var;
        return s;
      };
      u["positive"] = emit_side(uset.positive);
      u["negative"] = emit_side(uset.negative);
      u["notes"] = uset.log;
      c["u_values"].push_back(std::move(u));
    }
    c["nulls"] = ordered_json::array();
    const double alpha = (1.0 - cf.config.ci_level) / 2.0;
    for (const auto& metric : kNullMetrics) {
      const auto it = cf.nulls.find(metric);
      if (it == cf.nulls.end()) continue;
      const auto& dist = it->second;
      ordered_json d;
      d["metric"] = dist.metric;
      d["observed"] = opt_num(dist.observed);
      d["defined_replicates"] = static_cast<int64_t>(dist.replicates.size());
      d["undefined_replicates"] = dist.undefined_replicates;
      if (dist.replicates.empty()) {
        d["null_mean"] = nullptr;
        d["null_lo"] = nullptr;
        d["null_hi"] = nullptr;
      } else {
        std::vector<double> sorted = dist.replicates;
        std::sort(sorted.begin(), sorted.end());
        d["null_mean"] = mean_of(sorted);
        d["null_lo"] = quantile_type7(sorted, alpha);
        d["null_hi"] = quantile_type7(sorted, 1.0 - alpha);
      }
      d["quantile"] = opt_num(dist.quantile);
      d["p_two"] = opt_num(dist.p_two);
      c["nulls"].push_back(std::move(d));
    }
    c["ecdf"] = ordered_json::array();
    for (const auto& series : cf.ecdf) {
      ordered_json s;
      s["metric"] = series.metric;
      s["observed_source"] = series.observed_source;
      s["observed"] = series.observed;
      s["epsilon"] = series.epsilon;
      s["fraction_below_epsilon"] = series.fraction_below_epsilon;
      s["deltas"] = series.deltas;
      s["cum_fraction"] = series.cum_fraction;
      c["ecdf"].push_back(std::move(s));
    }
    report["counterfactual"] = std::move(c);
  } else {
    report["counterfactual"] = nullptr;
  }

  auto& warn = report["warnings"];
  warn = ordered_json::array();
  for (const auto& w : panel.warnings) warn.push_back(w);
  if (counterfactual) {
    for (const auto& w : counterfactual->warnings) warn.push_back(w);
  }
  for (const auto& w : pipeline_warnings) warn.push_back(w);
  return report;
}

void write_json(const nlohmann::ordered_json& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << report.dump(2) << "\n";
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

namespace {

std::string csv_cell(const nlohmann::json& v) {
  if (v.is_null()) return "";
  return format_fixed(v.get<double>(), 6);
}

void open_out(std::ofstream& out, const std::string& path) {
  out.open(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
}

}  // namespace

std::vector<std::string> write_csv_tables(const nlohmann::ordered_json& report,
                                          const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;

  const std::string cohort_name =
      report.at("config").at("name").get<std::string>();
  {
    const std::string path = dir + "/heatmap.csv";
    std::ofstream out;
    open_out(out, path);
    out << "cohort,axis,metric,value\n";
    for (const auto& axis : report.at("observational")) {
      const std::string axis_name = axis.at("axis").get<std::string>();
      for (const auto& [metric, value] : axis.at("gaps").items()) {
        out << cohort_name << "," << axis_name << "," << metric << ","
            << csv_cell(value) << "\n";
      }
    }
    if (!out) throw ValidationError("write failed for '" + path + "'");
    written.push_back(path);
  }

  const auto& cf = report.at("counterfactual");
  if (!cf.is_null() && cf.contains("ecdf") && !cf.at("ecdf").empty()) {
    const std::string path = dir + "/ecdf.csv";
    std::ofstream out;
    open_out(out, path);
    out << "metric,delta,cum_fraction\n";
    for (const auto& series : cf.at("ecdf")) {
      const std::string metric = series.at("metric").get<std::string>();
      const auto& deltas = series.at("deltas");
      const auto& cum = series.at("cum_fraction");
      for (size_t i = 0; i < deltas.size(); ++i) {
        out << metric << "," << format_fixed(deltas[i].get<double>(), 6) << ","
            << format_fixed(cum[i].get<double>(), 6) << "\n";
      }
    }
    if (!out) throw ValidationError("write failed for '" + path + "'");
    written.push_back(path);
  }
  return written;
}

namespace {

// Shared bits of the hand-rolled SVG emitter. Geometry is fixed so output
// is stable; every drawn value is also printed as a text label.

std::string svg_open(double width, double height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " +
         format_fixed(width, 0) + " " + format_fixed(height, 0) +
         "\" font-family=\"sans-serif\">\n";
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string heat_color(double v, double vmax) {
  // White to deep red ramp.
  const double t = vmax > 0.0 ? std::clamp(v / vmax, 0.0, 1.0) : 0.0;
  const int r = static_cast<int>(std::lround(247 + (178 - 247) * t));
  const int g = static_cast<int>(std::lround(247 + (24 - 247) * t));
  const int b = static_cast<int>(std::lround(247 + (43 - 247) * t));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

const std::vector<std::pair<std::string, std::string>> kSeriesPalette = {
    {"mean_pairwise_pos", "#1b6ca8"}, {"mean_pairwise_neg", "#8c2d0b"},
    {"max_pairwise_pos", "#2a9d8f"},  {"max_pairwise_neg", "#c96a1b"},
    {"sd_pos", "#5f4b8b"},            {"sd_neg", "#946b2d"},
};

std::string series_color(const std::string& metric) {
  for (const auto& [name, color] : kSeriesPalette) {
    if (name == metric) return color;
  }
  return "#444444";
}

std::string render_heatmap(const nlohmann::ordered_json& report) {
  const auto& observational = report.at("observational");
  std::vector<std::string> metrics;
  for (const auto& axis : observational) {
    for (const auto& [metric, value] : axis.at("gaps").items()) {
      (void)value;
      if (std::find(metrics.begin(), metrics.end(), metric) == metrics.end()) {
        metrics.push_back(metric);
      }
    }
  }
  const double cell_w = 110.0, cell_h = 44.0;
  const double left = 170.0, top = 60.0;
  const auto n_rows = static_cast<double>(observational.size());
  const auto n_cols = static_cast<double>(metrics.size());
  const double width = left + n_cols * cell_w + 30.0;
  const double height = top + n_rows * cell_h + 70.0;

  double vmax = 0.0;
  for (const auto& axis : observational) {
    for (const auto& [metric, value] : axis.at("gaps").items()) {
      (void)metric;
      if (!value.is_null()) vmax = std::max(vmax, value.get<double>());
    }
  }

  std::string svg = svg_open(width, height);
  const std::string cohort_name =
      report.at("config").at("name").get<std::string>();
  svg += "<text x=\"" + format_fixed(left, 0) +
         "\" y=\"24\" font-size=\"16\" font-weight=\"bold\">" +
         esc(cohort_name) + " fairness gaps</text>\n";
  for (size_t cidx = 0; cidx < metrics.size(); ++cidx) {
    const double x = left + (static_cast<double>(cidx) + 0.5) * cell_w;
    svg += "<text x=\"" + format_fixed(x, 1) + "\" y=\"" +
           format_fixed(top - 10.0, 1) +
           "\" font-size=\"12\" text-anchor=\"middle\">" + esc(metrics[cidx]) +
           "</text>\n";
  }
  for (size_t ridx = 0; ridx < observational.size(); ++ridx) {
    const auto& axis = observational[ridx];
    const double y = top + static_cast<double>(ridx) * cell_h;
    svg += "<text x=\"" + format_fixed(left - 8.0, 1) + "\" y=\"" +
           format_fixed(y + cell_h / 2.0 + 4.0, 1) +
           "\" font-size=\"12\" text-anchor=\"end\">" +
           esc(axis.at("axis").get<std::string>()) + "</text>\n";
    const auto& gaps = axis.at("gaps");
    for (size_t cidx = 0; cidx < metrics.size(); ++cidx) {
      const double x = left + static_cast<double>(cidx) * cell_w;
      std::string fill = "#eeeeee";
      std::string label = "n/a";
      std::string text_fill = "#777777";
      if (gaps.contains(metrics[cidx]) && !gaps.at(metrics[cidx]).is_null()) {
        const double v = gaps.at(metrics[cidx]).get<double>();
        fill = heat_color(v, vmax);
        label = format_fixed(v, 3);
        text_fill = v > 0.6 * vmax && vmax > 0.0 ? "#ffffff" : "#222222";
      }
      svg += "<rect x=\"" + format_fixed(x, 1) + "\" y=\"" +
             format_fixed(y, 1) + "\" width=\"" + format_fixed(cell_w, 1) +
             "\" height=\"" + format_fixed(cell_h, 1) + "\" fill=\"" + fill +
             "\" stroke=\"#ffffff\"/>\n";
      svg += "<text x=\"" + format_fixed(x + cell_w / 2.0, 1) + "\" y=\"" +
             format_fixed(y + cell_h / 2.0 + 4.0, 1) +
             "\" font-size=\"12\" text-anchor=\"middle\" fill=\"" + text_fill +
             "\">" + label + "</text>\n";
    }
  }
  const auto& perf = report.at("performance");
  std::string caption = "accuracy " +
                        format_fixed(perf.at("accuracy").get<double>(), 3);
  if (!perf.at("auroc").is_null()) {
    caption += " | AUROC " + format_fixed(perf.at("auroc").get<double>(), 3);
  }
  svg += "<text x=\"" + format_fixed(left, 0) + "\" y=\"" +
         format_fixed(top + n_rows * cell_h + 30.0, 1) +
         "\" font-size=\"12\" fill=\"#333333\">" + caption + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

std::string render_ecdf(const nlohmann::ordered_json& cf) {
  const auto& ecdf = cf.at("ecdf");
  const double epsilon = cf.at("epsilon").get<double>();

  double xmin = 0.0, xmax = epsilon;
  for (const auto& series : ecdf) {
    const auto& deltas = series.at("deltas");
    if (deltas.empty()) continue;
    xmin = std::min(xmin, deltas.front().get<double>());
    xmax = std::max(xmax, deltas.back().get<double>());
  }
  const double pad = 0.05 * std::max(1e-9, xmax - xmin);
  xmin -= pad;
  xmax += pad;

  const double left = 70.0, top = 40.0, plot_w = 520.0, plot_h = 300.0;
  const double width = left + plot_w + 200.0;
  const double height = top + plot_h + 60.0;
  auto sx = [&](double v) {
    return left + (v - xmin) / (xmax - xmin) * plot_w;
  };
  auto sy = [&](double f) { return top + (1.0 - f) * plot_h; };

  std::string svg = svg_open(width, height);
  svg += "<text x=\"" + format_fixed(left, 0) +
         "\" y=\"22\" font-size=\"15\" font-weight=\"bold\">observed minus "
         "counterfactual disparity, ECDF</text>\n";
  svg += "<rect x=\"" + format_fixed(left, 1) + "\" y=\"" +
         format_fixed(top, 1) + "\" width=\"" + format_fixed(plot_w, 1) +
         "\" height=\"" + format_fixed(plot_h, 1) +
         "\" fill=\"none\" stroke=\"#999999\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double f = tick / 4.0;
    svg += "<text x=\"" + format_fixed(left - 8.0, 1) + "\" y=\"" +
           format_fixed(sy(f) + 4.0, 1) +
           "\" font-size=\"11\" text-anchor=\"end\">" + format_fixed(f, 2) +
           "</text>\n";
    const double xv = xmin + f * (xmax - xmin);
    svg += "<text x=\"" + format_fixed(sx(xv), 1) + "\" y=\"" +
           format_fixed(top + plot_h + 18.0, 1) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + format_fixed(xv, 2) +
           "</text>\n";
  }

  double legend_y = top + 10.0;
  for (const auto& series : ecdf) {
    const std::string metric = series.at("metric").get<std::string>();
    const std::string color = series_color(metric);
    const auto& deltas = series.at("deltas");
    const auto& cum = series.at("cum_fraction");
    if (deltas.empty()) continue;
    std::string path = "M" + format_fixed(sx(deltas[0].get<double>()), 2) +
                       " " + format_fixed(sy(0.0), 2);
    double prev_y = sy(0.0);
    for (size_t i = 0; i < deltas.size(); ++i) {
      const double x = sx(deltas[i].get<double>());
      const double y = sy(cum[i].get<double>());
      path += " L" + format_fixed(x, 2) + " " + format_fixed(prev_y, 2);
      path += " L" + format_fixed(x, 2) + " " + format_fixed(y, 2);
      prev_y = y;
    }
    svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    svg += "<rect x=\"" + format_fixed(left + plot_w + 16.0, 1) + "\" y=\"" +
           format_fixed(legend_y - 9.0, 1) +
           "\" width=\"12\" height=\"12\" fill=\"" + color + "\"/>\n";
    svg += "<text x=\"" + format_fixed(left + plot_w + 34.0, 1) + "\" y=\"" +
           format_fixed(legend_y + 1.0, 1) + "\" font-size=\"11\">" +
           esc(metric) + "</text>\n";
    legend_y += 18.0;
  }

  // Dashed reference line at the acceptable-disparity threshold.
  const double ex = sx(epsilon);
  svg += "<line x1=\"" + format_fixed(ex, 2) + "\" y1=\"" +
         format_fixed(top, 1) + "\" x2=\"" + format_fixed(ex, 2) +
         "\" y2=\"" + format_fixed(top + plot_h, 1) +
         "\" stroke=\"#222222\" stroke-dasharray=\"6 4\"/>\n";
  svg += "<text x=\"" + format_fixed(ex + 4.0, 1) + "\" y=\"" +
         format_fixed(top + 14.0, 1) + "\" font-size=\"11\">epsilon = " +
         format_fixed(epsilon, 3) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

std::string render_ci_dotplot(const nlohmann::ordered_json& cf, const std::string& side) {
  // Collect subgroup order from the first matching rate block, then one
  // row per subgroup with a whisker per method.
  std::vector<std::string> subgroups;
  struct Entry {
    std::string method;
    double point, lo, hi;
  };
  std::map<std::string, std::vector<Entry>> rows;
  for (const auto& rates : cf.at("rates")) {
    if (rates.at("side").get<std::string>() != side) continue;
    for (const auto& est : rates.at("estimates")) {
      const std::string name = est.at("subgroup").get<std::string>();
      if (std::find(subgroups.begin(), subgroups.end(), name) ==
          subgroups.end()) {
        subgroups.push_back(name);
      }
      rows[name].push_back({rates.at("method").get<std::string>(),
                            est.at("point").get<double>(),
                            est.at("lo").get<double>(),
                            est.at("hi").get<double>()});
    }
  }
  if (subgroups.empty()) return "";

  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& [name, entries] : rows) {
    (void)name;
    for (const auto& e : entries) {
      lo = first ? e.lo : std::min(lo, e.lo);
      hi = first ? e.hi : std::max(hi, e.hi);
      first = false;
    }
  }
  const double pad = 0.08 * std::max(1e-9, hi - lo);
  lo -= pad;
  hi += pad;

  const double left = 180.0, top = 50.0, plot_w = 460.0, row_h = 34.0;
  const auto n_rows = static_cast<double>(subgroups.size());
  const double width = left + plot_w + 40.0;
  const double height = top + n_rows * row_h + 60.0;
  auto sx = [&](double v) { return left + (v - lo) / (hi - lo) * plot_w; };

  std::string svg = svg_open(width, height);
  svg += "<text x=\"" + format_fixed(left, 0) +
         "\" y=\"24\" font-size=\"15\" font-weight=\"bold\">counterfactual " +
         esc(side) + "-side error rates</text>\n";
  const std::map<std::string, std::string> method_color = {
      {"standardized", "#1b6ca8"}, {"permutation", "#c96a1b"}};
  for (size_t i = 0; i < subgroups.size(); ++i) {
    const double yc = top + (static_cast<double>(i) + 0.5) * row_h;
    svg += "<text x=\"" + format_fixed(left - 10.0, 1) + "\" y=\"" +
           format_fixed(yc + 4.0, 1) +
           "\" font-size=\"12\" text-anchor=\"end\">" + esc(subgroups[i]) +
           "</text>\n";
    const auto& entries = rows[subgroups[i]];
    for (size_t m = 0; m < entries.size(); ++m) {
      const auto& e = entries[m];
      const double dy = entries.size() > 1
                            ? (static_cast<double>(m) - 0.5) * 10.0
                            : 0.0;
      const std::string color = method_color.count(e.method)
                                    ? method_color.at(e.method)
                                    : "#444444";
      svg += "<line x1=\"" + format_fixed(sx(e.lo), 2) + "\" y1=\"" +
             format_fixed(yc + dy, 1) + "\" x2=\"" + format_fixed(sx(e.hi), 2) +
             "\" y2=\"" + format_fixed(yc + dy, 1) + "\" stroke=\"" + color +
             "\" stroke-width=\"2\"/>\n";
      svg += "<circle cx=\"" + format_fixed(sx(e.point), 2) + "\" cy=\"" +
             format_fixed(yc + dy, 1) + "\" r=\"4\" fill=\"" + color +
             "\"/>\n";
      svg += "<text x=\"" + format_fixed(sx(e.hi) + 8.0, 2) + "\" y=\"" +
             format_fixed(yc + dy + 4.0, 1) +
             "\" font-size=\"10\" fill=\"#333333\">" +
             format_fixed(e.point, 3) + "</text>\n";
    }
  }
  double legend_x = left;
  const double legend_y = top + n_rows * row_h + 30.0;
  for (const auto& [method, color] : method_color) {
    if (!std::any_of(rows.begin(), rows.end(), [&](const auto& kv) {
          return std::any_of(kv.second.begin(), kv.second.end(),
                             [&](const Entry& e) { return e.method == method; });
        })) {
      continue;
    }
    svg += "<circle cx=\"" + format_fixed(legend_x + 6.0, 1) + "\" cy=\"" +
           format_fixed(legend_y - 4.0, 1) + "\" r=\"5\" fill=\"" + color +
           "\"/>\n";
    svg += "<text x=\"" + format_fixed(legend_x + 18.0, 1) + "\" y=\"" +
           format_fixed(legend_y, 1) + "\" font-size=\"11\">" + esc(method) +
           "</text>\n";
    legend_x += 140.0;
  }
  svg += "</svg>\n";
  return svg;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

}  // namespace

std::vector<std::string> render_svg(const nlohmann::ordered_json& report,
                                    const std::string& dir,
                                    std::vector<std::string>* warnings) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;

  if (report.contains("observational") && !report.at("observational").empty()) {
    const std::string path = dir + "/heatmap.svg";
    write_text(path, render_heatmap(report));
    written.push_back(path);
  } else if (warnings) {
    warnings->push_back("render: no observational section, heatmap skipped");
  }

  const nlohmann::ordered_json* cf = nullptr;
  if (report.contains("counterfactual") &&
      !report.at("counterfactual").is_null()) {
    cf = &report.at("counterfactual");
  }
  if (cf && cf->contains("ecdf") && !cf->at("ecdf").empty()) {
    const std::string path = dir + "/ecdf.svg";
    write_text(path, render_ecdf(*cf));
    written.push_back(path);
  } else if (warnings) {
    warnings->push_back("render: no ECDF series, ecdf panel skipped");
  }

  for (const std::string side : {"positive", "negative"}) {
    if (!cf || !cf->contains("rates")) {
      if (warnings) {
        warnings->push_back("render: no counterfactual rates, " + side +
                            " CI plot skipped");
      }
      continue;
    }
    const std::string svg = render_ci_dotplot(*cf, side);
    if (svg.empty()) {
      if (warnings) {
        warnings->push_back("render: no estimates for " + side +
                            " side, CI plot skipped");
      }
      continue;
    }
    const std::string path = dir + "/ci_" + side + ".svg";
    write_text(path, svg);
    written.push_back(path);
  }
  return written;
}

}  // namespace fairaudit
