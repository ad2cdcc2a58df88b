#include "protofaith/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "protofaith/error.hpp"

namespace protofaith {

using json = nlohmann::ordered_json;

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string RunParameters::to_json() const {
  json p;
  p["command"] = command;
  p["methods"] = methods;
  p["a_max"] = a_max;
  p["step"] = step;
  p["top_fraction"] = top_fraction;
  p["relevance_threshold"] = relevance_threshold;
  p["smoothgrads_samples"] = smoothgrads_samples;
  p["smoothgrads_noise_ratio"] = smoothgrads_noise_ratio;
  p["fill"] = fill;
  p["seed"] = seed;
  p["integration"] = integration;
  p["lrp_rules"] = {{"hidden", lrp_hidden_rule},
                    {"input_layer", lrp_input_rule},
                    {"stabilizer", lrp_stabilizer}};
  p["audc_scale"] = audc_scale;
  p["policy"] = policy;
  p["theta"] = theta;
  p["tau_threshold"] = tau_threshold;
  return p.dump(2);
}

namespace {

std::string csv_row(const ReportRow& r) {
  std::string out;
  out += r.image_id;
  out += ',' + std::to_string(r.prototype_index);
  out += ',' + r.role;
  out += ',' + r.method;
  out += ',';
  if (r.audc) out += format_fixed(*r.audc, 1);
  out += ',';
  if (r.relevance_fraction) out += format_fixed(*r.relevance_fraction, 6);
  out += ',';
  if (r.irrelevant) out += *r.irrelevant ? "true" : "false";
  out += ',' + r.grid_id;
  out += ',' + r.fill;
  out += ',' + std::to_string(r.seed);
  return out;
}

std::string curve_case_id(const DeletionCurve& c) {
  return c.meta.image_id + "#p" + std::to_string(c.meta.prototype_index) + "#" + c.meta.method;
}

const char* method_color(const std::string& method) {
  if (method == "upsample") return "#1f77b4";     // blue, as in the curve figures
  if (method == "smoothgrads") return "#d62728";  // red
  if (method == "prp") return "#e6b800";          // yellow
  return "#555555";
}

// Mean ratio per grid point per method; one polyline each.
std::string render_svg(const std::vector<DeletionCurve>& curves) {
  std::map<std::string, std::pair<std::vector<double>, int>> mean;  // method -> (sums, count)
  std::vector<double> areas;
  for (const DeletionCurve& c : curves) {
    if (areas.empty()) areas = c.areas;
    if (c.areas.size() != areas.size()) continue;  // mixed grids are not plotted together
    auto& [sums, count] = mean[c.meta.method];
    if (sums.empty()) sums.assign(c.ratios.size(), 0.0);
    for (std::size_t i = 0; i < c.ratios.size(); ++i) sums[i] += c.ratios[i];
    ++count;
  }

  const double width = 640, height = 420;
  const double ml = 60, mr = 20, mt = 20, mb = 50;
  double tau_max = 1.0;
  for (auto& [method, acc] : mean) {
    for (double v : acc.first) tau_max = std::max(tau_max, v / acc.second);
  }
  const double a_max = areas.back();

  auto sx = [&](double a) { return ml + (width - ml - mr) * (a / a_max); };
  auto sy = [&](double t) { return height - mb - (height - mt - mb) * (t / tau_max); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_fixed(width, 0) +
         "\" height=\"" + format_fixed(height, 0) + "\" viewBox=\"0 0 " + format_fixed(width, 0) +
         " " + format_fixed(height, 0) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // Axes.
  svg += "<line x1=\"" + format_fixed(ml, 2) + "\" y1=\"" + format_fixed(height - mb, 2) +
         "\" x2=\"" + format_fixed(width - mr, 2) + "\" y2=\"" + format_fixed(height - mb, 2) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + format_fixed(ml, 2) + "\" y1=\"" + format_fixed(mt, 2) + "\" x2=\"" +
         format_fixed(ml, 2) + "\" y2=\"" + format_fixed(height - mb, 2) +
         "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + format_fixed((ml + width - mr) / 2, 2) + "\" y=\"" +
         format_fixed(height - 12, 2) +
         "\" text-anchor=\"middle\" font-size=\"14\">deletion area (%)</text>\n";
  svg += "<text x=\"16\" y=\"" + format_fixed((mt + height - mb) / 2, 2) +
         "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 16 " +
         format_fixed((mt + height - mb) / 2, 2) + ")\">similarity ratio</text>\n";
  // Tick labels at the ends.
  svg += "<text x=\"" + format_fixed(ml, 2) + "\" y=\"" + format_fixed(height - mb + 16, 2) +
         "\" text-anchor=\"middle\" font-size=\"12\">0</text>\n";
  svg += "<text x=\"" + format_fixed(width - mr, 2) + "\" y=\"" +
         format_fixed(height - mb + 16, 2) + "\" text-anchor=\"middle\" font-size=\"12\">" +
         format_fixed(a_max * 100.0, 1) + "</text>\n";
  svg += "<text x=\"" + format_fixed(ml - 8, 2) + "\" y=\"" + format_fixed(sy(1.0) + 4, 2) +
         "\" text-anchor=\"end\" font-size=\"12\">1.0</text>\n";
  svg += "<text x=\"" + format_fixed(ml - 8, 2) + "\" y=\"" + format_fixed(height - mb + 4, 2) +
         "\" text-anchor=\"end\" font-size=\"12\">0.0</text>\n";

  double legend_y = mt + 10;
  for (const auto& [method, acc] : mean) {
    std::string points;
    for (std::size_t i = 0; i < areas.size(); ++i) {
      if (!points.empty()) points += ' ';
      points += format_fixed(sx(areas[i]), 2) + "," + format_fixed(sy(acc.first[i] / acc.second), 2);
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(method_color(method)) +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    svg += "<text x=\"" + format_fixed(width - mr - 150, 2) + "\" y=\"" +
           format_fixed(legend_y, 2) + "\" font-size=\"13\" fill=\"" + method_color(method) +
           "\">" + method + "</text>\n";
    legend_y += 18;
  }
  svg += "</svg>\n";
  return svg;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

ReportFiles write_reports(const std::vector<ReportRow>& rows,
                          const std::vector<DeletionCurve>& curves, const RunParameters& params,
                          const std::filesystem::path& out_dir,
                          const std::vector<ErfRow>& erf_rows) {
  if (rows.empty()) throw ArgumentError("write_reports requires at least one row");
  for (const ReportRow& r : rows) {
    if ((r.audc && !std::isfinite(*r.audc)) ||
        (r.relevance_fraction && !std::isfinite(*r.relevance_fraction))) {
      throw InternalError("non-finite metric in report row for " + r.image_id);
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string());

  ReportFiles files;

  std::string cases;
  cases += kCasesCsvHeader;
  cases += '\n';
  for (const ReportRow& r : rows) {
    cases += csv_row(r);
    cases += '\n';
  }
  files.cases_csv = out_dir / "cases.csv";
  write_text(files.cases_csv, cases);

  json summary;
  summary["parameters"] = json::parse(params.to_json());
  summary["counts"] = {{"cases", rows.size()}, {"curves", curves.size()}};
  summary["summary"] = json::array();
  for (const SummaryRow& s : aggregate_report(rows)) {
    json row;
    row["method"] = s.method;
    row["role"] = s.role;
    if (s.audc_count > 0) {
      row["audc_cases"] = s.audc_count;
      // Table-style granularity: one decimal place.
      row["mean_audc"] = json::parse(format_fixed(s.mean_audc, 1));
    }
    if (s.relevance_count > 0) {
      row["relevance_cases"] = s.relevance_count;
      row["irrelevant_count"] = s.irrelevant_count;
      row["irrelevant_pct"] = json::parse(format_fixed(s.irrelevant_pct, 2));
    }
    summary["summary"].push_back(std::move(row));
  }
  files.summary_json = out_dir / "summary.json";
  write_text(files.summary_json, summary.dump(2) + "\n");

  std::string curve_csv = "case_id,a,tau\n";
  for (const DeletionCurve& c : curves) {
    const std::string id = curve_case_id(c);
    for (std::size_t i = 0; i < c.areas.size(); ++i) {
      curve_csv += id + ',' + format_fixed(c.areas[i], 4) + ',' + format_fixed(c.ratios[i], 6);
      curve_csv += '\n';
    }
  }
  files.curves_csv = out_dir / "curves.csv";
  write_text(files.curves_csv, curve_csv);

  if (!curves.empty()) {
    files.curves_svg = out_dir / "curves.svg";
    write_text(files.curves_svg, render_svg(curves));
  }

  if (!erf_rows.empty()) {
    std::string erf_csv = "image_id,prototype_index,method,a_star,tau_threshold\n";
    for (const ErfRow& r : erf_rows) {
      erf_csv += r.image_id + ',' + std::to_string(r.prototype_index) + ',' + r.method + ',';
      if (r.a_star) erf_csv += format_fixed(*r.a_star, 4);
      erf_csv += ',' + format_fixed(r.tau_threshold, 4) + '\n';
    }
    files.erf_csv = out_dir / "erf.csv";
    write_text(files.erf_csv, erf_csv);
  }

  return files;
}

}  // namespace protofaith
