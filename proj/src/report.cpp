#include "fairsite/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "fairsite/dataset_io.hpp"

namespace fairsite {

using nlohmann::json;

namespace {

json report_to_json(const MetricReport& r) {
  json race = json::array();
  for (int g = 0; g < kNumRaceGroups; ++g) race.push_back(r.race_mean[g]);
  return json{{"lambda", r.lambda},
              {"relative_error_mean", r.relative_error_mean},
              {"relative_error_ci", r.relative_error_ci},
              {"ndcg_mean", r.ndcg_mean},
              {"ndcg_ci", r.ndcg_ci},
              {"entropy_mean", r.entropy_mean},
              {"race_mean", race}};
}

MetricReport report_from_json(const json& j) {
  MetricReport r;
  r.lambda = j.at("lambda").get<double>();
  r.relative_error_mean = j.at("relative_error_mean").get<double>();
  r.relative_error_ci = j.at("relative_error_ci").get<double>();
  r.ndcg_mean = j.at("ndcg_mean").get<double>();
  r.ndcg_ci = j.at("ndcg_ci").get<double>();
  r.entropy_mean = j.at("entropy_mean").get<double>();
  if (j.contains("race_mean")) {
    const json& race = j.at("race_mean");
    for (int g = 0; g < kNumRaceGroups; ++g) r.race_mean[g] = race[g].get<double>();
  }
  return r;
}

const char* kRaceNames[kNumRaceGroups] = {"White", "Hispanic", "Black",
                                          "Asian",  "Mixed",   "Others"};

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                               "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

}  // namespace

void save_report(const MetricReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write report " + path);
  out << report_to_json(report).dump() << "\n";
}

MetricReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open report " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DatasetError("report " + path + ": " + e.what());
  }
  return report_from_json(j);
}

void save_tradeoff_table(const std::vector<TradeoffPoint>& points,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write table " + path);
  for (const TradeoffPoint& p : points) out << report_to_json(p.report).dump() << "\n";
}

std::vector<TradeoffPoint> load_tradeoff_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open table " + path);
  std::vector<TradeoffPoint> points;
  std::string line;
  long long n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++n;
    try {
      TradeoffPoint p;
      p.report = report_from_json(json::parse(line));
      p.lambda = p.report.lambda;
      points.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw DatasetError("table " + path + ": line " + std::to_string(n) + ": " +
                         e.what());
    }
  }
  if (points.empty()) throw DatasetError("table " + path + " is empty");
  std::sort(points.begin(), points.end(),
            [](const TradeoffPoint& a, const TradeoffPoint& b) {
              return a.lambda < b.lambda;
            });
  return points;
}

void plot_tradeoff_svg(
    const std::vector<std::pair<std::string, std::vector<TradeoffPoint>>>& series,
    const std::string& out_path) {
  if (series.empty()) throw DatasetError("plot: no input series");
  for (const auto& [name, points] : series)
    if (points.empty()) throw DatasetError("plot: series " + name + " is empty");

  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const auto& [name, points] : series) {
    for (const TradeoffPoint& p : points) {
      x_min = std::min(x_min, p.report.entropy_mean);
      x_max = std::max(x_max, p.report.entropy_mean);
      y_min = std::min(y_min, p.report.relative_error_mean);
      y_max = std::max(y_max, p.report.relative_error_mean);
    }
  }
  const double x_pad = std::max(0.02, 0.08 * (x_max - x_min));
  const double y_pad = std::max(0.01, 0.08 * (y_max - y_min));
  x_min -= x_pad;
  x_max += x_pad;
  y_min -= y_pad;
  y_max += y_pad;

  const int width = 640, height = 480, margin = 56;
  auto sx = [&](double x) {
    return margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin);
  };
  auto sy = [&](double y) {
    return height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin);
  };

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DatasetError("cannot write plot " + out_path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<line x1='" << margin << "' y1='" << height - margin << "' x2='"
      << width - margin << "' y2='" << height - margin
      << "' stroke='black'/>\n"
      << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin
      << "' y2='" << height - margin << "' stroke='black'/>\n"
      << "<text x='" << width / 2 << "' y='" << height - 12
      << "' text-anchor='middle' font-size='13'>entropy</text>\n"
      << "<text x='16' y='" << height / 2
      << "' text-anchor='middle' font-size='13' transform='rotate(-90 16 "
      << height / 2 << ")'>relative error</text>\n";

  int si = 0;
  for (const auto& [name, points] : series) {
    const char* color = kSeriesColors[si % 6];
    std::ostringstream path;
    for (std::size_t i = 0; i < points.size(); ++i) {
      path << (i == 0 ? "M" : "L") << fmt(sx(points[i].report.entropy_mean), 1)
           << " " << fmt(sy(points[i].report.relative_error_mean), 1) << " ";
    }
    out << "<path d='" << path.str() << "' fill='none' stroke='" << color
        << "' stroke-width='1.5'/>\n";
    for (const TradeoffPoint& p : points) {
      out << "<circle cx='" << fmt(sx(p.report.entropy_mean), 1) << "' cy='"
          << fmt(sy(p.report.relative_error_mean), 1) << "' r='3.5' fill='"
          << color << "'/>\n"
          << "<text x='" << fmt(sx(p.report.entropy_mean) + 6, 1) << "' y='"
          << fmt(sy(p.report.relative_error_mean) - 6, 1)
          << "' font-size='11'>&#955;=" << fmt(p.lambda, 1) << "</text>\n";
    }
    out << "<text x='" << width - margin - 8 << "' y='" << margin + 16 + 16 * si
        << "' text-anchor='end' font-size='12' fill='" << color << "'>" << name
        << "</text>\n";
    ++si;
  }
  out << "</svg>\n";
}

void plot_race_bars(
    const std::vector<std::pair<std::string, std::vector<TradeoffPoint>>>& series,
    const std::string& svg_path, const std::string& table_path) {
  if (series.empty()) throw DatasetError("plot: no input series");

  // Text table first; it is the source of truth.
  {
    std::ofstream out(table_path, std::ios::binary);
    if (!out) throw DatasetError("cannot write table " + table_path);
    out << "series\tlambda";
    for (const char* name : kRaceNames) out << "\t" << name;
    out << "\n";
    for (const auto& [name, points] : series) {
      for (const TradeoffPoint& p : points) {
        out << name << "\t" << fmt(p.lambda, 2);
        for (int g = 0; g < kNumRaceGroups; ++g)
          out << "\t" << fmt(p.report.race_mean[g], 4);
        out << "\n";
      }
    }
  }

  std::vector<std::pair<std::string, Eigen::Matrix<double, kNumRaceGroups, 1>>> rows;
  for (const auto& [name, points] : series)
    for (const TradeoffPoint& p : points)
      rows.emplace_back(name + " (\xce\xbb=" + fmt(p.lambda, 1) + ")",
                        p.report.race_mean);

  const int bar_h = 18, group_gap = 10, label_w = 170;
  const int width = 640;
  const int height =
      40 + static_cast<int>(rows.size()) * (bar_h + group_gap);
  std::ofstream out(svg_path, std::ios::binary);
  if (!out) throw DatasetError("cannot write plot " + svg_path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n";
  int y = 24;
  for (const auto& [label, race] : rows) {
    out << "<text x='4' y='" << y + bar_h - 5 << "' font-size='11'>" << label
        << "</text>\n";
    double x = label_w;
    for (int g = 0; g < kNumRaceGroups; ++g) {
      const double w = race[g] * (width - label_w - 10);
      out << "<rect x='" << fmt(x, 1) << "' y='" << y << "' width='"
          << fmt(std::max(0.0, w), 1) << "' height='" << bar_h << "' fill='"
          << kSeriesColors[g] << "'/>\n";
      x += w;
    }
    y += bar_h + group_gap;
  }
  out << "</svg>\n";
}

}  // namespace fairsite
