#pragma once

#include <string>
#include <vector>

#include "fairsite/training.hpp"

namespace fairsite {

void save_report(const MetricReport& report, const std::string& path);
MetricReport load_report(const std::string& path);

void save_tradeoff_table(const std::vector<TradeoffPoint>& points,
                         const std::string& path);
std::vector<TradeoffPoint> load_tradeoff_table(const std::string& path);

// Relative-error vs entropy curve (one labeled series per table), lambda
// annotated per point, written as SVG.
void plot_tradeoff_svg(
    const std::vector<std::pair<std::string, std::vector<TradeoffPoint>>>& series,
    const std::string& out_path);

// Aggregate racial-distribution bars per series, as SVG plus a plain text
// table next to it.
void plot_race_bars(
    const std::vector<std::pair<std::string, std::vector<TradeoffPoint>>>& series,
    const std::string& svg_path, const std::string& table_path);

}  // namespace fairsite
