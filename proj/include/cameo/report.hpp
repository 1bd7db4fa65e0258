#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cameo/probe.hpp"
#include "cameo/train.hpp"

namespace cameo {

// Text emission uses a fixed "%.9g" float format so reruns are
// byte-identical.
std::string format_double(double v);

std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

// Two-arm pipeline CSV with a leading arm column.
std::string paired_metrics_csv(const std::vector<MetricsRow>& cameo_arm,
                               const std::vector<MetricsRow>& baseline_arm);

std::string precision_report_json(const PrecisionReport& rep);
std::string precision_report_csv(const PrecisionReport& rep);

struct ChartSeries {
  std::string label;
  std::vector<double> x, y;
};

// Standalone SVG line chart; valid XML, no external references.
std::string svg_line_chart(const std::string& title,
                           const std::string& x_label,
                           const std::string& y_label,
                           const std::vector<ChartSeries>& series);

std::string svg_bar_chart(const std::string& title,
                          const std::vector<std::string>& labels,
                          const std::vector<double>& values);

void write_text_file(const std::filesystem::path& path,
                     const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace cameo
