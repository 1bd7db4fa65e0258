#include "cameo/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cameo {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "iter,loss_denoise,loss_cameo,precision_supervised_layer\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iter);
    out += ',';
    out += format_double(r.loss_denoise);
    out += ',';
    out += format_double(r.loss_cameo);
    out += ',';
    out += format_double(r.precision);
    out += '\n';
  }
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("iter,", 0) != 0)
    throw std::invalid_argument("metrics csv: missing header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    // Accept both plain and arm-prefixed rows.
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::string first;
    ls >> first;
    try {
      r.iter = std::stoi(first);
    } catch (...) {
      ls >> r.iter;  // arm label column; next token is the iteration
    }
    if (!(ls >> r.loss_denoise >> r.loss_cameo >> r.precision))
      throw std::invalid_argument("metrics csv: malformed row: " + line);
    rows.push_back(r);
  }
  if (rows.empty()) throw std::invalid_argument("metrics csv: no data rows");
  return rows;
}

std::string paired_metrics_csv(const std::vector<MetricsRow>& cameo_arm,
                               const std::vector<MetricsRow>& baseline_arm) {
  std::string out =
      "arm,iter,loss_denoise,loss_cameo,precision_supervised_layer\n";
  auto emit = [&](const char* arm, const std::vector<MetricsRow>& rows) {
    for (const auto& r : rows) {
      out += arm;
      out += ',';
      out += std::to_string(r.iter);
      out += ',';
      out += format_double(r.loss_denoise);
      out += ',';
      out += format_double(r.loss_cameo);
      out += ',';
      out += format_double(r.precision);
      out += '\n';
    }
  };
  emit("cameo", cameo_arm);
  emit("baseline", baseline_arm);
  return out;
}

std::string precision_report_json(const PrecisionReport& rep) {
  nlohmann::json j;
  j["overall"] = rep.overall;
  j["per_bin"] = nlohmann::json::object();
  for (const auto& [label, value] : rep.per_bin) {
    j["per_bin"][label] = {{"precision", value},
                           {"pairs", rep.per_bin_count.at(label)}};
  }
  j["rho_m"] = rep.rho;
  j["top_k"] = rep.top_k;
  j["pairs_evaluated"] = rep.pairs_evaluated;
  j["source"] = rep.source;
  j["metric"] = rep.metric;
  j["grid"] = {rep.grid_h, rep.grid_w};
  return j.dump(2);
}

std::string precision_report_csv(const PrecisionReport& rep) {
  std::string out = "bin,precision,pairs\n";
  for (const auto& [label, value] : rep.per_bin) {
    out += label;
    out += ',';
    out += format_double(value);
    out += ',';
    out += std::to_string(rep.per_bin_count.at(label));
    out += '\n';
  }
  out += "overall," + format_double(rep.overall) + ',' +
         std::to_string(rep.pairs_evaluated) + '\n';
  return out;
}

namespace {

std::string xml_escape(const std::string& s) {
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

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b"};

struct Range {
  double lo = 0, hi = 1;
  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

}  // namespace

std::string svg_line_chart(const std::string& title,
                           const std::string& x_label,
                           const std::string& y_label,
                           const std::vector<ChartSeries>& series) {
  if (series.empty())
    throw std::invalid_argument("svg_line_chart: no series");
  const int W = 640, H = 400, ml = 60, mr = 20, mt = 40, mb = 50;
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size() || s.x.empty())
      throw std::invalid_argument("svg_line_chart: bad series " + s.label);
    for (double v : s.x) {
      x_lo = std::min(x_lo, v);
      x_hi = std::max(x_hi, v);
    }
    for (double v : s.y) {
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1;
  if (y_hi <= y_lo) y_hi = y_lo + 1;
  auto px = [&](double x) {
    return ml + (x - x_lo) / (x_hi - x_lo) * (W - ml - mr);
  };
  auto py = [&](double y) {
    return H - mb - (y - y_lo) / (y_hi - y_lo) * (H - mt - mb);
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H
      << "\">\n";
  svg << "<rect width=\"" << W << "\" height=\"" << H
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << xml_escape(title) << "</text>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">"
      << xml_escape(x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << H / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 16 "
      << H / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    double fx = x_lo + (x_hi - x_lo) * tick / 4.0;
    double fy = y_lo + (y_hi - y_lo) * tick / 4.0;
    svg << "<text x=\"" << px(fx) << "\" y=\"" << H - mb + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << format_double(fx) << "</text>\n";
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << py(fy) + 3
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << format_double(fy) << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kSeriesColors[s % 6];
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i)
      svg << format_double(px(series[s].x[i])) << ','
          << format_double(py(series[s].y[i])) << ' ';
    svg << "\"/>\n";
    double ly = mt + 16.0 * double(s);
    svg << "<line x1=\"" << W - mr - 120 << "\" y1=\"" << ly << "\" x2=\""
        << W - mr - 100 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << W - mr - 95 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << xml_escape(series[s].label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string svg_bar_chart(const std::string& title,
                          const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
  if (labels.size() != values.size() || labels.empty())
    throw std::invalid_argument("svg_bar_chart: label/value mismatch");
  const int W = 480, H = 320, ml = 50, mr = 20, mt = 40, mb = 50;
  double v_hi = 0;
  for (double v : values) v_hi = std::max(v_hi, v);
  if (v_hi <= 0) v_hi = 1;
  const double band = double(W - ml - mr) / double(labels.size());

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H
      << "\">\n";
  svg << "<rect width=\"" << W << "\" height=\"" << H
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">"
      << xml_escape(title) << "</text>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double bh = values[i] / v_hi * (H - mt - mb);
    double x = ml + band * double(i) + band * 0.15;
    double y = H - mb - bh;
    svg << "<rect x=\"" << format_double(x) << "\" y=\"" << format_double(y)
        << "\" width=\"" << format_double(band * 0.7) << "\" height=\""
        << format_double(bh) << "\" fill=\"#1f77b4\"/>\n";
    svg << "<text x=\"" << format_double(x + band * 0.35) << "\" y=\""
        << H - mb + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << xml_escape(labels[i]) << "</text>\n";
    svg << "<text x=\"" << format_double(x + band * 0.35) << "\" y=\""
        << format_double(y - 4)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << format_double(values[i]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

}  // namespace cameo
