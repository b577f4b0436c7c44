#include "branchlab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace branchlab {

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

int MetricsTable::column_index(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

bool MetricsTable::has_column(const std::string& name) const { return column_index(name) >= 0; }

MetricsTable read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics CSV: " + path.string());
  MetricsTable table;
  table.source = path.string();
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw std::invalid_argument(path.string() + ": empty metrics CSV");
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) table.columns.push_back(cell);
  }
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row_stream(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(row_stream, cell, ',')) {
      double v;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size())
        throw std::invalid_argument(path.string() + ": row " + std::to_string(line_no) +
                                 ": bad number '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != table.columns.size())
      throw std::invalid_argument(path.string() + ": row " + std::to_string(line_no) + ": expected " +
                               std::to_string(table.columns.size()) + " cells, got " +
                               std::to_string(row.size()));
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty())
    throw std::invalid_argument(path.string() + ": metrics CSV has no data rows");
  return table;
}

namespace {

constexpr double kWidth = 860, kHeight = 520;
constexpr double kLeft = 70, kRight = 830, kTop = 40, kBottom = 470;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf"};

struct Scale {
  double x_min, x_max, log_min, log_max;
  double x(double v) const {
    if (x_max == x_min) return (kLeft + kRight) / 2;
    return kLeft + (v - x_min) / (x_max - x_min) * (kRight - kLeft);
  }
  double y(double v) const {
    double lv = std::log10(std::max(v, 1e-9));
    if (log_max == log_min) return (kTop + kBottom) / 2;
    return kBottom - (lv - log_min) / (log_max - log_min) * (kBottom - kTop);
  }
};

}  // namespace

void render_report(const std::vector<MetricsTable>& tables, const std::filesystem::path& svg_path,
                   const std::filesystem::path& merged_csv_path) {
  if (tables.empty()) throw std::runtime_error("render_report: no metrics tables");

  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const MetricsTable& t : tables) {
    int xi = t.column_index("iteration");
    int yi = t.column_index("mean_test_nodes");
    if (xi < 0 || yi < 0)
      throw std::runtime_error(t.source + ": missing iteration/mean_test_nodes columns");
    int ci = t.column_index("ci95_test_nodes");
    for (size_t r = 0; r < t.rows.size(); ++r) {
      double x = t.cell(r, xi), y = t.cell(r, yi);
      double half = ci >= 0 ? t.cell(r, ci) : 0.0;
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, std::max(y - half, 0.5));
      y_max = std::max(y_max, y + half);
    }
  }
  Scale scale{x_min, x_max, std::floor(std::log10(std::max(y_min, 0.5))),
              std::ceil(std::log10(std::max(y_max, 1.0)))};
  if (scale.log_max <= scale.log_min) scale.log_max = scale.log_min + 1;

  std::ofstream svg(svg_path);
  if (!svg) throw std::runtime_error("cannot open for writing: " + svg_path.string());
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Decade gridlines with 2..9 minors, log10 y-axis.
  for (int dec = static_cast<int>(scale.log_min); dec <= static_cast<int>(scale.log_max); ++dec) {
    double v = std::pow(10.0, dec);
    double y = scale.y(v);
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kRight << "\" y2=\"" << y
        << "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\">1e" << dec
        << "</text>\n";
    for (int minor = 2; minor <= 9; ++minor) {
      double mv = minor * v;
      if (std::log10(mv) > scale.log_max) break;
      svg << "<line x1=\"" << kLeft << "\" y1=\"" << scale.y(mv) << "\" x2=\"" << kRight
          << "\" y2=\"" << scale.y(mv) << "\" stroke=\"#eeeeee\" stroke-width=\"0.5\"/>\n";
    }
  }
  int x_ticks = 6;
  for (int i = 0; i <= x_ticks; ++i) {
    double v = x_min + (x_max - x_min) * i / x_ticks;
    double x = scale.x(v);
    svg << "<line x1=\"" << x << "\" y1=\"" << kBottom << "\" x2=\"" << x << "\" y2=\""
        << kBottom + 5 << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << x << "\" y=\"" << kBottom + 20
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
        << format_double(std::round(v)) << "</text>\n";
  }
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kBottom << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight << "\" y2=\""
      << kBottom << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kHeight - 8
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
      << "iteration</text>\n"
      << "<text x=\"16\" y=\"" << (kTop + kBottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
      << "transform=\"rotate(-90 16 " << (kTop + kBottom) / 2 << ")\">mean test tree size"
      << "</text>\n";

  for (size_t ti = 0; ti < tables.size(); ++ti) {
    const MetricsTable& t = tables[ti];
    const char* color = kPalette[ti % (sizeof(kPalette) / sizeof(kPalette[0]))];
    int xi = t.column_index("iteration");
    int yi = t.column_index("mean_test_nodes");
    int ci = t.column_index("ci95_test_nodes");
    if (ci >= 0) {
      // Confidence band: upper edge forward, lower edge reversed.
      svg << "<path d=\"";
      for (size_t r = 0; r < t.rows.size(); ++r)
        svg << (r == 0 ? "M" : "L") << scale.x(t.cell(r, xi)) << " "
            << scale.y(t.cell(r, yi) + t.cell(r, ci)) << " ";
      for (size_t r = t.rows.size(); r-- > 0;)
        svg << "L" << scale.x(t.cell(r, xi)) << " "
            << scale.y(std::max(t.cell(r, yi) - t.cell(r, ci), 1e-9)) << " ";
      svg << "Z\" fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (size_t r = 0; r < t.rows.size(); ++r)
      svg << scale.x(t.cell(r, xi)) << "," << scale.y(t.cell(r, yi)) << " ";
    svg << "\"/>\n";
    double ly = kTop + 16 * static_cast<double>(ti);
    svg << "<rect x=\"" << kRight - 220 << "\" y=\"" << ly - 9
        << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n"
        << "<text x=\"" << kRight - 205 << "\" y=\"" << ly
        << "\" font-size=\"11\" font-family=\"sans-serif\">"
        << std::filesystem::path(t.source).filename().string() << "</text>\n";
  }
  svg << "</svg>\n";

  // Merged CSV under the first table's schema; columns a table lacks stay
  // empty.
  std::ofstream merged(merged_csv_path);
  if (!merged) throw std::runtime_error("cannot open for writing: " + merged_csv_path.string());
  merged << "source";
  for (const std::string& c : tables[0].columns) merged << ',' << c;
  merged << '\n';
  for (const MetricsTable& t : tables) {
    for (size_t r = 0; r < t.rows.size(); ++r) {
      merged << std::filesystem::path(t.source).filename().string();
      for (const std::string& c : tables[0].columns) {
        int idx = t.column_index(c);
        merged << ',';
        if (idx >= 0) merged << format_double(t.cell(r, idx));
      }
      merged << '\n';
    }
  }
}

}  // namespace branchlab
