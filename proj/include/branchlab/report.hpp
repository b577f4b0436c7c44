#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace branchlab {

// Parsed metrics CSV: a header row plus numeric columns, addressed by name.
struct MetricsTable {
  std::string source;  // file path, used as the curve label
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const;  // -1 when absent
  bool has_column(const std::string& name) const;
  double cell(size_t row, int col) const { return rows[row][static_cast<size_t>(col)]; }
};

// Throws std::runtime_error naming the offending row on malformed input.
MetricsTable read_metrics_csv(const std::filesystem::path& path);

// Renders a log10-scale learning-curve SVG, one polyline per table, with a
// shaded band where a ci95_test_nodes column is present, and writes the
// merged CSV (an extra `source` column) next to it.
void render_report(const std::vector<MetricsTable>& tables, const std::filesystem::path& svg_path,
                   const std::filesystem::path& merged_csv_path);

// Shortest round-trippable decimal via std::to_chars.
std::string format_double(double value);

}  // namespace branchlab
