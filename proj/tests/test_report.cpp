#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "branchlab/report.hpp"

using namespace branchlab;
namespace fs = std::filesystem;

namespace {

fs::path write_csv(const std::string& name, const std::string& content) {
  fs::path path = fs::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("format_double round-trips shortest decimals") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0) == "1");
  double v = 0.1 + 0.2;
  CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("csv reader surfaces malformed rows by number") {
  fs::path path = write_csv("branchlab_bad.csv",
                            "iteration,mean_test_nodes\n0,5.0\n1,not_a_number\n");
  bool threw = false;
  try {
    read_metrics_csv(path);
  } catch (const std::invalid_argument& e) {
    threw = true;
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  CHECK(threw);
  fs::remove(path);

  fs::path empty = write_csv("branchlab_empty.csv", "iteration,mean_test_nodes\n");
  CHECK_THROWS_AS(read_metrics_csv(empty), std::invalid_argument);
  fs::remove(empty);
}

TEST_CASE("single curve renders one polyline") {
  fs::path csv = write_csv("branchlab_single.csv",
                           "iteration,mean_test_nodes\n0,100\n10,50\n20,25\n");
  fs::path svg = fs::temp_directory_path() / "branchlab_single.svg";
  fs::path merged = fs::temp_directory_path() / "branchlab_single_merged.csv";
  render_report({read_metrics_csv(csv)}, svg, merged);
  std::string body = slurp(svg);
  size_t count = 0, pos = 0;
  while ((pos = body.find("<polyline", pos)) != std::string::npos) {
    ++count;
    pos += 1;
  }
  CHECK(count == 1);
  CHECK(body.find("<path") == std::string::npos);  // no band without ci column
  fs::remove(csv);
  fs::remove(svg);
  fs::remove(merged);
}

TEST_CASE("confidence band geometry matches 1.96 sd over sqrt folds") {
  // Two rows, ci = 1.96 * sd / sqrt(n) computed externally: band vertical
  // extent in the SVG must correspond to [mean-ci, mean+ci] in log space.
  double mean0 = 100.0, ci0 = 10.0, mean1 = 40.0, ci1 = 4.0;
  std::ostringstream csv_content;
  csv_content << "iteration,mean_test_nodes,ci95_test_nodes\n0," << mean0 << "," << ci0 << "\n10,"
              << mean1 << "," << ci1 << "\n";
  fs::path csv = write_csv("branchlab_band.csv", csv_content.str());
  fs::path svg = fs::temp_directory_path() / "branchlab_band.svg";
  fs::path merged = fs::temp_directory_path() / "branchlab_band_merged.csv";
  render_report({read_metrics_csv(csv)}, svg, merged);
  std::string body = slurp(svg);
  REQUIRE(body.find("<path") != std::string::npos);

  // Extract the band path and recompute its first upper-edge y coordinate.
  size_t start = body.find("<path d=\"M");
  std::string rest = body.substr(start + 10);
  std::istringstream coords(rest);
  double x0, y0;
  coords >> x0 >> y0;
  // Rebuild the scale used by the renderer.
  double y_min = mean1 - ci1, y_max = mean0 + ci0;
  double log_min = std::floor(std::log10(y_min));
  double log_max = std::ceil(std::log10(y_max));
  double expected_y0 = 470 - (std::log10(mean0 + ci0) - log_min) / (log_max - log_min) * 430;
  CHECK(y0 == doctest::Approx(expected_y0).epsilon(1e-4));  // SVG prints 6 digits
  fs::remove(csv);
  fs::remove(svg);
  fs::remove(merged);
}

TEST_CASE("merged csv carries a source column per row") {
  fs::path a = write_csv("branchlab_a.csv", "iteration,mean_test_nodes\n0,10\n");
  fs::path b = write_csv("branchlab_b.csv", "iteration,mean_test_nodes\n0,20\n");
  fs::path svg = fs::temp_directory_path() / "branchlab_two.svg";
  fs::path merged = fs::temp_directory_path() / "branchlab_two_merged.csv";
  render_report({read_metrics_csv(a), read_metrics_csv(b)}, svg, merged);
  std::string body = slurp(merged);
  CHECK(body.find("source,iteration,mean_test_nodes") == 0);
  CHECK(body.find("branchlab_a.csv,0,10") != std::string::npos);
  CHECK(body.find("branchlab_b.csv,0,20") != std::string::npos);
  fs::remove(a);
  fs::remove(b);
  fs::remove(svg);
  fs::remove(merged);
}
