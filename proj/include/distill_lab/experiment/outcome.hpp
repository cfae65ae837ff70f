#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "distill_lab/experiment/config.hpp"
#include "distill_lab/experiment/output.hpp"

namespace distill_lab::experiment {

struct Chart {
  std::string file;  // relative to <out>/charts
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

struct RunOutcome {
  Mode mode = Mode::Theory;
  CsvTable table{{}};
  std::vector<Chart> charts;
  std::vector<std::string> log;  // failed seeds and chart problems
  int failed_units = 0;
  int failed_checks = 0;
  std::string text_report;  // verify.txt
};

/// CSV first, then the text report, then charts; a chart that cannot be
/// written is logged and skipped.
inline void write_outcome(RunOutcome& outcome, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create '" + out_dir.string() + "': " + ec.message());
  outcome.table.write(out_dir / (std::string(to_string(outcome.mode)) + ".csv"));
  if (!outcome.text_report.empty()) {
    std::ofstream txt(out_dir / "verify.txt", std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(txt), ErrorCode::IoError, "cannot write verify.txt");
    txt << outcome.text_report;
  }
  for (const Chart& c : outcome.charts) {
    std::string err;
    if (!write_line_chart(out_dir / "charts" / c.file, c.title, c.x_label, c.y_label, c.series, &err))
      outcome.log.push_back("chart " + c.file + ": " + err);
  }
}

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation; 0 for fewer than two values.
inline double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Seeds in ascending order; rows are always merged in this order.
inline std::vector<std::uint64_t> sorted_seeds(std::vector<std::uint64_t> seeds) {
  std::sort(seeds.begin(), seeds.end());
  return seeds;
}

}  // namespace distill_lab::experiment
