#pragma once

#include <string>
#include <vector>

#include "tgseg/eval/evaluate.hpp"

namespace tgseg::eval {

struct SweepRow {
  std::string condition;
  double dice = 0.0;
  double miou = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;

  std::string to_csv() const;
  static SweepReport from_csv(const std::string& text);
  std::string to_table() const;  // aligned plain text
};

// Parses "a,b,c" into validated condition labels: clean | poisson:<dose> |
// blur:<k>[:<angle>] | fraction:<percent>. Empty grids and duplicate
// conditions are rejected.
std::vector<std::string> parse_grid(const std::string& grid);

// Evaluates one condition per grid entry, in the listed order.
SweepReport robustness_sweep(const model::Model& m, const data::Dataset& ds,
                             const std::vector<std::string>& grid,
                             std::uint64_t seed);

// Markdown rendering of a metrics.csv produced by training.
std::string metrics_csv_to_markdown(const std::string& csv_text);

}  // namespace tgseg::eval
