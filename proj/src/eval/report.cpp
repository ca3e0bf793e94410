#include "tgseg/eval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "tgseg/data/dataset.hpp"

namespace tgseg::eval {

namespace {

// Shortest-or-17-digit form: re-parsing reproduces the double exactly.
std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string SweepReport::to_csv() const {
  std::ostringstream out;
  out << "condition,dice,miou\n";
  for (const auto& r : rows)
    out << r.condition << ',' << fmt_g(r.dice) << ',' << fmt_g(r.miou) << '\n';
  return out.str();
}

SweepReport SweepReport::from_csv(const std::string& text) {
  SweepReport rep;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "condition,dice,miou")
    throw MetricError("sweep csv: bad header '" + line + "'");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto parts = split(line, ',');
    if (parts.size() != 3) throw MetricError("sweep csv: bad row '" + line + "'");
    rep.rows.push_back({parts[0], std::stod(parts[1]), std::stod(parts[2])});
  }
  return rep;
}

std::string SweepReport::to_table() const {
  std::size_t w = 9;  // "condition"
  for (const auto& r : rows) w = std::max(w, r.condition.size());
  std::ostringstream out;
  out << std::string(w - 9, ' ') << "condition      dice      miou\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%*s  %8.4f  %8.4f\n", static_cast<int>(w),
                  r.condition.c_str(), r.dice, r.miou);
    out << buf;
  }
  return out.str();
}

std::vector<std::string> parse_grid(const std::string& grid) {
  if (grid.empty()) throw std::invalid_argument("sweep grid is empty");
  const auto items = split(grid, ',');
  std::set<std::string> seen;
  for (const auto& item : items) {
    if (item.empty()) throw std::invalid_argument("sweep grid has an empty condition");
    if (!seen.insert(item).second)
      throw std::invalid_argument("sweep grid repeats condition '" + item + "'");
    if (item.rfind("fraction:", 0) == 0) {
      const double pct = std::stod(item.substr(9));
      if (!(pct > 0.0 && pct <= 100.0))
        throw std::invalid_argument("fraction percent must lie in (0,100], got " + item);
    } else {
      (void)aug::CorruptionSpec::parse(item);  // validates
    }
  }
  return items;
}

SweepReport robustness_sweep(const model::Model& m, const data::Dataset& ds,
                             const std::vector<std::string>& grid,
                             std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("sweep grid is empty");
  SweepReport rep;
  for (const auto& cond : grid) {
    MetricResult r;
    if (cond.rfind("fraction:", 0) == 0) {
      const double pct = std::stod(cond.substr(9));
      const data::Dataset sub = data::subsample(ds, pct / 100.0, seed);
      r = evaluate_model(m, sub, nullptr, seed);
    } else {
      const aug::CorruptionSpec spec = aug::CorruptionSpec::parse(cond);
      r = evaluate_model(m, ds, &spec, seed);
    }
    rep.rows.push_back({cond, r.dice, r.iou});
  }
  return rep;
}

std::string metrics_csv_to_markdown(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  std::ostringstream out;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto parts = split(line, ',');
    out << '|';
    for (const auto& p : parts) out << ' ' << p << " |";
    out << '\n';
    if (header) {
      out << '|';
      for (std::size_t i = 0; i < parts.size(); ++i) out << " --- |";
      out << '\n';
      header = false;
    }
  }
  return out.str();
}

}  // namespace tgseg::eval
