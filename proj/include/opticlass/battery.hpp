#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "opticlass/report.hpp"

namespace opticlass {

struct BatteryOptions {
  std::uint64_t seed = 42;
  std::size_t n_trees = 100;
  unsigned threads = 0;
  std::vector<int> digits{1, 2, 3, 4, 5, 6};
  /// Also run every strategy with balancing confined to the training split.
  bool leakage_safe = true;
  /// Progress sink (one line per finished run); may be empty.
  std::function<void(const std::string&)> progress;
};

/// One reference comparison: `measured` against `target`.
struct Check {
  std::string name;
  std::string target;  // human-readable, e.g. ">= 0.95" or "0.80 +/- 0.05"
  std::optional<double> measured;
  bool pass = false;
  std::string note;
};

struct BatteryResult {
  ReportBundle reference;    // balancing before the split
  ReportBundle leakage_safe; // balancing on the training split only (may be empty)
  std::vector<Check> checks;
  std::vector<std::string> failures;  // "<strategy>: <stage error>" for runs that did not finish
};

/// Strategies of the full battery in report order.
std::vector<Strategy> battery_strategies();

/// Runs RD, FE1, FE2, SBB, OS, US, DA and the precision sweep on RD.
/// A run that fails is recorded in `failures` and the rest continue.
BatteryResult run_battery(const Dataset& d, const BatteryOptions& options);

/// Evaluates the reference targets against a finished reference bundle.
std::vector<Check> evaluate_checks(const ReportBundle& reference);

/// check,target,measured,status,note
void write_summary_csv(const std::vector<Check>& checks, std::ostream& out);

/// emit_report for both bundles (the leakage-safe one under
/// `dir/leakage_safe`) plus summary.csv.
void write_battery(const BatteryResult& result, const std::filesystem::path& dir);

}  // namespace opticlass
