#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "opticlass/eval.hpp"

namespace opticlass {

/// Strategy runs plus an optional precision sweep, as written by emit_report.
struct ReportBundle {
  std::vector<ExperimentReport> experiments;
  std::vector<ExperimentReport> sweep;
};

// Individual tables. Column order is fixed; accuracies are written with
// round-trip precision and absent per-bin values as empty cells.

/// strategy,seed,paper_mode,digits,train_accuracy,test_accuracy,train_size,test_size,leaked_test_vectors
void write_overall_csv(std::span<const ExperimentReport> rs, std::ostream& out);
/// strategy,phase,UV,VIS,NearIR,IR,FarIR with phase "before" / "after".
void write_bin_counts_csv(std::span<const ExperimentReport> rs, std::ostream& out);
/// strategy,UV,VIS,NearIR,IR,FarIR
void write_per_bin_accuracy_csv(std::span<const ExperimentReport> rs, std::ostream& out);
/// The overall columns followed by per-bin test accuracies, one row per digit count.
void write_precision_sweep_csv(std::span<const ExperimentReport> rs, std::ostream& out);
/// Square table: first column the true label, then one count column per predicted label.
void write_confusion_csv(const ExperimentReport& r, std::ostream& out);

/// File name used for a strategy's confusion table.
std::string confusion_file_name(const std::string& strategy);

/// Writes fig3_overall_accuracy.csv, fig4_bin_counts.csv,
/// fig5_per_bin_accuracy.csv, fig6_precision_sweep.csv and one
/// confusion_<strategy>.csv per experiment into `dir` (created if needed).
void emit_report(const ReportBundle& bundle, const std::filesystem::path& dir);

/// Inverse of emit_report. Sweep rows come back without bin counts, labels
/// or confusion data, which are not written for them. Throws ParseError.
ReportBundle read_report(const std::filesystem::path& dir);

}  // namespace opticlass
