#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "opticlass/augment.hpp"
#include "opticlass/forest.hpp"
#include "opticlass/ingest.hpp"
#include "opticlass/preprocess.hpp"

namespace opticlass {

enum class Balancing { None, Oversample, Undersample, Augment };

std::string_view balancing_name(Balancing b);

/// One feature scheme plus at most one balancing method.
struct Strategy {
  std::string name;
  std::size_t window = 1;
  Balancing balancing = Balancing::None;
  bool per_bin_models = false;  // one forest per spectral bin instead of a global one

  bool operator==(const Strategy&) const = default;
};

/// RD, FE1, FE2, SBB, SBB-FE1, SBB-FE2, OS, US, DA (case-insensitive).
/// Throws ParameterError for anything else.
Strategy strategy_by_name(std::string_view name);

/// Builds a strategy from CLI-style knobs and names it after them
/// (e.g. "FE1+OS", "RD:per-bin").
Strategy make_strategy(std::size_t window, Balancing balancing, bool per_bin_models = false);

/// Fraction of exact matches. Throws ParameterError on empty or unequal input.
double accuracy(std::span<const LabelId> predictions, std::span<const LabelId> truths);

using BinAccuracy = std::array<std::optional<double>, kNumBins>;

/// Accuracy within each bin; bins without samples stay empty.
BinAccuracy per_bin_accuracy(std::span<const LabelId> predictions, std::span<const LabelId> truths,
                             std::span<const SpectralBin> bins);

struct RunConfig {
  SplitSpec split;
  Hyperparams forest;
  AugmentOptions augment;
  std::optional<int> truncate_digits;  // applied to both partitions after the split
  unsigned threads = 0;
};

struct ExperimentReport {
  std::string strategy;
  std::uint64_t seed = 0;
  bool paper_mode = false;
  std::optional<int> digits;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  BinAccuracy per_bin_test_accuracy{};
  /// Bin counts of the vectors being balanced, before and after balancing
  /// (the whole set in paper mode, the training partition otherwise).
  BinCounts counts_before{};
  BinCounts counts_after{};
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  /// Test vectors whose fingerprint also occurs in the training partition.
  std::size_t leaked_test_vectors = 0;
  std::vector<std::string> labels;
  /// confusion[truth][predicted] over the test partition.
  std::vector<std::vector<std::size_t>> confusion;

  bool operator==(const ExperimentReport&) const = default;
};

/// Number of test vectors whose fingerprint also occurs in `train`.
std::size_t fingerprint_overlap(const FeatureSet& train, const FeatureSet& test);

/// Feature scheme, balancing/augmentation, split, optional truncation, fit and
/// evaluation. Paper mode balances (and augments) before splitting; otherwise
/// only the training partition is balanced and augmentation fits only the
/// training records. Failures are rethrown as PipelineError naming the stage.
ExperimentReport run_experiment(const Dataset& d, const Strategy& s, const RunConfig& config);

/// run_experiment once per digit count with truncate_digits set.
std::vector<ExperimentReport> precision_sweep(const Dataset& d, std::span<const int> digits,
                                              const Strategy& s, const RunConfig& config);

}  // namespace opticlass
