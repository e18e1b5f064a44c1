#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "opticlass/preprocess.hpp"
#include "opticlass/rng.hpp"

namespace opticlass {

enum class Voting { Soft, Hard };

struct Hyperparams {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;     // unbounded when empty
  std::optional<std::size_t> max_features;  // floor(sqrt(F)) when empty
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  bool bootstrap = true;
  std::uint64_t seed = 42;
  Voting voting = Voting::Soft;

  bool operator==(const Hyperparams&) const = default;
};

/// max_features to use for F flattened features; validates the bound.
std::size_t effective_max_features(const Hyperparams& h, std::size_t num_features);

/// Gini impurity 1 - sum_c p_c^2. Throws DomainError on a zero total.
double gini(std::span<const std::size_t> class_counts);

/// Column-major training matrix with dense label ids.
class TrainingMatrix {
 public:
  TrainingMatrix(std::size_t num_features, std::size_t num_classes);
  static TrainingMatrix from_features(const FeatureSet& vs);

  /// Appends one sample; `x` must have num_features() values.
  void add_row(std::span<const double> x, LabelId label);

  std::size_t rows() const noexcept { return labels_.size(); }
  std::size_t num_features() const noexcept { return num_features_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  double value(std::size_t row, std::size_t feature) const noexcept {
    return columns_[feature][row];
  }
  LabelId label(std::size_t row) const noexcept { return labels_[row]; }

 private:
  std::size_t num_features_;
  std::size_t num_classes_;
  std::vector<std::vector<double>> columns_;
  std::vector<LabelId> labels_;
};

struct SplitCandidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  double impurity_decrease = 0.0;
};

/// Best Gini split of all rows of `m` over `candidate_features`: thresholds at
/// midpoints of consecutive distinct values, children must each hold at least
/// `min_samples_leaf` rows. Ties go to the lowest feature, then the lowest
/// threshold. Returns nullopt when no split has a positive decrease.
std::optional<SplitCandidate> best_split(const TrainingMatrix& m,
                                         std::span<const std::size_t> candidate_features,
                                         std::size_t min_samples_leaf = 1);

struct ClassCount {
  LabelId label = 0;
  std::uint32_t count = 0;

  bool operator==(const ClassCount&) const = default;
};

/// Either a split (feature >= 0; x[feature] <= threshold goes left) or a leaf
/// holding its class counts as a sorted sparse slice of DecisionTree::counts.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::uint32_t counts_begin = 0;
  std::uint32_t counts_size = 0;

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<ClassCount> counts;

  std::span<const ClassCount> leaf_counts(const TreeNode& leaf) const {
    return {counts.data() + leaf.counts_begin, leaf.counts_size};
  }
  /// Index of the leaf reached by `x` (flattened features).
  std::size_t route(std::span<const double> x) const;
  std::size_t depth() const;
  std::size_t leaf_count() const;

  bool operator==(const DecisionTree&) const = default;
};

/// Grows one tree on the rows with positive `sample_weights` (bootstrap
/// multiplicities). Each node draws max_features features from `rng`; if none
/// of them admits a valid threshold, the remaining features are visited in
/// random order until one does. Growth stops at purity, max_depth,
/// min_samples_split, min_samples_leaf, or when no feature can be split.
/// Splits whose impurity decrease is exactly zero are allowed.
DecisionTree grow_tree(const TrainingMatrix& m, std::span<const std::uint32_t> sample_weights,
                       const Hyperparams& h, Rng& rng);

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::vector<std::string> label_table;
  std::size_t feature_width = 1;
  Hyperparams hyperparams;  // max_features resolved at fit time

  std::size_t num_features() const noexcept { return 3 * feature_width; }
};

/// Trains n_trees trees; tree t uses its own generator seeded from
/// (seed, t), so the model does not depend on `threads` (0 = hardware).
/// Throws ParameterError with fewer than two labels or two vectors.
ForestModel fit(const FeatureSet& train, const Hyperparams& h, unsigned threads = 0);

/// Averaged leaf class frequencies (soft) or vote shares (hard), indexed by
/// label_table. Throws ParameterError when the vector width does not match.
std::vector<double> predict_proba(const ForestModel& m, const FeatureVector& x);
std::vector<double> predict_proba(const ForestModel& m, std::span<const double> features);

/// argmax of predict_proba, lowest label index on ties.
LabelId predict(const ForestModel& m, const FeatureVector& x);

/// predict() for every vector, optionally multi-threaded.
std::vector<LabelId> predict_all(const ForestModel& m, const FeatureSet& vs, unsigned threads = 0);

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON document (schema in docs/model_format.md).
std::string save_model(const ForestModel& m);
/// Throws ModelFormatError on empty, truncated, corrupt or mismatched input.
ForestModel load_model(std::string_view bytes);

void save_model_file(const ForestModel& m, const std::filesystem::path& path);
ForestModel load_model_file(const std::filesystem::path& path);

unsigned resolve_threads(unsigned requested);

}  // namespace opticlass
