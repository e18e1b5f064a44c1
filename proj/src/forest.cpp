#include "opticlass/forest.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <numeric>
#include <limits>
#include <mutex>
#include <thread>

#include "opticlass/error.hpp"

namespace opticlass {

namespace {

constexpr double kTieEpsilon = 1e-12;

struct SortedEntry {
  double value;
  LabelId label;
  std::uint32_t weight;
};

// Split search over one node. Shared by best_split() and the tree grower so
// the brute-force oracle exercises the production kernel.
class NodeSplitter {
 public:
  NodeSplitter(const TrainingMatrix& m, std::size_t min_samples_leaf)
      : m_(m), min_leaf_(std::max<std::size_t>(min_samples_leaf, 1)), left_(m.num_classes(), 0) {}

  // `rows` are the node's rows; `weights` is indexed by row. `parent` holds the
  // node's weighted class counts summing to `total`. With require_positive the
  // result must strictly lower the impurity; otherwise any valid threshold will
  // do and the decrease is reported as max(decrease, 0).
  std::optional<SplitCandidate> search(std::span<const std::uint32_t> rows,
                                       std::span<const std::uint32_t> weights,
                                       std::span<const std::size_t> features,
                                       std::span<const std::uint64_t> parent, std::uint64_t total,
                                       bool require_positive) {
    std::uint64_t parent_sumsq = 0;
    for (auto c : parent) parent_sumsq += c * c;
    const double w_total = static_cast<double>(total);
    const double parent_term = static_cast<double>(parent_sumsq) / (w_total * w_total);

    std::optional<SplitCandidate> best;
    double best_decrease = -std::numeric_limits<double>::infinity();
    for (std::size_t f : features) {
      buffer_.clear();
      for (auto r : rows) buffer_.push_back({m_.value(r, f), m_.label(r), weights[r]});
      if (buffer_.size() < 2) continue;
      std::sort(buffer_.begin(), buffer_.end(),
                [](const SortedEntry& a, const SortedEntry& b) { return a.value < b.value; });
      if (buffer_.front().value == buffer_.back().value) continue;

      std::fill(left_.begin(), left_.end(), 0);
      std::uint64_t sum_left = 0, sum_right = parent_sumsq;
      std::uint64_t n_left = 0, n_right = total;
      for (std::size_t i = 0; i + 1 < buffer_.size(); ++i) {
        const auto& e = buffer_[i];
        const std::uint64_t w = e.weight;
        const std::uint64_t c_left = left_[e.label];
        const std::uint64_t c_right = parent[e.label] - c_left;
        sum_left += (2 * c_left + w) * w;
        sum_right -= (2 * c_right - w) * w;
        left_[e.label] += w;
        n_left += w;
        n_right -= w;
        if (!(e.value < buffer_[i + 1].value)) continue;
        if (n_left < min_leaf_ || n_right < min_leaf_) continue;
        const double proxy = static_cast<double>(sum_left) / static_cast<double>(n_left) +
                             static_cast<double>(sum_right) / static_cast<double>(n_right);
        const double decrease = proxy / w_total - parent_term;
        if (decrease > best_decrease + kTieEpsilon) {
          best_decrease = decrease;
          double threshold = 0.5 * (e.value + buffer_[i + 1].value);
          // Adjacent doubles: the midpoint may round up onto the right value.
          if (!(threshold < buffer_[i + 1].value)) threshold = e.value;
          best = SplitCandidate{f, threshold, decrease};
        }
      }
    }
    if (!best) return std::nullopt;
    if (require_positive && !(best->impurity_decrease > kTieEpsilon)) return std::nullopt;
    best->impurity_decrease = std::max(best->impurity_decrease, 0.0);
    return best;
  }

 private:
  const TrainingMatrix& m_;
  std::size_t min_leaf_;
  std::vector<SortedEntry> buffer_;
  std::vector<std::uint64_t> left_;
};

}  // namespace

// ---------------------------------------------------------------------------

std::size_t effective_max_features(const Hyperparams& h, std::size_t num_features) {
  if (num_features == 0) throw ParameterError("no features");
  const std::size_t mf = h.max_features.value_or(std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(num_features))))));
  if (mf < 1 || mf > num_features) {
    throw ParameterError("max_features must lie in [1, " + std::to_string(num_features) + "]");
  }
  return mf;
}

double gini(std::span<const std::size_t> class_counts) {
  double total = 0.0;
  for (auto c : class_counts) total += static_cast<double>(c);
  if (total <= 0.0) throw DomainError("gini of an empty node");
  double sumsq = 0.0;
  for (auto c : class_counts) {
    const double p = static_cast<double>(c) / total;
    sumsq += p * p;
  }
  return 1.0 - sumsq;
}

TrainingMatrix::TrainingMatrix(std::size_t num_features, std::size_t num_classes)
    : num_features_(num_features), num_classes_(num_classes), columns_(num_features) {}

TrainingMatrix TrainingMatrix::from_features(const FeatureSet& vs) {
  TrainingMatrix m(3 * vs.width, vs.labels.size());
  for (auto& c : m.columns_) c.reserve(vs.size());
  m.labels_.reserve(vs.size());
  std::array<double, 3 * kMaxWindow> x{};
  for (const auto& v : vs.vectors) {
    if (v.width != vs.width) throw ParameterError("feature vector width mismatch");
    for (std::size_t i = 0; i < v.dimension(); ++i) x[i] = v.feature(i);
    m.add_row({x.data(), v.dimension()}, v.label);
  }
  return m;
}

void TrainingMatrix::add_row(std::span<const double> x, LabelId label) {
  if (x.size() != num_features_) throw ParameterError("row has wrong number of features");
  if (label >= num_classes_) throw ParameterError("label out of range");
  for (std::size_t f = 0; f < num_features_; ++f) columns_[f].push_back(x[f]);
  labels_.push_back(label);
}

std::optional<SplitCandidate> best_split(const TrainingMatrix& m,
                                         std::span<const std::size_t> candidate_features,
                                         std::size_t min_samples_leaf) {
  std::vector<std::uint32_t> rows(m.rows());
  std::iota(rows.begin(), rows.end(), 0u);
  const std::vector<std::uint32_t> weights(m.rows(), 1u);
  std::vector<std::uint64_t> parent(m.num_classes(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r) ++parent[m.label(r)];
  std::vector<std::size_t> features(candidate_features.begin(), candidate_features.end());
  std::sort(features.begin(), features.end());
  for (auto f : features) {
    if (f >= m.num_features()) throw ParameterError("candidate feature out of range");
  }
  NodeSplitter splitter(m, min_samples_leaf);
  return splitter.search(rows, weights, features, parent, m.rows(), true);
}

// ---------------------------------------------------------------------------
// Trees

std::size_t DecisionTree::route(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return i;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf()) {
      d[nodes[i].left] = d[i] + 1;
      d[nodes[i].right] = d[i] + 1;
    }
  }
  return best;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

DecisionTree grow_tree(const TrainingMatrix& m, std::span<const std::uint32_t> sample_weights,
                       const Hyperparams& h, Rng& rng) {
  if (sample_weights.size() != m.rows()) throw ParameterError("one weight per row required");
  const std::size_t num_features = m.num_features();
  const std::size_t max_features = effective_max_features(h, num_features);

  std::vector<std::uint32_t> rows;
  rows.reserve(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (sample_weights[r] > 0) rows.push_back(static_cast<std::uint32_t>(r));
  }
  if (rows.empty()) throw ParameterError("cannot grow a tree on an empty sample");

  DecisionTree tree;
  tree.nodes.emplace_back();
  NodeSplitter splitter(m, h.min_samples_leaf);
  std::vector<std::uint64_t> counts(m.num_classes());
  std::vector<std::size_t> features(num_features);

  struct Work {
    std::uint32_t node;
    std::size_t begin, end, depth;
  };
  std::vector<Work> stack{{0, 0, rows.size(), 0}};

  auto make_leaf = [&](std::uint32_t node) {
    TreeNode& n = tree.nodes[node];
    n.feature = -1;
    n.counts_begin = static_cast<std::uint32_t>(tree.counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] > 0) {
        tree.counts.push_back({static_cast<LabelId>(c), static_cast<std::uint32_t>(counts[c])});
      }
    }
    n.counts_size = static_cast<std::uint32_t>(tree.counts.size() - n.counts_begin);
  };

  while (!stack.empty()) {
    const Work w = stack.back();
    stack.pop_back();
    const std::span<const std::uint32_t> node_rows(rows.data() + w.begin, w.end - w.begin);

    std::fill(counts.begin(), counts.end(), 0);
    std::uint64_t total = 0;
    for (auto r : node_rows) {
      counts[m.label(r)] += sample_weights[r];
      total += sample_weights[r];
    }
    const auto distinct = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });
    const bool depth_capped = h.max_depth && w.depth >= *h.max_depth;
    if (distinct <= 1 || depth_capped || total < h.min_samples_split ||
        total < 2 * std::max<std::size_t>(h.min_samples_leaf, 1)) {
      make_leaf(w.node);
      continue;
    }

    std::iota(features.begin(), features.end(), std::size_t{0});
    for (std::size_t i = 0; i < num_features; ++i) {
      std::swap(features[i], features[i + rng.below(num_features - i)]);
    }
    std::vector<std::size_t> drawn(features.begin(),
                                   features.begin() + static_cast<std::ptrdiff_t>(max_features));
    std::sort(drawn.begin(), drawn.end());
    auto split = splitter.search(node_rows, sample_weights, drawn, counts, total, false);
    for (std::size_t j = max_features; !split && j < num_features; ++j) {
      const std::size_t one[1] = {features[j]};
      split = splitter.search(node_rows, sample_weights, one, counts, total, false);
    }
    if (!split) {
      make_leaf(w.node);
      continue;
    }

    auto first = rows.begin() + static_cast<std::ptrdiff_t>(w.begin);
    auto last = rows.begin() + static_cast<std::ptrdiff_t>(w.end);
    auto mid = std::partition(first, last, [&](std::uint32_t r) {
      return m.value(r, split->feature) <= split->threshold;
    });
    const std::size_t mid_pos = static_cast<std::size_t>(mid - rows.begin());

    const auto left = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& n = tree.nodes[w.node];
    n.feature = static_cast<std::int32_t>(split->feature);
    n.threshold = split->threshold;
    n.left = left;
    n.right = left + 1;
    stack.push_back({left + 1, mid_pos, w.end, w.depth + 1});
    stack.push_back({left, w.begin, mid_pos, w.depth + 1});
  }
  // Store leaf counts in node order so the layout matches a reloaded model.
  std::vector<ClassCount> ordered;
  ordered.reserve(tree.counts.size());
  for (auto& n : tree.nodes) {
    if (!n.is_leaf()) continue;
    const auto begin = static_cast<std::uint32_t>(ordered.size());
    ordered.insert(ordered.end(), tree.counts.begin() + n.counts_begin,
                   tree.counts.begin() + n.counts_begin + n.counts_size);
    n.counts_begin = begin;
  }
  tree.counts = std::move(ordered);
  return tree;
}

// ---------------------------------------------------------------------------
// Forest

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

ForestModel fit(const FeatureSet& train, const Hyperparams& h, unsigned threads) {
  if (h.n_trees < 1) throw ParameterError("n_trees must be at least 1");
  if (train.size() < 2) throw ParameterError("fit needs at least two feature vectors");
  std::vector<char> present(train.labels.size(), 0);
  for (const auto& v : train.vectors) present[v.label] = 1;
  if (std::count(present.begin(), present.end(), 1) < 2) {
    throw ParameterError("fit needs at least two distinct labels");
  }

  const TrainingMatrix m = TrainingMatrix::from_features(train);
  ForestModel model;
  model.label_table = train.labels;
  model.feature_width = train.width;
  model.hyperparams = h;
  model.hyperparams.max_features = effective_max_features(h, m.num_features());
  model.trees.resize(h.n_trees);

  parallel_for(h.n_trees, threads, [&](std::size_t t) {
    Rng rng(derive_seed(h.seed, t));
    std::vector<std::uint32_t> weights(m.rows(), h.bootstrap ? 0u : 1u);
    if (h.bootstrap) {
      for (std::size_t i = 0; i < m.rows(); ++i) ++weights[rng.below(m.rows())];
    }
    model.trees[t] = grow_tree(m, weights, model.hyperparams, rng);
  });
  return model;
}

std::vector<double> predict_proba(const ForestModel& m, std::span<const double> features) {
  if (features.size() != m.num_features()) {
    throw ParameterError("model expects " + std::to_string(m.feature_width) +
                         " point(s) per input (" + std::to_string(m.num_features()) +
                         " features), got " + std::to_string(features.size()) + " features");
  }
  std::vector<double> proba(m.label_table.size(), 0.0);
  for (const auto& tree : m.trees) {
    const auto leaf = tree.leaf_counts(tree.nodes[tree.route(features)]);
    if (m.hyperparams.voting == Voting::Hard) {
      const ClassCount* top = &leaf[0];
      for (const auto& c : leaf) {
        if (c.count > top->count) top = &c;
      }
      proba[top->label] += 1.0;
    } else {
      double total = 0.0;
      for (const auto& c : leaf) total += c.count;
      for (const auto& c : leaf) proba[c.label] += c.count / total;
    }
  }
  for (auto& p : proba) p /= static_cast<double>(m.trees.size());
  return proba;
}

std::vector<double> predict_proba(const ForestModel& m, const FeatureVector& x) {
  if (x.width != m.feature_width) {
    throw ParameterError("model expects " + std::to_string(m.feature_width) +
                         " point(s) per input, got " + std::to_string(x.width));
  }
  std::array<double, 3 * kMaxWindow> f{};
  for (std::size_t i = 0; i < x.dimension(); ++i) f[i] = x.feature(i);
  return predict_proba(m, std::span<const double>(f.data(), x.dimension()));
}

LabelId predict(const ForestModel& m, const FeatureVector& x) {
  const auto proba = predict_proba(m, x);
  return static_cast<LabelId>(std::max_element(proba.begin(), proba.end()) - proba.begin());
}

std::vector<LabelId> predict_all(const ForestModel& m, const FeatureSet& vs, unsigned threads) {
  std::vector<LabelId> out(vs.size());
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (vs.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t end = std::min(vs.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) out[i] = predict(m, vs.vectors[i]);
  });
  return out;
}

}  // namespace opticlass
