#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "opticlass/error.hpp"
#include "opticlass/forest.hpp"
#include "split_oracle.hpp"
#include "test_util.hpp"

using namespace opticlass;

namespace {

/// Three labels living on separate n bands with some overlap in lambda.
FeatureSet banded(std::size_t per_label, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> l(0.3, 2.0), jitter(-0.01, 0.01);
  FeatureSet s = test::empty_set(3);
  std::uint64_t fp = 0;
  for (LabelId c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_label; ++i) {
      s.vectors.push_back(test::point(l(gen), 1.3 + 0.1 * c + jitter(gen), 0.001 * c, c, fp++));
    }
  }
  return s;
}

std::vector<std::uint32_t> unit_weights(std::size_t n) { return std::vector<std::uint32_t>(n, 1); }

}  // namespace

TEST_SUITE("forest") {

TEST_CASE("gini values") {
  const std::size_t pure[] = {4, 0};
  const std::size_t even[] = {2, 2};
  const std::size_t three[] = {1, 1, 1};
  const std::size_t skew[] = {3, 1};
  CHECK(gini(pure) == 0.0);
  CHECK(gini(even) == doctest::Approx(0.5));
  CHECK(gini(three) == doctest::Approx(2.0 / 3.0));
  CHECK(gini(skew) == doctest::Approx(0.375));
  const std::size_t none[] = {0, 0};
  CHECK_THROWS_AS(gini(none), DomainError);
}

TEST_CASE("best split on a separable feature") {
  TrainingMatrix m(2, 2);
  const double rows[][2] = {{1, 5}, {2, 5}, {3, 5}, {4, 5}};
  const LabelId labels[] = {0, 0, 1, 1};
  for (int i = 0; i < 4; ++i) m.add_row(rows[i], labels[i]);
  const std::size_t features[] = {0, 1};
  const auto s = best_split(m, features);
  REQUIRE(s);
  CHECK(s->feature == 0);
  CHECK(s->threshold == 2.5);
  CHECK(s->impurity_decrease == doctest::Approx(0.5));
}

TEST_CASE("best split prefers the lowest feature on a tie") {
  TrainingMatrix m(2, 2);
  const double rows[][2] = {{1, 1}, {2, 2}};
  const LabelId labels[] = {0, 1};
  for (int i = 0; i < 2; ++i) m.add_row(rows[i], labels[i]);
  const std::size_t features[] = {1, 0};
  const auto s = best_split(m, features);
  REQUIRE(s);
  CHECK(s->feature == 0);
  CHECK(s->threshold == 1.5);
}

TEST_CASE("no split for constant features, pure nodes or tight leaves") {
  TrainingMatrix constant(1, 2);
  const double a[] = {1.0};
  constant.add_row(a, 0);
  constant.add_row(a, 1);
  const std::size_t f0[] = {0};
  CHECK_FALSE(best_split(constant, f0));

  TrainingMatrix pure(1, 2);
  const double b[] = {2.0};
  pure.add_row(a, 0);
  pure.add_row(b, 0);
  CHECK_FALSE(best_split(pure, f0));

  TrainingMatrix tight(1, 2);
  const double c[] = {3.0};
  tight.add_row(a, 0);
  tight.add_row(b, 1);
  tight.add_row(c, 1);
  CHECK(best_split(tight, f0, 1));
  CHECK_FALSE(best_split(tight, f0, 2));
  const std::size_t bad[] = {1};
  CHECK_THROWS_AS(best_split(tight, bad), ParameterError);
}

TEST_CASE("best split agrees with exhaustive search") {
  std::mt19937_64 gen(123);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = test::random_problem(gen, 20, 4, 4);
    std::vector<std::size_t> features(p.num_features);
    std::iota(features.begin(), features.end(), std::size_t{0});
    const std::size_t min_leaf = 1 + gen() % 3;
    CAPTURE(trial);
    CHECK(test::compare_with_oracle(p, features, min_leaf) == "");
  }
}

TEST_CASE("XOR needs a zero-gain root split") {
  TrainingMatrix m(2, 2);
  const double rows[][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const LabelId labels[] = {0, 1, 1, 0};
  for (int i = 0; i < 4; ++i) m.add_row(rows[i], labels[i]);
  const std::size_t both[] = {0, 1};
  CHECK_FALSE(best_split(m, both));  // no strictly positive first split

  Hyperparams h;
  h.bootstrap = false;
  Rng rng(1);
  const auto w = unit_weights(4);
  const DecisionTree t = grow_tree(m, w, h, rng);
  CHECK(t.depth() == 2);
  CHECK(t.leaf_count() == 4);
  for (int i = 0; i < 4; ++i) {
    const auto& leaf = t.nodes[t.route(rows[i])];
    const auto c = t.leaf_counts(leaf);
    REQUIRE(c.size() == 1);
    CHECK(c[0].label == labels[i]);
  }
}

TEST_CASE("depth zero gives a single leaf") {
  TrainingMatrix m(1, 2);
  for (int i = 0; i < 10; ++i) {
    const double x[] = {static_cast<double>(i)};
    m.add_row(x, i < 3 ? 0 : 1);
  }
  Hyperparams h;
  h.max_depth = 0;
  Rng rng(3);
  const DecisionTree t = grow_tree(m, unit_weights(10), h, rng);
  REQUIRE(t.nodes.size() == 1);
  CHECK(t.leaf_counts(t.nodes[0]).size() == 2);
  CHECK(t.leaf_counts(t.nodes[0])[0] == ClassCount{0, 3});
  CHECK(t.leaf_counts(t.nodes[0])[1] == ClassCount{1, 7});
}

TEST_CASE("unbounded trees memorize distinct inputs") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = test::random_problem(gen, 30, 3, 5);
    // Drop repeated rows so the labels are a function of x.
    test::SmallProblem q = p;
    q.x.clear();
    q.y.clear();
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      if (std::find(q.x.begin(), q.x.end(), p.x[i]) == q.x.end()) {
        q.x.push_back(p.x[i]);
        q.y.push_back(p.y[i]);
      }
    }
    const TrainingMatrix m = q.matrix();
    Hyperparams h;
    h.bootstrap = false;
    Rng rng(static_cast<std::uint64_t>(trial));
    const DecisionTree t = grow_tree(m, unit_weights(m.rows()), h, rng);
    for (std::size_t i = 0; i < q.x.size(); ++i) {
      const auto c = t.leaf_counts(t.nodes[t.route(q.x[i])]);
      REQUIRE(c.size() == 1);
      CHECK(c[0].label == q.y[i]);
    }
  }
}

TEST_CASE("training points land in leaves that hold their label") {
  const FeatureSet s = banded(40, 2);
  Hyperparams h;
  h.n_trees = 5;
  const ForestModel model = fit(s, h, 1);
  const TrainingMatrix m = TrainingMatrix::from_features(s);
  for (const auto& tree : model.trees) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double x[] = {m.value(r, 0), m.value(r, 1), m.value(r, 2)};
      const auto c = tree.leaf_counts(tree.nodes[tree.route(x)]);
      std::uint32_t total = 0;
      for (const auto& e : c) total += e.count;
      CHECK(total >= 1);
    }
  }
  // Without bootstrap every training row is in its own tree's sample.
  h.bootstrap = false;
  const ForestModel full = fit(s, h, 1);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double x[] = {m.value(r, 0), m.value(r, 1), m.value(r, 2)};
    for (const auto& tree : full.trees) {
      const auto c = tree.leaf_counts(tree.nodes[tree.route(x)]);
      const bool has = std::any_of(c.begin(), c.end(), [&](const ClassCount& e) { return e.label == m.label(r); });
      REQUIRE(has);
    }
  }
}

TEST_CASE("fit is deterministic and independent of thread count") {
  const FeatureSet s = banded(60, 4);
  Hyperparams h;
  h.n_trees = 12;
  h.seed = 99;
  const ForestModel a = fit(s, h, 1);
  const ForestModel b = fit(s, h, 1);
  const ForestModel c = fit(s, h, 3);
  CHECK(a.trees == b.trees);
  CHECK(a.trees == c.trees);
  CHECK(a.hyperparams.max_features == std::size_t{1});
  h.seed = 100;
  CHECK_FALSE(fit(s, h, 1).trees == a.trees);
}

TEST_CASE("probabilities sum to one and predict is their argmax") {
  const FeatureSet s = banded(50, 6);
  Hyperparams h;
  h.n_trees = 15;
  for (Voting voting : {Voting::Soft, Voting::Hard}) {
    h.voting = voting;
    const ForestModel model = fit(s, h, 1);
    std::mt19937_64 gen(10);
    std::uniform_real_distribution<double> l(0.2, 3.0), n(1.2, 1.6), k(0.0, 0.003);
    FeatureSet probes = test::empty_set(3);
    for (int i = 0; i < 1000; ++i) probes.vectors.push_back(test::point(l(gen), n(gen), k(gen), 0));
    const auto all = predict_all(model, probes, 2);
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const auto p = predict_proba(model, probes.vectors[i]);
      REQUIRE(p.size() == 3);
      const double sum = std::accumulate(p.begin(), p.end(), 0.0);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      const auto best = static_cast<LabelId>(std::max_element(p.begin(), p.end()) - p.begin());
      CHECK(predict(model, probes.vectors[i]) == best);
      CHECK(all[i] == best);
    }
  }
}

TEST_CASE("ties go to the lowest label index") {
  ForestModel m;
  m.label_table = {"a", "b"};
  m.feature_width = 1;
  m.hyperparams.n_trees = 2;
  for (LabelId c : {LabelId{1}, LabelId{0}}) {
    DecisionTree t;
    t.nodes.push_back(TreeNode{});
    t.nodes[0].counts_size = 1;
    t.counts.push_back({c, 1});
    m.trees.push_back(t);
  }
  const double x[] = {0.5, 1.4, 0.0};
  const auto p = predict_proba(m, x);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);
  CHECK(predict(m, test::point(0.5, 1.4, 0.0, 0)) == 0);
}

TEST_CASE("predictions are invariant to a positive affine rescaling of n") {
  const FeatureSet s = banded(40, 12);
  FeatureSet scaled = s;
  for (auto& v : scaled.vectors) v.points[0].n = 3.0 * v.points[0].n + 0.25;
  Hyperparams h;
  h.n_trees = 8;
  const ForestModel a = fit(s, h, 1);
  const ForestModel b = fit(scaled, h, 1);
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> l(0.3, 2.0), n(1.25, 1.55);
  for (int i = 0; i < 300; ++i) {
    const double lv = l(gen), nv = n(gen);
    CHECK(predict(a, test::point(lv, nv, 0.001, 0)) == predict(b, test::point(lv, 3.0 * nv + 0.25, 0.001, 0)));
  }
}

TEST_CASE("fit and predict validate their inputs") {
  FeatureSet one = test::empty_set(2);
  one.vectors.push_back(test::point(0.5, 1.4, 0.0, 0));
  Hyperparams h;
  CHECK_THROWS_AS(fit(one, h), ParameterError);
  one.vectors.push_back(test::point(0.6, 1.4, 0.0, 0));
  CHECK_THROWS_AS(fit(one, h), ParameterError);  // single label
  one.vectors.push_back(test::point(0.7, 1.5, 0.0, 1));
  h.max_features = 4;
  CHECK_THROWS_AS(fit(one, h), ParameterError);
  h.max_features.reset();
  h.n_trees = 2;
  const ForestModel m = fit(one, h, 1);
  const double wide[] = {0.5, 1.4, 0.0, 0.6, 1.4, 0.0};
  CHECK_THROWS_AS(predict_proba(m, wide), ParameterError);
}

}  // TEST_SUITE
