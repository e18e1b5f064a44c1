#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "opticlass/error.hpp"
#include "opticlass/preprocess.hpp"
#include "test_util.hpp"

using namespace opticlass;

namespace {

// Interval oracle written straight from the bin table.
SpectralBin bin_by_interval(double l) {
  if (l < 0.40) return SpectralBin::UV;
  if (l < 0.75) return SpectralBin::VIS;
  if (l < 1.50) return SpectralBin::NearIR;
  if (l < 4.0) return SpectralBin::IR;
  return SpectralBin::FarIR;
}

Dataset one_curve(const std::vector<double>& wavelengths, const std::string& book = "a") {
  DatasetBuilder b;
  for (double l : wavelengths) b.add(CompoundId{"s", book, "p"}, l, 1.0 + l / 10, 0.0);
  return std::move(b).build();
}

FeatureSet bins_set(const std::map<SpectralBin, std::size_t>& counts, std::size_t labels = 3) {
  const std::map<SpectralBin, double> wavelength{{SpectralBin::UV, 0.3},
                                                 {SpectralBin::VIS, 0.5},
                                                 {SpectralBin::NearIR, 1.0},
                                                 {SpectralBin::IR, 2.0},
                                                 {SpectralBin::FarIR, 10.0}};
  FeatureSet s = test::empty_set(labels);
  std::uint64_t fp = 1;
  for (const auto& [bin, count] : counts) {
    for (std::size_t i = 0; i < count; ++i) {
      s.vectors.push_back(test::point(wavelength.at(bin), 1.0 + 0.001 * static_cast<double>(i), 0.0,
                                      static_cast<LabelId>(i % labels), fp++));
    }
  }
  return s;
}

std::multiset<std::uint64_t> fingerprints(const FeatureSet& s) {
  std::multiset<std::uint64_t> out;
  for (const auto& v : s.vectors) out.insert(v.fingerprint);
  return out;
}

}  // namespace

TEST_SUITE("preprocess") {

TEST_CASE("assign_bin boundaries") {
  CHECK(assign_bin(0.589) == SpectralBin::VIS);
  CHECK(assign_bin(0.40) == SpectralBin::VIS);
  CHECK(assign_bin(10.6) == SpectralBin::FarIR);
  CHECK(assign_bin(0.3999) == SpectralBin::UV);
  CHECK(assign_bin(0.75) == SpectralBin::NearIR);
  CHECK(assign_bin(1.50) == SpectralBin::IR);
  CHECK(assign_bin(4.0) == SpectralBin::FarIR);
  CHECK(assign_bin(1e-9) == SpectralBin::UV);
  CHECK_THROWS_AS(assign_bin(0.0), DomainError);
  CHECK_THROWS_AS(assign_bin(-1.0), DomainError);
}

TEST_CASE("bins partition the positive wavelengths") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> exponent(-3.0, 3.0);
  for (int i = 0; i < 10000; ++i) {
    const double l = std::pow(10.0, exponent(gen));
    CHECK(assign_bin(l) == bin_by_interval(l));
  }
  for (SpectralBin b : kAllBins) CHECK(parse_bin(bin_name(b)) == b);
}

TEST_CASE("windows of three over seven points") {
  const Dataset d = one_curve({0.9, 0.3, 0.5, 0.7, 0.4, 0.6, 0.8});
  const FeatureSet w3 = window_features(d, 3);
  REQUIRE(w3.size() == 2);
  CHECK(w3.vectors[0].dimension() == 9);
  CHECK(w3.vectors[0].points[0].wavelength_um == 0.3);
  CHECK(w3.vectors[0].points[2].wavelength_um == 0.5);
  CHECK(w3.vectors[1].points[0].wavelength_um == 0.6);
  CHECK(w3.vectors[0].bin == SpectralBin::UV);
  CHECK(w3.vectors[1].bin == SpectralBin::VIS);
}

TEST_CASE("width one maps records one to one") {
  const Dataset d = one_curve({0.9, 0.3, 0.5, 0.7, 0.4, 0.6, 0.8});
  const FeatureSet w1 = window_features(d, 1);
  REQUIRE(w1.size() == 7);
  std::multiset<double> a, b;
  for (const auto& v : w1.vectors) a.insert(v.points[0].wavelength_um);
  for (const auto& r : d.records()) b.insert(r.wavelength_um);
  CHECK(a == b);
  CHECK(w1.vectors[0].feature(0) == 0.3);
  CHECK(w1.vectors[0].feature(1) == doctest::Approx(1.03));
}

TEST_CASE("windows never cross curves") {
  DatasetBuilder b;
  for (int i = 0; i < 5; ++i) b.add(CompoundId{"s", "a", "p1"}, 0.5 + 0.01 * i, 1.4, 0.0);
  for (int i = 0; i < 4; ++i) b.add(CompoundId{"s", "a", "p2"}, 0.5 + 0.01 * i, 1.5, 0.0);
  const FeatureSet w2 = window_features(std::move(b).build(), 2);
  CHECK(w2.size() == 4);  // floor(5/2) + floor(4/2)
  for (const auto& v : w2.vectors) CHECK(v.points[0].n == v.points[1].n);
}

TEST_CASE("window width and cleanliness are validated") {
  const Dataset d = one_curve({0.5, 0.6});
  CHECK_THROWS_AS(window_features(d, 0), ParameterError);
  CHECK_THROWS_AS(window_features(d, 4), ParameterError);
  DatasetBuilder b;
  b.add(CompoundId{"s", "a", "p"}, 0.5, 1.4, std::nullopt);
  CHECK_THROWS_AS(window_features(std::move(b).build(), 1), ParameterError);
}

TEST_CASE("snapshot windows shrink the vector count") {
  const Dataset d = clean(parse_compiled_csv_file(OPTICLASS_TEST_SNAPSHOT).dataset);
  const auto w1 = window_features(d, 1).size();
  const auto w2 = window_features(d, 2).size();
  const auto w3 = window_features(d, 3).size();
  CHECK(w1 == d.size());
  CHECK(w2 < w1);
  CHECK(w3 < w2);
}

TEST_CASE("duplicate windows get distinct fingerprints") {
  DatasetBuilder b;
  b.add(CompoundId{"s", "a", "p"}, 0.5, 1.4, 0.0);
  b.add(CompoundId{"s", "a", "p"}, 0.5, 1.4, 0.0);
  const FeatureSet w = window_features(std::move(b).build(), 1);
  REQUIRE(w.size() == 2);
  CHECK(w.vectors[0].fingerprint != w.vectors[1].fingerprint);
}

TEST_CASE("round_decimal is half-even on the decimal text") {
  // Expected values from an arbitrary-precision decimal library.
  const std::tuple<double, int, double> cases[] = {
      {1.50123, 3, 1.501},   {1.0005, 3, 1.0},         {1.0015, 3, 1.002},   {0.25, 1, 0.2},
      {0.35, 1, 0.4},        {2.675, 2, 2.68},         {1.9999, 3, 2.0},     {9.9995, 3, 10.0},
      {0.0004999, 3, 0.0},   {1.4906, 2, 1.49},        {1e-07, 3, 0.0},      {123.456789, 4, 123.4568},
      {0.7138939, 2, 0.71},  {1.1098655, 4, 1.1099},   {1.877, 5, 1.877},    {0.039503975, 4, 0.0395},
      {0.7781, 2, 0.78},     {2.986935, 5, 2.98694},   {2.509384, 4, 2.5094}, {1.9172, 2, 1.92},
  };
  for (const auto& [x, d, expected] : cases) {
    CAPTURE(x);
    CAPTURE(d);
    CHECK(round_decimal(x, d) == expected);
  }
}

TEST_CASE("truncate_precision touches only n and k") {
  FeatureSet s = test::empty_set(1);
  s.vectors.push_back(test::point(0.123456, 1.50123, 0.000449, 0));
  const FeatureSet t = truncate_precision(s, 3);
  CHECK(t.size() == 1);
  CHECK(t.vectors[0].points[0].wavelength_um == 0.123456);
  CHECK(t.vectors[0].points[0].n == 1.501);
  CHECK(t.vectors[0].points[0].k == 0.0);
  CHECK_THROWS_AS(truncate_precision(s, 0), ParameterError);
  // Twelve digits leave six-digit data alone.
  CHECK(truncate_precision(s, 12).vectors[0].points[0].n == 1.50123);
}

TEST_CASE("truncation is idempotent and coarsest-wins") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  FeatureSet s = test::empty_set(1);
  for (int i = 0; i < 500; ++i) s.vectors.push_back(test::point(0.5, u(gen), u(gen) / 100, 0));
  for (int d = 1; d <= 6; ++d) {
    const FeatureSet once = truncate_precision(s, d);
    const FeatureSet twice = truncate_precision(once, d);
    for (int finer = d; finer <= 8; ++finer) {
      const FeatureSet chained = truncate_precision(once, finer);
      for (std::size_t i = 0; i < s.size(); ++i) {
        REQUIRE(chained.vectors[i].points[0].n == once.vectors[i].points[0].n);
        REQUIRE(chained.vectors[i].points[0].k == once.vectors[i].points[0].k);
      }
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      REQUIRE(twice.vectors[i].points[0].n == once.vectors[i].points[0].n);
    }
  }
}

TEST_CASE("split sizes and determinism") {
  FeatureSet s = test::empty_set(5);
  for (int i = 0; i < 100; ++i) {
    s.vectors.push_back(test::point(0.4 + 0.01 * i, 1.5, 0.0, static_cast<LabelId>(i % 5), static_cast<std::uint64_t>(i)));
  }
  const Split a = split(s, SplitSpec{0.75, 7, false});
  const Split b = split(s, SplitSpec{0.75, 7, false});
  CHECK(a.train.size() == 75);
  CHECK(a.test.size() == 25);
  CHECK(fingerprints(a.train) == fingerprints(b.train));
  const Split c = split(s, SplitSpec{0.75, 8, false});
  CHECK(fingerprints(a.train) != fingerprints(c.train));
}

TEST_CASE("split of four same-label vectors") {
  FeatureSet s = test::empty_set(1);
  for (int i = 0; i < 4; ++i) s.vectors.push_back(test::point(0.5, 1.5 + i, 0.0, 0, static_cast<std::uint64_t>(i)));
  const Split p = split(s, SplitSpec{});
  CHECK(p.train.size() == 3);
  CHECK(p.test.size() == 1);
  CHECK(p.train.vectors[0].label == p.test.vectors[0].label);
}

TEST_CASE("split rejects degenerate input") {
  FeatureSet s = test::empty_set(1);
  s.vectors.push_back(test::point(0.5, 1.5, 0.0, 0));
  CHECK_THROWS_AS(split(s, SplitSpec{}), ParameterError);
  s.vectors.push_back(test::point(0.6, 1.5, 0.0, 0));
  CHECK_THROWS_AS(split(s, SplitSpec{1.0, 1, false}), ParameterError);
  CHECK_THROWS_AS(split(s, SplitSpec{0.0, 1, false}), ParameterError);
}

TEST_CASE("split is a partition that covers every repeated label") {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t labels = 1 + gen() % 12;
    const std::size_t n = 2 + gen() % 40;
    FeatureSet s = test::empty_set(labels);
    for (std::size_t i = 0; i < n; ++i) {
      s.vectors.push_back(test::point(0.5, 1.0, 0.0, static_cast<LabelId>(gen() % labels), i));
    }
    const double fraction = 0.05 + 0.9 * static_cast<double>(gen() % 1000) / 1000.0;
    const std::uint64_t seed = gen();

    std::map<LabelId, std::size_t> total;
    for (const auto& v : s.vectors) ++total[v.label];
    std::size_t repeated = 0;
    for (const auto& [l, c] : total) repeated += c >= 2;
    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n - 1);
    if (repeated > n_train) {
      // Not every repeated label fits on the training side.
      CHECK_THROWS_AS(split(s, SplitSpec{fraction, seed, false}), ParameterError);
      continue;
    }
    const Split p = split(s, SplitSpec{fraction, seed, false});

    auto all = fingerprints(p.train);
    for (auto f : fingerprints(p.test)) all.insert(f);
    REQUIRE(all == fingerprints(s));
    REQUIRE(p.train.size() == n_train);

    std::map<LabelId, std::size_t> in_train;
    for (const auto& v : p.train.vectors) ++in_train[v.label];
    for (const auto& [l, c] : total) {
      if (c >= 2) REQUIRE(in_train[l] >= 1);
    }
  }
}

TEST_CASE("undersample to the smallest bin") {
  const FeatureSet s = bins_set({{SpectralBin::IR, 100}, {SpectralBin::VIS, 10}});
  const FeatureSet u = undersample(s, std::nullopt, 3);
  const auto c = bin_counts(u);
  CHECK(c[index(SpectralBin::IR)] == 10);
  CHECK(c[index(SpectralBin::VIS)] == 10);
  CHECK(c[index(SpectralBin::UV)] == 0);
  // Survivors are a subset of the input without repeats.
  const auto before = fingerprints(s);
  const auto after = fingerprints(u);
  CHECK(std::includes(before.begin(), before.end(), after.begin(), after.end()));
  CHECK(std::set<std::uint64_t>(after.begin(), after.end()).size() == after.size());
  CHECK_THROWS_AS(undersample(s, std::size_t{0}, 3), ParameterError);
  CHECK_THROWS_AS(undersample(test::empty_set(1), std::nullopt, 3), ParameterError);
}

TEST_CASE("oversample to the largest bin") {
  const FeatureSet s = bins_set({{SpectralBin::IR, 100}, {SpectralBin::VIS, 10}});
  const FeatureSet o = oversample(s, std::nullopt, 3);
  const auto c = bin_counts(o);
  CHECK(c[index(SpectralBin::IR)] == 100);
  CHECK(c[index(SpectralBin::VIS)] == 100);
  std::set<std::uint64_t> vis_sources;
  for (const auto& v : s.vectors) {
    if (v.bin == SpectralBin::VIS) vis_sources.insert(v.fingerprint);
  }
  std::size_t duplicates = 0;
  for (std::size_t i = s.size(); i < o.size(); ++i) {
    CHECK(vis_sources.contains(o.vectors[i].fingerprint));
    ++duplicates;
  }
  CHECK(duplicates == 90);
  const SpectralBin uv[] = {SpectralBin::UV};
  CHECK_THROWS_AS(oversample(s, std::nullopt, 3, uv), ParameterError);
}

TEST_CASE("resampling is the identity on balanced bins") {
  const FeatureSet s = bins_set({{SpectralBin::UV, 20}, {SpectralBin::VIS, 20}, {SpectralBin::FarIR, 20}});
  CHECK(fingerprints(undersample(s, std::nullopt, 1)) == fingerprints(s));
  CHECK(fingerprints(oversample(s, std::nullopt, 1)) == fingerprints(s));
}

TEST_CASE("resampling moves bin counts in one direction only") {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<SpectralBin, std::size_t> counts;
    for (SpectralBin b : kAllBins) {
      if (gen() % 4) counts[b] = 1 + gen() % 50;
    }
    if (counts.empty()) continue;
    const FeatureSet s = bins_set(counts);
    const auto before = bin_counts(s);
    const std::optional<std::size_t> target =
        gen() % 2 ? std::optional<std::size_t>{} : std::optional<std::size_t>{1 + gen() % 60};
    const auto under = bin_counts(undersample(s, target, gen()));
    const auto over = bin_counts(oversample(s, target, gen()));
    for (std::size_t b = 0; b < kNumBins; ++b) {
      REQUIRE(under[b] <= before[b]);
      REQUIRE(over[b] >= before[b]);
    }
  }
}

TEST_CASE("append_features remaps labels") {
  FeatureSet a = test::empty_set(2);
  a.vectors.push_back(test::point(0.5, 1.4, 0.0, 1));
  FeatureSet b;
  b.labels = {"c1", "new"};
  b.vectors.push_back(test::point(0.6, 1.5, 0.0, 0));
  b.vectors.push_back(test::point(0.7, 1.6, 0.0, 1));
  append_features(a, b);
  REQUIRE(a.size() == 3);
  CHECK(a.labels == std::vector<std::string>{"c0", "c1", "new"});
  CHECK(a.vectors[1].label == 1);
  CHECK(a.vectors[2].label == 2);
}

}  // TEST_SUITE
