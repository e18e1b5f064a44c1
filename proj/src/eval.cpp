#include "opticlass/eval.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "opticlass/error.hpp"

namespace opticlass {

std::string_view balancing_name(Balancing b) {
  switch (b) {
    case Balancing::None: return "none";
    case Balancing::Oversample: return "OS";
    case Balancing::Undersample: return "US";
    case Balancing::Augment: return "DA";
  }
  return "?";
}

Strategy make_strategy(std::size_t window, Balancing balancing, bool per_bin_models) {
  if (window < 1 || window > kMaxWindow) throw ParameterError("window must be 1, 2 or 3");
  std::string name = window > 1 ? "FE" + std::to_string(window - 1) : "";
  if (balancing != Balancing::None) {
    name += (name.empty() ? "" : "+") + std::string(balancing_name(balancing));
  }
  if (name.empty()) name = "RD";
  if (per_bin_models) name += ":per-bin";
  return Strategy{name, window, balancing, per_bin_models};
}

Strategy strategy_by_name(std::string_view name) {
  std::string upper(name);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  // SBB-style strategies report per-bin accuracy of a global model.
  static const std::vector<Strategy> named = {
      {"RD", 1, Balancing::None, false},       {"FE1", 2, Balancing::None, false},
      {"FE2", 3, Balancing::None, false},      {"SBB", 1, Balancing::None, false},
      {"SBB-FE1", 2, Balancing::None, false},  {"SBB-FE2", 3, Balancing::None, false},
      {"OS", 1, Balancing::Oversample, false}, {"US", 1, Balancing::Undersample, false},
      {"DA", 1, Balancing::Augment, false},
  };
  for (const auto& s : named) {
    if (s.name == upper) return s;
  }
  throw ParameterError("unknown strategy '" + std::string(name) +
                       "' (expected RD, FE1, FE2, SBB, SBB-FE1, SBB-FE2, OS, US or DA)");
}

double accuracy(std::span<const LabelId> predictions, std::span<const LabelId> truths) {
  if (predictions.size() != truths.size()) throw ParameterError("accuracy: length mismatch");
  if (predictions.empty()) throw ParameterError("accuracy: no samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == truths[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

BinAccuracy per_bin_accuracy(std::span<const LabelId> predictions, std::span<const LabelId> truths,
                             std::span<const SpectralBin> bins) {
  if (predictions.size() != truths.size() || bins.size() != truths.size()) {
    throw ParameterError("per_bin_accuracy: length mismatch");
  }
  if (predictions.empty()) throw ParameterError("per_bin_accuracy: no samples");
  std::array<std::size_t, kNumBins> hits{}, totals{};
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    ++totals[index(bins[i])];
    hits[index(bins[i])] += predictions[i] == truths[i];
  }
  BinAccuracy out{};
  for (std::size_t b = 0; b < kNumBins; ++b) {
    if (totals[b] > 0) out[b] = static_cast<double>(hits[b]) / static_cast<double>(totals[b]);
  }
  return out;
}

std::size_t fingerprint_overlap(const FeatureSet& train, const FeatureSet& test) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(train.size());
  for (const auto& v : train.vectors) seen.insert(v.fingerprint);
  return static_cast<std::size_t>(std::count_if(
      test.vectors.begin(), test.vectors.end(),
      [&](const FeatureVector& v) { return seen.contains(v.fingerprint); }));
}

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

FeatureSet balance(const FeatureSet& vs, Balancing b, std::uint64_t seed) {
  switch (b) {
    case Balancing::Oversample: return oversample(vs, std::nullopt, seed);
    case Balancing::Undersample: return undersample(vs, std::nullopt, seed);
    default: return vs;
  }
}

// Windows of the synthetic curves fitted to the points of `train` only.
FeatureSet synthetic_windows(const FeatureSet& train, const AugmentOptions& options) {
  DatasetBuilder builder;
  for (const auto& v : train.vectors) {
    if (v.synthetic) continue;
    const CurveIndex curve = builder.curve(CompoundId{"train", train.labels[v.label], "train"});
    for (const auto& p : v.view()) builder.add(curve, p.wavelength_um, p.n, p.k, false);
  }
  const Dataset source = std::move(builder).build();
  const auto augmented = augment_dataset(source, options).first;

  DatasetBuilder synthetic;
  for (const auto& r : augmented.records()) {
    if (r.synthetic) synthetic.add(augmented.compound(r), r.wavelength_um, r.n, r.k, true);
  }
  return window_features(std::move(synthetic).build(), train.width);
}

struct Predictions {
  std::vector<LabelId> train;
  std::vector<LabelId> test;
};

Predictions fit_and_predict_global(const Split& parts, const RunConfig& c) {
  const ForestModel model = fit(parts.train, c.forest, c.threads);
  return {predict_all(model, parts.train, c.threads), predict_all(model, parts.test, c.threads)};
}

// One forest per spectral bin. A bin whose training side holds a single label
// predicts that label; a bin with no training vectors falls back to a global
// model.
Predictions fit_and_predict_per_bin(const Split& parts, const RunConfig& c) {
  Predictions out{std::vector<LabelId>(parts.train.size()), std::vector<LabelId>(parts.test.size())};
  std::optional<ForestModel> global;
  for (SpectralBin b : kAllBins) {
    FeatureSet train_bin{parts.train.labels, parts.train.width, {}};
    FeatureSet test_bin{parts.test.labels, parts.test.width, {}};
    std::vector<std::size_t> train_pos, test_pos;
    for (std::size_t i = 0; i < parts.train.size(); ++i) {
      if (parts.train.vectors[i].bin == b) {
        train_bin.vectors.push_back(parts.train.vectors[i]);
        train_pos.push_back(i);
      }
    }
    for (std::size_t i = 0; i < parts.test.size(); ++i) {
      if (parts.test.vectors[i].bin == b) {
        test_bin.vectors.push_back(parts.test.vectors[i]);
        test_pos.push_back(i);
      }
    }
    if (test_bin.empty() && train_bin.empty()) continue;

    std::vector<LabelId> train_pred, test_pred;
    std::unordered_set<LabelId> distinct;
    for (const auto& v : train_bin.vectors) distinct.insert(v.label);
    if (distinct.size() >= 2) {
      const ForestModel model = fit(train_bin, c.forest, c.threads);
      train_pred = predict_all(model, train_bin, c.threads);
      test_pred = predict_all(model, test_bin, c.threads);
    } else if (distinct.size() == 1) {
      train_pred.assign(train_bin.size(), *distinct.begin());
      test_pred.assign(test_bin.size(), *distinct.begin());
    } else {
      if (!global) global = fit(parts.train, c.forest, c.threads);
      test_pred = predict_all(*global, test_bin, c.threads);
    }
    for (std::size_t i = 0; i < train_pos.size(); ++i) out.train[train_pos[i]] = train_pred[i];
    for (std::size_t i = 0; i < test_pos.size(); ++i) out.test[test_pos[i]] = test_pred[i];
  }
  return out;
}

std::vector<LabelId> labels_of(const FeatureSet& vs) {
  std::vector<LabelId> out(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) out[i] = vs.vectors[i].label;
  return out;
}

}  // namespace

ExperimentReport run_experiment(const Dataset& d, const Strategy& s, const RunConfig& config) {
  ExperimentReport report;
  report.strategy = s.name;
  report.seed = config.split.seed;
  report.paper_mode = config.split.paper_mode;
  report.digits = config.truncate_digits;
  const std::uint64_t balance_seed = derive_seed(config.split.seed, 0xBA1A);

  Split parts;
  if (config.split.paper_mode) {
    const Dataset source = stage("augment", [&] {
      return s.balancing == Balancing::Augment ? augment_dataset(d, config.augment).first : d;
    });
    FeatureSet vs = stage("features", [&] { return window_features(source, s.window); });
    if (s.balancing == Balancing::Augment) {
      // Bins before augmentation come from the measured windows alone.
      FeatureSet measured{vs.labels, vs.width, {}};
      for (const auto& v : vs.vectors) {
        if (!v.synthetic) measured.vectors.push_back(v);
      }
      report.counts_before = bin_counts(measured);
    } else {
      report.counts_before = bin_counts(vs);
    }
    vs = stage("balance", [&] { return balance(vs, s.balancing, balance_seed); });
    report.counts_after = bin_counts(vs);
    parts = stage("split", [&] { return split(vs, config.split); });
  } else {
    const FeatureSet vs = stage("features", [&] { return window_features(d, s.window); });
    parts = stage("split", [&] { return split(vs, config.split); });
    report.counts_before = bin_counts(parts.train);
    if (s.balancing == Balancing::Augment) {
      const FeatureSet extra =
          stage("augment", [&] { return synthetic_windows(parts.train, config.augment); });
      append_features(parts.train, extra);
    } else {
      parts.train = stage("balance", [&] { return balance(parts.train, s.balancing, balance_seed); });
    }
    report.counts_after = bin_counts(parts.train);
  }

  if (config.truncate_digits) {
    stage("truncate", [&] {
      parts.train = truncate_precision(parts.train, *config.truncate_digits);
      parts.test = truncate_precision(parts.test, *config.truncate_digits);
      return 0;
    });
  }
  report.leaked_test_vectors = fingerprint_overlap(parts.train, parts.test);
  report.train_size = parts.train.size();
  report.test_size = parts.test.size();

  const Predictions pred = stage("fit", [&] {
    return s.per_bin_models ? fit_and_predict_per_bin(parts, config)
                            : fit_and_predict_global(parts, config);
  });

  stage("evaluate", [&] {
    const auto train_truth = labels_of(parts.train);
    const auto test_truth = labels_of(parts.test);
    std::vector<SpectralBin> test_bins(parts.test.size());
    for (std::size_t i = 0; i < parts.test.size(); ++i) test_bins[i] = parts.test.vectors[i].bin;
    report.train_accuracy = accuracy(pred.train, train_truth);
    report.test_accuracy = accuracy(pred.test, test_truth);
    report.per_bin_test_accuracy = per_bin_accuracy(pred.test, test_truth, test_bins);
    report.labels = parts.test.labels;
    report.confusion.assign(report.labels.size(), std::vector<std::size_t>(report.labels.size(), 0));
    for (std::size_t i = 0; i < test_truth.size(); ++i) ++report.confusion[test_truth[i]][pred.test[i]];
    return 0;
  });
  return report;
}

std::vector<ExperimentReport> precision_sweep(const Dataset& d, std::span<const int> digits,
                                              const Strategy& s, const RunConfig& config) {
  if (digits.empty()) throw ParameterError("precision sweep needs at least one digit count");
  for (int n : digits) {
    if (n < 1) throw ParameterError("digit counts must be at least 1");
  }
  std::vector<ExperimentReport> out;
  out.reserve(digits.size());
  for (int n : digits) {
    RunConfig c = config;
    c.truncate_digits = n;
    out.push_back(run_experiment(d, s, c));
  }
  return out;
}

}  // namespace opticlass
