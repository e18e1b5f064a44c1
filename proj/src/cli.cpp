#include "opticlass/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "opticlass/augment.hpp"
#include "opticlass/battery.hpp"
#include "opticlass/csv.hpp"
#include "opticlass/error.hpp"
#include "opticlass/eval.hpp"
#include "opticlass/forest.hpp"
#include "opticlass/ingest.hpp"
#include "opticlass/report.hpp"

#ifndef OPTICLASS_DEFAULT_SNAPSHOT
#define OPTICLASS_DEFAULT_SNAPSHOT "data/organic_snapshot.csv"
#endif

namespace opticlass {

namespace {

namespace fs = std::filesystem;

class UsageError : public Error {
 public:
  using Error::Error;
};

std::uint64_t env_u64(const char* name, std::uint64_t fallback) {
  const char* raw = std::getenv(name);
  if (!raw || !*raw) return fallback;
  try {
    std::size_t used = 0;
    const std::string s(raw);
    const auto v = std::stoull(s, &used);
    if (used == s.size() && s[0] != '-') return v;
  } catch (const std::exception&) {
  }
  throw UsageError(std::string(name) + " must be a non-negative integer, got '" + raw + "'");
}

std::string fixed4(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << x;
  return os.str();
}

// ---- shared flag groups ---------------------------------------------------

struct Globals {
  std::uint64_t seed = 42;
  bool paper_mode = false;
  std::string out;
  unsigned threads = 0;
};

struct StrategyFlags {
  std::string strategy;
  int fe = 0;
  std::string resample = "none";
  bool augment = false;
  std::string bins = "global";
  CLI::Option* strategy_opt = nullptr;
  CLI::Option* fe_opt = nullptr;
  CLI::Option* resample_opt = nullptr;
  CLI::Option* augment_opt = nullptr;

  void attach(CLI::App* app) {
    strategy_opt = app->add_option("--strategy", strategy,
                                   "Named strategy: RD, FE1, FE2, SBB, SBB-FE1, SBB-FE2, OS, US, DA");
    fe_opt = app->add_option("--fe", fe, "Feature windowing: 0 (single point), 1 (2 points), 2 (3 points)")
                 ->check(CLI::Range(0, 2));
    resample_opt = app->add_option("--resample", resample, "Spectral-bin balancing of training data")
                       ->check(CLI::IsMember({"none", "os", "us"}));
    augment_opt = app->add_flag("--augment", augment, "Add Sellmeier-generated records (DA)");
    app->add_option("--bins", bins, "global: one model, per-bin accuracy; per-bin: one model per bin")
        ->check(CLI::IsMember({"global", "per-bin"}));
  }

  Strategy resolve() const {
    const bool knobs = fe_opt->count() || resample_opt->count() || augment_opt->count();
    if (strategy_opt->count()) {
      if (knobs) throw UsageError("--strategy cannot be combined with --fe/--resample/--augment");
      Strategy s = strategy_by_name(strategy);
      if (bins == "per-bin") {
        s = make_strategy(s.window, s.balancing, true);
      }
      return s;
    }
    if (augment && resample != "none") {
      throw UsageError("choose at most one of --resample and --augment");
    }
    const Balancing b = augment ? Balancing::Augment
                        : resample == "os" ? Balancing::Oversample
                        : resample == "us" ? Balancing::Undersample
                                           : Balancing::None;
    return make_strategy(static_cast<std::size_t>(fe) + 1, b, bins == "per-bin");
  }
};

struct ForestFlags {
  std::size_t trees = 100;
  std::size_t max_depth = 0;
  std::size_t max_features = 0;
  std::string voting = "soft";
  CLI::Option* max_depth_opt = nullptr;
  CLI::Option* max_features_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--trees", trees, "Number of trees")->check(CLI::PositiveNumber);
    max_depth_opt = app->add_option("--max-depth", max_depth, "Depth limit (unbounded by default)");
    max_features_opt = app->add_option("--max-features", max_features,
                                       "Features tried per split (floor(sqrt(F)) by default)")
                           ->check(CLI::PositiveNumber);
    app->add_option("--voting", voting, "Committee rule")->check(CLI::IsMember({"soft", "hard"}));
  }

  Hyperparams resolve(std::uint64_t seed) const {
    Hyperparams h;
    h.n_trees = trees;
    if (max_depth_opt->count()) h.max_depth = max_depth;
    if (max_features_opt->count()) h.max_features = max_features;
    h.voting = voting == "hard" ? Voting::Hard : Voting::Soft;
    h.seed = seed;
    return h;
  }
};

struct AugmentFlags {
  std::size_t points = 3000;
  std::size_t min_points = 8;
  std::string range = "0.2:1.5";

  void attach(CLI::App* app) {
    app->add_option("--points", points, "Synthetic records per fitted compound")
        ->check(CLI::PositiveNumber);
    app->add_option("--min-points", min_points, "Minimum points at or below 1.5 um needed to fit")
        ->check(CLI::Range(std::size_t{5}, std::numeric_limits<std::size_t>::max()));
    app->add_option("--range", range, "Generation window LO:HI in um");
  }

  AugmentOptions resolve() const {
    AugmentOptions a;
    a.points_per_compound = points;
    a.fit.min_points = min_points;
    const auto colon = range.find(':');
    if (colon == std::string::npos) throw UsageError("--range must look like LO:HI");
    const auto lo = csv::parse_double(std::string_view(range).substr(0, colon));
    const auto hi = csv::parse_double(std::string_view(range).substr(colon + 1));
    if (!lo || !hi || *lo <= 0.0 || *hi <= *lo) {
      throw UsageError("--range needs 0 < LO < HI, got '" + range + "'");
    }
    a.range_lo = *lo;
    a.range_hi = *hi;
    return a;
  }
};

// ---- data loading -----------------------------------------------------------

IngestResult load_raw(const std::string& path, std::ostream& err) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw ParseError("input not found: " + path);
  IngestResult r = fs::is_directory(path) ? parse_page_tree(path) : parse_compiled_csv_file(path);
  if (!r.diagnostics.empty()) {
    constexpr std::size_t kShown = 10;
    for (std::size_t i = 0; i < std::min(kShown, r.diagnostics.size()); ++i) {
      const auto& d = r.diagnostics[i];
      err << "warning: " << d.source << (d.row ? ":" + std::to_string(d.row) : "") << ": "
          << d.message << '\n';
    }
    if (r.diagnostics.size() > kShown) {
      err << "warning: " << r.diagnostics.size() - kShown << " more rejected rows\n";
    }
  }
  return r;
}

Dataset load_clean(const std::string& path, std::ostream& err) {
  Dataset d = clean(load_raw(path, err).dataset);
  if (d.empty()) throw ParseError("no usable records in " + path);
  return d;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& fn) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  fn(out);
  if (!out.flush()) throw Error("failed writing " + path.string());
}

void print_report(const ExperimentReport& r, std::ostream& out) {
  out << "strategy             " << r.strategy << '\n'
      << "ordering             " << (r.paper_mode ? "balance-then-split" : "split-then-balance") << '\n';
  if (r.digits) out << "digits               " << *r.digits << '\n';
  out << "train vectors        " << r.train_size << '\n'
      << "test vectors         " << r.test_size << '\n'
      << "train accuracy       " << fixed4(r.train_accuracy) << '\n'
      << "test accuracy        " << fixed4(r.test_accuracy) << '\n';
  for (SpectralBin b : kAllBins) {
    const auto& a = r.per_bin_test_accuracy[index(b)];
    out << "  " << std::left << std::setw(19) << bin_name(b) << (a ? fixed4(*a) : "-") << '\n';
  }
  out << "leaked test vectors  " << r.leaked_test_vectors << '\n';
}

// ---- subcommands -------------------------------------------------------------

int cmd_ingest(const std::string& input, const std::string& csv_out, const std::string& tree_out,
               bool raw, std::ostream& out, std::ostream& err) {
  IngestResult r = load_raw(input, err);
  std::size_t missing_n = 0, missing_k = 0;
  for (const auto& rec : r.dataset.records()) {
    missing_n += !rec.n;
    missing_k += !rec.k;
  }
  const Dataset cleaned = raw ? r.dataset : clean(r.dataset);
  out << "records        " << r.dataset.size() << '\n'
      << "labels         " << r.dataset.labels().size() << '\n'
      << "missing n      " << missing_n << '\n'
      << "missing k      " << missing_k << '\n'
      << "rejected rows  " << r.diagnostics.size() - r.skipped_files << '\n'
      << "skipped files  " << r.skipped_files << '\n';
  if (!raw) out << "after cleaning " << cleaned.size() << '\n';
  if (!csv_out.empty()) write_file(csv_out, [&](std::ostream& o) { write_compiled_csv(cleaned, o); });
  if (!tree_out.empty()) export_tree(cleaned, tree_out);
  return kExitOk;
}

int cmd_stats(const std::string& input, const Globals& g, std::ostream& out, std::ostream& err) {
  const Dataset d = load_clean(input, err);
  const Stats s = dataset_stats(d);
  auto per_bin = [&](std::ostream& o) {
    o << "bin,records\n";
    for (SpectralBin b : kAllBins) o << bin_name(b) << ',' << s.per_bin[index(b)] << '\n';
  };
  if (g.out.empty()) {
    per_bin(out);
    out << "total," << s.total << '\n';
    return kExitOk;
  }
  const fs::path dir(g.out);
  write_file(dir / "stats_per_bin.csv", per_bin);
  write_file(dir / "stats_per_compound.csv", [&](std::ostream& o) {
    o << "compound,records\n";
    for (const auto& [name, count] : s.per_compound) o << csv::join({name, std::to_string(count)}) << '\n';
  });
  write_file(dir / "fig2_histogram.csv", [&](std::ostream& o) {
    const auto& grid = s.histogram.grid;
    auto lambda_edge = [&](std::size_t i) {
      const double t = static_cast<double>(i) / static_cast<double>(grid.lambda_bins);
      return grid.log_lambda ? grid.lambda_lo * std::pow(grid.lambda_hi / grid.lambda_lo, t)
                             : grid.lambda_lo + t * (grid.lambda_hi - grid.lambda_lo);
    };
    auto n_edge = [&](std::size_t j) {
      return grid.n_lo + (grid.n_hi - grid.n_lo) * static_cast<double>(j) / static_cast<double>(grid.n_bins);
    };
    o << "lambda_lo_um,lambda_hi_um,n_lo,n_hi,records\n";
    for (std::size_t i = 0; i < grid.lambda_bins; ++i) {
      for (std::size_t j = 0; j < grid.n_bins; ++j) {
        o << csv::format_double(lambda_edge(i)) << ',' << csv::format_double(lambda_edge(i + 1)) << ','
          << csv::format_double(n_edge(j)) << ',' << csv::format_double(n_edge(j + 1)) << ','
          << s.histogram.at(i, j) << '\n';
      }
    }
  });
  out << "wrote stats_per_bin.csv, stats_per_compound.csv, fig2_histogram.csv to " << dir.string()
      << " (" << s.total << " records, " << s.histogram.outside << " off the histogram grid)\n";
  return kExitOk;
}

int cmd_augment(const std::string& input, const AugmentOptions& options, const std::string& data_out,
                const Globals& g, std::ostream& out, std::ostream& err) {
  const Dataset d = load_clean(input, err);
  auto [augmented, report] = augment_dataset(d, options);
  if (g.out.empty()) {
    write_augmentation_csv(report, out);
  } else {
    write_file(fs::path(g.out) / "augmentation.csv", [&](std::ostream& o) { write_augmentation_csv(report, o); });
  }
  err << "fitted " << report.fitted.size() << ", skipped " << report.skipped.size() << ", generated "
      << report.generated_count << " records (" << augmented.size() << " total)\n";
  if (!data_out.empty()) {
    write_file(data_out, [&](std::ostream& o) { write_compiled_csv(augmented, o); });
  }
  return kExitOk;
}

int cmd_train(const std::string& input, const std::string& model_path, const Strategy& s,
              const Hyperparams& h, const AugmentOptions& aug, const Globals& g, std::ostream& out,
              std::ostream& err) {
  if (s.per_bin_models) throw UsageError("train builds a single model; --bins per-bin is not supported");
  const Dataset d = load_clean(input, err);
  const Dataset source = s.balancing == Balancing::Augment ? augment_dataset(d, aug).first : d;
  FeatureSet vs = window_features(source, s.window);
  const std::uint64_t balance_seed = derive_seed(g.seed, 0xBA1A);
  if (s.balancing == Balancing::Oversample) vs = oversample(vs, std::nullopt, balance_seed);
  if (s.balancing == Balancing::Undersample) vs = undersample(vs, std::nullopt, balance_seed);
  const ForestModel model = fit(vs, h, g.threads);
  save_model_file(model, model_path);
  out << "trained " << model.trees.size() << " trees on " << vs.size() << " vectors ("
      << model.label_table.size() << " labels, " << model.feature_width
      << " point(s) per vector) -> " << model_path << '\n';
  return kExitOk;
}

int cmd_evaluate(const std::string& input, const Strategy& s, const RunConfig& config, const Globals& g,
                 std::ostream& out, std::ostream& err) {
  const Dataset d = load_clean(input, err);
  const ExperimentReport r = run_experiment(d, s, config);
  print_report(r, out);
  if (!g.out.empty()) emit_report(ReportBundle{{r}, {}}, g.out);
  return kExitOk;
}

int cmd_sweep(const std::string& input, const std::vector<int>& digits, const Strategy& s,
              const RunConfig& config, const Globals& g, std::ostream& out, std::ostream& err) {
  const Dataset d = load_clean(input, err);
  const auto reports = precision_sweep(d, digits, s, config);
  if (g.out.empty()) {
    write_precision_sweep_csv(reports, out);
  } else {
    emit_report(ReportBundle{{}, reports}, g.out);
    for (const auto& r : reports) out << "d=" << *r.digits << "  test " << fixed4(r.test_accuracy) << '\n';
  }
  return kExitOk;
}

struct ClassifyFlags {
  std::string model;
  double lambda = 0.0, n = 0.0, k = 0.0;
  std::vector<std::string> points;
  std::size_t top = 5;
  bool nm = false;
  std::string format = "text";
  CLI::Option* lambda_opt = nullptr;
  CLI::Option* n_opt = nullptr;
};

int cmd_classify(const ClassifyFlags& f, std::ostream& out) {
  // Validate every input before opening the model.
  std::vector<SpectralPoint> pts;
  if (!f.points.empty()) {
    if (f.lambda_opt->count() || f.n_opt->count()) {
      throw UsageError("use either --point or --lambda/--n, not both");
    }
    for (const auto& p : f.points) {
      const auto fields = csv::split_line(p);
      if (!fields || fields->size() < 2 || fields->size() > 3) {
        throw UsageError("--point expects LAMBDA,N[,K], got '" + p + "'");
      }
      std::array<double, 3> v{0.0, 0.0, 0.0};
      for (std::size_t i = 0; i < fields->size(); ++i) {
        const auto x = csv::parse_double((*fields)[i]);
        if (!x) throw UsageError("--point has a non-numeric field: '" + p + "'");
        v[i] = *x;
      }
      pts.push_back({v[0], v[1], v[2]});
    }
  } else {
    if (!f.lambda_opt->count() || !f.n_opt->count()) {
      throw UsageError("classify needs --lambda and --n (or one --point per window position)");
    }
    pts.push_back({f.lambda, f.n, f.k});
  }
  for (auto& p : pts) {
    if (f.nm) p.wavelength_um /= 1000.0;
    if (!(p.wavelength_um > 0.0)) throw UsageError("wavelength must be positive");
    if (!(p.n >= 0.0 && p.n < kMaxRefractiveIndex)) throw UsageError("n must lie in [0, 20)");
    if (!(p.k >= 0.0)) throw UsageError("k must be non-negative");
  }
  if (pts.size() > kMaxWindow) throw UsageError("at most 3 points per input");

  const ForestModel model = load_model_file(f.model);
  if (pts.size() != model.feature_width) {
    throw UsageError("model expects " + std::to_string(model.feature_width) +
                     " point(s) per input (trained with FE" + std::to_string(model.feature_width - 1) +
                     "); supply " + std::to_string(model.feature_width) +
                     " consecutive measurements with --point LAMBDA,N,K");
  }
  FeatureVector x;
  x.width = static_cast<std::uint8_t>(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) x.points[i] = pts[i];
  const auto proba = predict_proba(model, x);

  std::vector<std::size_t> order(proba.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return proba[a] > proba[b]; });
  const std::size_t shown = std::min(f.top, order.size());
  if (f.format == "csv") {
    out << "rank,label,probability\n";
    for (std::size_t i = 0; i < shown; ++i) {
      out << csv::join({std::to_string(i + 1), model.label_table[order[i]], csv::format_double(proba[order[i]])})
          << '\n';
    }
  } else {
    std::size_t width = 5;
    for (std::size_t i = 0; i < shown; ++i) width = std::max(width, model.label_table[order[i]].size());
    out << std::left << std::setw(6) << "rank" << std::setw(static_cast<int>(width) + 2) << "label"
        << "probability\n";
    for (std::size_t i = 0; i < shown; ++i) {
      out << std::left << std::setw(6) << i + 1 << std::setw(static_cast<int>(width) + 2)
          << model.label_table[order[i]] << fixed4(proba[order[i]]) << '\n';
    }
  }
  return kExitOk;
}

int cmd_run_paper(const std::string& input, const std::vector<int>& digits, std::size_t trees,
                  bool no_leakage_safe, const Globals& g, std::ostream& out, std::ostream& err) {
  const fs::path dir = g.out.empty() ? fs::path("paper_results") : fs::path(g.out);
  const Dataset d = load_clean(input, err);
  BatteryOptions o;
  o.seed = g.seed;
  o.n_trees = trees;
  o.threads = g.threads;
  o.digits = digits;
  o.leakage_safe = !no_leakage_safe;
  o.progress = [&err](const std::string& line) { err << line << std::endl; };
  const BatteryResult result = run_battery(d, o);
  write_battery(result, dir);

  std::size_t width = 0;
  for (const auto& c : result.checks) width = std::max(width, c.name.size());
  for (const auto& c : result.checks) {
    out << std::left << std::setw(static_cast<int>(width) + 2) << c.name << std::setw(6)
        << (c.pass ? "pass" : "FAIL") << "target " << std::setw(16) << c.target << "measured "
        << (c.measured ? fixed4(*c.measured) : "-") << '\n';
  }
  out << "wrote reports to " << dir.string() << '\n';
  for (const auto& f : result.failures) err << "run failed: " << f << '\n';
  return result.failures.empty() ? kExitOk : kExitPipeline;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Identify organic compounds from refractive-index measurements", "opticlass"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  g.seed = env_u64("OPTICLASS_SEED", 42);
  g.threads = static_cast<unsigned>(env_u64("OPTICLASS_THREADS", 0));
  app.add_option("--seed", g.seed, "Random seed (env OPTICLASS_SEED)");
  app.add_flag("--paper-mode", g.paper_mode, "Balance and augment before the train/test split");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads, 0 = all cores (env OPTICLASS_THREADS)");

  std::string input;
  auto add_input = [&](CLI::App* sub) { sub->add_option("input", input, "Compiled CSV or page-tree directory")->required(); };

  auto* ingest = app.add_subcommand("ingest", "Parse, validate and clean a database");
  add_input(ingest);
  std::string csv_out, tree_out;
  bool raw = false;
  ingest->add_option("--write-csv", csv_out, "Write the cleaned compiled CSV here");
  ingest->add_option("--write-tree", tree_out, "Export the cleaned data as a page tree here");
  ingest->add_flag("--no-clean", raw, "Keep records with missing values");

  auto* stats = app.add_subcommand("stats", "Per-bin and per-compound counts, (lambda, n) histogram");
  add_input(stats);

  auto* augment = app.add_subcommand("augment", "Fit Sellmeier models and generate synthetic records");
  add_input(augment);
  AugmentFlags augment_flags;
  augment_flags.attach(augment);
  std::string augmented_out;
  augment->add_option("--write-csv", augmented_out, "Write the augmented dataset here");

  auto* train = app.add_subcommand("train", "Train a forest on the whole dataset and save it");
  add_input(train);
  std::string model_path;
  train->add_option("--model", model_path, "Output model file (JSON)")->required();
  StrategyFlags train_strategy;
  ForestFlags train_forest;
  AugmentFlags train_augment;
  train_strategy.attach(train);
  train_forest.attach(train);
  train_augment.attach(train);

  auto* evaluate = app.add_subcommand("evaluate", "Split, train and score one strategy");
  add_input(evaluate);
  StrategyFlags eval_strategy;
  ForestFlags eval_forest;
  AugmentFlags eval_augment;
  int truncate_digits = 0;
  double train_fraction = 0.75;
  eval_strategy.attach(evaluate);
  eval_forest.attach(evaluate);
  eval_augment.attach(evaluate);
  auto* truncate_opt = evaluate->add_option("--truncate-digits", truncate_digits, "Round n and k to D decimals")
                           ->check(CLI::PositiveNumber);
  evaluate->add_option("--train-fraction", train_fraction, "Training share of the split")
      ->check(CLI::Range(0.0, 1.0));

  auto* sweep = app.add_subcommand("sweep-precision", "Accuracy as a function of stored decimals");
  add_input(sweep);
  StrategyFlags sweep_strategy;
  ForestFlags sweep_forest;
  AugmentFlags sweep_augment;
  std::vector<int> sweep_digits{1, 2, 3, 4, 5, 6};
  sweep_strategy.attach(sweep);
  sweep_forest.attach(sweep);
  sweep_augment.attach(sweep);
  sweep->add_option("--digits", sweep_digits, "Digit counts to test")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);

  auto* classify = app.add_subcommand("classify", "Rank compounds for one measurement");
  ClassifyFlags cf;
  classify->add_option("--model", cf.model, "Model file from `train`")->required();
  cf.lambda_opt = classify->add_option("--lambda", cf.lambda, "Wavelength (um, or nm with --nm)");
  cf.n_opt = classify->add_option("--n", cf.n, "Refractive index");
  classify->add_option("--k", cf.k, "Extinction coefficient");
  classify->add_option("--point", cf.points, "LAMBDA,N[,K]; repeat once per window position");
  classify->add_option("--top", cf.top, "Number of ranked labels")->check(CLI::PositiveNumber);
  classify->add_flag("--nm", cf.nm, "Wavelengths are given in nanometers");
  classify->add_option("--format", cf.format, "Output format")->check(CLI::IsMember({"text", "csv"}));

  auto* run_paper = app.add_subcommand("run-paper", "Full strategy battery, figure tables and target summary");
  std::string snapshot = OPTICLASS_DEFAULT_SNAPSHOT;
  run_paper->add_option("input", snapshot, "Compiled CSV (defaults to the bundled snapshot)");
  std::size_t battery_trees = 100;
  bool no_leakage_safe = false;
  std::vector<int> battery_digits{1, 2, 3, 4, 5, 6};
  run_paper->add_option("--trees", battery_trees, "Trees per forest")->check(CLI::PositiveNumber);
  run_paper->add_option("--digits", battery_digits, "Precision sweep digit counts")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  run_paper->add_flag("--no-leakage-safe", no_leakage_safe, "Skip the split-then-balance runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto run_config = [&](const ForestFlags& forest, const AugmentFlags& aug) {
    RunConfig c;
    c.split.seed = g.seed;
    c.split.paper_mode = g.paper_mode;
    c.split.train_fraction = train_fraction;
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("--train-fraction must lie in (0, 1)");
    c.forest = forest.resolve(g.seed);
    c.augment = aug.resolve();
    c.threads = g.threads;
    return c;
  };

  if (*ingest) return cmd_ingest(input, csv_out, tree_out, raw, out, err);
  if (*stats) return cmd_stats(input, g, out, err);
  if (*augment) return cmd_augment(input, augment_flags.resolve(), augmented_out, g, out, err);
  if (*train) {
    const Strategy s = train_strategy.resolve();
    const Hyperparams h = train_forest.resolve(g.seed);
    return cmd_train(input, model_path, s, h, train_augment.resolve(), g, out, err);
  }
  if (*evaluate) {
    const Strategy s = eval_strategy.resolve();
    RunConfig c = run_config(eval_forest, eval_augment);
    if (truncate_opt->count()) c.truncate_digits = truncate_digits;
    return cmd_evaluate(input, s, c, g, out, err);
  }
  if (*sweep) {
    const Strategy s = sweep_strategy.resolve();
    return cmd_sweep(input, sweep_digits, s, run_config(sweep_forest, sweep_augment), g, out, err);
  }
  if (*classify) return cmd_classify(cf, out);
  if (*run_paper) return cmd_run_paper(snapshot, battery_digits, battery_trees, no_leakage_safe, g, out, err);
  return kExitUsage;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(argc, argv, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const PipelineError& e) {
    err << "pipeline error in stage '" << e.stage() << "': " << e.what() << '\n';
    return kExitPipeline;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DomainError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ModelFormatError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitPipeline;
  }
}

}  // namespace opticlass
