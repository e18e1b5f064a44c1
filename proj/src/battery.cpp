#include "opticlass/battery.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "opticlass/csv.hpp"
#include "opticlass/error.hpp"

namespace opticlass {

std::vector<Strategy> battery_strategies() {
  std::vector<Strategy> out;
  for (const char* name : {"RD", "FE1", "FE2", "SBB", "OS", "US", "DA"}) {
    out.push_back(strategy_by_name(name));
  }
  return out;
}

namespace {

void note(const BatteryOptions& o, const std::string& line) {
  if (o.progress) o.progress(line);
}

std::string describe(const ExperimentReport& r) {
  std::ostringstream os;
  os << r.strategy << (r.digits ? " d=" + std::to_string(*r.digits) : "")
     << (r.paper_mode ? " [balance-then-split]" : " [split-then-balance]")
     << " test=" << csv::format_double(std::round(r.test_accuracy * 1e4) / 1e4);
  return os.str();
}

ReportBundle run_bundle(const Dataset& d, const BatteryOptions& o, bool paper_mode,
                        std::vector<std::string>& failures) {
  RunConfig config;
  config.split.seed = o.seed;
  config.split.paper_mode = paper_mode;
  config.forest.n_trees = o.n_trees;
  config.forest.seed = o.seed;
  config.threads = o.threads;

  ReportBundle bundle;
  for (const auto& s : battery_strategies()) {
    try {
      bundle.experiments.push_back(run_experiment(d, s, config));
      note(o, describe(bundle.experiments.back()));
    } catch (const PipelineError& e) {
      failures.push_back(s.name + ": " + e.what());
      note(o, s.name + " failed: " + e.what());
    }
  }
  if (paper_mode && !o.digits.empty()) {
    const Strategy rd = strategy_by_name("RD");
    for (int digits : o.digits) {
      RunConfig c = config;
      c.truncate_digits = digits;
      try {
        bundle.sweep.push_back(run_experiment(d, rd, c));
        note(o, describe(bundle.sweep.back()));
      } catch (const PipelineError& e) {
        failures.push_back("RD d=" + std::to_string(digits) + ": " + e.what());
      }
    }
  }
  return bundle;
}

const ExperimentReport* find(const std::vector<ExperimentReport>& rs, const std::string& name) {
  for (const auto& r : rs) {
    if (r.strategy == name) return &r;
  }
  return nullptr;
}

const ExperimentReport* find_digits(const std::vector<ExperimentReport>& rs, int digits) {
  for (const auto& r : rs) {
    if (r.digits == digits) return &r;
  }
  return nullptr;
}

std::optional<double> bin_acc(const ExperimentReport* r, SpectralBin b) {
  if (!r) return std::nullopt;
  return r->per_bin_test_accuracy[index(b)];
}

std::optional<double> test_acc(const ExperimentReport* r) {
  if (!r) return std::nullopt;
  return r->test_accuracy;
}

Check at_least(std::string name, std::optional<double> measured, double bound) {
  Check c{std::move(name), ">= " + csv::format_double(bound), measured, false, ""};
  c.pass = measured && *measured >= bound;
  if (!measured) c.note = "not measured";
  return c;
}

Check at_most(std::string name, std::optional<double> measured, double bound) {
  Check c{std::move(name), "<= " + csv::format_double(bound), measured, false, ""};
  c.pass = measured && *measured <= bound;
  if (!measured) c.note = "not measured";
  return c;
}

Check within(std::string name, std::optional<double> measured, double centre, double tol) {
  Check c{std::move(name), csv::format_double(centre) + " +/- " + csv::format_double(tol), measured,
          false, ""};
  // Small slack so a boundary value printed as e.g. 0.75 is not rejected by rounding.
  c.pass = measured && std::abs(*measured - centre) <= tol + 1e-12;
  if (!measured) c.note = "not measured";
  return c;
}

std::optional<double> diff(std::optional<double> a, std::optional<double> b) {
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

}  // namespace

std::vector<Check> evaluate_checks(const ReportBundle& ref) {
  const auto& xs = ref.experiments;
  const auto* rd = find(xs, "RD");
  const auto* us = find(xs, "US");
  const auto* os = find(xs, "OS");
  const auto* da = find(xs, "DA");
  using B = SpectralBin;

  std::vector<Check> checks;
  checks.push_back(within("RD overall test accuracy", test_acc(rd), 0.80, 0.05));
  checks.push_back(at_least("US UV test accuracy", bin_acc(us, B::UV), 0.92));
  checks.push_back(at_least("US VIS test accuracy", bin_acc(us, B::VIS), 0.94));
  checks.push_back(at_least("OS UV test accuracy", bin_acc(os, B::UV), 0.92));
  checks.push_back(at_least("OS VIS test accuracy", bin_acc(os, B::VIS), 0.94));
  checks.push_back(at_least("DA UV test accuracy", bin_acc(da, B::UV), 0.95));
  checks.push_back(at_least("DA VIS test accuracy", bin_acc(da, B::VIS), 0.95));
  checks.push_back(at_least("FarIR drop RD minus US", diff(bin_acc(rd, B::FarIR), bin_acc(us, B::FarIR)), 0.15));
  checks.push_back(at_most("FE1 minus RD test accuracy", diff(test_acc(find(xs, "FE1")), test_acc(rd)), 0.0));
  checks.push_back(at_most("FE2 minus RD test accuracy", diff(test_acc(find(xs, "FE2")), test_acc(rd)), 0.0));

  const auto d3 = test_acc(find_digits(ref.sweep, 3));
  for (int d : {1, 2}) {
    const auto acc = test_acc(find_digits(ref.sweep, d));
    const std::string tag = "d=" + std::to_string(d);
    checks.push_back(at_most(tag + " test accuracy", acc, 0.82));
    checks.push_back(at_least("d=3 minus " + tag + " test accuracy", diff(d3, acc), 0.05));
  }
  checks.push_back(within("d=3 test accuracy", d3, 0.95, 0.04));
  for (const auto& r : ref.sweep) {
    if (r.digits && *r.digits >= 4) {
      checks.push_back(within("d=" + std::to_string(*r.digits) + " minus untruncated test accuracy",
                              diff(r.test_accuracy, test_acc(rd)), 0.0, 0.02));
    }
  }
  return checks;
}

BatteryResult run_battery(const Dataset& d, const BatteryOptions& options) {
  BatteryResult result;
  result.reference = run_bundle(d, options, true, result.failures);
  if (options.leakage_safe) result.leakage_safe = run_bundle(d, options, false, result.failures);
  result.checks = evaluate_checks(result.reference);
  for (const auto& r : result.leakage_safe.experiments) {
    Check c{r.strategy + " leaked test vectors (split-then-balance)", "0",
            static_cast<double>(r.leaked_test_vectors), r.leaked_test_vectors == 0, ""};
    result.checks.push_back(std::move(c));
  }
  return result;
}

void write_summary_csv(const std::vector<Check>& checks, std::ostream& out) {
  out << "check,target,measured,status,note\n";
  for (const auto& c : checks) {
    out << csv::join({c.name, c.target, c.measured ? csv::format_double(*c.measured) : "",
                      c.pass ? "pass" : "fail", c.note})
        << '\n';
  }
}

void write_battery(const BatteryResult& result, const std::filesystem::path& dir) {
  emit_report(result.reference, dir);
  if (!result.leakage_safe.experiments.empty()) emit_report(result.leakage_safe, dir / "leakage_safe");
  std::ofstream out(dir / "summary.csv", std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / "summary.csv").string());
  write_summary_csv(result.checks, out);
  for (const auto& f : result.failures) {
    out << csv::join({"run failed", "", "", "fail", f}) << '\n';
  }
}

}  // namespace opticlass
