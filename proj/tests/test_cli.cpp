#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "opticlass/cli.hpp"
#include "opticlass/csv.hpp"
#include "opticlass/ingest.hpp"
#include "test_util.hpp"

using namespace opticlass;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "opticlass");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Model trained once on the bundled snapshot and shared by several cases.
const std::filesystem::path& snapshot_model() {
  static test::TempDir dir("cli_model");
  static const std::filesystem::path path = [] {
    const auto p = dir.path() / "rd.json";
    const auto r = run({"--threads", "1", "train", OPTICLASS_TEST_SNAPSHOT, "--model", p.string(),
                        "--trees", "15"});
    REQUIRE(r.code == 0);
    return p;
  }();
  return path;
}

/// Compounds with a measured curve whose linear interpolation at `lambda`
/// lies within `tol` of `n`.
std::set<std::string> compounds_near(double lambda, double n, double tol) {
  const Dataset d = clean(parse_compiled_csv_file(OPTICLASS_TEST_SNAPSHOT).dataset);
  std::map<CurveIndex, std::vector<std::pair<double, double>>> curves;
  for (const auto& r : d.records()) curves[r.curve].emplace_back(r.wavelength_um, *r.n);
  std::set<std::string> out;
  for (auto& [curve, pts] : curves) {
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const auto [l0, n0] = pts[i];
      const auto [l1, n1] = pts[i + 1];
      if (l0 <= lambda && lambda <= l1 && l1 > l0) {
        const double v = n0 + (n1 - n0) * (lambda - l0) / (l1 - l0);
        if (std::abs(v - n) <= tol) out.insert(d.curves()[curve].book);
        break;
      }
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with code 2") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"classify", "--model", "m.json", "--lambda=-1", "--n", "1.5"}).code == kExitUsage);
  const auto r = run({"classify", "--model", "m.json", "--lambda=-1", "--n", "1.5"});
  CHECK(r.err.find("wavelength") != std::string::npos);
  CHECK(run({"evaluate", OPTICLASS_TEST_SNAPSHOT, "--strategy", "XYZ"}).code == kExitUsage);
  CHECK(run({"classify", "--model", "m.json", "--n", "1.5"}).code == kExitUsage);
}

TEST_CASE("missing or bad input exits with code 3") {
  CHECK(run({"ingest", "/nonexistent/file.csv"}).code == kExitData);
  test::TempDir tmp("cli_bad");
  std::ofstream(tmp.path() / "bad.csv") << "not,a,header\n";
  CHECK(run({"ingest", (tmp.path() / "bad.csv").string()}).code == kExitData);
  std::ofstream(tmp.path() / "bad.json") << "{\"version\": 9}";
  CHECK(run({"classify", "--model", (tmp.path() / "bad.json").string(), "--lambda", "0.5", "--n", "1.5"}).code ==
        kExitData);
}

TEST_CASE("ingest reports the snapshot counts") {
  const auto r = run({"ingest", OPTICLASS_TEST_SNAPSHOT});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("270403") != std::string::npos);
  CHECK(r.out.find("269986") != std::string::npos);
}

TEST_CASE("classify the sodium-line example") {
  const auto r = run({"classify", "--model", snapshot_model().string(), "--lambda", "0.589", "--n", "1.4906",
                      "--k", "0", "--top", "1", "--format", "csv"});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header == "rank,label,probability");
  const auto fields = csv::split_line(row);
  REQUIRE(fields);
  REQUIRE(fields->size() == 3);
  CHECK((*fields)[0] == "1");
  std::string extra;
  CHECK_FALSE(std::getline(lines, extra));

  // The stated n has four decimals, so every compound within half a unit of
  // the last place at 589 nm is an equally valid answer.
  const auto candidates = compounds_near(0.589, 1.4906, 5e-5);
  CAPTURE((*fields)[1]);
  REQUIRE_FALSE(candidates.empty());
  CHECK(candidates.contains((*fields)[1]));
}

TEST_CASE("classify with nanometers and text output") {
  const auto um = run({"classify", "--model", snapshot_model().string(), "--lambda", "0.589", "--n", "1.4906",
                       "--format", "csv"});
  const auto nm = run({"classify", "--model", snapshot_model().string(), "--lambda", "589", "--nm", "--n",
                       "1.4906", "--format", "csv"});
  REQUIRE(um.code == 0);
  CHECK(um.out == nm.out);
  const auto text = run({"classify", "--model", snapshot_model().string(), "--point", "0.589,1.4906,0"});
  CHECK(text.code == 0);
  CHECK(text.out.find("rank") != std::string::npos);
}

TEST_CASE("window width mismatch tells the user what to supply") {
  const auto r = run({"classify", "--model", snapshot_model().string(), "--point", "0.5,1.5", "--point",
                      "0.6,1.5"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("--point") != std::string::npos);
}

TEST_CASE("training is reproducible and honours the seed environment variable") {
  test::TempDir tmp("cli_repro");
  const auto a = tmp.path() / "a.json";
  const auto b = tmp.path() / "b.json";
  const auto c = tmp.path() / "c.json";
  REQUIRE(run({"--seed", "7", "train", OPTICLASS_TEST_SNAPSHOT, "--model", a.string(), "--trees", "3",
               "--max-depth", "8"})
              .code == 0);
  ::setenv("OPTICLASS_SEED", "7", 1);
  ::setenv("OPTICLASS_THREADS", "2", 1);
  const auto rb = run({"train", OPTICLASS_TEST_SNAPSHOT, "--model", b.string(), "--trees", "3", "--max-depth", "8"});
  ::unsetenv("OPTICLASS_SEED");
  ::unsetenv("OPTICLASS_THREADS");
  REQUIRE(rb.code == 0);
  CHECK(slurp(a) == slurp(b));
  REQUIRE(run({"--seed", "8", "train", OPTICLASS_TEST_SNAPSHOT, "--model", c.string(), "--trees", "3",
               "--max-depth", "8"})
              .code == 0);
  CHECK(slurp(a) != slurp(c));
}

TEST_CASE("evaluate writes the report tables") {
  test::TempDir tmp("cli_eval");
  const auto r = run({"--out", tmp.path().string(), "--threads", "1", "evaluate", OPTICLASS_TEST_SNAPSHOT,
                      "--trees", "3", "--max-depth", "10", "--fe", "1"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("FE1") != std::string::npos);
  CHECK(std::filesystem::exists(tmp.path() / "fig3_overall_accuracy.csv"));
  CHECK(std::filesystem::exists(tmp.path() / "confusion_FE1.csv"));
}

}  // TEST_SUITE
