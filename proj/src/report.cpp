#include "opticlass/report.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "opticlass/csv.hpp"
#include "opticlass/error.hpp"

namespace opticlass {

namespace {

const char* const kOverallFile = "fig3_overall_accuracy.csv";
const char* const kBinCountsFile = "fig4_bin_counts.csv";
const char* const kPerBinFile = "fig5_per_bin_accuracy.csv";
const char* const kSweepFile = "fig6_precision_sweep.csv";

const std::vector<std::string> kOverallHeader = {
    "strategy",      "seed",       "paper_mode", "digits",
    "train_accuracy", "test_accuracy", "train_size", "test_size",
    "leaked_test_vectors"};

std::vector<std::string> bin_header(std::vector<std::string> prefix) {
  for (SpectralBin b : kAllBins) prefix.emplace_back(bin_name(b));
  return prefix;
}

std::vector<std::string> overall_fields(const ExperimentReport& r) {
  return {r.strategy,
          std::to_string(r.seed),
          r.paper_mode ? "true" : "false",
          r.digits ? std::to_string(*r.digits) : "",
          csv::format_double(r.train_accuracy),
          csv::format_double(r.test_accuracy),
          std::to_string(r.train_size),
          std::to_string(r.test_size),
          std::to_string(r.leaked_test_vectors)};
}

void append_per_bin(std::vector<std::string>& row, const BinAccuracy& acc) {
  for (const auto& a : acc) row.push_back(a ? csv::format_double(*a) : "");
}

void open_for_write(std::ofstream& out, const std::filesystem::path& path) {
  out.open(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
}

// ---- reading --------------------------------------------------------------

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string());
  Table t{path.filename().string(), {}, {}};
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    auto fields = csv::split_line(csv::chomp(line));
    if (!fields) throw ParseError(t.name + ": unterminated quote");
    if (first) {
      t.header = std::move(*fields);
      first = false;
      continue;
    }
    if (fields->size() != t.header.size()) throw ParseError(t.name + ": wrong field count");
    t.rows.push_back(std::move(*fields));
  }
  if (first) throw ParseError(t.name + ": missing header");
  return t;
}

void expect_header(const Table& t, const std::vector<std::string>& header) {
  if (t.header != header) throw ParseError(t.name + ": unexpected header");
}

double to_double(const Table& t, const std::string& s) {
  auto v = csv::parse_double(s);
  if (!v) throw ParseError(t.name + ": bad number '" + s + "'");
  return *v;
}

std::uint64_t to_uint(const Table& t, const std::string& s) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used == s.size() && !s.empty() && s[0] != '-') return v;
  } catch (const std::exception&) {
  }
  throw ParseError(t.name + ": bad count '" + s + "'");
}

ExperimentReport parse_overall(const Table& t, const std::vector<std::string>& row) {
  ExperimentReport r;
  r.strategy = row[0];
  r.seed = to_uint(t, row[1]);
  if (row[2] != "true" && row[2] != "false") throw ParseError(t.name + ": bad paper_mode");
  r.paper_mode = row[2] == "true";
  if (!row[3].empty()) r.digits = static_cast<int>(to_uint(t, row[3]));
  r.train_accuracy = to_double(t, row[4]);
  r.test_accuracy = to_double(t, row[5]);
  r.train_size = to_uint(t, row[6]);
  r.test_size = to_uint(t, row[7]);
  r.leaked_test_vectors = to_uint(t, row[8]);
  return r;
}

BinAccuracy parse_per_bin(const Table& t, const std::vector<std::string>& row, std::size_t from) {
  BinAccuracy acc{};
  for (std::size_t b = 0; b < kNumBins; ++b) {
    if (!row[from + b].empty()) acc[b] = to_double(t, row[from + b]);
  }
  return acc;
}

}  // namespace

void write_overall_csv(std::span<const ExperimentReport> rs, std::ostream& out) {
  out << csv::join(kOverallHeader) << '\n';
  for (const auto& r : rs) out << csv::join(overall_fields(r)) << '\n';
}

void write_bin_counts_csv(std::span<const ExperimentReport> rs, std::ostream& out) {
  out << csv::join(bin_header({"strategy", "phase"})) << '\n';
  for (const auto& r : rs) {
    for (const auto& [phase, counts] : {std::pair{"before", &r.counts_before},
                                        std::pair{"after", &r.counts_after}}) {
      std::vector<std::string> row{r.strategy, phase};
      for (auto c : *counts) row.push_back(std::to_string(c));
      out << csv::join(row) << '\n';
    }
  }
}

void write_per_bin_accuracy_csv(std::span<const ExperimentReport> rs, std::ostream& out) {
  out << csv::join(bin_header({"strategy"})) << '\n';
  for (const auto& r : rs) {
    std::vector<std::string> row{r.strategy};
    append_per_bin(row, r.per_bin_test_accuracy);
    out << csv::join(row) << '\n';
  }
}

void write_precision_sweep_csv(std::span<const ExperimentReport> rs, std::ostream& out) {
  out << csv::join(bin_header(kOverallHeader)) << '\n';
  for (const auto& r : rs) {
    auto row = overall_fields(r);
    append_per_bin(row, r.per_bin_test_accuracy);
    out << csv::join(row) << '\n';
  }
}

void write_confusion_csv(const ExperimentReport& r, std::ostream& out) {
  std::vector<std::string> header{"truth"};
  header.insert(header.end(), r.labels.begin(), r.labels.end());
  out << csv::join(header) << '\n';
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    std::vector<std::string> row{r.labels.at(i)};
    for (auto c : r.confusion[i]) row.push_back(std::to_string(c));
    out << csv::join(row) << '\n';
  }
}

std::string confusion_file_name(const std::string& strategy) {
  std::string safe;
  for (char c : strategy) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '_';
    safe += keep ? c : '_';
  }
  return "confusion_" + safe + ".csv";
}

void emit_report(const ReportBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::map<std::string, const ExperimentReport*> by_file;
  for (const auto& r : bundle.experiments) {
    if (!by_file.emplace(confusion_file_name(r.strategy), &r).second) {
      throw ParameterError("duplicate strategy name in report: " + r.strategy);
    }
  }
  auto write = [&](const char* name, auto&& fn) {
    std::ofstream out;
    open_for_write(out, dir / name);
    fn(out);
    if (!out.flush()) throw Error("failed writing " + (dir / name).string());
  };
  write(kOverallFile, [&](std::ostream& o) { write_overall_csv(bundle.experiments, o); });
  write(kBinCountsFile, [&](std::ostream& o) { write_bin_counts_csv(bundle.experiments, o); });
  write(kPerBinFile, [&](std::ostream& o) { write_per_bin_accuracy_csv(bundle.experiments, o); });
  write(kSweepFile, [&](std::ostream& o) { write_precision_sweep_csv(bundle.sweep, o); });
  for (const auto& [file, r] : by_file) {
    write(file.c_str(), [&](std::ostream& o) { write_confusion_csv(*r, o); });
  }
}

ReportBundle read_report(const std::filesystem::path& dir) {
  ReportBundle bundle;
  const Table overall = read_table(dir / kOverallFile);
  expect_header(overall, kOverallHeader);
  std::map<std::string, std::size_t> index_of;
  for (const auto& row : overall.rows) {
    index_of[row[0]] = bundle.experiments.size();
    bundle.experiments.push_back(parse_overall(overall, row));
  }
  auto find = [&](const Table& t, const std::string& strategy) -> ExperimentReport& {
    auto it = index_of.find(strategy);
    if (it == index_of.end()) throw ParseError(t.name + ": unknown strategy " + strategy);
    return bundle.experiments[it->second];
  };

  const Table counts = read_table(dir / kBinCountsFile);
  expect_header(counts, bin_header({"strategy", "phase"}));
  for (const auto& row : counts.rows) {
    auto& r = find(counts, row[0]);
    BinCounts* target = row[1] == "before" ? &r.counts_before
                        : row[1] == "after" ? &r.counts_after
                                            : nullptr;
    if (!target) throw ParseError(counts.name + ": bad phase " + row[1]);
    for (std::size_t b = 0; b < kNumBins; ++b) (*target)[b] = to_uint(counts, row[2 + b]);
  }

  const Table per_bin = read_table(dir / kPerBinFile);
  expect_header(per_bin, bin_header({"strategy"}));
  for (const auto& row : per_bin.rows) find(per_bin, row[0]).per_bin_test_accuracy = parse_per_bin(per_bin, row, 1);

  const Table sweep = read_table(dir / kSweepFile);
  expect_header(sweep, bin_header(kOverallHeader));
  for (const auto& row : sweep.rows) {
    auto r = parse_overall(sweep, row);
    r.per_bin_test_accuracy = parse_per_bin(sweep, row, kOverallHeader.size());
    bundle.sweep.push_back(std::move(r));
  }

  for (auto& r : bundle.experiments) {
    const Table conf = read_table(dir / confusion_file_name(r.strategy));
    if (conf.header.empty() || conf.header[0] != "truth") throw ParseError(conf.name + ": bad header");
    r.labels.assign(conf.header.begin() + 1, conf.header.end());
    if (conf.rows.size() != r.labels.size()) throw ParseError(conf.name + ": matrix is not square");
    for (std::size_t i = 0; i < conf.rows.size(); ++i) {
      if (conf.rows[i][0] != r.labels[i]) throw ParseError(conf.name + ": row label mismatch");
      std::vector<std::size_t> row;
      for (std::size_t j = 1; j < conf.rows[i].size(); ++j) row.push_back(to_uint(conf, conf.rows[i][j]));
      r.confusion.push_back(std::move(row));
    }
  }
  return bundle;
}

}  // namespace opticlass
