#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace opticlass {

/// Provenance of a measured curve: database shelf, compound ("book") and
/// literature source ("page"). The book is the classification target.
struct CompoundId {
  std::string shelf;
  std::string book;
  std::string page;

  auto operator<=>(const CompoundId&) const = default;
  bool operator==(const CompoundId&) const = default;
};

using CurveIndex = std::uint32_t;

/// One (wavelength, n, k) measurement. The owning curve is referenced by index
/// into Dataset::curves() so that hundreds of thousands of records do not each
/// carry three strings.
struct SpectralRecord {
  CurveIndex curve = 0;
  double wavelength_um = 0.0;
  std::optional<double> n;
  std::optional<double> k;
  bool synthetic = false;

  bool operator==(const SpectralRecord&) const = default;
};

/// Upper sanity bound on the refractive index accepted at ingestion.
inline constexpr double kMaxRefractiveIndex = 20.0;

/// Immutable collection of records with their curve table and label list.
class Dataset {
 public:
  Dataset() = default;
  /// Validates record invariants and derives the label list (order of first
  /// appearance of each book among the records).
  Dataset(std::vector<CompoundId> curves, std::vector<SpectralRecord> records);

  const std::vector<CompoundId>& curves() const noexcept { return curves_; }
  const std::vector<SpectralRecord>& records() const noexcept { return records_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  const CompoundId& compound(const SpectralRecord& r) const { return curves_.at(r.curve); }
  const std::string& label_of(const SpectralRecord& r) const { return compound(r).book; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  /// Record-by-record equality with provenance resolved through the curve tables.
  bool same_records(const Dataset& other) const;

 private:
  std::vector<CompoundId> curves_;
  std::vector<SpectralRecord> records_;
  std::vector<std::string> labels_;
};

/// Incremental construction helper; interns CompoundIds.
class DatasetBuilder {
 public:
  CurveIndex curve(const CompoundId& id);
  void add(CurveIndex curve, double wavelength_um, std::optional<double> n, std::optional<double> k,
           bool synthetic = false);
  void add(const CompoundId& id, double wavelength_um, std::optional<double> n,
           std::optional<double> k, bool synthetic = false) {
    add(curve(id), wavelength_um, n, k, synthetic);
  }
  Dataset build() &&;

 private:
  std::vector<CompoundId> curves_;
  std::map<CompoundId, CurveIndex> index_;
  std::vector<SpectralRecord> records_;
};

/// A rejected input row or skipped file.
struct Diagnostic {
  std::string source;
  std::size_t row = 0;  // 1-based line number; 0 for file-level notes
  std::string message;
};

struct IngestResult {
  Dataset dataset;
  std::vector<Diagnostic> diagnostics;
  std::size_t skipped_files = 0;
};

/// Parses the compiled table `shelf,book,page,wavelength_um,n,k`.
/// Throws ParseError on a malformed header; bad rows are rejected with a
/// row-numbered diagnostic and parsing continues.
IngestResult parse_compiled_csv(std::istream& source, const std::string& source_name = "<stream>");
IngestResult parse_compiled_csv_file(const std::filesystem::path& path);

/// Parses `<root>/<shelf>/<book>/<page>.csv` files of headerless
/// `wavelength_um,n[,k]` rows. Shelves, books and pages are visited in byte
/// order of their names. Unreadable files are skipped and counted; two files
/// mapping to the same (shelf, book, page) throw ParseError.
IngestResult parse_page_tree(const std::filesystem::path& root);

/// Writes the compiled table; numbers use shortest round-trip text.
void write_compiled_csv(const Dataset& d, std::ostream& out);

/// Writes one file per curve in the page-tree layout.
void export_tree(const Dataset& d, const std::filesystem::path& root);

struct CleaningPolicy {
  bool drop_missing_n = true;
  bool impute_k_zero = true;
};

/// Drops records without n and sets missing k to 0.0.
/// Throws ParameterError if the policy has no rule for missing n.
Dataset clean(const Dataset& d, const CleaningPolicy& policy = {});

inline constexpr std::size_t kNumBins = 5;

/// Caller-chosen (wavelength, n) grid for the density histogram.
struct HistogramGrid {
  double lambda_lo = 0.1;
  double lambda_hi = 100.0;
  std::size_t lambda_bins = 60;
  bool log_lambda = true;
  double n_lo = 0.0;
  double n_hi = 2.5;
  std::size_t n_bins = 50;
};

struct Histogram2D {
  HistogramGrid grid;
  std::vector<std::size_t> cells;  // row-major [lambda_bin][n_bin]
  std::size_t outside = 0;         // records falling off the grid

  std::size_t at(std::size_t lambda_bin, std::size_t n_bin) const {
    return cells[lambda_bin * grid.n_bins + n_bin];
  }
};

struct Stats {
  std::size_t total = 0;
  std::vector<std::pair<std::string, std::size_t>> per_compound;  // in label order
  std::array<std::size_t, kNumBins> per_bin{};                    // indexed by SpectralBin
  Histogram2D histogram;
};

/// Counts per compound, per spectral bin, and on a (wavelength, n) grid.
/// Records without n are counted everywhere except the histogram.
Stats dataset_stats(const Dataset& d, const HistogramGrid& grid = {});

}  // namespace opticlass
