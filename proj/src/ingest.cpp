#include "opticlass/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "opticlass/csv.hpp"
#include "opticlass/error.hpp"
#include "opticlass/spectral_bin.hpp"

namespace opticlass {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 6> kHeader{"shelf", "book", "page", "wavelength_um", "n",
                                                  "k"};

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return std::string(s);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Parsed numeric part of a row; message is set when the row is rejected.
struct RowValues {
  double wavelength = 0.0;
  std::optional<double> n;
  std::optional<double> k;
  std::string error;
};

RowValues parse_values(const std::string& wl, const std::string& n, const std::string& k) {
  RowValues v;
  auto wl_value = csv::parse_double(wl);
  if (!wl_value) {
    v.error = "non-numeric wavelength '" + wl + "'";
    return v;
  }
  if (*wl_value <= 0.0) {
    v.error = "non-positive wavelength " + wl;
    return v;
  }
  v.wavelength = *wl_value;
  if (!trim(n).empty()) {
    v.n = csv::parse_double(n);
    if (!v.n) {
      v.error = "non-numeric n '" + n + "'";
      return v;
    }
    if (*v.n < 0.0 || *v.n >= kMaxRefractiveIndex) {
      v.error = "n out of range: " + n;
      return v;
    }
  }
  if (!trim(k).empty()) {
    v.k = csv::parse_double(k);
    if (!v.k) {
      v.error = "non-numeric k '" + k + "'";
      return v;
    }
    if (*v.k < 0.0) {
      v.error = "negative k: " + k;
      return v;
    }
  }
  return v;
}

std::string opt_text(const std::optional<double>& v) {
  return v ? csv::format_double(*v) : std::string{};
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (directories ? entry.is_directory() : entry.is_regular_file()) out.push_back(entry.path());
  }
  // Byte order of the name components (pages compared by stem).
  std::sort(out.begin(), out.end(), [directories](const fs::path& a, const fs::path& b) {
    return directories ? a.filename().string() < b.filename().string()
                       : a.stem().string() < b.stem().string();
  });
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<CompoundId> curves, std::vector<SpectralRecord> records)
    : curves_(std::move(curves)), records_(std::move(records)) {
  std::set<std::string> seen;
  for (const auto& r : records_) {
    if (r.curve >= curves_.size()) throw ParameterError("record references unknown curve");
    if (!(r.wavelength_um > 0.0)) throw DomainError("record wavelength must be positive");
    if (r.n && (*r.n < 0.0 || *r.n >= kMaxRefractiveIndex)) {
      throw DomainError("record n outside [0, 20)");
    }
    if (r.k && *r.k < 0.0) throw DomainError("record k must be nonnegative");
    if (r.synthetic && (!r.n || !r.k)) throw DomainError("synthetic record lacks n or k");
    const auto& book = curves_[r.curve].book;
    if (book.empty()) throw DomainError("compound name (book) must be non-empty");
    if (seen.insert(book).second) labels_.push_back(book);
  }
}

bool Dataset::same_records(const Dataset& other) const {
  if (records_.size() != other.records_.size()) return false;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& a = records_[i];
    const auto& b = other.records_[i];
    if (compound(a) != other.compound(b) || a.wavelength_um != b.wavelength_um || a.n != b.n ||
        a.k != b.k || a.synthetic != b.synthetic) {
      return false;
    }
  }
  return labels_ == other.labels_;
}

CurveIndex DatasetBuilder::curve(const CompoundId& id) {
  auto [it, inserted] = index_.try_emplace(id, static_cast<CurveIndex>(curves_.size()));
  if (inserted) curves_.push_back(id);
  return it->second;
}

void DatasetBuilder::add(CurveIndex curve, double wavelength_um, std::optional<double> n,
                         std::optional<double> k, bool synthetic) {
  records_.push_back(SpectralRecord{curve, wavelength_um, n, k, synthetic});
}

Dataset DatasetBuilder::build() && { return Dataset(std::move(curves_), std::move(records_)); }

// ---------------------------------------------------------------------------
// Parsing

IngestResult parse_compiled_csv(std::istream& source, const std::string& source_name) {
  IngestResult result;
  std::string line;
  if (!std::getline(source, line)) {
    throw ParseError(source_name + ": missing header row");
  }
  std::string_view header_line = csv::chomp(line);
  if (header_line.starts_with("\xEF\xBB\xBF")) header_line.remove_prefix(3);
  auto header = csv::split_line(header_line);
  if (!header || header->size() != kHeader.size()) {
    throw ParseError(source_name + ": header must be shelf,book,page,wavelength_um,n,k");
  }
  for (std::size_t i = 0; i < kHeader.size(); ++i) {
    if (lower(trim((*header)[i])) != kHeader[i]) {
      throw ParseError(source_name + ": unexpected header column '" + (*header)[i] + "'");
    }
  }

  DatasetBuilder builder;
  std::size_t row = 1;
  while (std::getline(source, line)) {
    ++row;
    const auto text = csv::chomp(line);
    if (text.empty()) continue;
    auto fields = csv::split_line(text);
    if (!fields) {
      result.diagnostics.push_back({source_name, row, "unterminated quote"});
      continue;
    }
    if (fields->size() != kHeader.size()) {
      result.diagnostics.push_back(
          {source_name, row, "expected 6 fields, got " + std::to_string(fields->size())});
      continue;
    }
    auto& f = *fields;
    CompoundId id{trim(f[0]), trim(f[1]), trim(f[2])};
    if (id.book.empty()) {
      result.diagnostics.push_back({source_name, row, "empty book"});
      continue;
    }
    RowValues v = parse_values(f[3], f[4], f[5]);
    if (!v.error.empty()) {
      result.diagnostics.push_back({source_name, row, v.error});
      continue;
    }
    builder.add(id, v.wavelength, v.n, v.k);
  }
  result.dataset = std::move(builder).build();
  return result;
}

IngestResult parse_compiled_csv_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return parse_compiled_csv(in, path.string());
}

IngestResult parse_page_tree(const fs::path& root) {
  if (!fs::is_directory(root)) throw ParseError(root.string() + " is not a directory");
  IngestResult result;
  DatasetBuilder builder;
  std::set<CompoundId> seen;

  for (const auto& shelf_dir : sorted_entries(root, true)) {
    for (const auto& book_dir : sorted_entries(shelf_dir, true)) {
      for (const auto& file : sorted_entries(book_dir, false)) {
        if (lower(file.extension().string()) != ".csv") continue;
        CompoundId id{shelf_dir.filename().string(), book_dir.filename().string(),
                      file.stem().string()};
        if (!seen.insert(id).second) {
          throw ParseError("duplicate page " + id.shelf + "/" + id.book + "/" + id.page);
        }
        std::ifstream in(file, std::ios::binary);
        if (!in) {
          ++result.skipped_files;
          result.diagnostics.push_back({file.string(), 0, "unreadable file skipped"});
          continue;
        }
        const CurveIndex curve = builder.curve(id);
        std::string line;
        std::size_t row = 0;
        while (std::getline(in, line)) {
          ++row;
          const auto text = csv::chomp(line);
          if (text.empty()) continue;
          auto fields = csv::split_line(text);
          if (!fields || fields->size() < 2 || fields->size() > 3) {
            result.diagnostics.push_back({file.string(), row, "expected 2 or 3 fields"});
            continue;
          }
          auto& f = *fields;
          RowValues v = parse_values(f[0], f[1], f.size() == 3 ? f[2] : std::string{});
          if (!v.error.empty()) {
            result.diagnostics.push_back({file.string(), row, v.error});
            continue;
          }
          builder.add(curve, v.wavelength, v.n, v.k);
        }
        if (in.bad()) {
          ++result.skipped_files;
          result.diagnostics.push_back({file.string(), 0, "read error"});
        }
      }
    }
  }
  result.dataset = std::move(builder).build();
  return result;
}

void write_compiled_csv(const Dataset& d, std::ostream& out) {
  out << "shelf,book,page,wavelength_um,n,k\n";
  for (const auto& r : d.records()) {
    const auto& id = d.compound(r);
    out << csv::join({id.shelf, id.book, id.page, csv::format_double(r.wavelength_um),
                      opt_text(r.n), opt_text(r.k)})
        << '\n';
  }
}

void export_tree(const Dataset& d, const fs::path& root) {
  std::vector<std::vector<std::size_t>> by_curve(d.curves().size());
  for (std::size_t i = 0; i < d.size(); ++i) by_curve[d.records()[i].curve].push_back(i);
  for (std::size_t c = 0; c < by_curve.size(); ++c) {
    if (by_curve[c].empty()) continue;
    const auto& id = d.curves()[c];
    const fs::path dir = root / id.shelf / id.book;
    fs::create_directories(dir);
    std::ofstream out(dir / (id.page + ".csv"), std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / (id.page + ".csv")).string());
    for (std::size_t i : by_curve[c]) {
      const auto& r = d.records()[i];
      out << csv::format_double(r.wavelength_um) << ',' << opt_text(r.n) << ',' << opt_text(r.k)
          << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Cleaning and statistics

Dataset clean(const Dataset& d, const CleaningPolicy& policy) {
  if (!policy.drop_missing_n) {
    throw ParameterError("cleaning policy must drop records with missing n");
  }
  std::vector<SpectralRecord> kept;
  kept.reserve(d.size());
  for (const auto& r : d.records()) {
    if (!r.n) continue;
    SpectralRecord copy = r;
    if (!copy.k && policy.impute_k_zero) copy.k = 0.0;
    kept.push_back(copy);
  }
  return Dataset(d.curves(), std::move(kept));
}

Stats dataset_stats(const Dataset& d, const HistogramGrid& grid) {
  if (grid.lambda_bins == 0 || grid.n_bins == 0 || !(grid.lambda_hi > grid.lambda_lo) ||
      !(grid.n_hi > grid.n_lo) || (grid.log_lambda && grid.lambda_lo <= 0.0)) {
    throw ParameterError("invalid histogram grid");
  }
  Stats s;
  s.total = d.size();
  s.histogram.grid = grid;
  s.histogram.cells.assign(grid.lambda_bins * grid.n_bins, 0);

  std::vector<std::size_t> per_label(d.labels().size(), 0);
  std::map<std::string_view, std::size_t> label_index;
  for (std::size_t i = 0; i < d.labels().size(); ++i) label_index[d.labels()[i]] = i;

  const double l0 = grid.log_lambda ? std::log(grid.lambda_lo) : grid.lambda_lo;
  const double l1 = grid.log_lambda ? std::log(grid.lambda_hi) : grid.lambda_hi;
  for (const auto& r : d.records()) {
    ++per_label[label_index.at(d.label_of(r))];
    ++s.per_bin[index(assign_bin(r.wavelength_um))];
    if (!r.n) continue;
    const double lv = grid.log_lambda ? std::log(r.wavelength_um) : r.wavelength_um;
    const double lf = (lv - l0) / (l1 - l0);
    const double nf = (*r.n - grid.n_lo) / (grid.n_hi - grid.n_lo);
    if (lf < 0.0 || lf >= 1.0 || nf < 0.0 || nf >= 1.0) {
      ++s.histogram.outside;
      continue;
    }
    const auto li = std::min(grid.lambda_bins - 1, static_cast<std::size_t>(lf * grid.lambda_bins));
    const auto ni = std::min(grid.n_bins - 1, static_cast<std::size_t>(nf * grid.n_bins));
    ++s.histogram.cells[li * grid.n_bins + ni];
  }
  for (std::size_t i = 0; i < per_label.size(); ++i) {
    s.per_compound.emplace_back(d.labels()[i], per_label[i]);
  }
  return s;
}

}  // namespace opticlass
