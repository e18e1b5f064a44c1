#include "opticlass/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <cmath>
#include <map>
#include <numeric>
#include <string_view>
#include <unordered_map>

#include "opticlass/error.hpp"
#include "opticlass/rng.hpp"

namespace opticlass {

// ---------------------------------------------------------------------------
// Spectral bins

SpectralBin assign_bin(double wavelength_um) {
  if (!(wavelength_um > 0.0)) throw DomainError("wavelength must be positive");
  std::size_t i = 0;
  while (i < kBinEdgesUm.size() && wavelength_um >= kBinEdgesUm[i]) ++i;
  return static_cast<SpectralBin>(i);
}

std::string_view bin_name(SpectralBin b) noexcept {
  switch (b) {
    case SpectralBin::UV: return "UV";
    case SpectralBin::VIS: return "VIS";
    case SpectralBin::NearIR: return "NearIR";
    case SpectralBin::IR: return "IR";
    case SpectralBin::FarIR: return "FarIR";
  }
  return "?";
}

std::optional<SpectralBin> parse_bin(std::string_view name) noexcept {
  for (auto b : kAllBins) {
    if (bin_name(b) == name) return b;
  }
  return std::nullopt;
}

BinCounts bin_counts(const FeatureSet& vs) {
  BinCounts counts{};
  for (const auto& v : vs.vectors) ++counts[index(v.bin)];
  return counts;
}

// ---------------------------------------------------------------------------
// Windowing

namespace {

std::uint64_t hash_bytes(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t bits(double x) {
  std::uint64_t u;
  std::memcpy(&u, &x, sizeof u);
  return u;
}

std::uint64_t content_hash(const FeatureVector& v, std::string_view label) {
  std::uint64_t h = mix64(hash_bytes(label) ^ (std::uint64_t{v.width} << 56) ^
                          (v.synthetic ? 0xA5A5A5A5ULL : 0ULL));
  for (const auto& p : v.view()) {
    h = mix64(h ^ bits(p.wavelength_um));
    h = mix64(h ^ bits(p.n));
    h = mix64(h ^ bits(p.k));
  }
  return h;
}

}  // namespace

FeatureSet window_features(const Dataset& d, std::size_t width) {
  if (width < 1 || width > kMaxWindow) {
    throw ParameterError("window width must be 1, 2 or 3");
  }
  FeatureSet out;
  out.labels = d.labels();
  out.width = width;

  std::map<std::string_view, LabelId> label_ids;
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    label_ids[out.labels[i]] = static_cast<LabelId>(i);
  }

  // Curves in order of first appearance.
  std::vector<std::vector<std::size_t>> members(d.curves().size());
  std::vector<CurveIndex> order;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto c = d.records()[i].curve;
    if (members[c].empty()) order.push_back(c);
    members[c].push_back(i);
  }

  std::unordered_map<std::uint64_t, std::uint64_t> occurrences;
  out.vectors.reserve(d.size() / width);
  for (CurveIndex c : order) {
    auto& idx = members[c];
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return d.records()[a].wavelength_um < d.records()[b].wavelength_um;
    });
    const LabelId label = label_ids.at(d.curves()[c].book);
    for (std::size_t start = 0; start + width <= idx.size(); start += width) {
      FeatureVector v;
      v.width = static_cast<std::uint8_t>(width);
      v.label = label;
      bool synthetic = false;
      for (std::size_t j = 0; j < width; ++j) {
        const auto& r = d.records()[idx[start + j]];
        if (!r.n || !r.k) throw ParameterError("window_features requires a cleaned dataset");
        v.points[j] = SpectralPoint{r.wavelength_um, *r.n, *r.k};
        synthetic = synthetic || r.synthetic;
      }
      v.synthetic = synthetic;
      v.bin = assign_bin(v.points[0].wavelength_um);
      const auto h = content_hash(v, out.labels[label]);
      v.fingerprint = mix64(h ^ mix64(occurrences[h]++));
      out.vectors.push_back(v);
    }
  }
  return out;
}

void append_features(FeatureSet& into, const FeatureSet& extra) {
  if (extra.empty()) return;
  if (!into.empty() && into.width != extra.width) {
    throw ParameterError("cannot merge feature sets of different widths");
  }
  if (into.empty()) into.width = extra.width;
  std::map<std::string_view, LabelId> ids;
  for (std::size_t i = 0; i < into.labels.size(); ++i) ids[into.labels[i]] = static_cast<LabelId>(i);
  std::vector<LabelId> remap(extra.labels.size());
  for (std::size_t i = 0; i < extra.labels.size(); ++i) {
    auto it = ids.find(extra.labels[i]);
    if (it == ids.end()) {
      remap[i] = static_cast<LabelId>(into.labels.size());
      into.labels.push_back(extra.labels[i]);
      ids[into.labels.back()] = remap[i];
    } else {
      remap[i] = it->second;
    }
  }
  into.vectors.reserve(into.vectors.size() + extra.vectors.size());
  for (auto v : extra.vectors) {
    v.label = remap[v.label];
    into.vectors.push_back(v);
  }
}

// ---------------------------------------------------------------------------
// Precision truncation

double round_decimal(double x, int digits) {
  if (digits < 0) throw ParameterError("digits must be nonnegative");
  if (!std::isfinite(x)) return x;
  char buf[512];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed);
  if (ec != std::errc{}) return x;
  std::string_view text(buf, static_cast<std::size_t>(end - buf));

  const bool negative = text.front() == '-';
  if (negative) text.remove_prefix(1);
  const auto dot = text.find('.');
  if (dot == std::string_view::npos) return x;
  const std::string_view frac = text.substr(dot + 1);
  const auto keep = static_cast<std::size_t>(digits);
  if (frac.size() <= keep) return x;

  // Decimal digits of the kept magnitude, without the point.
  std::string kept(text.substr(0, dot));
  kept += frac.substr(0, keep);
  const std::string_view rest = frac.substr(keep);

  bool up = false;
  if (rest[0] > '5') {
    up = true;
  } else if (rest[0] == '5') {
    const bool exact_half = rest.find_first_not_of('0', 1) == std::string_view::npos;
    up = !exact_half || ((kept.back() - '0') % 2 == 1);
  }
  if (up) {
    std::size_t i = kept.size();
    while (i > 0) {
      --i;
      if (kept[i] == '9') {
        kept[i] = '0';
      } else {
        ++kept[i];
        break;
      }
      if (i == 0) kept.insert(kept.begin(), '1');
    }
  }
  std::string result = negative ? "-" : "";
  result += kept.substr(0, kept.size() - keep);
  if (keep > 0) {
    result += '.';
    result += kept.substr(kept.size() - keep);
  }
  double value = 0.0;
  std::from_chars(result.data(), result.data() + result.size(), value);
  return value == 0.0 ? 0.0 : value;  // drop negative zero
}

FeatureSet truncate_precision(const FeatureSet& vs, int digits) {
  if (digits < 1) throw ParameterError("truncation needs at least one decimal digit");
  FeatureSet out = vs;
  for (auto& v : out.vectors) {
    for (std::size_t j = 0; j < v.width; ++j) {
      v.points[j].n = round_decimal(v.points[j].n, digits);
      v.points[j].k = round_decimal(v.points[j].k, digits);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split

Split split(const FeatureSet& vs, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ParameterError("train_fraction must lie in (0, 1)");
  }
  const std::size_t n = vs.size();
  if (n < 2) throw ParameterError("split needs at least two feature vectors");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, 0x5B11D));
  rng.shuffle(std::span<std::size_t>(perm));

  auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  // Every label with >= 2 vectors must reach the training side.
  std::vector<std::size_t> total(vs.labels.size(), 0), in_train(vs.labels.size(), 0);
  for (const auto& v : vs.vectors) ++total[v.label];
  for (std::size_t i = 0; i < n_train; ++i) ++in_train[vs.vectors[perm[i]].label];
  for (std::size_t pos = n_train; pos < n; ++pos) {
    const LabelId label = vs.vectors[perm[pos]].label;
    if (in_train[label] > 0 || total[label] < 2) continue;
    // Give up the last training vector whose label keeps another copy in
    // train, else the last one whose label has no second vector at all.
    std::size_t donor = n_train;
    for (std::size_t t = n_train; t-- > 0;) {
      if (in_train[vs.vectors[perm[t]].label] >= 2) {
        donor = t;
        break;
      }
    }
    for (std::size_t t = n_train; donor == n_train && t-- > 0;) {
      if (total[vs.vectors[perm[t]].label] < 2) donor = t;
    }
    if (donor == n_train) {
      throw ParameterError("training partition too small to hold every label");
    }
    --in_train[vs.vectors[perm[donor]].label];
    ++in_train[label];
    std::swap(perm[donor], perm[pos]);
  }

  std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  Split out;
  out.train.labels = out.test.labels = vs.labels;
  out.train.width = out.test.width = vs.width;
  out.train.vectors.reserve(train_idx.size());
  out.test.vectors.reserve(test_idx.size());
  for (auto i : train_idx) out.train.vectors.push_back(vs.vectors[i]);
  for (auto i : test_idx) out.test.vectors.push_back(vs.vectors[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

std::array<std::vector<std::size_t>, kNumBins> members_by_bin(const FeatureSet& vs) {
  std::array<std::vector<std::size_t>, kNumBins> members;
  for (std::size_t i = 0; i < vs.size(); ++i) members[index(vs.vectors[i].bin)].push_back(i);
  return members;
}

}  // namespace

FeatureSet undersample(const FeatureSet& train, std::optional<std::size_t> target,
                       std::uint64_t seed) {
  if (train.empty()) throw ParameterError("undersample needs a non-empty training set");
  if (target && *target == 0) throw ParameterError("undersample target must be positive");
  auto members = members_by_bin(train);
  std::size_t goal = target.value_or(0);
  if (!target) {
    goal = train.size();
    for (const auto& m : members) {
      if (!m.empty()) goal = std::min(goal, m.size());
    }
  }

  std::vector<char> keep(train.size(), 1);
  for (std::size_t b = 0; b < kNumBins; ++b) {
    auto& m = members[b];
    if (m.size() <= goal) continue;
    Rng rng(derive_seed(seed, 0x05D0 + b));
    // Partial Fisher-Yates: the first `goal` slots are the survivors.
    for (std::size_t i = 0; i < goal; ++i) {
      std::swap(m[i], m[i + rng.below(m.size() - i)]);
    }
    for (std::size_t i = goal; i < m.size(); ++i) keep[m[i]] = 0;
  }
  FeatureSet out;
  out.labels = train.labels;
  out.width = train.width;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (keep[i]) out.vectors.push_back(train.vectors[i]);
  }
  return out;
}

FeatureSet oversample(const FeatureSet& train, std::optional<std::size_t> target,
                      std::uint64_t seed, std::span<const SpectralBin> bins) {
  if (train.empty()) throw ParameterError("oversample needs a non-empty training set");
  if (target && *target == 0) throw ParameterError("oversample target must be positive");
  const auto members = members_by_bin(train);
  std::size_t goal = target.value_or(0);
  if (!target) {
    for (const auto& m : members) goal = std::max(goal, m.size());
  }

  std::array<bool, kNumBins> raise{};
  if (bins.empty()) {
    for (std::size_t b = 0; b < kNumBins; ++b) raise[b] = !members[b].empty();
  } else {
    for (auto b : bins) raise[index(b)] = true;
  }

  FeatureSet out = train;
  for (std::size_t b = 0; b < kNumBins; ++b) {
    const auto& m = members[b];
    if (!raise[b] || m.size() >= goal) continue;
    if (m.empty()) {
      throw ParameterError("cannot oversample empty bin " + std::string(bin_name(kAllBins[b])));
    }
    Rng rng(derive_seed(seed, 0x0050 + b));
    for (std::size_t i = m.size(); i < goal; ++i) {
      out.vectors.push_back(train.vectors[m[rng.below(m.size())]]);
    }
  }
  return out;
}

}  // namespace opticlass
