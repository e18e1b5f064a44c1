#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opticlass/ingest.hpp"
#include "opticlass/spectral_bin.hpp"

namespace opticlass {

struct SpectralPoint {
  double wavelength_um = 0.0;
  double n = 0.0;
  double k = 0.0;

  bool operator==(const SpectralPoint&) const = default;
};

inline constexpr std::size_t kMaxWindow = 3;
using LabelId = std::uint32_t;

/// Classifier input: `width` consecutive points of one curve, flattened as
/// [lambda_1, n_1, k_1, lambda_2, ...]. The label indexes FeatureSet::labels.
struct FeatureVector {
  std::array<SpectralPoint, kMaxWindow> points{};
  std::uint8_t width = 1;
  LabelId label = 0;
  SpectralBin bin = SpectralBin::VIS;  // bin of the first point
  bool synthetic = false;
  /// Identity of the source window: content hash plus occurrence ordinal, so
  /// duplicated copies share it while distinct identical raw rows do not.
  std::uint64_t fingerprint = 0;

  std::size_t dimension() const noexcept { return 3u * width; }
  double feature(std::size_t i) const noexcept {
    const auto& p = points[i / 3];
    switch (i % 3) {
      case 0: return p.wavelength_um;
      case 1: return p.n;
      default: return p.k;
    }
  }
  std::span<const SpectralPoint> view() const noexcept { return {points.data(), width}; }
};

struct FeatureSet {
  std::vector<std::string> labels;
  std::size_t width = 1;
  std::vector<FeatureVector> vectors;

  std::size_t size() const noexcept { return vectors.size(); }
  bool empty() const noexcept { return vectors.empty(); }
  const std::string& label_name(const FeatureVector& v) const { return labels.at(v.label); }
};

using BinCounts = std::array<std::size_t, kNumBins>;

BinCounts bin_counts(const FeatureSet& vs);

/// Packs each curve (records sharing a CompoundId, sorted by wavelength) into
/// disjoint windows of `width` points, dropping the short remainder. Curves are
/// visited in order of first appearance. Width must be 1, 2 or 3.
/// Records must be clean (n and k present).
FeatureSet window_features(const Dataset& d, std::size_t width);

/// Appends `extra` to `into`, remapping labels onto `into`'s table.
void append_features(FeatureSet& into, const FeatureSet& extra);

/// Rounds x to `digits` places after the decimal point, half to even, treating
/// x as its shortest round-trip decimal text.
double round_decimal(double x, int digits);

/// Rounds every n and k to `digits` decimals; wavelengths are untouched.
FeatureSet truncate_precision(const FeatureSet& vs, int digits);

struct SplitSpec {
  double train_fraction = 0.75;
  std::uint64_t seed = 42;
  bool paper_mode = false;  // balance/augment before splitting
};

struct Split {
  FeatureSet train;
  FeatureSet test;
};

/// Seeded shuffle-and-cut with |train| = round(fraction * N), clamped so both
/// sides are non-empty. Any label with two or more vectors is guaranteed a
/// training vector by swapping with a label that can spare one.
Split split(const FeatureSet& vs, const SplitSpec& spec);

/// Randomly removes vectors from every spectral bin above `target` (default:
/// the smallest non-empty bin count).
FeatureSet undersample(const FeatureSet& train, std::optional<std::size_t> target,
                       std::uint64_t seed);

/// Tops up bins below `target` (default: the largest bin count) by sampling
/// their vectors with replacement. `bins` restricts which bins are raised;
/// empty means every non-empty bin. Raising an empty bin throws ParameterError.
FeatureSet oversample(const FeatureSet& train, std::optional<std::size_t> target,
                      std::uint64_t seed, std::span<const SpectralBin> bins = {});

}  // namespace opticlass
