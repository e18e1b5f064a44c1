#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace opticlass {

/// Five wavelength regions, half-open and lower-inclusive (micrometers):
/// UV (0, 0.40), VIS [0.40, 0.75), NearIR [0.75, 1.50), IR [1.50, 4.0), FarIR [4.0, inf).
enum class SpectralBin : std::size_t { UV = 0, VIS, NearIR, IR, FarIR };

inline constexpr std::array<SpectralBin, 5> kAllBins{SpectralBin::UV, SpectralBin::VIS,
                                                     SpectralBin::NearIR, SpectralBin::IR,
                                                     SpectralBin::FarIR};

/// Lower edges of VIS, NearIR, IR and FarIR.
inline constexpr std::array<double, 4> kBinEdgesUm{0.40, 0.75, 1.50, 4.0};

/// Throws DomainError for wavelength_um <= 0 (or NaN).
SpectralBin assign_bin(double wavelength_um);

constexpr std::size_t index(SpectralBin b) noexcept { return static_cast<std::size_t>(b); }

std::string_view bin_name(SpectralBin b) noexcept;
std::optional<SpectralBin> parse_bin(std::string_view name) noexcept;

}  // namespace opticlass
