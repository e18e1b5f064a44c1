#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "opticlass/ingest.hpp"
#include "opticlass/preprocess.hpp"

namespace opticlass {

/// Two-pole Sellmeier dispersion model
///   n^2(lambda) = A + B1 lambda^2 / (lambda^2 - C1) + B2 lambda^2 / (lambda^2 - C2)
/// with lambda in micrometers and C1, C2 in um^2. Fitted models keep both poles
/// outside the fit domain: C1 < lambda_min^2 and C2 > lambda_max^2.
struct SellmeierModel {
  std::string compound;
  double A = 1.0;
  double B1 = 0.0;
  double C1 = 0.0;
  double B2 = 0.0;
  double C2 = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double rms_residual = 0.0;  // on n, not n^2

  /// Raw model value, no domain checks.
  double n_squared(double wavelength_um) const noexcept {
    const double s = wavelength_um * wavelength_um;
    return A + B1 * s / (s - C1) + B2 * s / (s - C2);
  }
};

/// n(lambda). Throws DomainError outside the fit domain and Error when the
/// radicand is not positive.
double eval_sellmeier(const SellmeierModel& m, double wavelength_um);

/// Least-squares problem on n^2 residuals in unconstrained coordinates
/// theta = (A, B1, u1, B2, u2) with
///   C1 = lambda_min^2 (1 - exp(u1)),   C2 = lambda_max^2 + exp(u2),
/// which keeps both poles outside [lambda_min, lambda_max] for every theta.
class SellmeierObjective {
 public:
  using Params = Eigen::Matrix<double, 5, 1>;

  SellmeierObjective(std::vector<double> wavelengths_um, std::vector<double> n);

  double lambda_min() const noexcept { return lambda_min_; }
  double lambda_max() const noexcept { return lambda_max_; }
  std::size_t size() const noexcept { return wavelengths_.size(); }

  /// Maps (A, B1, C1, B2, C2) into theta. Poles on the wrong side are pulled
  /// back to half/double the nearest domain edge.
  Params encode(double A, double B1, double C1, double B2, double C2) const;
  /// Writes A..C2 of `theta` into `m` (leaves other fields alone).
  void decode(const Params& theta, SellmeierModel& m) const;

  Eigen::VectorXd residuals(const Params& theta) const;
  Eigen::Matrix<double, Eigen::Dynamic, 5> jacobian(const Params& theta) const;
  double cost(const Params& theta) const { return residuals(theta).squaredNorm(); }

 private:
  std::vector<double> wavelengths_;
  std::vector<double> n_squared_;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
};

struct FitOptions {
  std::size_t min_points = 8;
  double max_wavelength_um = 1.5;  // only the UV-visible-near-IR part of a curve is fitted
  int max_iterations = 2000;
  double relative_tolerance = 1e-12;
};

struct FitStart {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct FitOutcome {
  std::optional<SellmeierModel> model;
  std::string skip_reason;      // set when model is empty
  std::vector<FitStart> starts;  // one per multi-start initialization
  double cost = 0.0;             // objective at the returned parameters
};

/// Multi-start Levenberg-Marquardt fit of the points with
/// wavelength <= options.max_wavelength_um. Deterministic.
FitOutcome fit_sellmeier(std::span<const SpectralPoint> curve, const std::string& compound,
                         const FitOptions& options = {});

/// Uniform grid of `grid_points` wavelengths over [lo, hi] clipped to the fit
/// domain and to (0, 1.5] um; n from the model, k = 0. A single point sits at
/// the lower end. Throws ParameterError on an empty range or zero points.
std::vector<SpectralPoint> generate(const SellmeierModel& m, std::size_t grid_points, double lo,
                                    double hi);

struct AugmentOptions {
  std::size_t points_per_compound = 3000;
  FitOptions fit;
  /// Generation window; each compound is further clipped to its fit domain.
  double range_lo = 0.2;
  double range_hi = 1.5;
  std::string synthetic_page = "sellmeier-fit";
};

struct AugmentationReport {
  std::vector<SellmeierModel> fitted;
  std::vector<std::pair<std::string, std::string>> skipped;  // (compound, reason)
  std::size_t generated_count = 0;
};

/// Fits every compound (in name order) and appends the generated records as
/// synthetic curves (shelf of the compound's first curve, page
/// `synthetic_page`). Original records are untouched and keep their order.
std::pair<Dataset, AugmentationReport> augment_dataset(const Dataset& d,
                                                       const AugmentOptions& options = {});

/// compound,A,B1,C1,B2,C2,lambda_min,lambda_max,rms,status
void write_augmentation_csv(const AugmentationReport& report, std::ostream& out);

}  // namespace opticlass
