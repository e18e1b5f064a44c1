#include "opticlass/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include <Eigen/Cholesky>

#include "opticlass/csv.hpp"
#include "opticlass/error.hpp"

namespace opticlass {

double eval_sellmeier(const SellmeierModel& m, double wavelength_um) {
  if (!(wavelength_um >= m.lambda_min && wavelength_um <= m.lambda_max)) {
    throw DomainError("wavelength " + csv::format_double(wavelength_um) +
                      " um outside the fit domain of " + m.compound);
  }
  const double n2 = m.n_squared(wavelength_um);
  if (!(n2 > 0.0)) throw Error("Sellmeier radicand not positive for " + m.compound);
  return std::sqrt(n2);
}

// ---------------------------------------------------------------------------
// Objective

SellmeierObjective::SellmeierObjective(std::vector<double> wavelengths_um, std::vector<double> n)
    : wavelengths_(std::move(wavelengths_um)) {
  if (wavelengths_.size() != n.size() || wavelengths_.empty()) {
    throw ParameterError("Sellmeier objective needs matching, non-empty inputs");
  }
  n_squared_.resize(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) n_squared_[i] = n[i] * n[i];
  const auto [lo, hi] = std::minmax_element(wavelengths_.begin(), wavelengths_.end());
  lambda_min_ = *lo;
  lambda_max_ = *hi;
}

SellmeierObjective::Params SellmeierObjective::encode(double A, double B1, double C1, double B2,
                                                      double C2) const {
  const double s_min = lambda_min_ * lambda_min_;
  const double s_max = lambda_max_ * lambda_max_;
  if (!(C1 < s_min)) C1 = 0.5 * s_min;
  if (!(C2 > s_max)) C2 = 2.0 * s_max;
  Params theta;
  theta << A, B1, std::log(1.0 - C1 / s_min), B2, std::log(C2 - s_max);
  return theta;
}

void SellmeierObjective::decode(const Params& theta, SellmeierModel& m) const {
  m.A = theta[0];
  m.B1 = theta[1];
  m.C1 = lambda_min_ * lambda_min_ * (1.0 - std::exp(theta[2]));
  m.B2 = theta[3];
  m.C2 = lambda_max_ * lambda_max_ + std::exp(theta[4]);
}

Eigen::VectorXd SellmeierObjective::residuals(const Params& theta) const {
  SellmeierModel m;
  decode(theta, m);
  Eigen::VectorXd r(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) {
    r[static_cast<Eigen::Index>(i)] = m.n_squared(wavelengths_[i]) - n_squared_[i];
  }
  return r;
}

Eigen::Matrix<double, Eigen::Dynamic, 5> SellmeierObjective::jacobian(const Params& theta) const {
  SellmeierModel m;
  decode(theta, m);
  const double dC1_du1 = -lambda_min_ * lambda_min_ * std::exp(theta[2]);
  const double dC2_du2 = std::exp(theta[4]);
  Eigen::Matrix<double, Eigen::Dynamic, 5> J(static_cast<Eigen::Index>(size()), 5);
  for (std::size_t i = 0; i < size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double s = wavelengths_[i] * wavelengths_[i];
    const double d1 = s - m.C1;
    const double d2 = s - m.C2;
    J(row, 0) = 1.0;
    J(row, 1) = s / d1;
    J(row, 2) = m.B1 * s / (d1 * d1) * dC1_du1;
    J(row, 3) = s / d2;
    J(row, 4) = m.B2 * s / (d2 * d2) * dC2_du2;
  }
  return J;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

struct LmResult {
  SellmeierObjective::Params theta;
  FitStart start;
};

// Marquardt-scaled damped Gauss-Newton. Only downhill steps are accepted.
LmResult levenberg_marquardt(const SellmeierObjective& obj, SellmeierObjective::Params theta,
                             const FitOptions& options) {
  LmResult out;
  double cost = obj.cost(theta);
  out.start.initial_cost = cost;
  double mu = 1e-3;
  int it = 0;
  bool converged = false;
  while (it < options.max_iterations && std::isfinite(cost)) {
    ++it;
    if (cost <= std::numeric_limits<double>::min()) {
      converged = true;
      break;
    }
    const auto J = obj.jacobian(theta);
    const Eigen::VectorXd r = obj.residuals(theta);
    const Eigen::Matrix<double, 5, 5> H = J.transpose() * J;
    const Eigen::Matrix<double, 5, 1> g = J.transpose() * r;
    const double diag_floor = std::max(H.diagonal().maxCoeff(), 1.0) * 1e-14;

    bool accepted = false;
    while (mu < 1e20) {
      Eigen::Matrix<double, 5, 5> A = H;
      for (int j = 0; j < 5; ++j) A(j, j) += mu * std::max(H(j, j), diag_floor);
      const Eigen::Matrix<double, 5, 1> step = A.ldlt().solve(-g);
      const SellmeierObjective::Params trial = theta + step;
      const double trial_cost = step.allFinite() ? obj.cost(trial) : cost;
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double rel = (cost - trial_cost) / cost;
        theta = trial;
        cost = trial_cost;
        mu = std::max(mu / 3.0, 1e-15);
        accepted = true;
        if (rel < options.relative_tolerance) converged = true;
        break;
      }
      mu *= 4.0;
    }
    // No downhill step at any damping: a stationary point.
    if (!accepted) converged = true;
    if (converged) break;
  }
  out.theta = theta;
  out.start.final_cost = cost;
  out.start.iterations = it;
  out.start.converged = converged;
  return out;
}

double rms_on_n(const SellmeierModel& m, std::span<const double> wl, std::span<const double> n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < wl.size(); ++i) {
    const double n2 = m.n_squared(wl[i]);
    const double model_n = n2 > 0.0 ? std::sqrt(n2) : 0.0;
    acc += (model_n - n[i]) * (model_n - n[i]);
  }
  return std::sqrt(acc / static_cast<double>(wl.size()));
}

}  // namespace

FitOutcome fit_sellmeier(std::span<const SpectralPoint> curve, const std::string& compound,
                         const FitOptions& options) {
  FitOutcome outcome;
  std::vector<SpectralPoint> pts;
  for (const auto& p : curve) {
    if (p.wavelength_um > 0.0 && p.wavelength_um <= options.max_wavelength_um) pts.push_back(p);
  }
  if (pts.size() < std::max<std::size_t>(options.min_points, 1)) {
    outcome.skip_reason = "insufficient data";
    return outcome;
  }
  std::stable_sort(pts.begin(), pts.end(), [](const SpectralPoint& a, const SpectralPoint& b) {
    return a.wavelength_um < b.wavelength_um;
  });
  std::vector<double> wl, n;
  for (const auto& p : pts) {
    wl.push_back(p.wavelength_um);
    n.push_back(p.n);
  }
  if (wl.front() == wl.back()) {
    outcome.skip_reason = "insufficient data";
    return outcome;
  }
  const SellmeierObjective obj(wl, n);

  double mean_n2 = 0.0;
  for (double v : n) mean_n2 += v * v;
  mean_n2 /= static_cast<double>(n.size());

  // One UV and one IR resonance guess each.
  constexpr std::array<std::pair<double, double>, 2> kUvStarts{{{0.5, 0.01}, {1.0, 0.03}}};
  constexpr std::array<std::pair<double, double>, 2> kIrStarts{{{0.1, 100.0}, {1.0, 400.0}}};

  std::optional<LmResult> best;
  for (const auto& [b1, c1] : kUvStarts) {
    for (const auto& [b2, c2] : kIrStarts) {
      auto result = levenberg_marquardt(obj, obj.encode(mean_n2, b1, c1, b2, c2), options);
      outcome.starts.push_back(result.start);
      if (!std::isfinite(result.start.final_cost) || !result.theta.allFinite()) continue;
      if (!best || result.start.final_cost < best->start.final_cost) best = result;
    }
  }
  if (!best) {
    outcome.skip_reason = "no start converged";
    return outcome;
  }

  SellmeierModel m;
  m.compound = compound;
  obj.decode(best->theta, m);
  m.lambda_min = obj.lambda_min();
  m.lambda_max = obj.lambda_max();
  const double s_min = m.lambda_min * m.lambda_min;
  const double s_max = m.lambda_max * m.lambda_max;
  if (!(m.C1 < s_min) || !(m.C2 > s_max)) {
    outcome.skip_reason = "pole inside fit domain";
    return outcome;
  }
  // Positivity of n^2 over the domain, checked on a dense grid plus the data.
  constexpr int kProbe = 1000;
  for (int i = 0; i <= kProbe; ++i) {
    const double l = m.lambda_min + (m.lambda_max - m.lambda_min) * i / kProbe;
    if (!(m.n_squared(l) > 0.0)) {
      outcome.skip_reason = "non-positive n^2 in fit domain";
      return outcome;
    }
  }
  m.rms_residual = rms_on_n(m, wl, n);
  outcome.cost = best->start.final_cost;
  outcome.model = std::move(m);
  return outcome;
}

std::vector<SpectralPoint> generate(const SellmeierModel& m, std::size_t grid_points, double lo,
                                    double hi) {
  if (grid_points == 0) throw ParameterError("grid_points must be positive");
  const double a = std::max(lo, m.lambda_min);
  const double b = std::min({hi, m.lambda_max, 1.5});
  if (!(a > 0.0) || !(a <= b)) {
    throw ParameterError("generation range does not intersect the fit domain of " + m.compound);
  }
  std::vector<SpectralPoint> out;
  out.reserve(grid_points);
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double t = grid_points == 1 ? 0.0
                                      : static_cast<double>(i) / static_cast<double>(grid_points - 1);
    const double l = std::min(a + (b - a) * t, b);
    out.push_back(SpectralPoint{l, eval_sellmeier(m, l), 0.0});
  }
  return out;
}

std::pair<Dataset, AugmentationReport> augment_dataset(const Dataset& d,
                                                       const AugmentOptions& options) {
  AugmentationReport report;
  // Points and first shelf per compound, keyed (and therefore visited) by name.
  std::map<std::string, std::vector<SpectralPoint>> curves;
  std::map<std::string, std::string> shelf_of;
  for (const auto& r : d.records()) {
    const auto& id = d.compound(r);
    shelf_of.try_emplace(id.book, id.shelf);
    if (r.synthetic || !r.n) continue;
    curves[id.book].push_back(SpectralPoint{r.wavelength_um, *r.n, r.k.value_or(0.0)});
  }

  DatasetBuilder builder;
  for (const auto& r : d.records()) builder.add(d.compound(r), r.wavelength_um, r.n, r.k, r.synthetic);

  for (const auto& [book, shelf] : shelf_of) {
    auto it = curves.find(book);
    if (it == curves.end()) {
      report.skipped.emplace_back(book, "insufficient data");
      continue;
    }
    FitOutcome fit = fit_sellmeier(it->second, book, options.fit);
    if (!fit.model) {
      report.skipped.emplace_back(book, fit.skip_reason);
      continue;
    }
    std::vector<SpectralPoint> points;
    try {
      points = generate(*fit.model, options.points_per_compound, options.range_lo, options.range_hi);
    } catch (const ParameterError&) {
      report.skipped.emplace_back(book, "fit domain outside generation range");
      continue;
    }
    const CurveIndex curve = builder.curve(CompoundId{shelf, book, options.synthetic_page});
    for (const auto& p : points) builder.add(curve, p.wavelength_um, p.n, p.k, true);
    report.generated_count += points.size();
    report.fitted.push_back(std::move(*fit.model));
  }
  return {std::move(builder).build(), std::move(report)};
}

void write_augmentation_csv(const AugmentationReport& report, std::ostream& out) {
  out << "compound,A,B1,C1,B2,C2,lambda_min,lambda_max,rms,status\n";
  // Rows in compound-name order regardless of fit outcome.
  std::map<std::string, std::string> rows;
  for (const auto& m : report.fitted) {
    rows[m.compound] = csv::join({m.compound, csv::format_double(m.A), csv::format_double(m.B1),
                                  csv::format_double(m.C1), csv::format_double(m.B2),
                                  csv::format_double(m.C2), csv::format_double(m.lambda_min),
                                  csv::format_double(m.lambda_max),
                                  csv::format_double(m.rms_residual), "fitted"});
  }
  for (const auto& [compound, reason] : report.skipped) {
    rows[compound] = csv::join({compound, "", "", "", "", "", "", "", "", "skipped: " + reason});
  }
  for (const auto& [_, row] : rows) out << row << '\n';
}

}  // namespace opticlass
