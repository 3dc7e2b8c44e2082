#include "ehd/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "ehd/error.hpp"

namespace ehd {

namespace {

constexpr double kZ95 = 1.959963984540054;

// Space-charge force of one stage with beta1 = 1 and E = V / d.
double unit_stage_force(const StageGeometry& geom, const FluidEnvironment& env,
                        double voltage_V) {
  const double e = voltage_V / geom.drift_gap_m;
  return 9.0 / 8.0 * env.permittivity * geom.area_m2 * e * e;
}

double momentum_force_from_velocity(const FluidEnvironment& env, const StageGeometry& geom,
                                    double v) {
  return 0.5 * env.air_density * geom.area_m2 * v * v;
}

struct LeastSquares2 {
  double a, b;      // coefficients
  double rss;       // residual sum of squares
  double inv[2][2]; // (X^T X)^-1
};

// y ~ a x1 + b x2 without intercept. Returns nullopt when X^T X is singular.
std::optional<LeastSquares2> solve_least_squares(const std::vector<double>& x1,
                                                 const std::vector<double>& x2,
                                                 const std::vector<double>& y) {
  double s11 = 0, s12 = 0, s22 = 0, t1 = 0, t2 = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    s11 += x1[i] * x1[i];
    s12 += x1[i] * x2[i];
    s22 += x2[i] * x2[i];
    t1 += x1[i] * y[i];
    t2 += x2[i] * y[i];
  }
  const double det = s11 * s22 - s12 * s12;
  if (!(std::abs(det) > 1e-12 * s11 * s22) || !std::isfinite(det)) return std::nullopt;

  LeastSquares2 fit{};
  fit.inv[0][0] = s22 / det;
  fit.inv[1][1] = s11 / det;
  fit.inv[0][1] = fit.inv[1][0] = -s12 / det;
  fit.a = fit.inv[0][0] * t1 + fit.inv[0][1] * t2;
  fit.b = fit.inv[1][0] * t1 + fit.inv[1][1] * t2;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - fit.a * x1[i] - fit.b * x2[i];
    fit.rss += r * r;
  }
  return fit;
}

double rms(double rss, std::size_t n) { return n ? std::sqrt(rss / n) : 0.0; }

void check_beta(FitResult& result, double beta, const char* name) {
  std::ostringstream msg;
  if (beta <= 0) {
    msg << name << " fitted as " << beta << ": no thrust measured";
    result.warnings.push_back(msg.str());
  } else if (beta > 1.0) {
    msg << name << " fitted as " << beta << " > 1 violates the loss model";
    if (beta > 1.5) msg << " (outside the plausible range (0, 1.5])";
    result.warnings.push_back(msg.str());
  }
}

// Piecewise-linear table in voltage, duplicates averaged.
class VoltageTable {
 public:
  void add(double v, double y) { points_.push_back({v, y}); }

  void finalize() {
    std::sort(points_.begin(), points_.end());
    std::vector<std::pair<double, double>> merged;
    for (std::size_t i = 0; i < points_.size();) {
      std::size_t j = i;
      double sum = 0;
      while (j < points_.size() && points_[j].first == points_[i].first) sum += points_[j++].second;
      merged.push_back({points_[i].first, sum / static_cast<double>(j - i)});
      i = j;
    }
    points_ = std::move(merged);
  }

  bool usable() const { return points_.size() >= 2; }
  double min() const { return points_.front().first; }
  double max() const { return points_.back().first; }

  double at(double v) const {
    auto hi = std::lower_bound(points_.begin(), points_.end(), std::make_pair(v, -std::numeric_limits<double>::infinity()));
    if (hi == points_.end()) return points_.back().second;
    if (hi->first == v || hi == points_.begin()) return hi->second;
    auto lo = hi - 1;
    const double t = (v - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
  }

  const std::vector<std::pair<double, double>>& points() const { return points_; }

 private:
  std::vector<std::pair<double, double>> points_;
};

bool same_geometry(const StageGeometry& a, const StageGeometry& b) {
  auto close = [](double x, double y) {
    return std::abs(x - y) <= 1e-9 * std::max(std::abs(x), std::abs(y));
  };
  return close(a.drift_gap_m, b.drift_gap_m) && close(a.spacing_ratio, b.spacing_ratio) &&
         close(a.area_m2, b.area_m2);
}

// Endpoint current from a least-squares line over the samples in [lo, hi],
// evaluated at t.
std::optional<double> endpoint_current(const std::vector<Sample>& samples, double lo,
                                       double hi, double t) {
  double n = 0, st = 0, si = 0, stt = 0, sti = 0;
  for (const auto& s : samples) {
    if (s.time_s < lo || s.time_s > hi) continue;
    const double x = s.time_s - t;
    n += 1;
    st += x;
    si += s.current_A;
    stt += x * x;
    sti += x * s.current_A;
  }
  if (n == 0) return std::nullopt;
  const double det = n * stt - st * st;
  if (n < 2 || det <= 0) return si / n;
  return (stt * si - st * sti) / det;
}

}  // namespace

void MeasurementSeries::validate() const {
  if (stage_count < 1) fail(ErrorKind::kInvalidInput, "stage count must be >= 1");
  if (geometry.stage_count != stage_count)
    fail(ErrorKind::kInvalidInput, "geometry stage count disagrees with series stage count");
  geometry.validate();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.time_s) || !std::isfinite(s.voltage_V) || !std::isfinite(s.current_A))
      fail(ErrorKind::kInvalidInput, "sample " + std::to_string(i) + " is not finite");
    if (s.voltage_V < 0 || s.current_A < 0)
      fail(ErrorKind::kInvalidInput, "sample " + std::to_string(i) + " has negative voltage or current");
    if (s.velocity_mps && !(std::isfinite(*s.velocity_mps) && *s.velocity_mps >= 0))
      fail(ErrorKind::kInvalidInput, "sample " + std::to_string(i) + " has an invalid velocity");
    if (i > 0 && !(s.time_s > samples[i - 1].time_s))
      fail(ErrorKind::kInvalidInput,
           "timestamps must be strictly increasing (sample " + std::to_string(i) + ")");
  }
}

FitResult fit_onset(const MeasurementSeries& series, const OnsetFitOptions& options) {
  series.validate();
  std::vector<double> v2, v1, current;
  double v_scale = 0;
  for (const auto& s : series.samples)
    if (s.current_A > options.noise_floor_A) v_scale = std::max(v_scale, s.voltage_V);
  for (const auto& s : series.samples) {
    if (s.current_A <= options.noise_floor_A) continue;
    const double u = s.voltage_V / v_scale;
    v2.push_back(u * u);
    v1.push_back(u);
    current.push_back(s.current_A);
  }
  const std::size_t m = current.size();
  if (m < std::max<std::size_t>(options.min_samples, 3))
    fail(ErrorKind::kInsufficientData,
         std::to_string(m) + " samples above the " + std::to_string(options.noise_floor_A) +
             " A noise floor; need " + std::to_string(options.min_samples));

  // I = a u^2 + b u with u = V / v_scale, so C = a / v_scale^2, V0 = -b v_scale / a.
  const auto fit = solve_least_squares(v2, v1, current);
  if (!fit) fail(ErrorKind::kFitDivergence, "singular normal equations in the onset fit");
  if (!(fit->a > 0))
    fail(ErrorKind::kFitDivergence, "fitted current curvature is not positive; no onset");

  FitResult result;
  result.samples_used = m;
  result.townsend_coefficient_ApV2 = fit->a / (v_scale * v_scale);
  const double onset_scaled = -fit->b / fit->a;
  result.onset_voltage_V = onset_scaled * v_scale;
  result.residual_rms = rms(fit->rss, m);

  if (m > 2) {
    const double s2 = fit->rss / static_cast<double>(m - 2);
    const double ga = fit->b / (fit->a * fit->a), gb = -1.0 / fit->a;
    const double var = s2 * (ga * ga * fit->inv[0][0] + 2 * ga * gb * fit->inv[0][1] +
                             gb * gb * fit->inv[1][1]);
    result.onset_voltage_half_width_V = kZ95 * std::sqrt(std::max(var, 0.0)) * v_scale;
  }
  if (*result.onset_voltage_V < 0)
    result.warnings.push_back("fitted onset voltage is negative");
  return result;
}

FitResult fit_beta1(const MeasurementSeries& series, const FluidEnvironment& env) {
  series.validate();
  env.validate();
  if (series.stage_count != 1)
    fail(ErrorKind::kInvalidInput, "beta1 is fitted from single-stage series only");

  double sxy = 0, sxx = 0;
  std::vector<std::pair<double, double>> pairs;
  for (const auto& s : series.samples) {
    if (!s.velocity_mps) continue;
    const double measured = momentum_force_from_velocity(env, series.geometry, *s.velocity_mps);
    const double model = unit_stage_force(series.geometry, env, s.voltage_V);
    pairs.push_back({model, measured});
    sxy += model * measured;
    sxx += model * model;
  }
  if (pairs.size() < 3)
    fail(ErrorKind::kInsufficientData, "need at least 3 samples with velocity");
  if (!(sxx > 0)) fail(ErrorKind::kInsufficientData, "all velocity samples are at zero voltage");

  FitResult result;
  result.samples_used = pairs.size();
  const double beta1 = sxy / sxx;
  result.fitted_beta1 = beta1;
  double rss = 0;
  for (auto [model, measured] : pairs) rss += (measured - beta1 * model) * (measured - beta1 * model);
  result.residual_rms = rms(rss, pairs.size());
  check_beta(result, beta1, "beta1");
  return result;
}

FitResult fit_beta2(const std::vector<MeasurementSeries>& series_by_stage,
                    const FluidEnvironment& env, double beta1,
                    StackingConvention convention) {
  env.validate();
  if (series_by_stage.size() < 2)
    fail(ErrorKind::kInsufficientData, "need at least two series");
  std::set<int> counts;
  for (const auto& s : series_by_stage) {
    s.validate();
    counts.insert(s.stage_count);
    if (!same_geometry(s.geometry, series_by_stage.front().geometry))
      fail(ErrorKind::kMismatchedGeometry,
           "series differ in drift gap, spacing ratio or area");
  }
  if (counts.size() < 2)
    fail(ErrorKind::kInsufficientData, "need at least two distinct stage counts");
  if (convention == StackingConvention::kLiteral &&
      !(std::isfinite(beta1) && beta1 > 0 && beta1 <= 1))
    fail(ErrorKind::kInvalidInput, "beta1 must lie in (0, 1]");

  const StageGeometry& geom = series_by_stage.front().geometry;
  std::vector<VoltageTable> current(series_by_stage.size()), velocity(series_by_stage.size());
  for (std::size_t k = 0; k < series_by_stage.size(); ++k) {
    for (const auto& s : series_by_stage[k].samples) {
      current[k].add(s.voltage_V, s.current_A);
      if (s.velocity_mps) velocity[k].add(s.voltage_V, *s.velocity_mps);
    }
    current[k].finalize();
    velocity[k].finalize();
    if (!velocity[k].usable())
      fail(ErrorKind::kInsufficientData,
           "series " + std::to_string(k) + " has fewer than two velocity voltages");
  }

  double lo = 0, hi = INFINITY;
  for (const auto& t : velocity) {
    lo = std::max(lo, t.min());
    hi = std::min(hi, t.max());
  }
  // Reference grid: velocity voltages of the series with the fewest stages.
  const auto ref = static_cast<std::size_t>(
      std::min_element(series_by_stage.begin(), series_by_stage.end(),
                       [](const auto& a, const auto& b) { return a.stage_count < b.stage_count; }) -
      series_by_stage.begin());
  std::vector<double> grid;
  for (const auto& [v, unused] : velocity[ref].points())
    if (v > 0 && v >= lo && v <= hi) grid.push_back(v);
  if (grid.size() < 3)
    fail(ErrorKind::kInsufficientData, "fewer than 3 common operating points across series");

  FitResult result;
  std::vector<double> x1, x2, y;
  for (double v : grid) {
    const double unit = unit_stage_force(geom, env, v);
    for (std::size_t k = 0; k < series_by_stage.size(); ++k) {
      const double n = series_by_stage[k].stage_count;
      y.push_back(momentum_force_from_velocity(env, geom, velocity[k].at(v)));
      if (convention == StackingConvention::kLiteral) {
        x1.push_back(n * beta1 * unit);
      } else {
        x1.push_back(unit);
        x2.push_back((n - 1) * unit);
      }
    }
  }
  result.samples_used = y.size();

  if (convention == StackingConvention::kLiteral) {
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      sxy += x1[i] * y[i];
      sxx += x1[i] * x1[i];
    }
    const double beta2 = sxy / sxx;
    double rss = 0;
    for (std::size_t i = 0; i < y.size(); ++i) rss += std::pow(y[i] - beta2 * x1[i], 2);
    result.fitted_beta2 = beta2;
    result.residual_rms = rms(rss, y.size());
  } else {
    const auto fit = solve_least_squares(x1, x2, y);
    if (!fit || !(fit->a > 0))
      fail(ErrorKind::kFitDivergence, "joint beta1/beta2 fit is degenerate");
    result.fitted_beta1 = fit->a;
    result.fitted_beta2 = fit->b / fit->a;
    result.residual_rms = rms(fit->rss, y.size());
    check_beta(result, fit->a, "beta1");
  }
  check_beta(result, *result.fitted_beta2, "beta2");

  // Current scaling: y = n_ref I(V, n) / I(V, n_ref) is n for ideal scaling.
  const double n_ref = series_by_stage[ref].stage_count;
  double sn = 0, sy = 0, snn = 0, sny = 0, syy = 0, count = 0;
  for (double v : grid) {
    const double base = current[ref].at(v);
    if (!(base > OnsetFitOptions{}.noise_floor_A)) continue;
    for (std::size_t k = 0; k < series_by_stage.size(); ++k) {
      const double n = series_by_stage[k].stage_count;
      const double ratio = n_ref * current[k].at(v) / base;
      sn += n;
      sy += ratio;
      snn += n * n;
      sny += n * ratio;
      syy += ratio * ratio;
      count += 1;
    }
  }
  const double var_n = count * snn - sn * sn;
  if (count >= 3 && var_n > 0) {
    const double cov = count * sny - sn * sy;
    const double var_y = count * syy - sy * sy;
    result.current_stage_slope = cov / var_n;
    result.current_stage_r2 = var_y > 0 ? cov * cov / (var_n * var_y) : 1.0;
  } else {
    result.warnings.push_back("current is below the noise floor; no stage-scaling regression");
  }
  return result;
}

double degradation_metric(const MeasurementSeries& series, double window_s,
                          const DegradationOptions& options) {
  series.validate();
  if (!(window_s > 0) || !(options.averaging_window_s > 0) ||
      options.averaging_window_s > window_s)
    fail(ErrorKind::kInvalidInput, "need 0 < averaging window <= window");
  const auto& samples = series.samples;
  if (samples.size() < 3) fail(ErrorKind::kInsufficientData, "need at least 3 samples");

  double mean_v = 0;
  for (const auto& s : samples) mean_v += s.voltage_V;
  mean_v /= static_cast<double>(samples.size());
  double max_dev = 0;
  for (const auto& s : samples) max_dev = std::max(max_dev, std::abs(s.voltage_V - mean_v));
  if (!(mean_v > 0) || max_dev >= options.max_voltage_deviation * mean_v)
    fail(ErrorKind::kNonConstantVoltage,
         "voltage deviates by " + std::to_string(max_dev) + " V from its mean " +
             std::to_string(mean_v) + " V");

  const double t0 = samples.front().time_s;
  const double t1 = t0 + window_s;
  if (samples.back().time_s - t0 < window_s * (1 - 1e-12))
    fail(ErrorKind::kInsufficientDuration,
         "series spans " + std::to_string(samples.back().time_s - t0) + " s, window is " +
             std::to_string(window_s) + " s");

  const double avg = options.averaging_window_s;
  const auto start = endpoint_current(samples, t0, t0 + avg, t0);
  const auto end = endpoint_current(samples, t1 - avg, t1 * (1 + 1e-15), t1);
  if (!start || !end) fail(ErrorKind::kInsufficientData, "no samples in an endpoint window");
  if (!(*start > 0)) fail(ErrorKind::kInsufficientData, "initial current is zero");
  return 1.0 - *end / *start;
}

std::vector<Table1CellResult> table1_cells(double drift_speed_mps, const Table1Options& options) {
  const FluidEnvironment env{options.air_density, drift_speed_mps / options.drift_field_Vpm};
  const OperatingPoint op{options.drift_field_Vpm};
  std::vector<Table1CellResult> out;
  for (const auto& cell : kTable1) {
    const StageGeometry geom{1e-3, kShieldingSpacingRatio, 1e-4, cell.stage_count};
    const double model =
        100.0 * efficiency_decrease(geom, env, {options.beta1, cell.beta2}, op, options.model);
    out.push_back({cell, model, model - cell.published_percent});
  }
  return out;
}

double table1_residual(double drift_speed_mps, const Table1Options& options) {
  double worst = 0;
  for (const auto& c : table1_cells(drift_speed_mps, options))
    worst = std::max(worst, std::abs(c.error_pp));
  return worst;
}

Table1Fit fit_table1_drift_speed(const Table1Options& options) {
  if (!(options.scan_step_mps > 0) || !(options.scan_max_mps >= options.scan_min_mps) ||
      !(options.scan_min_mps > 0))
    fail(ErrorKind::kInvalidInput, "invalid drift speed scan range");
  const auto steps = static_cast<long>(
      std::floor((options.scan_max_mps - options.scan_min_mps) / options.scan_step_mps + 1e-9));
  double best_speed = options.scan_min_mps;
  double best = INFINITY;
  for (long k = 0; k <= steps; ++k) {
    const double speed = options.scan_min_mps + static_cast<double>(k) * options.scan_step_mps;
    const double r = table1_residual(speed, options);
    if (r < best) {
      best = r;
      best_speed = speed;
    }
  }
  return {best_speed, best, table1_cells(best_speed, options)};
}

ConsistencyReport consistency_report(const Headline& h) {
  auto positive = [](double x) { return std::isfinite(x) && x > 0; };
  if (!positive(h.areal_thrust_Npm2) || !positive(h.force_density_Npm3) ||
      !positive(h.power_density_Wpm3) || h.stage_count < 1 ||
      !(std::isfinite(h.spacing_ratio) && h.spacing_ratio >= 0))
    fail(ErrorKind::kInvalidInput, "headline figures must be positive");

  ConsistencyReport r;
  r.stack_height_factor = h.stage_count + (h.stage_count - 1) * h.spacing_ratio;
  r.implied_drift_gap_m = h.areal_thrust_Npm2 / (r.stack_height_factor * h.force_density_Npm3);
  r.implied_bulk_efficiency_NpW = h.force_density_Npm3 / h.power_density_Wpm3;
  r.implied_mean_velocity_mps = h.power_density_Wpm3 / h.force_density_Npm3;

  const double ratio = r.implied_bulk_efficiency_NpW / r.quoted_peak_efficiency_NpW;
  r.efficiency_discrepancy = std::abs(ratio - 1.0) > 0.25;
  if (r.efficiency_discrepancy) {
    std::ostringstream msg;
    msg << "implied bulk efficiency " << r.implied_bulk_efficiency_NpW
        << " N/W differs from the quoted peak " << r.quoted_peak_efficiency_NpW
        << " N/W by a factor " << ratio
        << "; the figures describe different operating points";
    r.notices.push_back(msg.str());
  }
  if (h.stage_count > 1 && h.spacing_ratio < kShieldingSpacingRatio)
    r.notices.push_back("spacing ratio below the shielding spacing of 2 drift gaps");
  return r;
}

}  // namespace ehd
