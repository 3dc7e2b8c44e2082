#pragma once

// Parameter extraction from voltage/current/velocity logs.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ehd/core.hpp"

namespace ehd {

struct Sample {
  double time_s = 0;
  double voltage_V = 0;
  double current_A = 0;
  std::optional<double> velocity_mps;
};

struct MeasurementSeries {
  std::vector<Sample> samples;
  int stage_count = 1;
  StageGeometry geometry;
  std::map<std::string, std::string> metadata;

  // Strictly increasing time, nonnegative voltage and current, and the
  // geometry's stage count agreeing with stage_count.
  void validate() const;
};

struct FitResult {
  std::optional<double> onset_voltage_V;
  std::optional<double> onset_voltage_half_width_V;  // ~95 %, normal approx.
  std::optional<double> townsend_coefficient_ApV2;
  double residual_rms = 0;  // units of the fitted quantity (A or N)
  std::optional<double> fitted_beta1;
  std::optional<double> fitted_beta2;
  std::optional<double> effective_drift_speed_mps;
  // Current against stage count at common voltages, normalized per voltage.
  std::optional<double> current_stage_slope;
  std::optional<double> current_stage_r2;
  std::size_t samples_used = 0;
  std::vector<std::string> warnings;
};

struct OnsetFitOptions {
  double noise_floor_A = 1e-8;
  std::size_t min_samples = 5;
};

// Least-squares fit of I = C V (V - V0) over samples above the noise floor.
FitResult fit_onset(const MeasurementSeries& series, const OnsetFitOptions& options = {});

// Ratio of momentum-theory force rho A v^2 / 2 to the space-charge force at
// E = V / d with beta1 = 1. Requires a single-stage series.
FitResult fit_beta1(const MeasurementSeries& series, const FluidEnvironment& env);

// Inter-stage loss from series of different stage counts on a shared voltage
// grid. beta1 is an input under the literal convention (only beta1 beta2 is
// identifiable there) and is refitted jointly under kFirstStageLossless.
FitResult fit_beta2(const std::vector<MeasurementSeries>& series_by_stage,
                    const FluidEnvironment& env, double beta1 = 1.0,
                    StackingConvention convention = StackingConvention::kLiteral);

struct DegradationOptions {
  double averaging_window_s = 5.0;
  double max_voltage_deviation = 0.01;  // fraction of mean voltage
};

// 1 - I_end / I_start over [t0, t0 + window], endpoints averaged over a short
// window each.
double degradation_metric(const MeasurementSeries& series, double window_s,
                          const DegradationOptions& options = {});

// Published efficiency decrease 1 - eta_ave / eta_1, in percent.
struct Table1Cell {
  int stage_count;
  double beta2;
  double published_percent;
};

inline constexpr std::array<Table1Cell, 6> kTable1{{
    {3, 1.0, 1.4},
    {10, 1.0, 3.3},
    {20, 1.0, 4.8},
    {3, 0.8, 21.1},
    {10, 0.8, 22.6},
    {20, 0.8, 23.8},
}};

struct Table1Options {
  double scan_min_mps = 100.0;
  double scan_max_mps = 400.0;
  double scan_step_mps = 0.5;
  double air_density = kDefaultAirDensity;
  double drift_field_Vpm = 1e6;
  double beta1 = 1.0;
  ModelOptions model;
};

struct Table1CellResult {
  Table1Cell cell;
  double model_percent;
  double error_pp;  // model - published
};

struct Table1Fit {
  double drift_speed_mps;
  double max_abs_error_pp;
  std::vector<Table1CellResult> cells;
};

std::vector<Table1CellResult> table1_cells(double drift_speed_mps,
                                           const Table1Options& options = {});
double table1_residual(double drift_speed_mps, const Table1Options& options = {});

// Scan of the drift speed mu E minimizing the worst-case cell error.
Table1Fit fit_table1_drift_speed(const Table1Options& options = {});

struct Headline {
  double areal_thrust_Npm2 = 15.0;
  double force_density_Npm3 = 2e3;
  double power_density_Wpm3 = 4e3;
  int stage_count = 3;
  double spacing_ratio = 2.0;
};

inline constexpr double kQuotedPeakEfficiencyNpW = 1.1e-3;

struct ConsistencyReport {
  double implied_drift_gap_m;
  double stack_height_factor;  // n + (n - 1) gamma
  double implied_bulk_efficiency_NpW;
  double implied_mean_velocity_mps;  // power density / force density
  double quoted_peak_efficiency_NpW = kQuotedPeakEfficiencyNpW;
  bool efficiency_discrepancy = false;
  std::vector<std::string> notices;
};

ConsistencyReport consistency_report(const Headline& headline);

}  // namespace ehd
