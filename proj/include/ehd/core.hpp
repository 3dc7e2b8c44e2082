#pragma once

// Analytical performance model of a stacked corona-discharge EHD thruster.
// Everything here is SI: meters, volts, newtons, watts, kg/m^3.

#include <string>
#include <vector>

namespace ehd {

inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m
inline constexpr double kDefaultAirDensity = 1.20;                // kg/m^3
// Effective ion mobility that reproduces the published efficiency-decrease
// table at 1 MV/m (230.5 m/s drift speed). See fit_table1_drift_speed().
inline constexpr double kDefaultIonMobility = 2.305e-4;  // m^2/(V s)
// Inter-stage spacing that shields neighbouring stages (spacing of 2d).
inline constexpr double kShieldingSpacingRatio = 2.0;

struct StageGeometry {
  double drift_gap_m = 1e-3;
  double spacing_ratio = kShieldingSpacingRatio;  // inter-stage gap / drift gap
  double area_m2 = 1e-4;
  int stage_count = 1;

  void validate() const;
  // Active length of the stack, (n + (n - 1) gamma) d.
  double stack_height_m() const;
};

struct FluidEnvironment {
  double air_density = kDefaultAirDensity;
  double ion_mobility = kDefaultIonMobility;
  double permittivity = kVacuumPermittivity;

  void validate() const;
};

struct LossModel {
  double beta1 = 1.0;  // ion-to-neutral momentum transfer
  double beta2 = 1.0;  // inter-stage ducting

  void validate() const;
};

struct OperatingPoint {
  double drift_field_Vpm = 1e6;
  double inlet_velocity_mps = 0.0;

  void validate() const;
  // Uniform-field approximation E = V / d.
  static OperatingPoint from_voltage(double applied_voltage_V,
                                     const StageGeometry& geom,
                                     double inlet_velocity_mps = 0.0);
  double applied_voltage_V(const StageGeometry& geom) const {
    return drift_field_Vpm * geom.drift_gap_m;
  }
};

// How the inter-stage loss enters the stack force.
enum class StackingConvention {
  kLiteral,             // F_n = n beta2 F0; every stage, the first included
  kFirstStageLossless,  // F_n = F0 (1 + (n - 1) beta2)
};

// Which upstream force sets the inlet speed of stage i in the average
// efficiency sum.
enum class EfficiencyInlet {
  kLosslessStacking,  // (i - 1) F0; reproduces the published table
  kLossyStacking,     // stack force of i - 1 stages, losses included
};

struct ModelOptions {
  StackingConvention stacking = StackingConvention::kLiteral;
  EfficiencyInlet efficiency_inlet = EfficiencyInlet::kLosslessStacking;
};

struct PerformanceReport {
  double single_stage_force_N = 0;
  double total_force_N = 0;
  double force_density_Npm3 = 0;
  double areal_thrust_Npm2 = 0;
  double stack_height_m = 0;
  double applied_voltage_V = 0;
  double ion_drift_speed_mps = 0;
  std::vector<double> outlet_velocities_mps;
  std::vector<double> stage_efficiencies_NpW;
  double average_efficiency_NpW = 0;
  double efficiency_decrease = 0;  // 1 - eta_ave / eta_1
  std::vector<std::string> warnings;
};

// F0 = (9/8) beta1 eps0 A E^2, space-charge-limited single stage.
double single_stage_force(const StageGeometry& geom, const FluidEnvironment& env,
                          const LossModel& loss, const OperatingPoint& op);

// Force of stage_count stages given a single-stage force.
double stack_force(int stage_count, double single_stage_force_N, double beta2,
                   StackingConvention convention = StackingConvention::kLiteral);

double multistage_force(const StageGeometry& geom, const FluidEnvironment& env,
                        const LossModel& loss, const OperatingPoint& op,
                        const ModelOptions& options = {});

// Total force over active stack volume A (n + (n - 1) gamma) d.
double force_density(double total_force_N, const StageGeometry& geom);
double force_density(const StageGeometry& geom, const FluidEnvironment& env,
                     const LossModel& loss, const OperatingPoint& op,
                     const ModelOptions& options = {});

// n -> infinity limit of the normalized force density, beta2 / (1 + gamma).
double force_density_limit(double spacing_ratio, double beta2);

// eta = beta1 / (mu E + v_in) in N/W.
double stage_efficiency(const FluidEnvironment& env, const LossModel& loss,
                        const OperatingPoint& op);

// Stage-by-stage momentum theory, F_i = rho A (v_out^2 - v_in^2) / 2.
std::vector<double> velocity_cascade(const StageGeometry& geom,
                                     const FluidEnvironment& env,
                                     const LossModel& loss,
                                     const OperatingPoint& op,
                                     const ModelOptions& options = {});

// Per-stage efficiencies eta_i = beta1 / (mu E + u_i), u_i the inlet speed of
// stage i implied by the upstream stack force.
std::vector<double> stage_efficiencies(const StageGeometry& geom,
                                       const FluidEnvironment& env,
                                       const LossModel& loss,
                                       const OperatingPoint& op,
                                       const ModelOptions& options = {});

// Average thrust efficiency, stage-force-weighted mean of stage_efficiencies.
double average_efficiency(const StageGeometry& geom, const FluidEnvironment& env,
                          const LossModel& loss, const OperatingPoint& op,
                          const ModelOptions& options = {});

// 1 - eta_ave / eta_1 with eta_1 = beta1 / (mu E), the lossless static stage.
double efficiency_decrease(const StageGeometry& geom, const FluidEnvironment& env,
                           const LossModel& loss, const OperatingPoint& op,
                           const ModelOptions& options = {});

// Force implied by a stage's inlet and outlet speeds.
double momentum_force(double air_density, double area_m2, double inlet_velocity_mps,
                      double outlet_velocity_mps);

PerformanceReport predict(const StageGeometry& geom, const FluidEnvironment& env,
                          const LossModel& loss, const OperatingPoint& op,
                          const ModelOptions& options = {});

}  // namespace ehd
