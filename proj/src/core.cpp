#include "ehd/core.hpp"

#include <cmath>
#include <string>

#include "ehd/error.hpp"

namespace ehd {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "InvalidInput";
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kInsufficientData: return "InsufficientData";
    case ErrorKind::kFitDivergence: return "FitDivergence";
    case ErrorKind::kMismatchedGeometry: return "MismatchedGeometry";
    case ErrorKind::kNonConstantVoltage: return "NonConstantVoltage";
    case ErrorKind::kInsufficientDuration: return "InsufficientDuration";
    case ErrorKind::kEmptyFeasibleSet: return "EmptyFeasibleSet";
    case ErrorKind::kGridTooLarge: return "GridTooLarge";
    case ErrorKind::kEmptyParetoSet: return "EmptyParetoSet";
  }
  return "Unknown";
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::kInvalidInput, what);
}

void require_positive(double value, const char* name) {
  require(std::isfinite(value) && value > 0,
          std::string(name) + " must be finite and > 0, got " + std::to_string(value));
}

void require_nonnegative(double value, const char* name) {
  require(std::isfinite(value) && value >= 0,
          std::string(name) + " must be finite and >= 0, got " + std::to_string(value));
}

void require_fraction(double value, const char* name) {
  require(std::isfinite(value) && value > 0 && value <= 1,
          std::string(name) + " must lie in (0, 1], got " + std::to_string(value));
}

void validate_all(const StageGeometry& geom, const FluidEnvironment& env,
                  const LossModel& loss, const OperatingPoint& op) {
  geom.validate();
  env.validate();
  loss.validate();
  op.validate();
}

// Force carried by stage i (1-based) of the stack.
double stage_force(int i, double f0, double beta2, StackingConvention convention) {
  if (convention == StackingConvention::kFirstStageLossless && i == 1) return f0;
  return beta2 * f0;
}

double stage_weight(int i, double beta2, StackingConvention convention) {
  return stage_force(i, 1.0, beta2, convention);
}

double ion_drift_speed(const FluidEnvironment& env, const OperatingPoint& op) {
  return env.ion_mobility * op.drift_field_Vpm;
}

}  // namespace

void StageGeometry::validate() const {
  require_positive(drift_gap_m, "drift gap");
  require_positive(area_m2, "area");
  require_nonnegative(spacing_ratio, "spacing ratio");
  require(stage_count >= 1,
          "stage count must be >= 1, got " + std::to_string(stage_count));
}

double StageGeometry::stack_height_m() const {
  return (stage_count + (stage_count - 1) * spacing_ratio) * drift_gap_m;
}

void FluidEnvironment::validate() const {
  require_positive(air_density, "air density");
  require_positive(ion_mobility, "ion mobility");
  require_positive(permittivity, "permittivity");
}

void LossModel::validate() const {
  require_fraction(beta1, "beta1");
  require_fraction(beta2, "beta2");
}

void OperatingPoint::validate() const {
  require_nonnegative(drift_field_Vpm, "drift field");
  require_nonnegative(inlet_velocity_mps, "inlet velocity");
}

OperatingPoint OperatingPoint::from_voltage(double applied_voltage_V,
                                            const StageGeometry& geom,
                                            double inlet_velocity_mps) {
  require_nonnegative(applied_voltage_V, "applied voltage");
  require_positive(geom.drift_gap_m, "drift gap");
  return {applied_voltage_V / geom.drift_gap_m, inlet_velocity_mps};
}

double single_stage_force(const StageGeometry& geom, const FluidEnvironment& env,
                          const LossModel& loss, const OperatingPoint& op) {
  validate_all(geom, env, loss, op);
  const double e = op.drift_field_Vpm;
  return 9.0 / 8.0 * loss.beta1 * env.permittivity * geom.area_m2 * e * e;
}

double stack_force(int stage_count, double single_stage_force_N, double beta2,
                   StackingConvention convention) {
  require(stage_count >= 0, "stage count must be >= 0");
  if (stage_count == 0) return 0.0;
  if (convention == StackingConvention::kFirstStageLossless)
    return single_stage_force_N * (1.0 + (stage_count - 1) * beta2);
  return stage_count * beta2 * single_stage_force_N;
}

double multistage_force(const StageGeometry& geom, const FluidEnvironment& env,
                        const LossModel& loss, const OperatingPoint& op,
                        const ModelOptions& options) {
  return stack_force(geom.stage_count, single_stage_force(geom, env, loss, op),
                     loss.beta2, options.stacking);
}

double force_density(double total_force_N, const StageGeometry& geom) {
  geom.validate();
  require_nonnegative(total_force_N, "total force");
  return total_force_N / (geom.area_m2 * geom.stack_height_m());
}

double force_density(const StageGeometry& geom, const FluidEnvironment& env,
                     const LossModel& loss, const OperatingPoint& op,
                     const ModelOptions& options) {
  return force_density(multistage_force(geom, env, loss, op, options), geom);
}

double force_density_limit(double spacing_ratio, double beta2) {
  require_nonnegative(spacing_ratio, "spacing ratio");
  require_fraction(beta2, "beta2");
  return beta2 / (1.0 + spacing_ratio);
}

double stage_efficiency(const FluidEnvironment& env, const LossModel& loss,
                        const OperatingPoint& op) {
  env.validate();
  loss.validate();
  op.validate();
  const double speed = ion_drift_speed(env, op) + op.inlet_velocity_mps;
  require(speed > 0, "mu E + v_in must be > 0");
  return loss.beta1 / speed;
}

std::vector<double> velocity_cascade(const StageGeometry& geom,
                                     const FluidEnvironment& env,
                                     const LossModel& loss,
                                     const OperatingPoint& op,
                                     const ModelOptions& options) {
  const double f0 = single_stage_force(geom, env, loss, op);
  const double half_rho_a = 0.5 * env.air_density * geom.area_m2;
  std::vector<double> outlet;
  outlet.reserve(static_cast<std::size_t>(geom.stage_count));
  // Squared speeds accumulate additively; summing them avoids compounding the
  // sqrt rounding from stage to stage.
  double speed_sq = op.inlet_velocity_mps * op.inlet_velocity_mps;
  for (int i = 1; i <= geom.stage_count; ++i) {
    speed_sq += stage_force(i, f0, loss.beta2, options.stacking) / half_rho_a;
    outlet.push_back(std::sqrt(speed_sq));
  }
  return outlet;
}

std::vector<double> stage_efficiencies(const StageGeometry& geom,
                                       const FluidEnvironment& env,
                                       const LossModel& loss,
                                       const OperatingPoint& op,
                                       const ModelOptions& options) {
  const double f0 = single_stage_force(geom, env, loss, op);
  const double drift = ion_drift_speed(env, op);
  require(drift > 0, "ion drift speed mu E must be > 0");
  const double half_rho_a = 0.5 * env.air_density * geom.area_m2;
  const double vin_sq = op.inlet_velocity_mps * op.inlet_velocity_mps;
  const double upstream_beta2 =
      options.efficiency_inlet == EfficiencyInlet::kLosslessStacking ? 1.0 : loss.beta2;

  std::vector<double> eta;
  eta.reserve(static_cast<std::size_t>(geom.stage_count));
  for (int i = 1; i <= geom.stage_count; ++i) {
    const double upstream = stack_force(i - 1, f0, upstream_beta2, options.stacking);
    const double inlet = std::sqrt(vin_sq + upstream / half_rho_a);
    eta.push_back(loss.beta1 / (drift + inlet));
  }
  return eta;
}

double average_efficiency(const StageGeometry& geom, const FluidEnvironment& env,
                          const LossModel& loss, const OperatingPoint& op,
                          const ModelOptions& options) {
  const auto eta = stage_efficiencies(geom, env, loss, op, options);
  double sum = 0.0;
  for (int i = 1; i <= geom.stage_count; ++i)
    sum += stage_weight(i, loss.beta2, options.stacking) * eta[static_cast<std::size_t>(i - 1)];
  return sum / geom.stage_count;
}

double efficiency_decrease(const StageGeometry& geom, const FluidEnvironment& env,
                           const LossModel& loss, const OperatingPoint& op,
                           const ModelOptions& options) {
  const double eta_ave = average_efficiency(geom, env, loss, op, options);
  const double eta_1 = loss.beta1 / ion_drift_speed(env, op);
  return 1.0 - eta_ave / eta_1;
}

double momentum_force(double air_density, double area_m2, double inlet_velocity_mps,
                      double outlet_velocity_mps) {
  return 0.5 * air_density * area_m2 *
         (outlet_velocity_mps * outlet_velocity_mps -
          inlet_velocity_mps * inlet_velocity_mps);
}

PerformanceReport predict(const StageGeometry& geom, const FluidEnvironment& env,
                          const LossModel& loss, const OperatingPoint& op,
                          const ModelOptions& options) {
  PerformanceReport r;
  r.single_stage_force_N = single_stage_force(geom, env, loss, op);
  r.total_force_N = stack_force(geom.stage_count, r.single_stage_force_N, loss.beta2,
                                options.stacking);
  r.force_density_Npm3 = force_density(r.total_force_N, geom);
  r.areal_thrust_Npm2 = r.total_force_N / geom.area_m2;
  r.stack_height_m = geom.stack_height_m();
  r.applied_voltage_V = op.applied_voltage_V(geom);
  r.ion_drift_speed_mps = ion_drift_speed(env, op);
  r.outlet_velocities_mps = velocity_cascade(geom, env, loss, op, options);
  r.stage_efficiencies_NpW = stage_efficiencies(geom, env, loss, op, options);
  r.average_efficiency_NpW = average_efficiency(geom, env, loss, op, options);
  r.efficiency_decrease = efficiency_decrease(geom, env, loss, op, options);

  if (geom.stage_count > 1 && geom.spacing_ratio < kShieldingSpacingRatio)
    r.warnings.push_back("spacing ratio " + std::to_string(geom.spacing_ratio) +
                         " is below the shielding spacing of 2 drift gaps");
  return r;
}

}  // namespace ehd
