#include "ehd/serialize.hpp"

#include <charconv>
#include <cmath>

#include "ehd/error.hpp"

namespace ehd {

namespace {

void require_object(const Json& doc, const std::string& source, const char* what) {
  if (!doc.is_object()) throw ParseError(source, 0, std::string(what) + " must be a JSON object");
}

template <typename T>
void read_number(const Json& doc, const char* key, T& out, const std::string& source) {
  if (!doc.contains(key)) return;
  const auto& v = doc[key];
  if constexpr (std::is_integral_v<T>) {
    const bool integral = v.is_number_integer() ||
                          (v.is_number_float() && std::trunc(v.get<double>()) == v.get<double>());
    if (!integral || (std::is_unsigned_v<T> && v.get<double>() < 0))
      throw ParseError(source, 0, std::string("'") + key + "' must be an integer");
    out = static_cast<T>(v.get<double>());
    return;
  } else {
    if (!v.is_number()) throw ParseError(source, 0, std::string("'") + key + "' must be a number");
  }
  out = v.get<T>();
}

void read_optional(const Json& doc, const char* key, std::optional<double>& out,
                   const std::string& source) {
  if (!doc.contains(key) || doc[key].is_null()) return;
  double value = 0;
  read_number(doc, key, value, source);
  out = value;
}

GridAxis read_axis(const Json& doc, const char* key, const std::string& source,
                   std::optional<GridAxis> fallback = std::nullopt) {
  if (!doc.contains(key)) {
    if (fallback) return *fallback;
    throw ParseError(source, 0, std::string("missing '") + key + "'");
  }
  const auto& axis = doc[key];
  require_object(axis, source, key);
  GridAxis out;
  if (!axis.contains("min")) throw ParseError(source, 0, std::string(key) + ".min is required");
  read_number(axis, "min", out.min, source);
  out.max = out.min;
  read_number(axis, "max", out.max, source);
  read_number(axis, "step", out.step, source);
  return out;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

const char* to_string(StackingConvention c) {
  return c == StackingConvention::kLiteral ? "literal" : "first_stage_lossless";
}

const char* to_string(EfficiencyInlet e) {
  return e == EfficiencyInlet::kLosslessStacking ? "lossless_stacking" : "lossy_stacking";
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

Json to_json(const StageGeometry& g) {
  return {{"drift_gap_m", g.drift_gap_m},
          {"gamma", g.spacing_ratio},
          {"area_m2", g.area_m2},
          {"stage_count", g.stage_count}};
}

Json to_json(const FluidEnvironment& env) {
  return {{"air_density_kgpm3", env.air_density},
          {"ion_mobility_m2pVs", env.ion_mobility},
          {"permittivity_Fpm", env.permittivity}};
}

Json to_json(const LossModel& loss) { return {{"beta1", loss.beta1}, {"beta2", loss.beta2}}; }

Json to_json(const OperatingPoint& op) {
  return {{"drift_field_Vpm", op.drift_field_Vpm}, {"inlet_velocity_mps", op.inlet_velocity_mps}};
}

Json to_json(const ModelOptions& options) {
  return {{"stacking", to_string(options.stacking)},
          {"efficiency_inlet", to_string(options.efficiency_inlet)}};
}

Json to_json(const PerformanceReport& r) {
  return {{"single_stage_force_N", r.single_stage_force_N},
          {"total_force_N", r.total_force_N},
          {"force_density_Npm3", r.force_density_Npm3},
          {"areal_thrust_Npm2", r.areal_thrust_Npm2},
          {"stack_height_m", r.stack_height_m},
          {"applied_voltage_V", r.applied_voltage_V},
          {"ion_drift_speed_mps", r.ion_drift_speed_mps},
          {"outlet_velocities_mps", r.outlet_velocities_mps},
          {"stage_efficiencies_NpW", r.stage_efficiencies_NpW},
          {"average_efficiency_NpW", r.average_efficiency_NpW},
          {"efficiency_decrease", r.efficiency_decrease},
          {"warnings", r.warnings}};
}

Json to_json(const FitResult& f) {
  Json out;
  out["onset_voltage_V"] = optional_json(f.onset_voltage_V);
  out["onset_voltage_half_width_V"] = optional_json(f.onset_voltage_half_width_V);
  out["townsend_coefficient_ApV2"] = optional_json(f.townsend_coefficient_ApV2);
  out["residual_rms"] = f.residual_rms;
  out["fitted_beta1"] = optional_json(f.fitted_beta1);
  out["fitted_beta2"] = optional_json(f.fitted_beta2);
  out["effective_drift_speed_mps"] = optional_json(f.effective_drift_speed_mps);
  out["current_stage_slope"] = optional_json(f.current_stage_slope);
  out["current_stage_r2"] = optional_json(f.current_stage_r2);
  out["samples_used"] = f.samples_used;
  out["warnings"] = f.warnings;
  return out;
}

Json to_json(const Table1Fit& fit) {
  Json cells = Json::array();
  for (const auto& c : fit.cells)
    cells.push_back({{"stage_count", c.cell.stage_count},
                     {"beta2", c.cell.beta2},
                     {"published_percent", c.cell.published_percent},
                     {"model_percent", c.model_percent},
                     {"error_pp", c.error_pp}});
  return {{"effective_drift_speed_mps", fit.drift_speed_mps},
          {"max_abs_error_pp", fit.max_abs_error_pp},
          {"cells", cells}};
}

Json to_json(const Headline& h) {
  return {{"areal_thrust_Npm2", h.areal_thrust_Npm2},
          {"force_density_Npm3", h.force_density_Npm3},
          {"power_density_Wpm3", h.power_density_Wpm3},
          {"stage_count", h.stage_count},
          {"gamma", h.spacing_ratio}};
}

Json to_json(const ConsistencyReport& r) {
  return {{"implied_drift_gap_m", r.implied_drift_gap_m},
          {"stack_height_factor", r.stack_height_factor},
          {"implied_bulk_efficiency_NpW", r.implied_bulk_efficiency_NpW},
          {"implied_mean_velocity_mps", r.implied_mean_velocity_mps},
          {"quoted_peak_efficiency_NpW", r.quoted_peak_efficiency_NpW},
          {"efficiency_discrepancy", r.efficiency_discrepancy},
          {"notices", r.notices}};
}

Json to_json(const DesignSpace& s) {
  auto axis = [](const GridAxis& a) {
    return Json{{"min", a.min}, {"max", a.max}, {"step", a.step}};
  };
  return {{"stage_count", {{"min", s.stages.min}, {"max", s.stages.max}}},
          {"drift_gap_m", axis(s.drift_gap_m)},
          {"gamma", axis(s.spacing_ratio)},
          {"drift_field_Vpm", axis(s.drift_field_Vpm)},
          {"area_m2", s.area_m2},
          {"inlet_velocity_mps", s.inlet_velocity_mps},
          {"constraints",
           {{"max_voltage_V", optional_json(s.constraints.max_voltage_V)},
            {"max_field_Vpm", optional_json(s.constraints.max_field_Vpm)},
            {"min_total_force_N", optional_json(s.constraints.min_total_force_N)},
            {"max_device_height_m", optional_json(s.constraints.max_device_height_m)}}},
          {"max_grid_points", s.max_grid_points}};
}

Json to_json(const DesignPoint& p) {
  Json out{{"geometry", to_json(p.geometry)},
           {"operating", to_json(p.operating)},
           {"applied_voltage_V", p.applied_voltage_V},
           {"total_force_N", p.total_force_N},
           {"stack_height_m", p.geometry.stack_height_m()}};
  if (p.objectives)
    out["objectives"] = {{"force_density_Npm3", p.objectives->force_density_Npm3},
                         {"average_efficiency_NpW", p.objectives->average_efficiency_NpW}};
  else
    out["objectives"] = nullptr;
  out["feasible"] = p.feasible();
  out["violations"] = p.violations;
  return out;
}

Json to_json(const ParetoSet& pareto) {
  Json points = Json::array();
  for (const auto& p : pareto.points) points.push_back(to_json(p));
  return {{"provenance",
           {{"design_space", to_json(pareto.space)},
            {"loss", to_json(pareto.loss)},
            {"environment", to_json(pareto.env)},
            {"model", to_json(pareto.model)},
            {"evaluated", pareto.evaluated},
            {"feasible", pareto.feasible}}},
          {"points", points}};
}

void update_from_json(const Json& doc, StageGeometry& geom, const std::string& source) {
  require_object(doc, source, "geometry");
  read_number(doc, "drift_gap_m", geom.drift_gap_m, source);
  read_number(doc, "gamma", geom.spacing_ratio, source);
  read_number(doc, "area_m2", geom.area_m2, source);
  read_number(doc, "stage_count", geom.stage_count, source);
}

void update_from_json(const Json& doc, FluidEnvironment& env, const std::string& source) {
  require_object(doc, source, "environment");
  read_number(doc, "air_density_kgpm3", env.air_density, source);
  read_number(doc, "ion_mobility_m2pVs", env.ion_mobility, source);
  read_number(doc, "permittivity_Fpm", env.permittivity, source);
}

void update_from_json(const Json& doc, LossModel& loss, const std::string& source) {
  require_object(doc, source, "loss");
  read_number(doc, "beta1", loss.beta1, source);
  read_number(doc, "beta2", loss.beta2, source);
}

void update_from_json(const Json& doc, OperatingPoint& op, const std::string& source) {
  require_object(doc, source, "operating");
  read_number(doc, "drift_field_Vpm", op.drift_field_Vpm, source);
  read_number(doc, "inlet_velocity_mps", op.inlet_velocity_mps, source);
}

void update_from_json(const Json& doc, ModelOptions& options, const std::string& source) {
  require_object(doc, source, "model");
  if (doc.contains("stacking")) {
    const auto v = doc["stacking"];
    if (v == "literal") options.stacking = StackingConvention::kLiteral;
    else if (v == "first_stage_lossless") options.stacking = StackingConvention::kFirstStageLossless;
    else throw ParseError(source, 0, "model.stacking must be 'literal' or 'first_stage_lossless'");
  }
  if (doc.contains("efficiency_inlet")) {
    const auto v = doc["efficiency_inlet"];
    if (v == "lossless_stacking") options.efficiency_inlet = EfficiencyInlet::kLosslessStacking;
    else if (v == "lossy_stacking") options.efficiency_inlet = EfficiencyInlet::kLossyStacking;
    else
      throw ParseError(source, 0,
                       "model.efficiency_inlet must be 'lossless_stacking' or 'lossy_stacking'");
  }
}

DesignSpace design_space_from_json(const Json& doc, const std::string& source) {
  require_object(doc, source, "design space");
  DesignSpace s;
  if (!doc.contains("stage_count")) throw ParseError(source, 0, "missing 'stage_count'");
  const auto& stages = doc["stage_count"];
  require_object(stages, source, "stage_count");
  if (!stages.contains("min")) throw ParseError(source, 0, "stage_count.min is required");
  read_number(stages, "min", s.stages.min, source);
  s.stages.max = s.stages.min;
  read_number(stages, "max", s.stages.max, source);
  s.drift_gap_m = read_axis(doc, "drift_gap_m", source);
  s.spacing_ratio = read_axis(doc, "gamma", source, s.spacing_ratio);
  s.drift_field_Vpm = read_axis(doc, "drift_field_Vpm", source);
  read_number(doc, "area_m2", s.area_m2, source);
  read_number(doc, "inlet_velocity_mps", s.inlet_velocity_mps, source);
  read_number(doc, "max_grid_points", s.max_grid_points, source);
  if (doc.contains("constraints")) {
    const auto& c = doc["constraints"];
    require_object(c, source, "constraints");
    read_optional(c, "max_voltage_V", s.constraints.max_voltage_V, source);
    read_optional(c, "max_field_Vpm", s.constraints.max_field_Vpm, source);
    read_optional(c, "min_total_force_N", s.constraints.min_total_force_N, source);
    read_optional(c, "max_device_height_m", s.constraints.max_device_height_m, source);
  }
  return s;
}

Headline headline_from_json(const Json& doc, const std::string& source) {
  require_object(doc, source, "headline");
  Headline h;
  read_number(doc, "areal_thrust_Npm2", h.areal_thrust_Npm2, source);
  read_number(doc, "force_density_Npm3", h.force_density_Npm3, source);
  read_number(doc, "power_density_Wpm3", h.power_density_Wpm3, source);
  read_number(doc, "stage_count", h.stage_count, source);
  read_number(doc, "gamma", h.spacing_ratio, source);
  return h;
}

void write_pareto_csv(std::ostream& out, const ParetoSet& pareto) {
  out << kParetoCsvHeader << '\n';
  for (const auto& p : pareto.points) {
    const auto& g = p.geometry;
    out << g.stage_count << ',' << format_number(g.drift_gap_m) << ','
        << format_number(g.spacing_ratio) << ',' << format_number(g.area_m2) << ','
        << format_number(p.operating.drift_field_Vpm) << ','
        << format_number(p.operating.inlet_velocity_mps) << ','
        << format_number(p.applied_voltage_V) << ',' << format_number(p.total_force_N) << ','
        << format_number(g.stack_height_m()) << ','
        << format_number(p.objectives->force_density_Npm3) << ','
        << format_number(p.objectives->average_efficiency_NpW) << '\n';
  }
}

}  // namespace ehd
