#pragma once

// JSON and CSV forms of model inputs and results. Keys carry their units.

#include <ostream>
#include <string>

#include "ehd/calibration.hpp"
#include "ehd/core.hpp"
#include "ehd/optimizer.hpp"
#include "json.hpp"

namespace ehd {

using Json = nlohmann::ordered_json;

Json to_json(const StageGeometry& geom);
Json to_json(const FluidEnvironment& env);
Json to_json(const LossModel& loss);
Json to_json(const OperatingPoint& op);
Json to_json(const ModelOptions& options);
Json to_json(const PerformanceReport& report);
Json to_json(const FitResult& fit);
Json to_json(const Table1Fit& fit);
Json to_json(const Headline& headline);
Json to_json(const ConsistencyReport& report);
Json to_json(const DesignSpace& space);
Json to_json(const DesignPoint& point);
Json to_json(const ParetoSet& pareto);

// Missing keys keep the value already in *out. Throws ParseError on type or
// range problems; source names the document in messages.
void update_from_json(const Json& doc, StageGeometry& geom, const std::string& source);
void update_from_json(const Json& doc, FluidEnvironment& env, const std::string& source);
void update_from_json(const Json& doc, LossModel& loss, const std::string& source);
void update_from_json(const Json& doc, OperatingPoint& op, const std::string& source);
void update_from_json(const Json& doc, ModelOptions& options, const std::string& source);
DesignSpace design_space_from_json(const Json& doc, const std::string& source);
Headline headline_from_json(const Json& doc, const std::string& source);

inline constexpr const char* kParetoCsvHeader =
    "stage_count,drift_gap_m,gamma,area_m2,drift_field_Vpm,inlet_velocity_mps,"
    "applied_voltage_V,total_force_N,stack_height_m,force_density_Npm3,"
    "average_efficiency_NpW";

void write_pareto_csv(std::ostream& out, const ParetoSet& pareto);

// Round-trip formatting used by every CSV writer.
std::string format_number(double value);

}  // namespace ehd
