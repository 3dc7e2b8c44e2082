#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "ehd/calibration.hpp"

namespace ehd {

inline constexpr const char* kMeasurementHeader = "time_s,voltage_V,current_A,velocity_mps";

// Header line is required; empty velocity cells are allowed. Any malformed
// row aborts with a ParseError naming its line.
std::vector<Sample> read_measurement_csv(std::istream& in, const std::string& source = {});
std::vector<Sample> read_measurement_csv(const std::filesystem::path& path);

void write_measurement_csv(std::ostream& out, const std::vector<Sample>& samples);

struct SeriesMetadata {
  int stage_count = 1;
  StageGeometry geometry;
  std::string label;
};

// Sidecar JSON: stage_count, drift_gap_m, gamma, area_m2, label.
SeriesMetadata read_sidecar(std::istream& in, const std::string& source = {});
SeriesMetadata read_sidecar(const std::filesystem::path& path);

// foo.csv -> foo.json
std::filesystem::path default_sidecar_path(const std::filesystem::path& csv);

// Loads a CSV and its sidecar. Without a sidecar the series gets a default
// single-stage geometry and a "sidecar" = "missing" metadata entry.
MeasurementSeries load_series(const std::filesystem::path& csv,
                              std::optional<std::filesystem::path> sidecar = std::nullopt);

}  // namespace ehd
