#include "ehd/measurement_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "ehd/error.hpp"
#include "json.hpp"

namespace ehd {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return cells;
}

double parse_number(std::string_view cell, const char* column, const std::string& source,
                    std::size_t line) {
  double value = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
    throw ParseError(source, line,
                     std::string("column ") + column + ": '" + std::string(cell) +
                         "' is not a number");
  if (!std::isfinite(value))
    throw ParseError(source, line, std::string("column ") + column + " is not finite");
  return value;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

}  // namespace

std::vector<Sample> read_measurement_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!have_header && std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    std::string joined;
    for (std::size_t i = 0; i < cells.size(); ++i)
      joined += (i ? "," : "") + std::string(cells[i]);
    if (joined != kMeasurementHeader)
      throw ParseError(source, line_no,
                       "expected header '" + std::string(kMeasurementHeader) + "'");
    have_header = true;
  }
  if (!have_header) throw ParseError(source, 0, "missing header");

  std::vector<Sample> samples;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 4)
      throw ParseError(source, line_no,
                       "expected 4 columns, found " + std::to_string(cells.size()));
    Sample s;
    s.time_s = parse_number(cells[0], "time_s", source, line_no);
    s.voltage_V = parse_number(cells[1], "voltage_V", source, line_no);
    s.current_A = parse_number(cells[2], "current_A", source, line_no);
    if (!cells[3].empty()) s.velocity_mps = parse_number(cells[3], "velocity_mps", source, line_no);

    if (s.voltage_V < 0) throw ParseError(source, line_no, "negative voltage");
    if (s.current_A < 0) throw ParseError(source, line_no, "negative current");
    if (s.velocity_mps && *s.velocity_mps < 0)
      throw ParseError(source, line_no, "negative velocity");
    if (!samples.empty() && !(s.time_s > samples.back().time_s))
      throw ParseError(source, line_no, "time is not strictly increasing");
    samples.push_back(s);
  }
  return samples;
}

std::vector<Sample> read_measurement_csv(const std::filesystem::path& path) {
  auto in = open(path);
  return read_measurement_csv(in, path.string());
}

void write_measurement_csv(std::ostream& out, const std::vector<Sample>& samples) {
  out << kMeasurementHeader << '\n' << std::setprecision(17);
  for (const auto& s : samples) {
    out << s.time_s << ',' << s.voltage_V << ',' << s.current_A << ',';
    if (s.velocity_mps) out << *s.velocity_mps;
    out << '\n';
  }
}

SeriesMetadata read_sidecar(std::istream& in, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, 0, e.what());
  }
  if (!doc.is_object()) throw ParseError(source, 0, "sidecar must be a JSON object");

  auto number = [&](const char* key) {
    if (!doc.contains(key) || !doc[key].is_number())
      throw ParseError(source, 0, std::string("sidecar field '") + key + "' missing or not a number");
    return doc[key].get<double>();
  };

  SeriesMetadata meta;
  if (!doc.contains("stage_count") || !doc["stage_count"].is_number_integer())
    throw ParseError(source, 0, "sidecar field 'stage_count' missing or not an integer");
  meta.stage_count = doc["stage_count"].get<int>();
  meta.geometry = {number("drift_gap_m"), number("gamma"), number("area_m2"), meta.stage_count};
  if (doc.contains("label")) {
    if (!doc["label"].is_string()) throw ParseError(source, 0, "sidecar field 'label' must be a string");
    meta.label = doc["label"].get<std::string>();
  }
  try {
    meta.geometry.validate();
  } catch (const Error& e) {
    throw ParseError(source, 0, e.what());
  }
  return meta;
}

SeriesMetadata read_sidecar(const std::filesystem::path& path) {
  auto in = open(path);
  return read_sidecar(in, path.string());
}

std::filesystem::path default_sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  return p.replace_extension(".json");
}

MeasurementSeries load_series(const std::filesystem::path& csv,
                              std::optional<std::filesystem::path> sidecar) {
  MeasurementSeries series;
  series.samples = read_measurement_csv(csv);
  const auto meta_path = sidecar.value_or(default_sidecar_path(csv));
  if (sidecar || std::filesystem::exists(meta_path)) {
    const auto meta = read_sidecar(meta_path);
    series.stage_count = meta.stage_count;
    series.geometry = meta.geometry;
    series.metadata["label"] = meta.label;
  } else {
    series.metadata["sidecar"] = "missing";
  }
  series.metadata["source"] = csv.string();
  return series;
}

}  // namespace ehd
