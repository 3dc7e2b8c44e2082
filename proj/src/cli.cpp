#include "ehd/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ehd/calibration.hpp"
#include "ehd/error.hpp"
#include "ehd/measurement_io.hpp"
#include "ehd/optimizer.hpp"
#include "ehd/serialize.hpp"

namespace ehd::cli {

namespace {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::vector<std::string> inputs;
  std::string meta;
  std::string out;
  std::string units = "si";
  std::optional<double> beta1, beta2, mu, rho, gamma, gap_mm, field_MVpm, area_mm2, vin;
  std::optional<int> stages;
  std::optional<double> weight;
  std::string stacking;
  std::string target = "auto";
  double window_s = 100.0;
  double avg_window_s = 5.0;
  double noise_floor_A = 1e-8;
  int sweep_points = 50;
  unsigned threads = 0;
  std::optional<double> areal_thrust, force_density, power_density;
};

struct Model {
  StageGeometry geometry;
  FluidEnvironment env;
  LossModel loss;
  OperatingPoint op;
  ModelOptions options;
};

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path, 0, e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

// --out accepts either a stem or a path with a .json/.csv extension.
fs::path output_stem(const std::string& out) {
  fs::path p(out);
  if (p.extension() == ".json" || p.extension() == ".csv") p.replace_extension();
  return p;
}

void emit_json(const Options& o, const Json& doc, std::ostream& out) {
  if (o.out.empty()) {
    out << dump(doc);
  } else {
    fs::path p(o.out);
    if (p.extension() != ".json") p = output_stem(o.out).string() + ".json";
    write_file(p, dump(doc));
  }
}

ModelOptions parse_stacking(const std::string& name, ModelOptions options) {
  if (name.empty()) return options;
  if (name == "literal") options.stacking = StackingConvention::kLiteral;
  else if (name == "first_stage_lossless")
    options.stacking = StackingConvention::kFirstStageLossless;
  else throw Error(ErrorKind::kInvalidInput, "unknown stacking convention '" + name + "'");
  return options;
}

// Defaults, then the config document, then flags. Lab units are converted
// here and nowhere else.
Model build_model(const Options& o, const Json* config, const std::string& source) {
  Model m;
  if (config) {
    if (config->contains("geometry")) update_from_json((*config)["geometry"], m.geometry, source);
    if (config->contains("environment")) update_from_json((*config)["environment"], m.env, source);
    if (config->contains("loss")) update_from_json((*config)["loss"], m.loss, source);
    if (config->contains("operating")) update_from_json((*config)["operating"], m.op, source);
    if (config->contains("model")) update_from_json((*config)["model"], m.options, source);
  }
  if (o.stages) m.geometry.stage_count = *o.stages;
  if (o.gap_mm) m.geometry.drift_gap_m = *o.gap_mm * 1e-3;
  if (o.gamma) m.geometry.spacing_ratio = *o.gamma;
  if (o.area_mm2) m.geometry.area_m2 = *o.area_mm2 * 1e-6;
  if (o.field_MVpm) m.op.drift_field_Vpm = *o.field_MVpm * 1e6;
  if (o.vin) m.op.inlet_velocity_mps = *o.vin;
  if (o.beta1) m.loss.beta1 = *o.beta1;
  if (o.beta2) m.loss.beta2 = *o.beta2;
  if (o.mu) m.env.ion_mobility = *o.mu;
  if (o.rho) m.env.air_density = *o.rho;
  m.options = parse_stacking(o.stacking, m.options);
  return m;
}

Json model_inputs(const Model& m) {
  return {{"geometry", to_json(m.geometry)},
          {"environment", to_json(m.env)},
          {"loss", to_json(m.loss)},
          {"operating", to_json(m.op)},
          {"model", to_json(m.options)}};
}

std::optional<Json> load_config(const Options& o) {
  if (o.config.empty()) return std::nullopt;
  return read_json_file(o.config);
}

std::string sweep_csv(const Model& m, int points) {
  if (points < 1) throw Error(ErrorKind::kInvalidInput, "--sweep-points must be >= 1");
  const double v_max = m.op.applied_voltage_V(m.geometry);
  std::ostringstream csv;
  csv << "voltage_V,drift_field_Vpm,force_N";
  for (int i = 1; i <= m.geometry.stage_count; ++i) csv << ",velocity_stage" << i << "_mps";
  csv << ",efficiency_NpW\n";
  for (int k = 1; k <= points; ++k) {
    const double v = v_max * k / points;
    const auto op = OperatingPoint::from_voltage(v, m.geometry, m.op.inlet_velocity_mps);
    const auto r = predict(m.geometry, m.env, m.loss, op, m.options);
    csv << format_number(v) << ',' << format_number(op.drift_field_Vpm) << ','
        << format_number(r.total_force_N);
    for (double vel : r.outlet_velocities_mps) csv << ',' << format_number(vel);
    csv << ',' << format_number(r.average_efficiency_NpW) << '\n';
  }
  return csv.str();
}

void print_predict_summary(const Options& o, const Model& m, const PerformanceReport& r,
                           std::ostream& out) {
  const bool lab = o.units == "lab";
  out << std::setprecision(6);
  if (lab) {
    out << "stages " << m.geometry.stage_count << ", gap " << m.geometry.drift_gap_m * 1e3
        << " mm, applied " << r.applied_voltage_V * 1e-3 << " kV\n"
        << "total force " << r.total_force_N * 1e3 << " mN, areal thrust "
        << r.areal_thrust_Npm2 << " N/m^2, force density " << r.force_density_Npm3 * 1e-3
        << " kN/m^3\n"
        << "outlet velocity " << r.outlet_velocities_mps.back() << " m/s, average efficiency "
        << r.average_efficiency_NpW * 1e3 << " mN/W\n";
  } else {
    out << "stages " << m.geometry.stage_count << ", gap " << m.geometry.drift_gap_m
        << " m, applied " << r.applied_voltage_V << " V\n"
        << "total force " << r.total_force_N << " N, areal thrust " << r.areal_thrust_Npm2
        << " N/m^2, force density " << r.force_density_Npm3 << " N/m^3\n"
        << "outlet velocity " << r.outlet_velocities_mps.back()
        << " m/s, average efficiency " << r.average_efficiency_NpW << " N/W\n";
  }
  for (const auto& w : r.warnings) out << "warning: " << w << '\n';
}

void cmd_predict(const Options& o, std::ostream& out) {
  const auto config = load_config(o);
  const Model m = build_model(o, config ? &*config : nullptr, o.config);
  const auto report = predict(m.geometry, m.env, m.loss, m.op, m.options);
  const Json doc{{"inputs", model_inputs(m)}, {"report", to_json(report)}};
  const std::string csv = sweep_csv(m, o.sweep_points);
  if (o.out.empty()) {
    out << dump(doc);
    return;
  }
  const auto stem = output_stem(o.out);
  write_file(stem.string() + ".json", dump(doc));
  write_file(stem.string() + "_sweep.csv", csv);
  print_predict_summary(o, m, report, out);
}

MeasurementSeries load_input(const Options& o, std::size_t i) {
  std::optional<fs::path> meta;
  if (!o.meta.empty() && o.inputs.size() == 1) meta = o.meta;
  return load_series(o.inputs[i], meta);
}

void require_inputs(const Options& o) {
  if (o.inputs.empty()) throw Error(ErrorKind::kInvalidInput, "--input is required");
}

void cmd_fit_onset(const Options& o, std::ostream& out) {
  require_inputs(o);
  const auto series = load_input(o, 0);
  const auto fit = fit_onset(series, {o.noise_floor_A});
  emit_json(o, {{"input", o.inputs[0]}, {"fit", to_json(fit)}}, out);
}

void cmd_fit_beta(const Options& o, std::ostream& out) {
  require_inputs(o);
  const auto config = load_config(o);
  const Model m = build_model(o, config ? &*config : nullptr, o.config);
  std::vector<MeasurementSeries> series;
  for (std::size_t i = 0; i < o.inputs.size(); ++i) series.push_back(load_input(o, i));

  std::string target = o.target;
  if (target == "auto") target = series.size() == 1 ? "beta1" : "beta2";
  FitResult fit;
  if (target == "beta1") {
    if (series.size() != 1)
      throw Error(ErrorKind::kInvalidInput, "beta1 fit takes exactly one --input");
    fit = fit_beta1(series.front(), m.env);
  } else if (target == "beta2") {
    fit = fit_beta2(series, m.env, m.loss.beta1, m.options.stacking);
  } else {
    throw Error(ErrorKind::kInvalidInput, "--target must be auto, beta1 or beta2");
  }
  emit_json(o,
            {{"inputs", o.inputs},
             {"target", target},
             {"environment", to_json(m.env)},
             {"model", to_json(m.options)},
             {"fit", to_json(fit)}},
            out);
}

void cmd_degradation(const Options& o, std::ostream& out) {
  require_inputs(o);
  const auto series = load_input(o, 0);
  DegradationOptions opts;
  opts.averaging_window_s = o.avg_window_s;
  const double drop = degradation_metric(series, o.window_s, opts);
  FitResult fit;
  fit.samples_used = series.samples.size();
  constexpr double kPriorWorkDrop = 0.30;
  emit_json(o,
            {{"input", o.inputs[0]},
             {"window_s", o.window_s},
             {"averaging_window_s", o.avg_window_s},
             {"fractional_current_drop", drop},
             {"prior_work_drop", kPriorWorkDrop},
             {"at_or_above_prior_work_drop", drop >= kPriorWorkDrop - 1e-9},
             {"fit", to_json(fit)}},
            out);
}

void cmd_table1(const Options& o, std::ostream& out) {
  Table1Options opts;
  if (o.rho) opts.air_density = *o.rho;
  opts.model = parse_stacking(o.stacking, opts.model);
  const auto fit = fit_table1_drift_speed(opts);
  out << "effective drift speed " << format_number(fit.drift_speed_mps) << " m/s (mu "
      << format_number(fit.drift_speed_mps / opts.drift_field_Vpm) << " m^2/(V s))\n";
  out << "stages  beta2  published_%  model_%  error_pp\n";
  out << std::fixed;
  for (const auto& c : fit.cells)
    out << std::setw(6) << c.cell.stage_count << std::setw(7) << std::setprecision(1)
        << c.cell.beta2 << std::setw(13) << c.cell.published_percent << std::setw(9)
        << std::setprecision(3) << c.model_percent << std::setw(10) << std::showpos
        << c.error_pp << std::noshowpos << '\n';
  out << "max |error| " << std::setprecision(3) << fit.max_abs_error_pp << " pp\n";
  out << std::defaultfloat;
  if (!o.out.empty()) write_file(output_stem(o.out).string() + ".json", dump(to_json(fit)));
}

unsigned thread_count(const Options& o) {
  if (o.threads) return o.threads;
  if (const char* env = std::getenv("EHD_STACK_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1)
      throw Error(ErrorKind::kInvalidInput, "EHD_STACK_THREADS must be a positive integer");
    return static_cast<unsigned>(n);
  }
  return 0;
}

void cmd_optimize(const Options& o, std::ostream& out) {
  if (o.config.empty()) throw Error(ErrorKind::kInvalidInput, "--config <design space json> is required");
  const Json config = read_json_file(o.config);
  const DesignSpace space = design_space_from_json(config, o.config);
  const Model m = build_model(o, &config, o.config);

  SweepOptions opts;
  opts.model = m.options;
  opts.threads = thread_count(o);
  const auto pareto = sweep(space, m.env, m.loss, opts);

  Json doc = to_json(pareto);
  if (o.weight) {
    doc["selection"] = {{"weight_force_density", *o.weight},
                        {"point", to_json(select(pareto, *o.weight))}};
  }
  if (o.out.empty()) {
    out << dump(doc);
    return;
  }
  const auto stem = output_stem(o.out);
  std::ostringstream csv;
  write_pareto_csv(csv, pareto);
  write_file(stem.string() + ".json", dump(doc));
  write_file(stem.string() + ".csv", csv.str());
  out << pareto.points.size() << " Pareto points from " << pareto.feasible << " feasible of "
      << pareto.evaluated << " evaluated\n";
}

void cmd_report(const Options& o, std::ostream& out) {
  Headline h;
  if (!o.config.empty()) h = headline_from_json(read_json_file(o.config), o.config);
  if (o.areal_thrust) h.areal_thrust_Npm2 = *o.areal_thrust;
  if (o.force_density) h.force_density_Npm3 = *o.force_density;
  if (o.power_density) h.power_density_Wpm3 = *o.power_density;
  if (o.stages) h.stage_count = *o.stages;
  if (o.gamma) h.spacing_ratio = *o.gamma;
  const auto report = consistency_report(h);
  emit_json(o, {{"headline", to_json(h)}, {"report", to_json(report)}}, out);
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return kParseFailure;
    case ErrorKind::kInsufficientData:
    case ErrorKind::kFitDivergence: return kFitFailure;
    case ErrorKind::kEmptyFeasibleSet:
    case ErrorKind::kEmptyParetoSet: return kEmptyFeasibleSet;
    default: return kPreconditionViolation;
  }
}

int report_error(std::ostream& err, int code, const std::string& kind, const std::string& message,
                 Json extra = Json::object()) {
  Json body{{"kind", kind}, {"message", message}, {"exit_code", code}};
  for (auto& [k, v] : extra.items()) body[k] = v;
  err << Json{{"error", body}}.dump() << '\n';
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Multi-stage EHD thruster model, calibration and design sweep", "ehd_stack"};
  app.require_subcommand(1, 1);

  auto add_model_flags = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration");
    sub->add_option("--beta1", o.beta1, "momentum-transfer loss factor");
    sub->add_option("--beta2", o.beta2, "inter-stage loss factor");
    sub->add_option("--mu", o.mu, "ion mobility, m^2/(V s)");
    sub->add_option("--rho", o.rho, "air density, kg/m^3");
    sub->add_option("--stacking", o.stacking, "literal | first_stage_lossless");
  };
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--out", o.out, "output path or stem");
    sub->add_option("--units", o.units, "console units")->check(CLI::IsMember({"si", "lab"}));
  };

  auto* predict_cmd = app.add_subcommand("predict", "forward model at one operating point");
  add_model_flags(predict_cmd);
  add_common(predict_cmd);
  predict_cmd->add_option("--stages", o.stages, "stage count");
  predict_cmd->add_option("--gap-mm", o.gap_mm, "drift gap, mm");
  predict_cmd->add_option("--gamma", o.gamma, "inter-stage spacing / drift gap");
  predict_cmd->add_option("--field-MVpm", o.field_MVpm, "drift field, MV/m");
  predict_cmd->add_option("--area-mm2", o.area_mm2, "cross-section, mm^2");
  predict_cmd->add_option("--vin", o.vin, "inlet air velocity, m/s");
  predict_cmd->add_option("--sweep-points", o.sweep_points, "voltage sweep rows");

  auto* onset_cmd = app.add_subcommand("fit-onset", "fit I = C V (V - V0)");
  add_common(onset_cmd);
  onset_cmd->add_option("--input", o.inputs, "measurement CSV")->expected(1);
  onset_cmd->add_option("--meta", o.meta, "sidecar JSON (default: <input>.json)");
  onset_cmd->add_option("--noise-floor", o.noise_floor_A, "current cutoff, A");

  auto* beta_cmd = app.add_subcommand("fit-beta", "fit beta1 (one series) or beta2 (several)");
  add_model_flags(beta_cmd);
  add_common(beta_cmd);
  beta_cmd->add_option("--input", o.inputs, "measurement CSV, repeatable")->take_all();
  beta_cmd->add_option("--meta", o.meta, "sidecar JSON for a single input");
  beta_cmd->add_option("--target", o.target, "auto | beta1 | beta2");

  auto* degr_cmd = app.add_subcommand("degradation", "fractional current drop over a window");
  add_common(degr_cmd);
  degr_cmd->add_option("--input", o.inputs, "measurement CSV")->expected(1);
  degr_cmd->add_option("--meta", o.meta, "sidecar JSON");
  degr_cmd->add_option("--window", o.window_s, "window, s");
  degr_cmd->add_option("--avg-window", o.avg_window_s, "endpoint window, s");

  auto* table_cmd = app.add_subcommand("table1", "reproduce the efficiency-decrease table");
  add_common(table_cmd);
  table_cmd->add_option("--rho", o.rho, "air density, kg/m^3");
  table_cmd->add_option("--stacking", o.stacking, "literal | first_stage_lossless");

  auto* opt_cmd = app.add_subcommand("optimize", "Pareto sweep over a design space");
  add_model_flags(opt_cmd);
  add_common(opt_cmd);
  opt_cmd->add_option("--weight", o.weight, "force-density weight for selection, [0, 1]");
  opt_cmd->add_option("--threads", o.threads, "worker threads (default EHD_STACK_THREADS)");

  auto* report_cmd = app.add_subcommand("report", "consistency of headline figures");
  add_common(report_cmd);
  report_cmd->add_option("--config", o.config, "headline JSON");
  report_cmd->add_option("--areal-thrust", o.areal_thrust, "N/m^2");
  report_cmd->add_option("--force-density", o.force_density, "N/m^3");
  report_cmd->add_option("--power-density", o.power_density, "W/m^3");
  report_cmd->add_option("--stages", o.stages, "stage count");
  report_cmd->add_option("--gamma", o.gamma, "inter-stage spacing / drift gap");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    return report_error(err, kUsageError, "UsageError", e.what());
  }

  try {
    if (predict_cmd->parsed()) cmd_predict(o, out);
    else if (onset_cmd->parsed()) cmd_fit_onset(o, out);
    else if (beta_cmd->parsed()) cmd_fit_beta(o, out);
    else if (degr_cmd->parsed()) cmd_degradation(o, out);
    else if (table_cmd->parsed()) cmd_table1(o, out);
    else if (opt_cmd->parsed()) cmd_optimize(o, out);
    else if (report_cmd->parsed()) cmd_report(o, out);
  } catch (const ParseError& e) {
    Json extra{{"source", e.source()}};
    if (e.line() > 0) extra["line"] = e.line();
    return report_error(err, kParseFailure, to_string(e.kind()), e.what(), extra);
  } catch (const EmptyFeasibleSetError& e) {
    return report_error(err, kEmptyFeasibleSet, to_string(e.kind()), e.what(),
                        {{"constraint_histogram", e.histogram()}});
  } catch (const Error& e) {
    return report_error(err, exit_code_for(e.kind()), to_string(e.kind()), e.what());
  } catch (const IoError& e) {
    return report_error(err, kInternalError, "IOError", e.what());
  } catch (const std::exception& e) {
    return report_error(err, kInternalError, "InternalError", e.what());
  }
  return kOk;
}

}  // namespace ehd::cli
