#pragma once

// Exhaustive design-space sweep and the force-density / efficiency frontier.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ehd/core.hpp"

namespace ehd {

struct StageRange {
  int min = 1;
  int max = 1;
};

// Grid min, min + step, ... up to max (inclusive within rounding).
struct GridAxis {
  double min = 0;
  double max = 0;
  double step = 1;

  std::size_t size() const;
  double at(std::size_t i) const;
};

struct DesignConstraints {
  std::optional<double> max_voltage_V;
  std::optional<double> max_field_Vpm;
  std::optional<double> min_total_force_N;
  std::optional<double> max_device_height_m;
};

inline constexpr std::size_t kDefaultMaxGridPoints = 10'000'000;

struct DesignSpace {
  StageRange stages;
  GridAxis drift_gap_m;
  GridAxis spacing_ratio{kShieldingSpacingRatio, kShieldingSpacingRatio, 1.0};
  GridAxis drift_field_Vpm;
  double area_m2 = 1e-4;
  double inlet_velocity_mps = 0;
  DesignConstraints constraints;
  std::size_t max_grid_points = kDefaultMaxGridPoints;

  void validate() const;
  std::size_t grid_size() const;
};

struct Objectives {
  double force_density_Npm3;
  double average_efficiency_NpW;
};

struct DesignPoint {
  StageGeometry geometry;
  OperatingPoint operating;
  double applied_voltage_V = 0;
  double total_force_N = 0;
  std::optional<Objectives> objectives;  // set only when feasible
  std::vector<std::string> violations;

  bool feasible() const { return violations.empty(); }
};

// Constraint names used in violation lists and the infeasibility histogram.
inline constexpr const char* kMaxVoltage = "max_voltage";
inline constexpr const char* kMaxField = "max_field";
inline constexpr const char* kMinTotalForce = "min_total_force";
inline constexpr const char* kMaxDeviceHeight = "max_device_height";

struct ParetoSet {
  std::vector<DesignPoint> points;  // force density descending
  DesignSpace space;
  LossModel loss;
  FluidEnvironment env;
  ModelOptions model;
  std::size_t evaluated = 0;
  std::size_t feasible = 0;
};

struct SweepOptions {
  ModelOptions model;
  unsigned threads = 0;  // 0: hardware concurrency
  // Visit grid indices in a seeded random order instead of row-major.
  std::optional<std::uint64_t> permutation_seed;
};

// Grid point by flat index; index order is stages, gap, spacing, field
// (field fastest).
DesignPoint evaluate(const DesignSpace& space, std::size_t index,
                     const FluidEnvironment& env, const LossModel& loss,
                     const ModelOptions& model = {});

// Every grid point, row-major. Intended for small grids.
std::vector<DesignPoint> evaluate_grid(const DesignSpace& space, const FluidEnvironment& env,
                                       const LossModel& loss, const ModelOptions& model = {});

// a dominates b: >= in both objectives, > in at least one.
bool dominates(const Objectives& a, const Objectives& b);

// Nondominated feasible members of points, in canonical order.
std::vector<DesignPoint> nondominated(std::vector<DesignPoint> points);

ParetoSet sweep(const DesignSpace& space, const FluidEnvironment& env, const LossModel& loss,
                const SweepOptions& options = {});

// Max of w * normalized force density + (1 - w) * normalized efficiency, with
// min-max normalization over the set.
const DesignPoint& select(const ParetoSet& pareto, double weight_force_density);

}  // namespace ehd
