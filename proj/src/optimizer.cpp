#include "ehd/optimizer.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "ehd/error.hpp"

namespace ehd {

namespace {

enum Violation : unsigned {
  kViolatesVoltage = 1u << 0,
  kViolatesField = 1u << 1,
  kViolatesForce = 1u << 2,
  kViolatesHeight = 1u << 3,
};

constexpr std::array<std::pair<unsigned, const char*>, 4> kViolationNames{{
    {kViolatesVoltage, kMaxVoltage},
    {kViolatesField, kMaxField},
    {kViolatesForce, kMinTotalForce},
    {kViolatesHeight, kMaxDeviceHeight},
}};

struct Coordinates {
  StageGeometry geometry;
  OperatingPoint operating;
};

Coordinates decode(const DesignSpace& space, std::size_t index) {
  const std::size_t nf = space.drift_field_Vpm.size();
  const std::size_t ns = space.spacing_ratio.size();
  const std::size_t nd = space.drift_gap_m.size();
  const std::size_t i_field = index % nf;
  index /= nf;
  const std::size_t i_spacing = index % ns;
  index /= ns;
  const std::size_t i_gap = index % nd;
  index /= nd;
  Coordinates c;
  c.geometry = {space.drift_gap_m.at(i_gap), space.spacing_ratio.at(i_spacing), space.area_m2,
                space.stages.min + static_cast<int>(index)};
  c.operating = {space.drift_field_Vpm.at(i_field), space.inlet_velocity_mps};
  return c;
}

struct Evaluation {
  unsigned violations = 0;
  double applied_voltage_V = 0;
  double total_force_N = 0;
  Objectives objectives{0, 0};
};

Evaluation evaluate_compact(const DesignSpace& space, const Coordinates& c,
                            const FluidEnvironment& env, const LossModel& loss,
                            const ModelOptions& model) {
  const auto& limits = space.constraints;
  Evaluation e;
  e.applied_voltage_V = c.operating.applied_voltage_V(c.geometry);
  e.total_force_N = multistage_force(c.geometry, env, loss, c.operating, model);
  if (limits.max_voltage_V && e.applied_voltage_V > *limits.max_voltage_V)
    e.violations |= kViolatesVoltage;
  if (limits.max_field_Vpm && c.operating.drift_field_Vpm > *limits.max_field_Vpm)
    e.violations |= kViolatesField;
  if (limits.min_total_force_N && e.total_force_N < *limits.min_total_force_N)
    e.violations |= kViolatesForce;
  if (limits.max_device_height_m && c.geometry.stack_height_m() > *limits.max_device_height_m)
    e.violations |= kViolatesHeight;
  if (e.violations == 0) {
    e.objectives.force_density_Npm3 = force_density(e.total_force_N, c.geometry);
    e.objectives.average_efficiency_NpW =
        average_efficiency(c.geometry, env, loss, c.operating, model);
  }
  return e;
}

struct Candidate {
  Objectives objectives;
  std::size_t index;
};

bool objective_order(const Objectives& a, const Objectives& b) {
  if (a.force_density_Npm3 != b.force_density_Npm3)
    return a.force_density_Npm3 > b.force_density_Npm3;
  return a.average_efficiency_NpW > b.average_efficiency_NpW;
}

// Keeps the nondominated entries of items (in any order on return).
template <typename T, typename Objective>
void reduce_front(std::vector<T>& items, Objective objective_of) {
  std::sort(items.begin(), items.end(), [&](const T& a, const T& b) {
    return objective_order(objective_of(a), objective_of(b));
  });
  std::vector<T> front;
  double best_eta = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < items.size();) {
    const double gamma = objective_of(items[i]).force_density_Npm3;
    const double group_eta = objective_of(items[i]).average_efficiency_NpW;
    std::size_t j = i;
    for (; j < items.size() && objective_of(items[j]).force_density_Npm3 == gamma; ++j)
      if (group_eta > best_eta && objective_of(items[j]).average_efficiency_NpW == group_eta)
        front.push_back(std::move(items[j]));
    best_eta = std::max(best_eta, group_eta);
    i = j;
  }
  items = std::move(front);
}

bool canonical_order(const DesignPoint& a, const DesignPoint& b) {
  const auto& oa = *a.objectives;
  const auto& ob = *b.objectives;
  if (oa.force_density_Npm3 != ob.force_density_Npm3 ||
      oa.average_efficiency_NpW != ob.average_efficiency_NpW)
    return objective_order(oa, ob);
  const auto key = [](const DesignPoint& p) {
    return std::make_tuple(p.geometry.stage_count, p.geometry.drift_gap_m,
                           p.geometry.spacing_ratio, p.operating.drift_field_Vpm);
  };
  return key(a) < key(b);
}

void check_axis(const GridAxis& axis, const char* name, bool strictly_positive) {
  const bool ok = std::isfinite(axis.min) && std::isfinite(axis.max) &&
                  std::isfinite(axis.step) && axis.step > 0 && axis.max >= axis.min &&
                  (strictly_positive ? axis.min > 0 : axis.min >= 0);
  if (!ok)
    fail(ErrorKind::kInvalidInput,
         std::string(name) + " range must be finite, nonempty, with step > 0 and min " +
             (strictly_positive ? "> 0" : ">= 0"));
}

void check_limit(const std::optional<double>& limit, const char* name) {
  if (limit && !(std::isfinite(*limit) && *limit >= 0))
    fail(ErrorKind::kInvalidInput, std::string(name) + " must be finite and >= 0");
}

}  // namespace

std::size_t GridAxis::size() const {
  return static_cast<std::size_t>(std::floor((max - min) / step + 1e-9)) + 1;
}

double GridAxis::at(std::size_t i) const { return min + static_cast<double>(i) * step; }

void DesignSpace::validate() const {
  if (stages.min < 1 || stages.max < stages.min)
    fail(ErrorKind::kInvalidInput, "stage count range must satisfy 1 <= min <= max");
  check_axis(drift_gap_m, "drift gap", true);
  check_axis(spacing_ratio, "spacing ratio", false);
  check_axis(drift_field_Vpm, "drift field", true);
  if (!(std::isfinite(area_m2) && area_m2 > 0))
    fail(ErrorKind::kInvalidInput, "area must be finite and > 0");
  if (!(std::isfinite(inlet_velocity_mps) && inlet_velocity_mps >= 0))
    fail(ErrorKind::kInvalidInput, "inlet velocity must be finite and >= 0");
  check_limit(constraints.max_voltage_V, "max_voltage");
  check_limit(constraints.max_field_Vpm, "max_field");
  check_limit(constraints.min_total_force_N, "min_total_force");
  check_limit(constraints.max_device_height_m, "max_device_height");
}

std::size_t DesignSpace::grid_size() const {
  const long double size = static_cast<long double>(stages.max - stages.min + 1) *
                           drift_gap_m.size() * spacing_ratio.size() * drift_field_Vpm.size();
  if (size > static_cast<long double>(max_grid_points))
    fail(ErrorKind::kGridTooLarge, "grid has " + std::to_string(static_cast<double>(size)) +
                                       " points, cap is " + std::to_string(max_grid_points));
  return static_cast<std::size_t>(size);
}

DesignPoint evaluate(const DesignSpace& space, std::size_t index, const FluidEnvironment& env,
                     const LossModel& loss, const ModelOptions& model) {
  const auto c = decode(space, index);
  const auto e = evaluate_compact(space, c, env, loss, model);
  DesignPoint p;
  p.geometry = c.geometry;
  p.operating = c.operating;
  p.applied_voltage_V = e.applied_voltage_V;
  p.total_force_N = e.total_force_N;
  for (auto [bit, name] : kViolationNames)
    if (e.violations & bit) p.violations.emplace_back(name);
  if (e.violations == 0) p.objectives = e.objectives;
  return p;
}

std::vector<DesignPoint> evaluate_grid(const DesignSpace& space, const FluidEnvironment& env,
                                       const LossModel& loss, const ModelOptions& model) {
  space.validate();
  env.validate();
  loss.validate();
  const std::size_t n = space.grid_size();
  std::vector<DesignPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(evaluate(space, i, env, loss, model));
  return out;
}

bool dominates(const Objectives& a, const Objectives& b) {
  const bool geq = a.force_density_Npm3 >= b.force_density_Npm3 &&
                   a.average_efficiency_NpW >= b.average_efficiency_NpW;
  const bool strict = a.force_density_Npm3 > b.force_density_Npm3 ||
                      a.average_efficiency_NpW > b.average_efficiency_NpW;
  return geq && strict;
}

std::vector<DesignPoint> nondominated(std::vector<DesignPoint> points) {
  std::erase_if(points, [](const DesignPoint& p) { return !p.objectives; });
  reduce_front(points, [](const DesignPoint& p) -> const Objectives& { return *p.objectives; });
  std::sort(points.begin(), points.end(), canonical_order);
  return points;
}

ParetoSet sweep(const DesignSpace& space, const FluidEnvironment& env, const LossModel& loss,
                const SweepOptions& options) {
  space.validate();
  env.validate();
  loss.validate();
  const std::size_t total = space.grid_size();

  std::vector<std::size_t> order;
  if (options.permutation_seed) {
    order.resize(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(*options.permutation_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  constexpr std::size_t kChunk = 1 << 14;
  threads = static_cast<unsigned>(
      std::clamp<std::size_t>((total + kChunk - 1) / kChunk, 1, std::max(threads, 1u)));

  std::atomic<std::size_t> next{0};
  std::mutex merge_mutex;
  std::vector<Candidate> front;
  std::array<std::size_t, kViolationNames.size()> histogram{};
  std::size_t feasible = 0;
  const auto objectives_of = [](const Candidate& c) -> const Objectives& { return c.objectives; };

  auto worker = [&] {
    std::vector<Candidate> local;
    std::array<std::size_t, kViolationNames.size()> local_hist{};
    std::size_t local_feasible = 0;
    for (;;) {
      const std::size_t begin = next.fetch_add(kChunk);
      if (begin >= total) break;
      const std::size_t end = std::min(total, begin + kChunk);
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t index = order.empty() ? k : order[k];
        const auto e = evaluate_compact(space, decode(space, index), env, loss, options.model);
        if (e.violations == 0) {
          ++local_feasible;
          local.push_back({e.objectives, index});
        }
        for (std::size_t b = 0; b < kViolationNames.size(); ++b)
          if (e.violations & kViolationNames[b].first) ++local_hist[b];
      }
      reduce_front(local, objectives_of);
    }
    std::lock_guard lock(merge_mutex);
    front.insert(front.end(), local.begin(), local.end());
    reduce_front(front, objectives_of);
    feasible += local_feasible;
    for (std::size_t b = 0; b < histogram.size(); ++b) histogram[b] += local_hist[b];
  };

  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  if (feasible == 0) {
    std::map<std::string, std::size_t> named;
    for (std::size_t b = 0; b < histogram.size(); ++b)
      named[kViolationNames[b].second] = histogram[b];
    throw EmptyFeasibleSetError(std::move(named), total);
  }

  ParetoSet result;
  result.space = space;
  result.loss = loss;
  result.env = env;
  result.model = options.model;
  result.evaluated = total;
  result.feasible = feasible;
  result.points.reserve(front.size());
  for (const auto& c : front)
    result.points.push_back(evaluate(space, c.index, env, loss, options.model));
  std::sort(result.points.begin(), result.points.end(), canonical_order);
  return result;
}

const DesignPoint& select(const ParetoSet& pareto, double weight_force_density) {
  if (pareto.points.empty()) fail(ErrorKind::kEmptyParetoSet, "Pareto set is empty");
  if (!(weight_force_density >= 0 && weight_force_density <= 1))
    fail(ErrorKind::kInvalidInput, "weight must lie in [0, 1]");

  double g_lo = INFINITY, g_hi = -INFINITY, e_lo = INFINITY, e_hi = -INFINITY;
  for (const auto& p : pareto.points) {
    g_lo = std::min(g_lo, p.objectives->force_density_Npm3);
    g_hi = std::max(g_hi, p.objectives->force_density_Npm3);
    e_lo = std::min(e_lo, p.objectives->average_efficiency_NpW);
    e_hi = std::max(e_hi, p.objectives->average_efficiency_NpW);
  }
  const auto normalize = [](double x, double lo, double hi) {
    return hi > lo ? (x - lo) / (hi - lo) : 1.0;
  };
  const auto score = [&](const DesignPoint& p) {
    return weight_force_density * normalize(p.objectives->force_density_Npm3, g_lo, g_hi) +
           (1 - weight_force_density) *
               normalize(p.objectives->average_efficiency_NpW, e_lo, e_hi);
  };

  const DesignPoint* best = &pareto.points.front();
  double best_score = score(*best);
  for (const auto& p : pareto.points) {
    const double s = score(p);
    const bool better =
        s > best_score ||
        (s == best_score &&
         std::make_pair(p.geometry.stage_count, p.geometry.drift_gap_m) <
             std::make_pair(best->geometry.stage_count, best->geometry.drift_gap_m));
    if (better) {
      best = &p;
      best_score = s;
    }
  }
  return *best;
}

}  // namespace ehd
