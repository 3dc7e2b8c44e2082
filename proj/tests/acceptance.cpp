// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are fixed here and must not be loosened.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "ehd/calibration.hpp"
#include "ehd/core.hpp"
#include "ehd/optimizer.hpp"
#include "synthetic.hpp"

using namespace ehd;

namespace {

constexpr double kTable1TolPp = 0.15;
constexpr double kAsymptoteTol = 1e-3;
constexpr double kSqrtLawTol = 1e-9;
constexpr double kRoundTripTol = 1e-9;
constexpr int kRoundTripCases = 1000;
constexpr double kAreaTol = 1e-12;
constexpr double kFitTol = 5e-3;
constexpr double kNoisyOnsetTolV = 200.0;
constexpr double kDegradationTol = 0.005;
constexpr double kPriorDropTol = 0.005;
constexpr double kGapTolM = 0.01e-3;
constexpr double kRuntimeLimitS = 1.0;

int failures = 0;

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

struct Outcome {
  bool ok;
  std::string detail;
};

void check(const char* name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.ok) ++failures;
  std::printf("%s  %-28s %s\n", o.ok ? "PASS" : "FAIL", name, o.detail.c_str());
}

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome table1() {
  Table1Fit fit;
  const double t = seconds([&] { fit = fit_table1_drift_speed(); });
  const bool ok = fit.max_abs_error_pp <= kTable1TolPp && t < kRuntimeLimitS;
  return {ok, fmt("drift speed %.1f m/s, max error %.4f pp (tol %.2f), %.3f s",
                  fit.drift_speed_mps, fit.max_abs_error_pp, kTable1TolPp, t)};
}

Outcome asymptote() {
  double worst = 0;
  const double t = seconds([&] {
    const FluidEnvironment env;
    const OperatingPoint op{1e6, 0};
    for (double gamma : {0.5, 1.0, 2.0, 3.0, 5.0, 10.0})
      for (double beta2 : {0.5, 0.8, 0.9, 1.0}) {
        const StageGeometry g{1e-3, gamma, 1e-4, 1000};
        const LossModel loss{1.0, beta2};
        StageGeometry one = g;
        one.stage_count = 1;
        const double f0 = single_stage_force(one, env, loss, op);
        const double normalized = force_density(g, env, loss, op) * g.area_m2 * g.drift_gap_m / f0;
        worst = std::max(worst, rel(normalized, force_density_limit(gamma, beta2)));
      }
  });
  return {worst <= kAsymptoteTol && t < kRuntimeLimitS,
          fmt("worst relative gap %.2e at n = 1000 (tol %.0e), %.3f s", worst, kAsymptoteTol, t)};
}

Outcome sqrt_law() {
  const FluidEnvironment env;
  const LossModel loss{0.8, 1.0};
  const OperatingPoint op{1.5e6, 0};
  const double v1 = velocity_cascade({1e-3, 2.0, 1e-4, 1}, env, loss, op).back();
  double worst = 0;
  for (int n = 1; n <= 25; ++n) {
    const double vn = velocity_cascade({1e-3, 2.0, 1e-4, n}, env, loss, op).back();
    worst = std::max(worst, rel(vn, std::sqrt(n) * v1));
  }
  return {worst <= kSqrtLawTol, fmt("n = 1..25, worst relative error %.2e", worst)};
}

Outcome round_trip() {
  std::mt19937_64 rng(20261016);
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  double worst = 0;
  for (int k = 0; k < kRoundTripCases; ++k) {
    const StageGeometry g{uni(0.1e-3, 5e-3), uni(0.5, 5.0), uni(1e-6, 1.0),
                          std::uniform_int_distribution<int>(1, 40)(rng)};
    const FluidEnvironment env{uni(0.5, 1.5), uni(1e-4, 3e-4), kVacuumPermittivity};
    const LossModel loss{uni(0.05, 1.0), uni(0.05, 1.0)};
    const OperatingPoint op{uni(1e5, 4e6), uni(0.0, 5.0)};
    ModelOptions opts;
    if (k % 2) opts.stacking = StackingConvention::kFirstStageLossless;
    const auto v = velocity_cascade(g, env, loss, op, opts);
    double recovered = 0, upstream = op.inlet_velocity_mps;
    for (double out : v) {
      recovered += momentum_force(env.air_density, g.area_m2, upstream, out);
      upstream = out;
    }
    worst = std::max(worst, rel(recovered, multistage_force(g, env, loss, op, opts)));
  }
  return {worst <= kRoundTripTol,
          fmt("%d randomized cases, worst relative error %.2e", kRoundTripCases, worst)};
}

Outcome area_invariance() {
  const FluidEnvironment env;
  const LossModel loss{0.9, 0.85};
  const OperatingPoint op{2e6, 1.0};
  double worst = 0;
  for (int n : {1, 3, 10}) {
    const StageGeometry g{1e-3, 2.0, 1e-4, n};
    const double base = average_efficiency(g, env, loss, op);
    for (double factor : {0.1, 10.0, 1000.0}) {
      StageGeometry scaled = g;
      scaled.area_m2 *= factor;
      worst = std::max(worst, rel(average_efficiency(scaled, env, loss, op), base));
    }
  }
  return {worst < kAreaTol, fmt("worst relative change %.2e", worst)};
}

Outcome fit_recovery() {
  const synthetic::IvCurve iv;
  const auto onset = fit_onset(synthetic::iv_series(iv));
  const double e_v0 = rel(*onset.onset_voltage_V, iv.onset_V);
  const double e_c = rel(*onset.townsend_coefficient_ApV2, iv.townsend_C);

  const FluidEnvironment env;
  const StageGeometry g{0.5e-3, 2.0, 1e-4, 1};
  const double beta1 = 0.7, beta2 = 0.9;
  const double e_b1 = rel(*fit_beta1(synthetic::stack_series(g, {beta1, 1.0}), env).fitted_beta1, beta1);

  std::vector<MeasurementSeries> stacks;
  for (int n = 1; n <= 4; ++n) {
    StageGeometry gn = g;
    gn.stage_count = n;
    stacks.push_back(synthetic::stack_series(gn, {beta1, beta2}));
  }
  const double e_b2 = rel(*fit_beta2(stacks, env, beta1).fitted_beta2, beta2);

  double worst_noisy = 0;
  for (unsigned seed = 1; seed <= 20; ++seed) {
    const auto noisy = fit_onset(synthetic::iv_series(iv, 0.05, seed));
    worst_noisy = std::max(worst_noisy, std::abs(*noisy.onset_voltage_V - iv.onset_V));
  }
  const bool ok = std::max({e_v0, e_c, e_b1, e_b2}) <= kFitTol && worst_noisy <= kNoisyOnsetTolV;
  return {ok, fmt("V0 %.1e, C %.1e, beta1 %.1e, beta2 %.1e rel; 5%% noise V0 off by <= %.0f V (20 seeds)",
                  e_v0, e_c, e_b1, e_b2, worst_noisy)};
}

Outcome degradation() {
  const double five = degradation_metric(synthetic::decay_series(0.05), 100.0);
  const double thirty = degradation_metric(synthetic::decay_series(0.30), 100.0);
  const bool ok = std::abs(five - 0.05) <= kDegradationTol && std::abs(thirty - 0.30) <= kPriorDropTol;
  return {ok, fmt("5%% series -> %.4f, 30%% series -> %.4f", five, thirty)};
}

Outcome headline() {
  const auto r = consistency_report(Headline{});
  const bool ok = std::abs(r.implied_drift_gap_m - 1.07e-3) <= kGapTolM &&
                  std::abs(r.implied_bulk_efficiency_NpW - 0.5) < 1e-12 &&
                  r.quoted_peak_efficiency_NpW == kQuotedPeakEfficiencyNpW &&
                  r.efficiency_discrepancy;
  return {ok, fmt("d = %.4f mm, bulk %.3g N/W vs quoted %.3g N/W, flagged %s",
                  r.implied_drift_gap_m * 1e3, r.implied_bulk_efficiency_NpW,
                  r.quoted_peak_efficiency_NpW, r.efficiency_discrepancy ? "yes" : "no")};
}

bool same_point(const DesignPoint& a, const DesignPoint& b) {
  return a.geometry.stage_count == b.geometry.stage_count &&
         a.geometry.drift_gap_m == b.geometry.drift_gap_m &&
         a.geometry.spacing_ratio == b.geometry.spacing_ratio &&
         a.operating.drift_field_Vpm == b.operating.drift_field_Vpm &&
         a.objectives->force_density_Npm3 == b.objectives->force_density_Npm3 &&
         a.objectives->average_efficiency_NpW == b.objectives->average_efficiency_NpW;
}

Outcome optimizer() {
  const FluidEnvironment env;
  std::size_t violations = 0, mismatches = 0, grids = 0, largest = 0;
  for (int variant = 0; variant < 4; ++variant) {
    DesignSpace space;
    space.stages = {1, 8 + variant};
    space.drift_gap_m = {0.25e-3, 2e-3, 0.25e-3};
    space.spacing_ratio = {1.0, 3.0, 0.5};
    space.drift_field_Vpm = {0.5e6, 3e6, 0.25e6 + 0.05e6 * variant};
    space.constraints.max_voltage_V = 3000.0 + 500 * variant;
    space.constraints.max_device_height_m = 0.02;
    if (variant % 2) space.constraints.min_total_force_N = 1e-3;
    const std::size_t size = space.grid_size();
    if (size > 10000) return {false, fmt("test grid of %zu points exceeds 1e4", size)};
    largest = std::max(largest, size);
    const LossModel loss{0.9, 0.8 + 0.05 * variant};

    SweepOptions opts;
    const auto pareto = sweep(space, env, loss, opts);
    const auto all = evaluate_grid(space, env, loss);
    for (const auto& p : pareto.points) {
      if (!p.feasible()) ++violations;
      for (const auto& q : all)
        if (q.feasible() && dominates(*q.objectives, *p.objectives)) ++violations;
    }
    for (const auto& q : all) {
      if (!q.feasible()) continue;
      bool covered = false;
      for (const auto& p : pareto.points)
        if (same_point(p, q) || dominates(*p.objectives, *q.objectives) ||
            (p.objectives->force_density_Npm3 == q.objectives->force_density_Npm3 &&
             p.objectives->average_efficiency_NpW == q.objectives->average_efficiency_NpW)) {
          covered = true;
          break;
        }
      if (!covered) ++violations;
    }
    for (std::uint64_t seed : {1u, 7u, 12345u}) {
      opts.permutation_seed = seed;
      opts.threads = 1 + seed % 4;
      const auto permuted = sweep(space, env, loss, opts);
      if (permuted.points.size() != pareto.points.size()) {
        ++mismatches;
        continue;
      }
      for (std::size_t i = 0; i < permuted.points.size(); ++i)
        if (!same_point(permuted.points[i], pareto.points[i])) ++mismatches;
    }
    ++grids;
  }
  return {violations == 0 && mismatches == 0,
          fmt("%zu grids (<= %zu points), %zu dominance violations, %zu permutation mismatches",
              grids, largest, violations, mismatches)};
}

}  // namespace

int main() {
  check("table1_reproduction", table1);
  check("infinite_stack_asymptote", asymptote);
  check("sqrt_n_velocity_law", sqrt_law);
  check("momentum_round_trip", round_trip);
  check("efficiency_area_invariance", area_invariance);
  check("fit_recovery", fit_recovery);
  check("degradation_metric", degradation);
  check("headline_consistency", headline);
  check("optimizer_soundness", optimizer);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
