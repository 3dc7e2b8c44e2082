#include <cmath>
#include <random>

#include "doctest.h"
#include "ehd/calibration.hpp"
#include "ehd/error.hpp"
#include "synthetic.hpp"

using namespace ehd;

namespace {

// Brute-force scan (0.5 m/s over [100, 400], rho = 1.20, E = 1 MV/m) run
// offline in Python before the library existed.
constexpr double kTable1DriftSpeed = 230.5;
constexpr double kTable1Residual = 0.024410223316945867;

// Efficiency decrease straight from the stage sum, lossless upstream forces.
double table1_oracle(int n, double beta2, double drift_speed, double rho = 1.2) {
  const double f0_per_area = 9.0 / 8.0 * synthetic::kEps0 * 1e12;
  double sum = 0;
  for (int i = 1; i <= n; ++i)
    sum += drift_speed / (drift_speed + std::sqrt((i - 1) * f0_per_area / (0.5 * rho)));
  return 100.0 * (1.0 - beta2 * sum / n);
}

StageGeometry stack(int n, double gap = 0.5e-3, double area = 2e-4) {
  return {gap, 2.0, area, n};
}

int expect_error(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return static_cast<int>(e.kind());
  }
  return -1;
}

}  // namespace

TEST_CASE("fit_onset recovers noiseless parameters") {
  const auto fit = fit_onset(synthetic::iv_series({}));
  CHECK(*fit.onset_voltage_V == doctest::Approx(1600.0).epsilon(1e-3));
  CHECK(*fit.townsend_coefficient_ApV2 == doctest::Approx(1e-9).epsilon(1e-3));
  CHECK(fit.residual_rms < 1e-15);
  CHECK(fit.samples_used == 28);
}

TEST_CASE("fit_onset round trips across parameter space") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> onset(800, 3000), coeff(1e-11, 1e-7);
  for (int trial = 0; trial < 100; ++trial) {
    synthetic::IvCurve iv{coeff(rng), onset(rng), 0.0, 0.0, 25.0};
    iv.v_max = iv.onset_V * 1.8;
    const auto fit = fit_onset(synthetic::iv_series(iv));
    CHECK(*fit.onset_voltage_V == doctest::Approx(iv.onset_V).epsilon(5e-3));
    CHECK(*fit.townsend_coefficient_ApV2 == doctest::Approx(iv.townsend_C).epsilon(5e-3));
  }
}

TEST_CASE("fit_onset with 5% noise stays within the device spread") {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    const auto fit = fit_onset(synthetic::iv_series({}, 0.05, seed));
    CHECK(std::abs(*fit.onset_voltage_V - 1600.0) <= 200.0);
    REQUIRE(fit.onset_voltage_half_width_V);
    CHECK(*fit.onset_voltage_half_width_V > 0);
    CHECK(*fit.onset_voltage_half_width_V < 200.0);
  }
}

TEST_CASE("fit_onset onset voltage is invariant under current scaling") {
  auto base = synthetic::iv_series({}, 0.03, 5);
  const auto ref = fit_onset(base);
  for (auto& s : base.samples) s.current_A *= 7.5;
  const auto scaled = fit_onset(base);
  CHECK(*scaled.onset_voltage_V == doctest::Approx(*ref.onset_voltage_V).epsilon(1e-9));
  CHECK(*scaled.townsend_coefficient_ApV2 ==
        doctest::Approx(7.5 * *ref.townsend_coefficient_ApV2).epsilon(1e-9));
}

TEST_CASE("fit_onset errors") {
  auto zero = synthetic::iv_series({});
  for (auto& s : zero.samples) s.current_A = 0;
  CHECK(expect_error([&] { fit_onset(zero); }) == static_cast<int>(ErrorKind::kInsufficientData));

  // Only four points above the floor.
  const auto sparse = synthetic::iv_series({1e-9, 1600, 0, 1800, 50});
  CHECK(expect_error([&] { fit_onset(sparse); }) ==
        static_cast<int>(ErrorKind::kInsufficientData));

  // Concave current has no onset.
  MeasurementSeries concave;
  for (int k = 1; k <= 10; ++k) {
    const double v = 200.0 * k;
    concave.samples.push_back({double(k), v, 1e-6 * std::sqrt(v), std::nullopt});
  }
  CHECK(expect_error([&] { fit_onset(concave); }) ==
        static_cast<int>(ErrorKind::kFitDivergence));

  MeasurementSeries unordered = synthetic::iv_series({});
  unordered.samples[3].time_s = unordered.samples[2].time_s;
  CHECK(expect_error([&] { fit_onset(unordered); }) ==
        static_cast<int>(ErrorKind::kInvalidInput));
}

TEST_CASE("fit_beta1") {
  const FluidEnvironment env{1.2};

  SUBCASE("recovers the generating value") {
    const auto fit = fit_beta1(synthetic::stack_series(stack(1), {0.7}), env);
    CHECK(*fit.fitted_beta1 == doctest::Approx(0.7).epsilon(0.01));
    CHECK(fit.warnings.empty());
  }

  SUBCASE("area independent") {
    const auto a = fit_beta1(synthetic::stack_series(stack(1, 0.5e-3, 1e-4), {0.55}), env);
    const auto b = fit_beta1(synthetic::stack_series(stack(1, 0.5e-3, 2e-4), {0.55}), env);
    CHECK(*a.fitted_beta1 == doctest::Approx(*b.fitted_beta1).epsilon(1e-12));
  }

  SUBCASE("zero velocity fits zero with a warning") {
    auto s = synthetic::stack_series(stack(1), {0.7});
    for (auto& x : s.samples) x.velocity_mps = 0.0;
    const auto fit = fit_beta1(s, env);
    CHECK(*fit.fitted_beta1 == 0.0);
    CHECK(fit.warnings.size() == 1);
  }

  SUBCASE("values above one are warnings") {
    auto s = synthetic::stack_series(stack(1), {1.0});
    for (auto& x : s.samples) *x.velocity_mps *= 1.1;
    const auto fit = fit_beta1(s, env);
    CHECK(*fit.fitted_beta1 == doctest::Approx(1.21));
    CHECK(fit.warnings.size() == 1);
  }

  SUBCASE("errors") {
    CHECK(expect_error([&] { fit_beta1(synthetic::stack_series(stack(2), {}), env); }) ==
          static_cast<int>(ErrorKind::kInvalidInput));
    auto few = synthetic::stack_series(stack(1), {});
    for (std::size_t i = 2; i < few.samples.size(); ++i) few.samples[i].velocity_mps.reset();
    CHECK(expect_error([&] { fit_beta1(few, env); }) ==
          static_cast<int>(ErrorKind::kInsufficientData));
  }
}

TEST_CASE("fit_beta2") {
  const FluidEnvironment env{1.2};
  auto series = [](double beta1, double beta2, bool lossless_first = false) {
    std::vector<MeasurementSeries> out;
    for (int n = 1; n <= 3; ++n)
      out.push_back(synthetic::stack_series(stack(n), {beta1, beta2, lossless_first}));
    return out;
  };

  SUBCASE("recovers the generating value") {
    const auto fit = fit_beta2(series(1.0, 0.9), env);
    CHECK(*fit.fitted_beta2 == doctest::Approx(0.9).epsilon(0.02));
    CHECK(*fit.current_stage_slope == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(*fit.current_stage_r2 == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("lossless stacking gives one") {
    const auto fit = fit_beta2(series(1.0, 1.0), env);
    CHECK(*fit.fitted_beta2 == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("uses the supplied beta1") {
    const auto fit = fit_beta2(series(0.6, 0.85), env, 0.6);
    CHECK(*fit.fitted_beta2 == doctest::Approx(0.85).epsilon(1e-9));
  }

  SUBCASE("joint fit under the first-stage-lossless convention") {
    const auto fit = fit_beta2(series(0.6, 0.85, true), env, 1.0,
                               StackingConvention::kFirstStageLossless);
    CHECK(*fit.fitted_beta1 == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(*fit.fitted_beta2 == doctest::Approx(0.85).epsilon(1e-6));
  }

  SUBCASE("interpolates mismatched voltage grids") {
    auto s = series(1.0, 0.9);
    s[1] = synthetic::stack_series(stack(2), {1.0, 0.9}, {1e-9, 1600, 10, 2990, 40});
    const auto fit = fit_beta2(s, env);
    // Linear interpolation of v^2-quadratic data biases slightly high.
    CHECK(*fit.fitted_beta2 == doctest::Approx(0.9).epsilon(0.02));
  }

  SUBCASE("errors") {
    auto s = series(1.0, 0.9);
    s[2].geometry.drift_gap_m = 0.6e-3;
    CHECK(expect_error([&] { fit_beta2(s, env); }) ==
          static_cast<int>(ErrorKind::kMismatchedGeometry));

    const std::vector<MeasurementSeries> same{synthetic::stack_series(stack(2), {}),
                                              synthetic::stack_series(stack(2), {})};
    CHECK(expect_error([&] { fit_beta2(same, env); }) ==
          static_cast<int>(ErrorKind::kInsufficientData));
    CHECK(expect_error([&] { fit_beta2({synthetic::stack_series(stack(2), {})}, env); }) ==
          static_cast<int>(ErrorKind::kInsufficientData));
  }
}

TEST_CASE("degradation metric") {
  CHECK(degradation_metric(synthetic::decay_series(0.05), 100.0) ==
        doctest::Approx(0.05).epsilon(1e-9));
  CHECK(degradation_metric(synthetic::decay_series(0.0), 100.0) == doctest::Approx(0.0));
  CHECK(degradation_metric(synthetic::decay_series(0.30), 100.0) ==
        doctest::Approx(0.30).epsilon(1e-9));
  // Half the window sees half the drop.
  CHECK(degradation_metric(synthetic::decay_series(0.05), 50.0) ==
        doctest::Approx(0.025).epsilon(1e-9));

  SUBCASE("noise is suppressed by the endpoint windows") {
    for (unsigned seed = 1; seed <= 10; ++seed) {
      const double d =
          degradation_metric(synthetic::decay_series(0.05, 100.0, 0.1, 2e-6, 0.005, seed), 100.0);
      CHECK(std::abs(d - 0.05) < 0.005);
    }
  }

  SUBCASE("invariant under current scaling") {
    auto s = synthetic::decay_series(0.05, 100.0, 0.5, 2e-6, 0.02, 9);
    const double ref = degradation_metric(s, 100.0);
    for (auto& x : s.samples) x.current_A *= 1e3;
    CHECK(degradation_metric(s, 100.0) == doctest::Approx(ref).epsilon(1e-12));
  }

  SUBCASE("errors") {
    auto drifting = synthetic::decay_series(0.05);
    drifting.samples.back().voltage_V = 2100.0;
    CHECK(expect_error([&] { degradation_metric(drifting, 100.0); }) ==
          static_cast<int>(ErrorKind::kNonConstantVoltage));
    CHECK(expect_error([&] { degradation_metric(synthetic::decay_series(0.05, 60.0), 100.0); }) ==
          static_cast<int>(ErrorKind::kInsufficientDuration));
  }
}

TEST_CASE("efficiency-decrease table drift speed fit") {
  const auto fit = fit_table1_drift_speed();
  CHECK(fit.drift_speed_mps == doctest::Approx(kTable1DriftSpeed));
  CHECK(fit.max_abs_error_pp == doctest::Approx(kTable1Residual).epsilon(1e-9));
  CHECK(fit.max_abs_error_pp <= 0.15);
  REQUIRE(fit.cells.size() == 6);
  for (const auto& c : fit.cells) {
    CHECK(c.model_percent ==
          doctest::Approx(table1_oracle(c.cell.stage_count, c.cell.beta2, fit.drift_speed_mps))
              .epsilon(1e-10));
    CHECK(std::abs(c.error_pp) <= 0.15);
  }
  CHECK(std::abs(fit.cells[0].error_pp) <= 0.1);

  SUBCASE("default mobility is the fitted drift speed at 1 MV/m") {
    CHECK(kDefaultIonMobility == doctest::Approx(fit.drift_speed_mps / 1e6).epsilon(1e-12));
  }

  SUBCASE("residual has no competing local minimum") {
    std::vector<double> r;
    for (double v = 100.0; v <= 400.0 + 1e-9; v += 0.5) r.push_back(table1_residual(v));
    for (std::size_t i = 1; i + 1 < r.size(); ++i) {
      const bool local_min = r[i] <= r[i - 1] && r[i] <= r[i + 1];
      if (local_min && std::abs(100.0 + 0.5 * i - fit.drift_speed_mps) > 1e-9)
        CHECK(r[i] >= 2 * fit.max_abs_error_pp);
    }
  }

  SUBCASE("lossy-upstream reading cannot meet the tolerance") {
    Table1Options lossy;
    lossy.model.efficiency_inlet = EfficiencyInlet::kLossyStacking;
    CHECK(fit_table1_drift_speed(lossy).max_abs_error_pp > 0.15);
  }
}

TEST_CASE("consistency report") {
  const auto r = consistency_report({});
  CHECK(r.implied_drift_gap_m == doctest::Approx(15.0 / 14000.0));
  CHECK(std::abs(r.implied_drift_gap_m - 1.07e-3) <= 0.01e-3);
  CHECK(r.stack_height_factor == 7.0);
  CHECK(r.implied_bulk_efficiency_NpW == doctest::Approx(0.5));
  CHECK(r.implied_mean_velocity_mps == doctest::Approx(2.0));
  CHECK(r.quoted_peak_efficiency_NpW == doctest::Approx(1.1e-3));
  CHECK(r.efficiency_discrepancy);
  CHECK_FALSE(r.notices.empty());

  const auto single = consistency_report({12.0, 4e3, 4e3, 1, 9.0});
  CHECK(single.implied_drift_gap_m == doctest::Approx(12.0 / 4e3));

  CHECK_THROWS_AS(consistency_report({-1.0, 2e3, 4e3, 3, 2.0}), Error);
  CHECK_THROWS_AS(consistency_report({15.0, 2e3, 0.0, 3, 2.0}), Error);
}
