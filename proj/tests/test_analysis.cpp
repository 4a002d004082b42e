#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sfwm/analysis.hpp"

using namespace sfwm;

TEST_CASE("log-log slope of exact power laws") {
  std::vector<std::pair<double, double>> quad;
  for (double x : {1.0, 2.0, 3.5, 5.0, 8.0}) quad.push_back({x, 4.0 * x * x});
  const FitResult f2 = fit_loglog_slope(quad);
  REQUIRE_THAT(f2.slope, Catch::Matchers::WithinAbs(2.0, 1e-12));
  REQUIRE(f2.slope_se < 1e-12);

  std::vector<std::pair<double, double>> flat;
  for (double x : {1.0, 2.0, 4.0}) flat.push_back({x, 7.5});
  REQUIRE_THAT(fit_loglog_slope(flat).slope, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("log-log fit rejects bad input") {
  REQUIRE_THROWS_AS(fit_loglog_slope({{1.0, 1.0}, {2.0, 4.0}}), model_error);
  REQUIRE_THROWS_AS(fit_loglog_slope({{1.0, 1.0}, {2.0, -4.0}, {3.0, 9.0}}), model_error);
  REQUIRE_THROWS_AS(fit_loglog_slope({{0.0, 1.0}, {2.0, 4.0}, {3.0, 9.0}}), model_error);
}

TEST_CASE("log-log slope is invariant under count scaling") {
  std::vector<std::pair<double, double>> pts, scaled;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.8, 1.2);
  for (double x : {1.0, 1.7, 2.9, 4.2, 6.0}) {
    const double y = 3.0 * x * x * u(rng);
    pts.push_back({x, y});
    scaled.push_back({x, 12.34 * y});
  }
  REQUIRE_THAT(fit_loglog_slope(pts).slope,
               Catch::Matchers::WithinAbs(fit_loglog_slope(scaled).slope, 1e-12));
}

TEST_CASE("mu_p extraction recovers an exact quadratic") {
  const double mu = 9.0, eta_s = 0.03, eta_i = 0.03, L = 11.4, T = 600.0;
  const double alpha = mu * eta_s * eta_i * L * L * T;
  std::vector<SweepPoint> pts;
  for (double p : {1.0, 2.0, 3.0, 4.0, 5.0})
    pts.push_back({p, alpha * p * p + 40.0, 40.0, -1.0, -1.0});
  const MuExtraction ext = extract_mu_p(pts, L, eta_s, eta_i, T);
  REQUIRE_THAT(ext.mu_p, Catch::Matchers::WithinRel(mu, 1e-9));
  REQUIRE_THAT(ext.alpha, Catch::Matchers::WithinRel(alpha, 1e-9));
  // alpha scales with the counts, slope-equivariance of the estimator
  std::vector<SweepPoint> scaled;
  for (auto p : pts) scaled.push_back({p.power_w, 3.0 * p.c_c, 3.0 * p.c_a, -1, -1});
  REQUIRE_THAT(extract_mu_p(scaled, L, eta_s, eta_i, T).alpha,
               Catch::Matchers::WithinRel(3.0 * alpha, 1e-9));
}

TEST_CASE("mu_p extraction round-trips Poisson data from the closed-form rates") {
  PumpSpec pump;
  FiberSpec fiber = fiber_preset("smf28-paper");
  fiber.length_m = 11.4;
  ChannelSpec sig{400.0, 75.0, 0.6}, idl{-400.0, 75.0, 0.6};
  DetectorSpec det;
  const double T = 600.0;
  std::mt19937_64 rng(17);
  std::vector<SweepPoint> pts;
  const double eta = 0.6 * det.efficiency;
  for (double p : {1.9, 2.7, 3.8, 5.4, 7.6}) {
    pump.peak_power_w = p;
    const RateReport r = expected_rates(pump, fiber, sig, idl, det, det);
    const double cc = static_cast<double>(
        std::poisson_distribution<long long>(r.cc_cps * T)(rng));
    const double ca_one = r.accidental_cps * T;
    double ca_est = 0;
    for (int w = 0; w < 4; ++w)
      ca_est += static_cast<double>(std::poisson_distribution<long long>(ca_one)(rng));
    ca_est /= 4.0;
    pts.push_back({p, cc, ca_est, r.singles_s_cps * T, r.singles_i_cps * T});
  }
  DeadTimeInfo dti{det.blocked_gates(pump.rep_rate_hz), det.blocked_gates(pump.rep_rate_hz),
                   pump.rep_rate_hz};
  const MuExtraction ext = extract_mu_p(pts, fiber.length_m, eta, eta, T, dti);
  pump.peak_power_w = 3.0;
  const double mu_model = mu_p_band_averaged(400.0, 75.0, pump, fiber);
  REQUIRE_THAT(ext.mu_p, Catch::Matchers::WithinRel(mu_model, 0.10));
  REQUIRE(ext.significance > 3.0);
}

TEST_CASE("all-accidental sweeps raise the noise-dominated error") {
  std::vector<SweepPoint> pts;
  for (double p : {1.0, 2.0, 3.0, 4.0}) pts.push_back({p, 500.0, 500.0, -1, -1});
  REQUIRE_THROWS_AS(extract_mu_p(pts, 308.0, 0.03, 0.03, 600.0), extraction_error);
  REQUIRE_THROWS_WITH(extract_mu_p(pts, 308.0, 0.03, 0.03, 600.0),
                      Catch::Matchers::ContainsSubstring("noise-dominated"));
  // negative quadratic term as well
  std::vector<SweepPoint> neg;
  for (double p : {1.0, 2.0, 3.0, 4.0}) neg.push_back({p, 500.0 - 10 * p * p, 500.0, -1, -1});
  REQUIRE_THROWS_AS(extract_mu_p(neg, 308.0, 0.03, 0.03, 600.0), extraction_error);
}

TEST_CASE("extraction preconditions") {
  std::vector<SweepPoint> pts = {{1.0, 10.0, 1.0, -1, -1}, {2.0, 40.0, 1.0, -1, -1}};
  REQUIRE_THROWS_AS(extract_mu_p(pts, 11.4, 0.03, 0.03, 600.0), model_error);
  pts.push_back({3.0, 90.0, 1.0, -1, -1});
  REQUIRE_THROWS_AS(extract_mu_p(pts, 11.4, 1.5, 0.03, 600.0), model_error);
  REQUIRE_THROWS_AS(extract_mu_p(pts, -3.0, 0.03, 0.03, 600.0), model_error);
}

TEST_CASE("diagnostic quadratic-plus-linear fit reports leakage") {
  std::vector<SweepPoint> pts;
  for (double p : {1.0, 2.0, 3.0, 4.0, 5.0})
    pts.push_back({p, 100.0 * p * p + 20.0 * p, 0.0, -1, -1});
  const MuExtraction ext = extract_mu_p(pts, 11.4, 0.03, 0.03, 600.0);
  REQUIRE(ext.diagnostic.kind == FitKind::QuadraticPlusLinear);
  REQUIRE_THAT(ext.diagnostic.alpha, Catch::Matchers::WithinRel(100.0, 1e-6));
  REQUIRE_THAT(ext.diagnostic.linear, Catch::Matchers::WithinRel(20.0, 1e-6));
}

TEST_CASE("model-only mu_p table orders the lobes correctly") {
  PumpSpec pump;
  const FiberSpec paper = fiber_preset("smf28-paper");
  const FiberSpec ds = fiber_preset("smf28-datasheet");
  ChannelSpec ch{400.0, 75.0, 0.6};
  DetectorSpec det;

  // 3.8 m: broad main lobe decays over 400..800 GHz
  const auto rows38 =
      mu_p_table({400.0, 600.0, 800.0}, {3.8}, pump, paper, ch, det, det);
  REQUIRE(rows38[0].mu_model > rows38[1].mu_model);
  REQUIRE(rows38[1].mu_model > rows38[2].mu_model);
  REQUIRE(rows38[0].mu_model_pointwise > rows38[2].mu_model_pointwise);

  // 11.4 m on the datasheet dispersion: 1000 GHz rides the second sinc lobe
  const auto rows114 = mu_p_table({800.0, 1000.0}, {11.4}, pump, ds, ch, det, det);
  REQUIRE(rows114[1].mu_model > rows114[0].mu_model);
  REQUIRE(rows114[1].mu_model_pointwise > rows114[0].mu_model_pointwise);
}

TEST_CASE("sim-backed table cell extracts mu_p near the model value") {
  PumpSpec pump;
  const FiberSpec paper = fiber_preset("smf28-paper");
  ChannelSpec ch{400.0, 75.0, 0.6};
  DetectorSpec det;
  SimSweepPlan plan;
  plan.n_powers = 4;
  plan.duration_s = 120.0;
  plan.seed = 21;
  const auto rows = mu_p_table({400.0}, {11.4}, pump, paper, ch, det, det, plan);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].gap_reason.empty());
  REQUIRE(rows[0].mu_extracted.has_value());
  REQUIRE_THAT(*rows[0].mu_extracted, Catch::Matchers::WithinRel(rows[0].mu_model, 0.15));
}
