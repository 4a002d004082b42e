#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "sfwm/coincidence.hpp"

using namespace sfwm;

namespace {

struct Bench {
  PumpSpec pump;
  FiberSpec fiber = fiber_preset("smf28-paper");
  ChannelSpec signal{400.0, 75.0, 0.6};
  ChannelSpec idler{-400.0, 75.0, 0.6};
  DetectorSpec det_s;
  DetectorSpec det_i;
};

Bench bench(double length_m, double power_w) {
  Bench b;
  b.fiber.length_m = length_m;
  b.pump.peak_power_w = power_w;
  return b;
}

RateReport rates_of(const Bench& b) {
  return expected_rates(b.pump, b.fiber, b.signal, b.idler, b.det_s, b.det_i);
}

CoincidenceResult run(const Bench& b, double duration_s, std::uint64_t seed,
                      int threads = 1) {
  SimOptions o;
  o.threads = threads;
  return simulate(b.pump, b.fiber, b.signal, b.idler, b.det_s, b.det_i, duration_s, seed, o);
}

}  // namespace

TEST_CASE("true coincidence rate is mu_p eta_s eta_i L^2 P^2") {
  Bench b = bench(11.4, 3.0);
  // detection efficiencies chosen so eta_s * eta_i = 0.001
  b.signal.transmittance = 1.0;
  b.idler.transmittance = 1.0;
  b.det_s.efficiency = b.det_i.efficiency = std::sqrt(0.001);
  const RateReport r = rates_of(b);
  REQUIRE_THAT(r.true_coincidence_cps,
               Catch::Matchers::WithinRel(r.pair_rate * 0.001, 1e-9));
  REQUIRE_THAT(r.true_coincidence_cps,
               Catch::Matchers::WithinRel(r.mu_p_channel * 9.0 * 11.4 * 11.4 * 0.001, 1e-12));
}

TEST_CASE("noise-free accidentals come from multi-pair events, CAR ~ 1/mu_pair") {
  Bench b = bench(11.4, 3.0);
  b.fiber.raman_coeff = 0.0;
  const RateReport r = rates_of(b);
  REQUIRE(r.accidental_cps > 0.0);
  const double car_scale = 1.0 / r.mu_pair_per_pulse;
  REQUIRE(r.car > 0.5 * car_scale);
  REQUIRE(r.car < 2.0 * car_scale);
}

TEST_CASE("3000 cps singles on both detectors give 0.5 accidentals per second") {
  Bench b = bench(11.4, 1e-6);  // pump power negligible: dark counts dominate
  b.fiber.raman_coeff = 0.0;
  const double q = 3000.0 / b.pump.rep_rate_hz;
  const long dstar = b.det_s.blocked_gates(b.pump.rep_rate_hz);
  const double p = q / (1.0 - q * static_cast<double>(dstar));
  b.det_s.dark_prob_per_gate = -std::log1p(-p);
  b.det_i.dark_prob_per_gate = b.det_s.dark_prob_per_gate;
  const RateReport r = rates_of(b);
  REQUIRE_THAT(r.singles_s_cps, Catch::Matchers::WithinRel(3000.0, 1e-6));
  REQUIRE_THAT(r.accidental_cps,
               Catch::Matchers::WithinRel(18e6 * (3000.0 / 18e6) * (3000.0 / 18e6), 1e-5));
  REQUIRE_THAT(r.accidental_cps, Catch::Matchers::WithinAbs(0.5, 0.001));
}

TEST_CASE("simulation is bit-reproducible and thread-count independent") {
  const Bench b = bench(308.0, 3.0);
  const CoincidenceResult a1 = run(b, 3.0, 42);
  const CoincidenceResult a2 = run(b, 3.0, 42);
  const CoincidenceResult a4 = run(b, 3.0, 42, 4);
  REQUIRE(a1.singles_s == a2.singles_s);
  REQUIRE(a1.singles_i == a2.singles_i);
  REQUIRE(a1.c_c == a2.c_c);
  REQUIRE(a1.ca_windows == a2.ca_windows);
  REQUIRE(a1.histogram == a2.histogram);
  REQUIRE(a1.histogram == a4.histogram);
  REQUIRE(a1.singles_s == a4.singles_s);
  REQUIRE(a1.c_c == a4.c_c);

  const CoincidenceResult other = run(b, 3.0, 43);
  REQUIRE(other.histogram != a1.histogram);
}

TEST_CASE("Monte Carlo singles and coincidences track the closed form") {
  const Bench b = bench(308.0, 3.0);
  const RateReport r = rates_of(b);
  const double duration = 10.0;
  const int n_seeds = 8;
  double singles = 0, cc = 0, ca_sum = 0;
  for (int s = 0; s < n_seeds; ++s) {
    const CoincidenceResult res = run(b, duration, 1000 + s);
    singles += static_cast<double>(res.singles_s);
    cc += static_cast<double>(res.c_c);
    for (auto w : res.ca_windows) ca_sum += static_cast<double>(w);
  }
  const double t_total = duration * n_seeds;
  const double z_singles =
      (singles - r.singles_s_cps * t_total) / std::sqrt(r.singles_s_cps * t_total);
  const double z_cc = (cc - r.cc_cps * t_total) / std::sqrt(r.cc_cps * t_total);
  const double z_ca = (ca_sum - 4.0 * r.accidental_cps * t_total) /
                      std::sqrt(4.0 * r.accidental_cps * t_total);
  REQUIRE(std::abs(z_singles) < 4.0);
  REQUIRE(std::abs(z_cc) < 4.0);
  REQUIRE(std::abs(z_ca) < 4.0);
}

TEST_CASE("dead time removes ~3% of singles at 3000 cps and 10 us") {
  Bench b = bench(308.0, 3.0);
  // set power to the ~3000 cps operating point
  b.pump.peak_power_w = calibrate_power_w(3000.0, b.pump, b.fiber, b.signal, b.idler,
                                          b.det_s, b.det_i);
  const RateReport with_dead = rates_of(b);
  Bench b0 = b;
  b0.det_s.dead_time_s = 0.0;
  b0.det_i.dead_time_s = 0.0;
  const RateReport no_dead = rates_of(b0);
  REQUIRE(no_dead.singles_s_cps > with_dead.singles_s_cps);
  const double loss = 1.0 - with_dead.singles_s_cps / no_dead.singles_s_cps;
  REQUIRE_THAT(loss, Catch::Matchers::WithinAbs(0.03, 0.004));
}

TEST_CASE("histogram peaks sit on the pulse train and inside gate windows") {
  const Bench b = bench(308.0, 3.0);
  const CoincidenceResult res = run(b, 30.0, 7);
  const double period = 1.0 / b.pump.rep_rate_hz;

  // global maximum at zero delay
  std::size_t imax = 0;
  for (std::size_t i = 0; i < res.histogram.size(); ++i)
    if (res.histogram[i] > res.histogram[imax]) imax = i;
  REQUIRE(std::abs(res.delay_for_bin(static_cast<long>(imax))) <= res.bin_width_s);

  // side peaks at +-1, +-2 repetition periods: count-weighted centroids
  for (int k = -2; k <= 2; ++k) {
    if (k == 0) continue;
    const double center = k * period;
    double w = 0, wt = 0;
    for (std::size_t i = 0; i < res.histogram.size(); ++i) {
      const double d = res.delay_for_bin(static_cast<long>(i));
      if (std::abs(d - center) < period / 2 && res.histogram[i] > 0) {
        w += static_cast<double>(res.histogram[i]);
        wt += static_cast<double>(res.histogram[i]) * d;
      }
    }
    REQUIRE(w > 0);
    REQUIRE(std::abs(wt / w - center) <= res.bin_width_s);
  }

  // every occupied bin lies within a gate window around a pulse-train delay
  for (std::size_t i = 0; i < res.histogram.size(); ++i) {
    if (res.histogram[i] == 0) continue;
    const double d = res.delay_for_bin(static_cast<long>(i));
    const double frac = std::abs(d - period * std::round(d / period));
    REQUIRE(frac <= b.det_s.gate_width_s / 2 + res.bin_width_s);
  }
}

TEST_CASE("degenerate short run yields a near-empty histogram without crashing") {
  const Bench b = bench(11.4, 3.0);
  const CoincidenceResult res = run(b, 0.001, 5);
  REQUIRE(res.n_pulses == 18000);
  REQUIRE(res.c_c < 5);
  REQUIRE_FALSE(res.warnings.empty());  // accidental windows are starved
  REQUIRE_THROWS_AS(simulate(b.pump, b.fiber, b.signal, b.idler, b.det_s, b.det_i, 0.0, 1),
                    model_error);
}

TEST_CASE("car arithmetic and undefined case") {
  CoincidenceResult res;
  res.c_c = 200;
  res.c_a = 2.0;
  REQUIRE(car(res) == 100.0);
  res.c_a = 0.0;
  REQUIRE_THROWS_WITH(car(res), Catch::Matchers::ContainsSubstring("CAR undefined"));
}

TEST_CASE("true coincidences floor at zero with a clamp flag") {
  CoincidenceResult res;
  res.c_c = 5000;
  res.c_a = 40.0;
  REQUIRE(true_coincidences(res).value == 4960.0);
  REQUIRE_FALSE(true_coincidences(res).clamped);
  res.c_c = 10;
  res.c_a = 30.0;
  REQUIRE(true_coincidences(res).value == 0.0);
  REQUIRE(true_coincidences(res).clamped);
}

TEST_CASE("asymmetric channels violate energy conservation") {
  Bench b = bench(11.4, 3.0);
  b.idler.detuning_ghz = -600.0;
  REQUIRE_THROWS_WITH(rates_of(b),
                      Catch::Matchers::ContainsSubstring("energy-conservation mismatch"));
}

TEST_CASE("channel and detector validation") {
  ChannelSpec ch{50.0, 75.0, 0.6};  // passband overlaps the pump
  REQUIRE_THROWS_AS(ch.validate(), model_error);
  ch = {400.0, 75.0, 1.5};
  REQUIRE_THROWS_AS(ch.validate(), model_error);
  DetectorSpec det;
  det.efficiency = 0.0;
  REQUIRE_THROWS_AS(det.validate(), model_error);
}

TEST_CASE("power calibration hits the singles target and is monotone") {
  const Bench b = bench(11.4, 3.0);
  double prev = 0.0;
  for (double target : {1000.0, 3000.0, 6000.0}) {
    const double p = calibrate_power_w(target, b.pump, b.fiber, b.signal, b.idler, b.det_s,
                                       b.det_i);
    REQUIRE(p > prev);
    prev = p;
    Bench bt = b;
    bt.pump.peak_power_w = p;
    REQUIRE_THAT(std::max(rates_of(bt).singles_s_cps, rates_of(bt).singles_i_cps),
                 Catch::Matchers::WithinRel(target, 1e-6));
  }
  // the 308-m fiber reaches 3000 cps below 1 W, the 3.8-m one needs far more
  const Bench blong = bench(308.0, 3.0);
  const double p_long = calibrate_power_w(3000.0, blong.pump, blong.fiber, blong.signal,
                                          blong.idler, blong.det_s, blong.det_i);
  REQUIRE(p_long > 0.4);
  REQUIRE(p_long < 1.2);
  const Bench bshort = bench(3.8, 3.0);
  const double p_short = calibrate_power_w(3000.0, bshort.pump, bshort.fiber, bshort.signal,
                                           bshort.idler, bshort.det_s, bshort.det_i);
  REQUIRE(p_short > 10.0);
}

TEST_CASE("raman calibration reproduces the preset coefficient and its residuals") {
  const Bench b = bench(11.4, 3.0);
  const RamanCalibration cal = calibrate_raman_coeff(b.pump, b.fiber, b.signal, b.idler,
                                                     b.det_s, b.det_i);
  REQUIRE_THAT(cal.coeff, Catch::Matchers::WithinRel(fiber_preset("smf28-paper").raman_coeff,
                                                     2e-2));
  REQUIRE(cal.anchor_coeffs.size() == 2);
  // one linear coefficient cannot satisfy both anchors; residuals document it
  REQUIRE(cal.residual_rel[0] < -0.4);
  REQUIRE(cal.residual_rel[1] > 0.05);
  REQUIRE(cal.residual_rel[1] < 0.2);
}

TEST_CASE("accidental-window warnings appear when counts are scarce") {
  const Bench b = bench(3.8, 1.0);
  const CoincidenceResult res = run(b, 1.0, 3);
  REQUIRE_FALSE(res.warnings.empty());
}
