#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sfwm/errors.hpp"
#include "sfwm/phase_matching.hpp"

namespace sfwm {

// Unnormalized sinc: sin(x)/x, sinc(0) = 1.
inline double sinc(double x) {
  const double ax = std::abs(x);
  if (ax < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

inline double sinc2(double x) {
  const double s = sinc(x);
  return s * s;
}

/// Sampled pair-generation coefficient spectrum, pairs/(W^2 m^2 s).
struct PairSpectrum {
  DetuningGrid grid;
  std::vector<double> mu_p;
  PumpSpec pump;
  FiberSpec fiber;
  double filter_bw_ghz = 75.0;
};

/// Pair-generation coefficient at a single detuning:
///   mu_p = tau_p f_p B gamma^2 sinc^2(Delta k L / 2), pairs/(W^2 m^2 s).
inline double mu_p(double delta_nu_ghz, const PumpSpec& pump, const FiberSpec& fiber,
                   double filter_bw_ghz, const DeltaKOptions& opts = {}) {
  if (!(filter_bw_ghz > 0)) throw model_error("filter bandwidth must be > 0 GHz");
  const double gamma_si = units::gamma_per_w_km_to_si(fiber.gamma);
  const double peak = pump.pulse_duration_s * pump.rep_rate_hz *
                      units::ghz_to_hz(filter_bw_ghz) * gamma_si * gamma_si;
  const double x = delta_k(delta_nu_ghz, pump, fiber, opts) * fiber.length_m / 2.0;
  return peak * sinc2(x);
}

/// Channel-effective pair-generation coefficient: sinc^2 averaged over the
/// filter passband [center - bw/2, center + bw/2] instead of sampled at the
/// channel center. For long fibers the sinc^2 argument sweeps several lobes
/// across a 75-GHz passband and the pointwise value is not representative of
/// what the filter collects.
inline double mu_p_band_averaged(double center_ghz, double bandwidth_ghz,
                                 const PumpSpec& pump, const FiberSpec& fiber,
                                 const DeltaKOptions& opts = {}) {
  if (!(bandwidth_ghz > 0)) throw model_error("filter bandwidth must be > 0 GHz");
  const double a = std::abs(center_ghz) - bandwidth_ghz / 2.0;
  const double b = std::abs(center_ghz) + bandwidth_ghz / 2.0;
  const double half_l = fiber.length_m / 2.0;
  const double xa = delta_k(a, pump, fiber, opts) * half_l;
  const double xb = delta_k(b, pump, fiber, opts) * half_l;
  // Panel count scales with the sinc^2 phase swept across the band.
  int n = static_cast<int>(std::ceil(std::abs(xb - xa) * 16.0));
  n = std::clamp(n, 32, 4096);
  if (n % 2 == 1) ++n;  // Simpson needs an even panel count
  const double h = (b - a) / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += w * sinc2(delta_k(a + h * i, pump, fiber, opts) * half_l);
  }
  const double avg = sum * h / 3.0 / (b - a);
  const double gamma_si = units::gamma_per_w_km_to_si(fiber.gamma);
  return pump.pulse_duration_s * pump.rep_rate_hz * units::ghz_to_hz(bandwidth_ghz) *
         gamma_si * gamma_si * avg;
}

/// Pair-generation rate PGR = mu_p P_p^2 L^2, pairs/s.
inline double pgr(double delta_nu_ghz, const PumpSpec& pump, const FiberSpec& fiber,
                  double filter_bw_ghz, const DeltaKOptions& opts = {}) {
  return mu_p(delta_nu_ghz, pump, fiber, filter_bw_ghz, opts) * pump.peak_power_w *
         pump.peak_power_w * fiber.length_m * fiber.length_m;
}

enum class HwhmReference {
  FromPump,  // width measured from zero detuning (default)
  FromPeak   // width measured from the spectrum maximum
};

/// Half width at half maximum of the mu_p spectrum in GHz: the largest
/// detuning at which the spectrum crosses half of its maximum, found by a
/// scan plus bisection. Decreasing in fiber length.
inline double hwhm_bandwidth_ghz(const PumpSpec& pump, const FiberSpec& fiber,
                                 HwhmReference ref = HwhmReference::FromPump) {
  const double window = detail::kDetuningWindowGhz;
  const int n = 4096;
  const double h = window / n;
  auto val = [&](double nu) {
    return sinc2(delta_k(nu, pump, fiber) * fiber.length_m / 2.0);
  };
  std::vector<double> v(n + 1);
  double vmax = 0.0;
  int imax = 0;
  for (int i = 0; i <= n; ++i) {
    v[i] = val(h * i);
    if (v[i] > vmax) { vmax = v[i]; imax = i; }
  }
  const double half = vmax / 2.0;
  if (v[n] >= half)
    throw model_error("hwhm: spectrum still above half maximum at the 5-THz "
                      "window edge; window too narrow for this fiber length");
  int icross = -1;
  for (int i = n - 1; i >= 0; --i) {
    if (v[i] >= half) { icross = i; break; }
  }
  if (icross < 0) throw model_error("hwhm: no half-maximum crossing found");
  double lo = h * icross, hi = h * (icross + 1);
  for (int it = 0; it < 60 && hi - lo > 1e-6; ++it) {
    const double mid = 0.5 * (lo + hi);
    (val(mid) >= half ? lo : hi) = mid;
  }
  const double crossing = 0.5 * (lo + hi);
  return ref == HwhmReference::FromPump ? crossing : crossing - h * imax;
}

/// Pointwise mu_p over a detuning grid. Degenerate single-point grids
/// (start == stop) are allowed here.
inline PairSpectrum spectrum_sweep(const DetuningGrid& grid, const PumpSpec& pump,
                                   const FiberSpec& fiber, double filter_bw_ghz,
                                   const DeltaKOptions& opts = {}) {
  if (!(grid.step_ghz > 0) || !(grid.start_ghz <= grid.stop_ghz))
    throw model_error("spectrum_sweep: need step_ghz > 0 and start <= stop");
  PairSpectrum s;
  s.grid = grid;
  s.pump = pump;
  s.fiber = fiber;
  s.filter_bw_ghz = filter_bw_ghz;
  s.mu_p.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    s.mu_p[i] = mu_p(grid.point(i), pump, fiber, filter_bw_ghz, opts);
  return s;
}

}  // namespace sfwm
