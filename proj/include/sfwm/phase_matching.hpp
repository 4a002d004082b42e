#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "sfwm/errors.hpp"
#include "sfwm/fiber.hpp"
#include "sfwm/units.hpp"

namespace sfwm {

/// Uniform grid of frequency detunings from the pump, in GHz.
struct DetuningGrid {
  double start_ghz = 0.0;
  double stop_ghz = 1500.0;
  double step_ghz = 2.0;

  void validate() const {
    if (!(step_ghz > 0)) throw model_error("detuning grid: step_ghz must be > 0");
    if (!(start_ghz < stop_ghz))
      throw model_error("detuning grid: start_ghz must be < stop_ghz");
    if (size() < 2) throw model_error("detuning grid must have at least 2 points");
  }

  std::size_t size() const {
    return static_cast<std::size_t>(std::floor((stop_ghz - start_ghz) / step_ghz)) + 1;
  }
  double point(std::size_t i) const { return start_ghz + step_ghz * static_cast<double>(i); }
};

enum class KExpansion {
  Truncated,  // even-order Taylor: beta2 and beta4 terms
  Exact       // numerically integrated k(omega)
};

struct DeltaKOptions {
  KExpansion mode = KExpansion::Truncated;
  bool include_spm = true;  // keep the -2 gamma P_p self-phase-modulation term
};

namespace detail {
inline constexpr double kDetuningWindowGhz = 5000.0;  // model window |dnu| <= 5 THz
}

/// Wavevector mismatch Delta k(dnu) in 1/m:
///   2 k(w_p) - k(w_p + 2 pi dnu) - k(w_p - 2 pi dnu) - 2 gamma P_p
/// Truncated form: -beta2 (2 pi dnu)^2 - (beta4/12)(2 pi dnu)^4 - 2 gamma P_p
/// (odd orders cancel for a degenerate pump). Even in dnu.
inline double delta_k(double delta_nu_ghz, const PumpSpec& pump, const FiberSpec& fiber,
                      const DeltaKOptions& opts = {}) {
  if (!(std::abs(delta_nu_ghz) <= detail::kDetuningWindowGhz))
    throw model_error("detuning " + std::to_string(delta_nu_ghz) +
                      " GHz outside model window (|dnu| <= 5000 GHz)");
  const double omega_det = 2.0 * units::pi * units::ghz_to_hz(std::abs(delta_nu_ghz));
  const double spm = opts.include_spm
                         ? 2.0 * units::gamma_per_w_km_to_si(fiber.gamma) * pump.peak_power_w
                         : 0.0;
  if (opts.mode == KExpansion::Truncated) {
    const double b2 = beta_n(pump.lambda_p_nm, 2, fiber);
    const double b4 = beta_n(pump.lambda_p_nm, 4, fiber);
    const double o2 = omega_det * omega_det;
    return -b2 * o2 - (b4 / 12.0) * o2 * o2 - spm;
  }
  const double omega_p = units::omega_from_lambda_nm(pump.lambda_p_nm);
  // k(w_p + O) + k(w_p - O) - 2 k(w_p); constant and linear parts cancel.
  const double curv = k_curvature_rel(omega_p + omega_det, omega_p, fiber) +
                      k_curvature_rel(omega_p - omega_det, omega_p, fiber);
  return -curv - spm;
}

/// Positive root of Delta k(dnu) = 0 in GHz, located by bisection.
/// Requires anomalous dispersion at the pump (beta2 < 0); otherwise the
/// truncated mismatch has no fundamental-mode root.
inline double phase_matched_detuning_ghz(const PumpSpec& pump, const FiberSpec& fiber,
                                         const DeltaKOptions& opts = {}) {
  const double b2 = beta_n(pump.lambda_p_nm, 2, fiber);
  if (!(b2 < 0.0))
    throw model_error(
        "no fundamental-mode phase matching: pump at " + std::to_string(pump.lambda_p_nm) +
        " nm is in the normal-dispersion region (beta2 >= 0)");
  double lo = 0.01, hi = detail::kDetuningWindowGhz;
  auto f = [&](double nu) { return delta_k(nu, pump, fiber, opts); };
  double flo = f(lo);
  if (flo >= 0.0) return lo;  // root below the bracket floor (P -> 0 limit)
  if (f(hi) < 0.0)
    throw model_error("phase-matched detuning above the 5-THz model window");
  // Monotone increasing in |dnu| for beta2 < 0, so bisection is safe.
  while (hi - lo > 1e-4) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace sfwm
