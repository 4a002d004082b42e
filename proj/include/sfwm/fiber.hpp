#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "sfwm/errors.hpp"
#include "sfwm/units.hpp"

namespace sfwm {

/// Chromatic dispersion + Kerr nonlinearity of a single-mode fiber.
///
/// Dispersion follows the datasheet Sellmeier-slope form
///   D(lambda) = (S0/4) * (lambda - lambda0^4 / lambda^3)
/// which is zero at lambda0 by construction and anomalous (D > 0) above it.
struct FiberSpec {
  double length_m = 11.4;
  double lambda_zgvd_nm = 1310.0;   // zero-dispersion wavelength
  double slope_s0 = 0.0697;         // ps/(nm^2 km)
  double gamma = 0.672813824571582; // 1/(W km)
  double raman_coeff = 3.675487e-7; // noise photons /(pulse W m GHz)

  void validate() const {
    std::string err;
    if (!(length_m > 0)) err += "fiber.length_m must be > 0; ";
    if (!(lambda_zgvd_nm >= 1200.0 && lambda_zgvd_nm <= 1400.0))
      err += "fiber.lambda_zgvd_nm must lie in [1200, 1400] nm; ";
    if (!(slope_s0 > 0)) err += "fiber.slope_s0 must be > 0; ";
    if (!(gamma > 0)) err += "fiber.gamma must be > 0; ";
    if (!(raman_coeff >= 0)) err += "fiber.raman_coeff must be >= 0; ";
    if (!err.empty()) throw model_error("invalid FiberSpec: " + err);
  }
};

/// Pulsed pump laser parameters.
struct PumpSpec {
  double lambda_p_nm = 1552.52;
  double peak_power_w = 3.0;
  double pulse_duration_s = 15e-12;
  double rep_rate_hz = 18e6;

  void validate() const {
    std::string err;
    if (!(lambda_p_nm > 0)) err += "pump.lambda_p_nm must be > 0; ";
    if (!(peak_power_w > 0)) err += "pump.peak_power_w must be > 0; ";
    if (!(pulse_duration_s > 0)) err += "pump.pulse_duration_s must be > 0; ";
    if (!(rep_rate_hz > 0)) err += "pump.rep_rate_hz must be > 0; ";
    if (pulse_duration_s * rep_rate_hz >= 1.0)
      err += "pump duty cycle pulse_duration_s * rep_rate_hz must be < 1; ";
    if (!err.empty()) throw model_error("invalid PumpSpec: " + err);
  }
};

namespace detail {
inline constexpr double kLambdaWindowLoNm = 1000.0;
inline constexpr double kLambdaWindowHiNm = 2000.0;

inline void check_lambda_window(double lambda_nm) {
  if (!(lambda_nm >= kLambdaWindowLoNm && lambda_nm <= kLambdaWindowHiNm))
    throw model_error("wavelength " + std::to_string(lambda_nm) +
                      " nm outside model validity window [1000, 2000] nm");
}
}  // namespace detail

/// Dispersion parameter D(lambda) in ps/(nm km). Valid for lambda in [1000, 2000] nm.
inline double dispersion_D(double lambda_nm, const FiberSpec& fiber) {
  detail::check_lambda_window(lambda_nm);
  const double l0 = fiber.lambda_zgvd_nm;
  return (fiber.slope_s0 / 4.0) *
         (lambda_nm - (l0 * l0) * (l0 * l0) / (lambda_nm * lambda_nm * lambda_nm));
}

/// beta2(omega) in s^2/m, evaluated at the wavelength corresponding to omega.
inline double beta2_at_omega(double omega, const FiberSpec& fiber) {
  const double lambda_nm = units::lambda_nm_from_omega(omega);
  const double d_si = units::d_ps_nm_km_to_si(dispersion_D(lambda_nm, fiber));
  const double lam = units::nm_to_m(lambda_nm);
  return -d_si * lam * lam / (2.0 * units::pi * units::c_m_per_s);
}

/// Taylor coefficients beta_n of k(omega) at the given wavelength, SI (s^n/m).
/// n in {2, 3, 4}. beta3 and beta4 come from differentiating beta2(omega)
/// analytically under the Sellmeier-slope dispersion form:
///   beta2(lambda) = -(S0/(8 pi c)) (lambda^3 - lambda0^4/lambda)
///   beta3 = (S0/(16 pi^2 c^2)) (3 lambda^4 + lambda0^4)
///   beta4 = -(3 S0/(8 pi^3 c^3)) lambda^5
inline double beta_n(double lambda_nm, int n, const FiberSpec& fiber) {
  detail::check_lambda_window(lambda_nm);
  const double c = units::c_m_per_s;
  const double pi = units::pi;
  const double s0 = units::slope_ps_nm2_km_to_si(fiber.slope_s0);  // s/m^3
  const double lam = units::nm_to_m(lambda_nm);
  const double lam0 = units::nm_to_m(fiber.lambda_zgvd_nm);
  switch (n) {
    case 2: {
      const double d_si = units::d_ps_nm_km_to_si(dispersion_D(lambda_nm, fiber));
      return -d_si * lam * lam / (2.0 * pi * c);
    }
    case 3: {
      const double lam0_4 = lam0 * lam0 * lam0 * lam0;
      return s0 / (16.0 * pi * pi * c * c) * (3.0 * lam * lam * lam * lam + lam0_4);
    }
    case 4:
      return -3.0 * s0 * lam * lam * lam * lam * lam / (8.0 * pi * pi * pi * c * c * c);
    default:
      throw model_error("beta_n: unsupported order n=" + std::to_string(n) +
                        " (supported: 2, 3, 4)");
  }
}

/// Curvature part of the propagation constant relative to omega_ref:
///   k(omega) - k(omega_ref) - beta1(omega_ref) (omega - omega_ref)
/// obtained by numerically integrating beta2 twice,
///   integral_0^d (d - u) beta2(omega_ref + u) du,  d = omega - omega_ref.
/// Constant and linear parts of k cancel in every phase-mismatch expression,
/// so this is sufficient for the exact-k cross-check mode.
inline double k_curvature_rel(double omega, double omega_ref, const FiberSpec& fiber,
                              int panels = 512) {
  const double d = omega - omega_ref;
  if (d == 0.0) return 0.0;
  // composite Simpson over u in [0, d]
  const int n = 2 * panels;
  const double h = d / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = h * i;
    const double f = (d - u) * beta2_at_omega(omega_ref + u, fiber);
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += w * f;
  }
  return sum * h / 3.0;
}

// Named fiber presets. "smf28-paper" carries the dispersion slope printed with
// the experiment (69.7 s/m^3); "smf28-datasheet" the vendor datasheet bound
// (0.092 ps/nm^2/km, D(1552.52 nm) ~ 17.6 ps/nm/km). gamma values are
// calibrated so the phase-matched detuning at 3 W equals 77.4 GHz;
// raman_coeff values are least-squares fits to the two 3000-cps singles
// anchors (51 W*m and 230 W*m).
inline FiberSpec fiber_preset(std::string_view name) {
  FiberSpec f;
  if (name == "smf28-paper") {
    f.lambda_zgvd_nm = 1310.0;
    f.slope_s0 = 0.0697;
    f.gamma = 0.672813824571582;
    f.raman_coeff = 3.675487e-7;
  } else if (name == "smf28-datasheet") {
    f.lambda_zgvd_nm = 1310.0;
    f.slope_s0 = 0.092;
    f.gamma = 0.888075636450295;
    f.raman_coeff = 3.563731e-7;
  } else if (name == "smf28-nominal") {
    f.lambda_zgvd_nm = 1310.0;
    f.slope_s0 = 0.092;
    f.gamma = 1.3;
    f.raman_coeff = 3.563731e-7;
  } else {
    throw config_error("unknown fiber preset '" + std::string(name) +
                       "' (known: smf28-paper, smf28-datasheet, smf28-nominal)");
  }
  return f;
}

inline std::vector<std::string> fiber_preset_names() {
  return {"smf28-paper", "smf28-datasheet", "smf28-nominal"};
}

}  // namespace sfwm
