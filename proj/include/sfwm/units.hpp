#pragma once

#include <cmath>

// Unit conversions live here and nowhere else. Internally everything is SI;
// conventional units (nm, GHz, W/km, ps/nm/km) appear only at API and config
// boundaries.
namespace sfwm::units {

inline constexpr double c_m_per_s = 299792458.0;
inline constexpr double pi = 3.14159265358979323846;

inline constexpr double nm_to_m(double nm) { return nm * 1e-9; }
inline constexpr double ghz_to_hz(double ghz) { return ghz * 1e9; }
inline constexpr double hz_to_ghz(double hz) { return hz * 1e-9; }

// Angular frequency of a vacuum wavelength given in nm.
inline double omega_from_lambda_nm(double lambda_nm) {
  return 2.0 * pi * c_m_per_s / nm_to_m(lambda_nm);
}

inline double lambda_nm_from_omega(double omega) {
  return 2.0 * pi * c_m_per_s / omega * 1e9;
}

// Dispersion parameter D: ps/(nm km) -> s/m^2.
inline constexpr double d_ps_nm_km_to_si(double d) { return d * 1e-6; }
inline constexpr double d_si_to_ps_nm_km(double d) { return d * 1e6; }

// Dispersion slope S0: ps/(nm^2 km) -> s/m^3.
inline constexpr double slope_ps_nm2_km_to_si(double s) { return s * 1e3; }

// Nonlinear coefficient gamma: 1/(W km) -> 1/(W m).
inline constexpr double gamma_per_w_km_to_si(double g) { return g * 1e-3; }

// beta2: s^2/m -> ps^2/km (for display only).
inline constexpr double beta2_si_to_ps2_km(double b) { return b * 1e27; }

inline double fwhm_to_sigma(double fwhm) {
  return fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
}

}  // namespace sfwm::units
