#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfwm/coincidence.hpp"
#include "sfwm/errors.hpp"

namespace sfwm {

enum class FitKind { LogLogLinear, QuadraticThroughOrigin, QuadraticPlusLinear };

struct FitResult {
  FitKind kind = FitKind::LogLogLinear;
  double slope = 0, slope_se = 0;          // log-log fit
  double intercept = 0, intercept_se = 0;
  double alpha = 0, alpha_se = 0;          // quadratic coefficient
  double linear = 0, linear_se = 0;        // diagnostic linear leakage term
  double residual_norm = 0;
};

/// Ordinary least squares on (log x, log y); slope with standard error.
inline FitResult fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw model_error("fit_loglog_slope: need >= 3 points");
  std::vector<double> lx, ly;
  for (const auto& [x, y] : points) {
    if (!(x > 0) || !(y > 0))
      throw model_error("fit_loglog_slope: all x and y must be > 0");
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  const double n = static_cast<double>(points.size());
  double sx = 0, sy = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) { sx += lx[k]; sy += ly[k]; }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  if (!(sxx > 0)) throw model_error("fit_loglog_slope: degenerate abscissa");
  FitResult fit;
  fit.kind = FitKind::LogLogLinear;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    const double r = ly[k] - (fit.intercept + fit.slope * lx[k]);
    ssr += r * r;
  }
  fit.residual_norm = std::sqrt(ssr);
  const double dof = n - 2.0;
  const double sigma2 = dof > 0 ? ssr / dof : 0.0;
  fit.slope_se = std::sqrt(sigma2 / sxx);
  fit.intercept_se = std::sqrt(sigma2 * (1.0 / n + mx * mx / sxx));
  return fit;
}

/// One point of a coincidence sweep versus pump power.
struct SweepPoint {
  double power_w = 0;
  double c_c = 0;
  double c_a = 0;
  double singles_s = -1;  // total counts over the accumulation; < 0 when unknown
  double singles_i = -1;
};

/// Detector/dead-time context for correcting measured counts.
struct DeadTimeInfo {
  long blocked_gates_s = 0;
  long blocked_gates_i = 0;
  double rep_rate_hz = 18e6;
};

namespace detail {
// Live fraction of a detector over the run, from its measured singles.
inline double live_fraction(double singles_counts, double duration_s, double rep_rate_hz,
                            long blocked) {
  if (singles_counts < 0 || blocked <= 0) return 1.0;
  const double q = singles_counts / (duration_s * rep_rate_hz);
  return std::max(1e-6, 1.0 - q * static_cast<double>(blocked));
}
}  // namespace detail

struct MuExtraction {
  double mu_p = 0;
  double se = 0;
  double alpha = 0;     // quadratic coefficient of (C_c - C_a)(P)
  double alpha_se = 0;
  double significance = 0;  // alpha / SE(alpha)
  FitResult diagnostic;     // alpha P^2 + beta P variant; beta reports leakage
};

/// Extract mu_p from a power sweep: weighted fit (C_c - C_a)(P) = alpha P^2
/// with Poisson weights sigma^2 ~ C_c + C_a, then mu_p = alpha/(eta_s eta_i
/// L^2 T). When singles and dead-time context are supplied, counts are first
/// corrected for the detectors' measured live fractions.
///
/// Throws extraction_error when the quadratic term is non-positive or not
/// significant at 3 sigma (noise-dominated data).
inline MuExtraction extract_mu_p(const std::vector<SweepPoint>& points, double length_m,
                                 double eta_s, double eta_i, double duration_s,
                                 const std::optional<DeadTimeInfo>& dead = std::nullopt) {
  if (points.size() < 3) throw model_error("extract_mu_p: need >= 3 power points");
  if (!(eta_s > 0 && eta_s <= 1 && eta_i > 0 && eta_i <= 1))
    throw model_error("extract_mu_p: eta_s, eta_i must be in (0, 1]");
  if (!(length_m > 0) || !(duration_s > 0))
    throw model_error("extract_mu_p: length and duration must be > 0");

  double sxx = 0, sxy = 0;        // weighted sums for alpha = sum(w x y)/sum(w x^2)
  double sxx_lin[2][2] = {{0, 0}, {0, 0}};
  double sxy_lin[2] = {0, 0};
  for (const auto& pt : points) {
    if (!(pt.power_w > 0)) throw model_error("extract_mu_p: powers must be > 0");
    double ll = 1.0;
    if (dead) {
      ll = detail::live_fraction(pt.singles_s, duration_s, dead->rep_rate_hz,
                                 dead->blocked_gates_s) *
           detail::live_fraction(pt.singles_i, duration_s, dead->rep_rate_hz,
                                 dead->blocked_gates_i);
    }
    const double y = (pt.c_c - pt.c_a) / ll;
    const double var = std::max(1.0, pt.c_c + pt.c_a) / (ll * ll);
    const double x = pt.power_w * pt.power_w;
    const double w = 1.0 / var;
    sxx += w * x * x;
    sxy += w * x * y;
    // diagnostic alpha P^2 + beta P
    const double xl = pt.power_w;
    sxx_lin[0][0] += w * x * x;
    sxx_lin[0][1] += w * x * xl;
    sxx_lin[1][0] += w * xl * x;
    sxx_lin[1][1] += w * xl * xl;
    sxy_lin[0] += w * x * y;
    sxy_lin[1] += w * xl * y;
  }

  MuExtraction out;
  out.alpha = sxy / sxx;
  out.alpha_se = std::sqrt(1.0 / sxx);
  out.significance = out.alpha / out.alpha_se;
  if (out.alpha <= 0 || out.significance < 3.0)
    throw extraction_error(
        "noise-dominated: mu_p not extractable (quadratic term " +
        std::to_string(out.alpha) + " +- " + std::to_string(out.alpha_se) +
        " is not significant)");

  const double det = sxx_lin[0][0] * sxx_lin[1][1] - sxx_lin[0][1] * sxx_lin[1][0];
  if (std::abs(det) > 1e-300) {
    out.diagnostic.kind = FitKind::QuadraticPlusLinear;
    out.diagnostic.alpha = (sxy_lin[0] * sxx_lin[1][1] - sxx_lin[0][1] * sxy_lin[1]) / det;
    out.diagnostic.linear = (sxx_lin[0][0] * sxy_lin[1] - sxy_lin[0] * sxx_lin[1][0]) / det;
    out.diagnostic.alpha_se = std::sqrt(sxx_lin[1][1] / det);
    out.diagnostic.linear_se = std::sqrt(sxx_lin[0][0] / det);
  }

  const double denom = eta_s * eta_i * length_m * length_m * duration_s;
  out.mu_p = out.alpha / denom;
  out.se = out.alpha_se / denom;
  return out;
}

/// One cell of the mu_p versus (detuning, length) table.
struct MuTableRow {
  double detuning_ghz = 0;
  double length_m = 0;
  double mu_model = 0;            // channel-effective (band-averaged) model value
  double mu_model_pointwise = 0;  // Eq.-style pointwise value at channel center
  std::optional<double> mu_extracted;
  std::optional<double> mu_se;
  std::string gap_reason;  // nonempty when extraction failed for this cell
};

/// Plan for simulation-backed table cells: per cell, the pump power is capped
/// at the 3000-cps singles point and swept over n_powers log-spaced values a
/// quarter decade down from the cap.
struct SimSweepPlan {
  int n_powers = 5;
  double duration_s = 600.0;
  double target_singles_cps = 3000.0;
  std::uint64_t seed = 1;
};

inline std::vector<double> power_grid(double p_max, int n) {
  std::vector<double> powers;
  for (int k = 0; k < n; ++k)
    powers.push_back(p_max * std::pow(0.25, static_cast<double>(n - 1 - k) /
                                                static_cast<double>(n - 1)));
  return powers;
}

/// mu_p table: model values per (detuning, length), plus extracted values
/// from simulated power sweeps when a plan is given. Extraction failures
/// become gaps with their reason, mirroring unfittable noise-dominated cells.
inline std::vector<MuTableRow> mu_p_table(
    const std::vector<double>& detunings_ghz, const std::vector<double>& lengths_m,
    const PumpSpec& pump_template, const FiberSpec& fiber_template,
    const ChannelSpec& channel_template, const DetectorSpec& det_s, const DetectorSpec& det_i,
    const std::optional<SimSweepPlan>& plan = std::nullopt) {
  if (detunings_ghz.empty() || lengths_m.empty())
    throw model_error("mu_p_table: empty detuning or length list");
  std::vector<MuTableRow> table;
  std::uint64_t cell = 0;
  for (double length : lengths_m) {
    for (double det : detunings_ghz) {
      FiberSpec fiber = fiber_template;
      fiber.length_m = length;
      ChannelSpec sig = channel_template;
      sig.detuning_ghz = std::abs(det);
      ChannelSpec idl = channel_template;
      idl.detuning_ghz = -std::abs(det);

      MuTableRow row;
      row.detuning_ghz = det;
      row.length_m = length;
      // Model columns are evaluated at the sweep's mid power when a plan is
      // given (mu_p drifts slightly with pump power through the SPM term).
      PumpSpec pump_eval = pump_template;
      std::optional<double> p_max;
      if (plan) {
        p_max = calibrate_power_w(plan->target_singles_cps, pump_template, fiber, sig, idl,
                                  det_s, det_i);
        pump_eval.peak_power_w = *p_max * 0.5;
      }
      row.mu_model = mu_p_band_averaged(det, channel_template.bandwidth_ghz, pump_eval, fiber);
      row.mu_model_pointwise = mu_p(det, pump_eval, fiber, channel_template.bandwidth_ghz);

      if (plan) {
        const double eta_s = sig.transmittance * det_s.efficiency;
        const double eta_i = idl.transmittance * det_i.efficiency;
        std::vector<SweepPoint> pts;
        for (double p : power_grid(*p_max, plan->n_powers)) {
          PumpSpec pump = pump_template;
          pump.peak_power_w = p;
          const CoincidenceResult res =
              simulate(pump, fiber, sig, idl, det_s, det_i, plan->duration_s,
                       substream_seed(plan->seed, cell * 1000 + pts.size()));
          pts.push_back({p, static_cast<double>(res.c_c), res.c_a,
                         static_cast<double>(res.singles_s),
                         static_cast<double>(res.singles_i)});
        }
        DeadTimeInfo dti{det_s.blocked_gates(pump_template.rep_rate_hz),
                         det_i.blocked_gates(pump_template.rep_rate_hz),
                         pump_template.rep_rate_hz};
        try {
          const MuExtraction ext =
              extract_mu_p(pts, length, eta_s, eta_i, plan->duration_s, dti);
          row.mu_extracted = ext.mu_p;
          row.mu_se = ext.se;
        } catch (const extraction_error& e) {
          row.gap_reason = e.what();
        }
      }
      table.push_back(row);
      ++cell;
    }
  }
  return table;
}

}  // namespace sfwm
