#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "sfwm/errors.hpp"
#include "sfwm/pair_spectrum.hpp"
#include "sfwm/rng.hpp"

namespace sfwm {

/// One DWDM collection channel. Detuning is signed: signal positive, idler
/// negative. The channel passband must exclude the pump line.
struct ChannelSpec {
  double detuning_ghz = 400.0;
  double bandwidth_ghz = 75.0;
  double transmittance = 0.6;

  void validate() const {
    std::string err;
    if (!(bandwidth_ghz > 0)) err += "channel.bandwidth_ghz must be > 0; ";
    if (!(std::abs(detuning_ghz) >= bandwidth_ghz))
      err += "channel must exclude the pump line: |detuning_ghz| >= bandwidth_ghz; ";
    if (!(transmittance > 0 && transmittance <= 1.0))
      err += "channel.transmittance must be in (0, 1]; ";
    if (!err.empty()) throw model_error("invalid ChannelSpec: " + err);
  }
};

/// Gated single-photon detector.
struct DetectorSpec {
  double efficiency = 0.05;
  double gate_width_s = 3.1e-9;
  double dead_time_s = 10e-6;
  double jitter_fwhm_s = 300e-12;     // assumed value, not a measured one
  double dark_prob_per_gate = 0.0;    // Poisson mean per gate

  void validate() const {
    std::string err;
    if (!(efficiency > 0 && efficiency <= 1.0))
      err += "detector.efficiency must be in (0, 1]; ";
    if (!(gate_width_s >= 0)) err += "detector.gate_width_s must be >= 0; ";
    if (!(dead_time_s >= 0)) err += "detector.dead_time_s must be >= 0; ";
    if (!(jitter_fwhm_s >= 0)) err += "detector.jitter_fwhm_s must be >= 0; ";
    if (!(dark_prob_per_gate >= 0)) err += "detector.dark_prob_per_gate must be >= 0; ";
    if (!err.empty()) throw model_error("invalid DetectorSpec: " + err);
  }

  /// Number of subsequent gates blocked after a click: gates strictly inside
  /// the dead interval at repetition rate f_p.
  long blocked_gates(double rep_rate_hz) const {
    if (dead_time_s <= 0) return 0;
    const double dp = dead_time_s * rep_rate_hz;
    return std::max<long>(0, static_cast<long>(std::ceil(dp)) - 1);
  }
};

/// Closed-form per-second rates for cross-validating the Monte Carlo.
struct RateReport {
  double mu_p_channel = 0;        // band-averaged mu_p at the channel, pairs/(W^2 m^2 s)
  double pair_rate = 0;           // PGR = mu_p P^2 L^2, pairs/s generated in band
  double mu_pair_per_pulse = 0;
  double raman_mean_s = 0, raman_mean_i = 0;  // noise photons per pulse per channel
  double p_click_s = 0, p_click_i = 0;        // per-gate candidate click probability
  double live_fraction_s = 1, live_fraction_i = 1;
  double singles_s_cps = 0, singles_i_cps = 0;
  double true_coincidence_cps = 0;  // mu_p eta_s eta_i L^2 P^2
  double cc_cps = 0;                // observed zero-delay window rate
  double accidental_cps = 0;        // side-window rate
  double car = 0;
};

namespace detail {
inline void require_symmetric_channels(const ChannelSpec& s, const ChannelSpec& i) {
  if (std::abs(std::abs(s.detuning_ghz) - std::abs(i.detuning_ghz)) > 1e-9)
    throw model_error("energy-conservation mismatch: signal and idler channels "
                      "must sit at mirrored |detuning| from the pump");
}
}  // namespace detail

/// Expected rates for the counting experiment. Exact for the simulated model:
/// per-gate candidate probability p = 1 - exp(-m) with m the detected-photon
/// Poisson mean, live fraction l = 1/(1 + p D*) for D* blocked gates, and
/// joint-click probability from the pair/noise generating functions.
inline RateReport expected_rates(const PumpSpec& pump, const FiberSpec& fiber,
                                 const ChannelSpec& signal, const ChannelSpec& idler,
                                 const DetectorSpec& det_s, const DetectorSpec& det_i) {
  pump.validate();
  fiber.validate();
  signal.validate();
  idler.validate();
  det_s.validate();
  det_i.validate();
  detail::require_symmetric_channels(signal, idler);

  RateReport r;
  const double fp = pump.rep_rate_hz;
  const double pair_bw = std::min(signal.bandwidth_ghz, idler.bandwidth_ghz);
  r.mu_p_channel = mu_p_band_averaged(signal.detuning_ghz, pair_bw, pump, fiber);
  r.pair_rate = r.mu_p_channel * pump.peak_power_w * pump.peak_power_w * fiber.length_m *
                fiber.length_m;
  r.mu_pair_per_pulse = r.pair_rate / fp;
  r.raman_mean_s = fiber.raman_coeff * pump.peak_power_w * fiber.length_m * signal.bandwidth_ghz;
  r.raman_mean_i = fiber.raman_coeff * pump.peak_power_w * fiber.length_m * idler.bandwidth_ghz;

  const double eta_s = signal.transmittance * det_s.efficiency;
  const double eta_i = idler.transmittance * det_i.efficiency;
  const double m_s = eta_s * (r.mu_pair_per_pulse + r.raman_mean_s) + det_s.dark_prob_per_gate;
  const double m_i = eta_i * (r.mu_pair_per_pulse + r.raman_mean_i) + det_i.dark_prob_per_gate;
  r.p_click_s = -std::expm1(-m_s);
  r.p_click_i = -std::expm1(-m_i);
  const double ds = static_cast<double>(det_s.blocked_gates(fp));
  const double di = static_cast<double>(det_i.blocked_gates(fp));
  r.live_fraction_s = 1.0 / (1.0 + r.p_click_s * ds);
  r.live_fraction_i = 1.0 / (1.0 + r.p_click_i * di);
  r.singles_s_cps = fp * r.p_click_s * r.live_fraction_s;
  r.singles_i_cps = fp * r.p_click_i * r.live_fraction_i;

  // P(candidate on both detectors in the same gate)
  const double p_both = 1.0 - std::exp(-m_s) - std::exp(-m_i) +
                        std::exp(-(m_s + m_i - r.mu_pair_per_pulse * eta_s * eta_i));
  const double ll = r.live_fraction_s * r.live_fraction_i;
  r.cc_cps = fp * ll * p_both;
  r.accidental_cps = fp * ll * r.p_click_s * r.p_click_i;
  r.true_coincidence_cps = r.pair_rate * eta_s * eta_i;
  r.car = r.accidental_cps > 0 ? r.cc_cps / r.accidental_cps
                               : std::numeric_limits<double>::infinity();
  return r;
}

struct SimOptions {
  double coincidence_window_s = 3e-9;  // full window width around zero delay
  double bin_width_s = 176e-12;        // TCSPC resolution
  int side_windows = 2;                // accidental windows at +-k/f_p, k = 1..K
  double segment_s = 1.0;              // independent RNG substream per segment
  int threads = 1;
};

/// TCSPC output of one simulated run.
struct CoincidenceResult {
  std::vector<std::uint64_t> histogram;  // signal-idler delay, 176-ps bins
  double bin_width_s = 176e-12;
  long half_bins = 0;                    // histogram covers bins -half..+half
  std::uint64_t singles_s = 0, singles_i = 0;
  std::uint64_t c_c = 0;                 // counts in the zero-delay window
  std::array<std::uint64_t, 4> ca_windows{};  // +-1, +-2 rep periods
  double c_a = 0;                        // mean of the side windows
  double duration_s = 0;
  std::uint64_t n_pulses = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  double delay_for_bin(long i) const {
    return (static_cast<double>(i) - static_cast<double>(half_bins)) * bin_width_s;
  }
};

namespace detail {

struct Candidate {
  std::int64_t pulse;
  double offset;  // arrival offset within the gate (nonzero for darks only)
};

struct SegmentClicks {
  std::vector<double> s, i;  // accepted click timestamps, ascending
  std::uint64_t singles_s = 0, singles_i = 0;
};

// Windowed two-stream join: pairs every signal click with every idler click
// within +-span and histograms the delays. Streams arrive segment by segment
// in time order; trailing clicks are buffered so cross-segment pairs count.
class CoincidencePairer {
 public:
  CoincidencePairer(double span_s, double bin_s, double window_s, double rep_period_s,
                    int k_windows, CoincidenceResult* out)
      : span_(span_s), bin_(bin_s), halfwin_(window_s / 2.0), period_(rep_period_s),
        k_(k_windows), out_(out) {}

  void add_segment(const SegmentClicks& seg) {
    std::size_t a = 0, b = 0;
    while (a < seg.s.size() || b < seg.i.size()) {
      const bool take_s = b >= seg.i.size() || (a < seg.s.size() && seg.s[a] <= seg.i[b]);
      if (take_s) {
        pair_against(seg.s[a], buf_i_, +1.0);
        buf_s_.push_back(seg.s[a]);
        ++a;
      } else {
        pair_against(seg.i[b], buf_s_, -1.0);
        buf_i_.push_back(seg.i[b]);
        ++b;
      }
    }
    if (!seg.s.empty() || !seg.i.empty()) {
      const double t = std::max(seg.s.empty() ? 0.0 : seg.s.back(),
                                seg.i.empty() ? 0.0 : seg.i.back());
      trim(buf_s_, t - span_);
      trim(buf_i_, t - span_);
    }
  }

 private:
  void pair_against(double t, const std::deque<double>& other, double sign) {
    // other holds clicks <= t within span; delay = t_signal - t_idler
    for (auto it = other.rbegin(); it != other.rend(); ++it) {
      const double dt = t - *it;
      if (dt > span_) break;
      record(sign * dt);
    }
  }

  void record(double delay) {
    const long idx = static_cast<long>(std::floor(delay / bin_ + 0.5));
    if (std::labs(idx) > out_->half_bins) return;
    ++out_->histogram[static_cast<std::size_t>(idx + out_->half_bins)];
    if (std::abs(delay) <= halfwin_) ++out_->c_c;
    for (int k = 1; k <= k_; ++k) {
      const double c = k * period_;
      if (std::abs(delay - c) <= halfwin_) ++out_->ca_windows[2 * (k - 1)];
      if (std::abs(delay + c) <= halfwin_) ++out_->ca_windows[2 * (k - 1) + 1];
    }
  }

  static void trim(std::deque<double>& q, double cutoff) {
    while (!q.empty() && q.front() < cutoff) q.pop_front();
  }

  double span_, bin_, halfwin_, period_;
  int k_;
  CoincidenceResult* out_;
  std::deque<double> buf_s_, buf_i_;
};

struct StreamRates {
  // Per-pulse Poisson means of detected-event streams. Poisson marking makes
  // these independent, and together they are distributionally identical to
  // drawing per-pulse pair/noise counts and thinning each photon.
  double both = 0;          // pair with both photons detected
  double s_only = 0;        // pair signal detected, idler lost + Raman + nothing else
  double i_only = 0;
  double dark_s = 0, dark_i = 0;
};

inline SegmentClicks simulate_segment(std::uint64_t seg_seed, std::int64_t first_pulse,
                                      std::int64_t n_pulses, const StreamRates& rates,
                                      const PumpSpec& pump, const DetectorSpec& det_s,
                                      const DetectorSpec& det_i) {
  std::mt19937_64 rng(seg_seed);
  const double np = static_cast<double>(n_pulses);
  std::uniform_int_distribution<std::int64_t> upulse(0, n_pulses - 1);

  auto draw_count = [&](double mean) -> std::int64_t {
    if (mean <= 0) return 0;
    return std::poisson_distribution<std::int64_t>(mean)(rng);
  };

  // Fixed draw order keeps segments reproducible: counts, then pulse indexes,
  // then dark offsets, then jitter in acceptance order.
  const std::int64_t n_both = draw_count(rates.both * np);
  const std::int64_t n_s = draw_count(rates.s_only * np);
  const std::int64_t n_i = draw_count(rates.i_only * np);
  const std::int64_t n_ds = draw_count(rates.dark_s * np);
  const std::int64_t n_di = draw_count(rates.dark_i * np);

  std::vector<Candidate> cs, ci;
  cs.reserve(static_cast<std::size_t>(n_both + n_s + n_ds));
  ci.reserve(static_cast<std::size_t>(n_both + n_i + n_di));
  for (std::int64_t k = 0; k < n_both; ++k) {
    const std::int64_t p = upulse(rng);
    cs.push_back({p, 0.0});
    ci.push_back({p, 0.0});
  }
  for (std::int64_t k = 0; k < n_s; ++k) cs.push_back({upulse(rng), 0.0});
  for (std::int64_t k = 0; k < n_i; ++k) ci.push_back({upulse(rng), 0.0});
  std::uniform_real_distribution<double> ugate_s(-det_s.gate_width_s / 2, det_s.gate_width_s / 2);
  std::uniform_real_distribution<double> ugate_i(-det_i.gate_width_s / 2, det_i.gate_width_s / 2);
  for (std::int64_t k = 0; k < n_ds; ++k) cs.push_back({upulse(rng), ugate_s(rng)});
  for (std::int64_t k = 0; k < n_di; ++k) ci.push_back({upulse(rng), ugate_i(rng)});

  auto by_time = [](const Candidate& a, const Candidate& b) {
    return a.pulse != b.pulse ? a.pulse < b.pulse : a.offset < b.offset;
  };
  std::sort(cs.begin(), cs.end(), by_time);
  std::sort(ci.begin(), ci.end(), by_time);

  SegmentClicks out;
  const double period = 1.0 / pump.rep_rate_hz;
  auto accept = [&](const std::vector<Candidate>& cands, const DetectorSpec& det,
                    std::vector<double>& clicks, std::uint64_t& singles) {
    const long blocked = det.blocked_gates(pump.rep_rate_hz);
    const double sigma = units::fwhm_to_sigma(det.jitter_fwhm_s);
    std::normal_distribution<double> jitter(0.0, sigma > 0 ? sigma : 1e-30);
    std::int64_t last = std::numeric_limits<std::int64_t>::min() / 2;
    for (const Candidate& c : cands) {
      if (c.pulse == last) continue;                    // one click per gate
      if (c.pulse - last <= blocked) continue;          // detector dead
      last = c.pulse;
      double t = static_cast<double>(first_pulse + c.pulse) * period + c.offset;
      if (sigma > 0) t += jitter(rng);
      clicks.push_back(t);
      ++singles;
    }
  };
  accept(cs, det_s, out.s, out.singles_s);
  accept(ci, det_i, out.i, out.singles_i);
  return out;
}

}  // namespace detail

/// Monte Carlo simulation of the pulsed counting experiment: pair and Raman
/// photon generation, filtering and detection losses, gated detectors with
/// dead time and jitter, TCSPC delay histogram, zero-delay and side-window
/// counts. Bit-reproducible for a fixed seed, independent of thread count.
///
/// The run is split into fixed time segments with derived RNG substreams;
/// dead-time state does not cross segment boundaries (segments are >= 10^5
/// dead times at the defaults, so the boundary error is negligible).
inline CoincidenceResult simulate(const PumpSpec& pump, const FiberSpec& fiber,
                                  const ChannelSpec& signal, const ChannelSpec& idler,
                                  const DetectorSpec& det_s, const DetectorSpec& det_i,
                                  double duration_s, std::uint64_t seed,
                                  const SimOptions& opts = {}) {
  if (!(duration_s > 0)) throw model_error("simulate: duration_s must be > 0");
  RateReport rates = expected_rates(pump, fiber, signal, idler, det_s, det_i);

  const double eta_s = signal.transmittance * det_s.efficiency;
  const double eta_i = idler.transmittance * det_i.efficiency;
  detail::StreamRates sr;
  sr.both = rates.mu_pair_per_pulse * eta_s * eta_i;
  sr.s_only = rates.mu_pair_per_pulse * eta_s * (1.0 - eta_i) + rates.raman_mean_s * eta_s;
  sr.i_only = rates.mu_pair_per_pulse * eta_i * (1.0 - eta_s) + rates.raman_mean_i * eta_i;
  sr.dark_s = det_s.dark_prob_per_gate;
  sr.dark_i = det_i.dark_prob_per_gate;

  const double fp = pump.rep_rate_hz;
  const std::int64_t total_pulses = static_cast<std::int64_t>(std::llround(duration_s * fp));
  const std::int64_t seg_pulses =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(opts.segment_s * fp)));
  const std::int64_t n_segments = total_pulses > 0 ? (total_pulses + seg_pulses - 1) / seg_pulses : 0;

  CoincidenceResult res;
  res.bin_width_s = opts.bin_width_s;
  const double period = 1.0 / fp;
  const double span = (opts.side_windows + 0.5) * period;
  res.half_bins = static_cast<long>(std::floor(span / opts.bin_width_s + 0.5));
  res.histogram.assign(static_cast<std::size_t>(2 * res.half_bins + 1), 0);
  res.duration_s = duration_s;
  res.seed = seed;
  res.n_pulses = static_cast<std::uint64_t>(total_pulses);

  detail::CoincidencePairer pairer(span, opts.bin_width_s, opts.coincidence_window_s, period,
                                   opts.side_windows, &res);

  const int batch = std::max(1, opts.threads) * 16;
  std::vector<detail::SegmentClicks> segs(static_cast<std::size_t>(batch));
  for (std::int64_t s0 = 0; s0 < n_segments; s0 += batch) {
    const std::int64_t s1 = std::min<std::int64_t>(n_segments, s0 + batch);
    auto work = [&](int worker, int nworkers) {
      for (std::int64_t s = s0 + worker; s < s1; s += nworkers) {
        const std::int64_t first = s * seg_pulses;
        const std::int64_t n = std::min(seg_pulses, total_pulses - first);
        segs[static_cast<std::size_t>(s - s0)] = detail::simulate_segment(
            substream_seed(seed, static_cast<std::uint64_t>(s)), first, n, sr, pump, det_s,
            det_i);
      }
    };
    const int nw = std::max(1, opts.threads);
    if (nw == 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(nw));
      for (int w = 0; w < nw; ++w) pool.emplace_back(work, w, nw);
      for (auto& t : pool) t.join();
    }
    // Merge in segment order regardless of which worker produced what.
    for (std::int64_t s = s0; s < s1; ++s) {
      auto& seg = segs[static_cast<std::size_t>(s - s0)];
      res.singles_s += seg.singles_s;
      res.singles_i += seg.singles_i;
      pairer.add_segment(seg);
      seg = detail::SegmentClicks{};
    }
  }

  std::uint64_t ca_sum = 0;
  for (auto w : res.ca_windows) ca_sum += w;
  res.c_a = static_cast<double>(ca_sum) / static_cast<double>(res.ca_windows.size());
  for (std::size_t w = 0; w < res.ca_windows.size(); ++w) {
    if (res.ca_windows[w] < 10)
      res.warnings.push_back("accidental window " + std::to_string(w) + " holds only " +
                             std::to_string(res.ca_windows[w]) +
                             " counts; C_a estimate is statistically weak");
  }
  return res;
}

/// Coincidence-to-accidental ratio C_c / C_a.
inline double car(const CoincidenceResult& result) {
  if (!(result.c_a > 0))
    throw model_error("CAR undefined: no accidentals recorded");
  return static_cast<double>(result.c_c) / result.c_a;
}

struct TrueCoincidences {
  double value = 0;
  bool clamped = false;  // set when C_c - C_a was negative and floored at 0
};

/// True coincidences C_c - C_a, floored at zero.
inline TrueCoincidences true_coincidences(const CoincidenceResult& result) {
  const double diff = static_cast<double>(result.c_c) - result.c_a;
  if (diff < 0) return {0.0, true};
  return {diff, false};
}

/// Pump power that produces the target per-detector singles rate (closed
/// form), mirroring the experiment's detector-saturation guard. Monotone in
/// the target.
inline double calibrate_power_w(double target_singles_cps, const PumpSpec& pump,
                                const FiberSpec& fiber, const ChannelSpec& signal,
                                const ChannelSpec& idler, const DetectorSpec& det_s,
                                const DetectorSpec& det_i) {
  if (!(target_singles_cps > 0)) throw model_error("target singles rate must be > 0");
  auto singles_at = [&](double p_w) {
    PumpSpec p = pump;
    p.peak_power_w = p_w;
    const RateReport r = expected_rates(p, fiber, signal, idler, det_s, det_i);
    return std::max(r.singles_s_cps, r.singles_i_cps);
  };
  double lo = 1e-6, hi = 1.0;
  while (singles_at(hi) < target_singles_cps) {
    hi *= 2.0;
    if (hi > 1e6) throw model_error("calibrate_power: target singles rate unreachable");
  }
  for (int it = 0; it < 200 && (hi - lo) / hi > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    (singles_at(mid) < target_singles_cps ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// One P*L singles anchor for the Raman-noise calibration.
struct RamanAnchor {
  double power_times_length_wm;  // P_p * L in W*m
  double length_m;
};

struct RamanCalibration {
  double coeff = 0;  // photons /(pulse W m GHz)
  std::vector<double> anchor_coeffs;       // exact per-anchor solutions
  std::vector<double> predicted_singles;   // with the fitted coefficient
  std::vector<double> residual_rel;        // (predicted - target)/target
};

/// Fit one Raman-noise coefficient to singles-rate anchors: invert each
/// anchor exactly for its own coefficient, then combine with weights
/// proportional to dSingles/dCoeff (equivalent to least squares on the
/// linearized singles model). A single linear-in-P*L coefficient cannot in
/// general hit every anchor; the residuals report how far off each one is.
inline RamanCalibration calibrate_raman_coeff(
    const PumpSpec& pump_template, const FiberSpec& fiber_template, const ChannelSpec& signal,
    const ChannelSpec& idler, const DetectorSpec& det_s, const DetectorSpec& det_i,
    const std::vector<RamanAnchor>& anchors = {{51.0, 3.8}, {230.0, 308.0}},
    double target_singles_cps = 3000.0) {
  if (anchors.empty()) throw model_error("raman calibration needs at least one anchor");
  const double fp = pump_template.rep_rate_hz;
  const double eta_s = signal.transmittance * det_s.efficiency;
  const long dstar = det_s.blocked_gates(fp);
  const double q = target_singles_cps / fp;
  const double p = q / (1.0 - q * static_cast<double>(dstar));
  if (!(p > 0 && p < 1))
    throw model_error("raman calibration: target singles rate not reachable per gate");
  const double m = -std::log1p(-p);  // required detected mean per gate

  RamanCalibration cal;
  std::vector<double> weights;
  for (const auto& a : anchors) {
    FiberSpec f = fiber_template;
    f.length_m = a.length_m;
    f.raman_coeff = 0.0;
    PumpSpec pu = pump_template;
    pu.peak_power_w = a.power_times_length_wm / a.length_m;
    const double pair_bw = std::min(signal.bandwidth_ghz, idler.bandwidth_ghz);
    const double mu_eff = mu_p_band_averaged(signal.detuning_ghz, pair_bw, pu, f);
    const double mu_pair = mu_eff * pu.peak_power_w * pu.peak_power_w * f.length_m *
                           f.length_m / fp;
    const double nu_needed = (m - det_s.dark_prob_per_gate) / eta_s - mu_pair;
    const double denom = a.power_times_length_wm * signal.bandwidth_ghz;
    cal.anchor_coeffs.push_back(std::max(0.0, nu_needed) / denom);
    weights.push_back(denom);
  }
  double num = 0, den = 0;
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    num += weights[k] * weights[k] * cal.anchor_coeffs[k];
    den += weights[k] * weights[k];
  }
  cal.coeff = num / den;
  for (const auto& a : anchors) {
    FiberSpec f = fiber_template;
    f.length_m = a.length_m;
    f.raman_coeff = cal.coeff;
    PumpSpec pu = pump_template;
    pu.peak_power_w = a.power_times_length_wm / a.length_m;
    const RateReport r = expected_rates(pu, f, signal, idler, det_s, det_i);
    cal.predicted_singles.push_back(r.singles_s_cps);
    cal.residual_rel.push_back((r.singles_s_cps - target_singles_cps) / target_singles_cps);
  }
  return cal;
}

}  // namespace sfwm
