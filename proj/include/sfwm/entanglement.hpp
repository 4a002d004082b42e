#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sfwm/errors.hpp"
#include "sfwm/rng.hpp"
#include "sfwm/units.hpp"

namespace sfwm {

/// Polarization-entangled pair source |HH> +- |VV| with imperfect visibility.
struct EntangledSourceSpec {
  double visibility = 0.942;
  int phase_sign = +1;            // the +- in |HH> +- |VV>
  double rate_scale = 1000.0;     // expected max coincidences per accumulation period
  double accidental_floor = 0.0;  // expected accidentals per period

  void validate() const {
    std::string err;
    if (!(visibility >= 0.0 && visibility <= 1.0)) err += "visibility must be in [0, 1]; ";
    if (phase_sign != 1 && phase_sign != -1) err += "phase_sign must be +1 or -1; ";
    if (!(rate_scale > 0)) err += "rate_scale must be > 0; ";
    if (!(accidental_floor >= 0)) err += "accidental_floor must be >= 0; ";
    if (!err.empty()) throw model_error("invalid EntangledSourceSpec: " + err);
  }
};

/// Coincidence probability behind polarizers at theta1 (signal) and theta2
/// (idler): P = (1 + V cos 2(theta1 -+ theta2)) / 4, the projection of
/// |HH> +- |VV> with fringe contrast V. Period 180 degrees in each angle.
inline double coincidence_probability(double theta1_deg, double theta2_deg,
                                      const EntangledSourceSpec& source) {
  source.validate();
  const double d2r = units::pi / 180.0;
  const double arg = source.phase_sign > 0 ? theta1_deg - theta2_deg : theta1_deg + theta2_deg;
  return (1.0 + source.visibility * std::cos(2.0 * arg * d2r)) / 4.0;
}

/// One polarizer-fringe scan: idler angle swept at fixed signal angle.
struct FringeScan {
  double theta1_deg = 0.0;
  std::vector<double> theta2_deg;
  std::vector<double> counts;
  double duration_s = 600.0;  // accumulation per point (metadata)
};

/// Poisson fringe: counts ~ Poisson(rate_scale * 2 P(theta1, theta2) + floor),
/// one RNG substream per grid point so results do not depend on evaluation
/// order.
inline FringeScan generate_fringe(double theta1_deg, const std::vector<double>& theta2_grid,
                                  const EntangledSourceSpec& source, std::uint64_t seed) {
  source.validate();
  if (theta2_grid.empty()) throw model_error("generate_fringe: empty angle grid");
  FringeScan scan;
  scan.theta1_deg = theta1_deg;
  scan.theta2_deg = theta2_grid;
  scan.counts.resize(theta2_grid.size());
  for (std::size_t k = 0; k < theta2_grid.size(); ++k) {
    const double mean = source.rate_scale *
                            2.0 * coincidence_probability(theta1_deg, theta2_grid[k], source) +
                        source.accidental_floor;
    std::mt19937_64 rng(substream_seed(seed, k));
    scan.counts[k] = mean > 0 ? static_cast<double>(
                                    std::poisson_distribution<std::int64_t>(mean)(rng))
                              : 0.0;
  }
  return scan;
}

struct VisibilityFit {
  double visibility = 0;
  double phase_deg = 0;     // fringe offset
  double amplitude = 0;     // mean count level A in A (1 + V cos 2(theta - phase))
  double visibility_se = 0;
  bool degenerate = false;  // flat scan, visibility consistent with zero
};

/// Least-squares fit of counts = A (1 + V cos 2(theta2 - phase)).
/// Linear in the basis {1, cos 2t, sin 2t}, so the fit is closed-form and
/// scale-invariant; on noiseless synthetic input it recovers V exactly.
inline VisibilityFit fit_visibility(const FringeScan& scan) {
  const std::size_t n = scan.counts.size();
  if (n < 8 || scan.theta2_deg.size() != n)
    throw model_error("fit_visibility: need >= 8 aligned fringe points");
  const auto [mn, mx] =
      std::minmax_element(scan.theta2_deg.begin(), scan.theta2_deg.end());
  if (*mx - *mn < 180.0)
    throw model_error("fit_visibility: scan must span at least 180 degrees");

  // Normal equations for y = c0 + c1 cos2t + c2 sin2t.
  const double d2r = units::pi / 180.0;
  double a[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  double b[3] = {0, 0, 0};
  for (std::size_t k = 0; k < n; ++k) {
    const double t = 2.0 * scan.theta2_deg[k] * d2r;
    const double base[3] = {1.0, std::cos(t), std::sin(t)};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) a[r][c] += base[r] * base[c];
      b[r] += base[r] * scan.counts[k];
    }
  }
  // Gaussian elimination with partial pivoting (3x3).
  int piv[3] = {0, 1, 2};
  for (int col = 0; col < 3; ++col) {
    int best = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(a[piv[r]][col]) > std::abs(a[piv[best]][col])) best = r;
    std::swap(piv[col], piv[best]);
    const double d = a[piv[col]][col];
    if (std::abs(d) < 1e-300) throw model_error("fit_visibility: singular design matrix");
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[piv[r]][col] / d;
      for (int c = col; c < 3; ++c) a[piv[r]][c] -= f * a[piv[col]][c];
      b[piv[r]] -= f * b[piv[col]];
    }
  }
  double c[3];
  for (int col = 2; col >= 0; --col) {
    double s = b[piv[col]];
    for (int k = col + 1; k < 3; ++k) s -= a[piv[col]][k] * c[k];
    c[col] = s / a[piv[col]][col];
  }

  VisibilityFit fit;
  fit.amplitude = c[0];
  const double mod = std::sqrt(c[1] * c[1] + c[2] * c[2]);
  fit.visibility = c[0] > 0 ? std::clamp(mod / c[0], 0.0, 1.0) : 0.0;
  fit.phase_deg = 0.5 * std::atan2(c[2], c[1]) / d2r;

  // Residual-based standard error of V (delta method on c1, c2).
  double ssr = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = 2.0 * scan.theta2_deg[k] * d2r;
    const double model = c[0] + c[1] * std::cos(t) + c[2] * std::sin(t);
    ssr += (scan.counts[k] - model) * (scan.counts[k] - model);
  }
  const double dof = static_cast<double>(n) - 3.0;
  const double sigma2 = dof > 0 ? ssr / dof : 0.0;
  // Basis near-orthogonality over a full period: Var(c1) ~ Var(c2) ~ 2 sigma^2/n.
  const double var_c = 2.0 * sigma2 / static_cast<double>(n);
  fit.visibility_se = c[0] > 0 ? std::sqrt(var_c) / c[0] : 1.0;
  if (fit.visibility <= std::max(2.0 * fit.visibility_se, 1e-9)) fit.degenerate = true;
  return fit;
}

/// CHSH parameter implied by fringe visibility at ideal settings: S = 2 sqrt(2) V.
inline double s_from_visibility(double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0))
    throw model_error("s_from_visibility: V must be in [0, 1]");
  return 2.0 * std::sqrt(2.0) * visibility;
}

struct ChshSettings {
  // Analyzer pairs (a, a') x (b, b'); complements at +90 degrees.
  double a = -45.0, a_prime = 0.0;
  double b = -22.5, b_prime = 22.5;
};

struct ChshResult {
  double s_value = 0;
  double s_error = 0;                  // shot-noise propagation through E and S
  std::array<double, 4> correlations{};  // E(a,b), E(a,b'), E(a',b), E(a',b')
  std::array<double, 4> correlation_errors{};
};

using SettingCounts = std::map<std::pair<double, double>, double>;

namespace detail {
inline double fetch_count(const SettingCounts& counts, double t1, double t2) {
  const auto it = counts.find({t1, t2});
  if (it == counts.end())
    throw model_error("chsh_from_counts: missing setting (" + std::to_string(t1) + ", " +
                      std::to_string(t2) + ")");
  return it->second;
}

inline std::pair<double, double> correlation_with_error(const SettingCounts& counts,
                                                        double t1, double t2) {
  const double cpp = fetch_count(counts, t1, t2);
  const double coo = fetch_count(counts, t1 + 90.0, t2 + 90.0);
  const double cpo = fetch_count(counts, t1, t2 + 90.0);
  const double cop = fetch_count(counts, t1 + 90.0, t2);
  const double total = cpp + coo + cpo + cop;
  if (!(total > 0))
    throw model_error("chsh_from_counts: correlation undefined, four-count group at (" +
                      std::to_string(t1) + ", " + std::to_string(t2) + ") sums to zero");
  const double e = (cpp + coo - cpo - cop) / total;
  // Poisson first-order propagation: dE/dC_i = (+-1 - E)/total.
  double var = 0;
  var += cpp * (1.0 - e) * (1.0 - e);
  var += coo * (1.0 - e) * (1.0 - e);
  var += cpo * (1.0 + e) * (1.0 + e);
  var += cop * (1.0 + e) * (1.0 + e);
  var /= total * total;
  return {e, std::sqrt(var)};
}
}  // namespace detail

/// CHSH S from the 16-setting coincidence counts
/// (theta1 in {a, a', a+90, a'+90}, theta2 in {b, b', b+90, b'+90}):
///   E(x, y) = [C(x,y) + C(x+90,y+90) - C(x,y+90) - C(x+90,y)] / sum,
///   S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|,
/// with shot-noise errors propagated through E and S.
inline ChshResult chsh_from_counts(const SettingCounts& counts,
                                   const ChshSettings& settings = {}) {
  ChshResult r;
  const std::array<std::pair<double, double>, 4> pairs = {{
      {settings.a, settings.b},
      {settings.a, settings.b_prime},
      {settings.a_prime, settings.b},
      {settings.a_prime, settings.b_prime},
  }};
  double var_s = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto [e, se] = detail::correlation_with_error(counts, pairs[k].first, pairs[k].second);
    r.correlations[k] = e;
    r.correlation_errors[k] = se;
    var_s += se * se;
  }
  r.s_value = std::abs(r.correlations[0] - r.correlations[1] + r.correlations[2] +
                       r.correlations[3]);
  r.s_error = std::sqrt(var_s);
  return r;
}

/// Expected (noise-free) counts for the 16 CHSH settings.
inline SettingCounts chsh_expected_counts(const EntangledSourceSpec& source,
                                          const ChshSettings& settings = {}) {
  SettingCounts counts;
  const std::array<double, 4> t1s = {settings.a, settings.a_prime, settings.a + 90.0,
                                     settings.a_prime + 90.0};
  const std::array<double, 4> t2s = {settings.b, settings.b_prime, settings.b + 90.0,
                                     settings.b_prime + 90.0};
  for (double t1 : t1s)
    for (double t2 : t2s)
      counts[{t1, t2}] = source.rate_scale * 2.0 * coincidence_probability(t1, t2, source) +
                         source.accidental_floor;
  return counts;
}

/// Poisson-sampled counts for the 16 CHSH settings (substream per setting).
inline SettingCounts chsh_sample_counts(const EntangledSourceSpec& source, std::uint64_t seed,
                                        const ChshSettings& settings = {}) {
  SettingCounts expected = chsh_expected_counts(source, settings);
  SettingCounts out;
  std::uint64_t k = 0;
  for (const auto& [key, mean] : expected) {
    std::mt19937_64 rng(substream_seed(seed, k++));
    out[key] = mean > 0
                   ? static_cast<double>(std::poisson_distribution<std::int64_t>(mean)(rng))
                   : 0.0;
  }
  return out;
}

}  // namespace sfwm
