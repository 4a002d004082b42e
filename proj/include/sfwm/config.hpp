#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sfwm/coincidence.hpp"
#include "sfwm/errors.hpp"
#include "sfwm/io.hpp"

namespace sfwm {

/// Fully resolved experiment configuration: preset defaults, then config
/// file, then flag overrides (highest precedence).
struct ExperimentConfig {
  std::string preset = "smf28-paper";
  FiberSpec fiber;
  PumpSpec pump;
  ChannelSpec signal{400.0, 75.0, 0.6};
  ChannelSpec idler{-400.0, 75.0, 0.6};
  DetectorSpec det_s;
  DetectorSpec det_i;
  double coincidence_window_s = 3e-9;
  double bin_width_s = 176e-12;
  double duration_s = 600.0;
  std::uint64_t seed = 1;

  void validate() const {
    fiber.validate();
    pump.validate();
    signal.validate();
    idler.validate();
    det_s.validate();
    det_i.validate();
    if (!(coincidence_window_s > 0)) throw model_error("run.coincidence_window_s must be > 0");
    if (!(bin_width_s > 0)) throw model_error("run.bin_width_s must be > 0");
    if (!(duration_s > 0)) throw model_error("run.duration_s must be > 0");
  }

  SimOptions sim_options(int threads = 1) const {
    SimOptions o;
    o.coincidence_window_s = coincidence_window_s;
    o.bin_width_s = bin_width_s;
    o.threads = threads;
    return o;
  }
};

/// Named experiment presets. "smf28-paper" is the default bench setup;
/// "paper-fig4a..d" select the four histogram fiber lengths at 3 W.
inline ExperimentConfig experiment_preset(const std::string& name) {
  ExperimentConfig cfg;
  cfg.preset = name;
  if (name == "smf28-paper" || name == "smf28-datasheet" || name == "smf28-nominal") {
    cfg.fiber = fiber_preset(name);
    return cfg;
  }
  if (name == "paper-fig4a" || name == "paper-fig4b" || name == "paper-fig4c" ||
      name == "paper-fig4d") {
    cfg.fiber = fiber_preset("smf28-paper");
    cfg.fiber.length_m = name == "paper-fig4a"   ? 3.8
                         : name == "paper-fig4b" ? 11.4
                         : name == "paper-fig4c" ? 31.5
                                                 : 308.0;
    cfg.pump.peak_power_w = 3.0;
    cfg.duration_s = 600.0;
    return cfg;
  }
  throw config_error("unknown preset '" + name +
                     "' (known: smf28-paper, smf28-datasheet, smf28-nominal, "
                     "paper-fig4a, paper-fig4b, paper-fig4c, paper-fig4d)");
}

namespace detail {

struct ConfigEntry {
  std::string value;
  int line = 0;
};

struct KeySpec {
  const char* key;      // full "section.key_with_suffix"
  const char* base;     // key without the unit suffix
  const char* suffix;   // expected unit suffix ("" when dimensionless)
};

inline const std::vector<KeySpec>& known_keys() {
  static const std::vector<KeySpec> keys = {
      {"fiber.preset", "fiber.preset", ""},
      {"fiber.length_m", "fiber.length", "_m"},
      {"fiber.lambda_zgvd_nm", "fiber.lambda_zgvd", "_nm"},
      {"fiber.slope_ps_nm2_km", "fiber.slope", "_ps_nm2_km"},
      {"fiber.gamma_per_w_km", "fiber.gamma", "_per_w_km"},
      {"fiber.raman_coeff_per_w_m_ghz", "fiber.raman_coeff", "_per_w_m_ghz"},
      {"pump.lambda_p_nm", "pump.lambda_p", "_nm"},
      {"pump.peak_power_w", "pump.peak_power", "_w"},
      {"pump.pulse_duration_s", "pump.pulse_duration", "_s"},
      {"pump.rep_rate_hz", "pump.rep_rate", "_hz"},
      {"channels.detuning_ghz", "channels.detuning", "_ghz"},
      {"channels.bandwidth_ghz", "channels.bandwidth", "_ghz"},
      {"channels.transmittance", "channels.transmittance", ""},
      {"detectors.efficiency", "detectors.efficiency", ""},
      {"detectors.gate_width_s", "detectors.gate_width", "_s"},
      {"detectors.dead_time_s", "detectors.dead_time", "_s"},
      {"detectors.jitter_fwhm_s", "detectors.jitter_fwhm", "_s"},
      {"detectors.dark_prob_per_gate", "detectors.dark_prob_per_gate", ""},
      {"run.coincidence_window_s", "run.coincidence_window", "_s"},
      {"run.bin_width_s", "run.bin_width", "_s"},
      {"run.duration_s", "run.duration", "_s"},
      {"run.seed", "run.seed", ""},
  };
  return keys;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// INI-style: [section] headers, key = value lines, # or ; comments.
inline std::map<std::string, ConfigEntry> parse_ini(std::istream& in,
                                                    std::vector<std::string>& errors) {
  std::map<std::string, ConfigEntry> out;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back("line " + std::to_string(lineno) + ": malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      errors.push_back("line " + std::to_string(lineno) + ": key '" + key +
                       "' outside any [section]");
      continue;
    }
    out[section + "." + key] = {value, lineno};
  }
  return out;
}

inline void check_key_known(const std::string& key, int line, std::vector<std::string>& errors) {
  for (const auto& k : known_keys())
    if (key == k.key) return;
  // Suffix mismatch: same base name with a different or missing unit suffix.
  for (const auto& k : known_keys()) {
    const std::string base(k.base);
    if (key.rfind(base, 0) == 0 || std::string(k.key).rfind(key, 0) == 0) {
      errors.push_back("line " + std::to_string(line) + ": unit suffix mismatch for '" + key +
                       "', expected '" + k.key + "'");
      return;
    }
  }
  errors.push_back("line " + std::to_string(line) + ": unknown key '" + key + "'");
}

inline std::optional<double> parse_number(const std::string& key, const ConfigEntry& e,
                                          std::vector<std::string>& errors) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    errors.push_back("line " + std::to_string(e.line) + ": value for '" + key +
                     "' is not a number: '" + e.value + "'");
    return std::nullopt;
  }
}

}  // namespace detail

/// Load a config: preset defaults, then the file (optional), then overrides
/// ("section.key" -> value strings, e.g. from CLI flags). All parse and
/// validation problems are aggregated into a single config_error report with
/// line numbers.
inline ExperimentConfig load_config(const std::string& path,
                                    const std::map<std::string, std::string>& overrides = {},
                                    const std::string& preset = "smf28-paper") {
  std::vector<std::string> errors;
  std::map<std::string, detail::ConfigEntry> entries;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    entries = detail::parse_ini(in, errors);
  }
  for (const auto& [key, value] : overrides) entries[key] = {value, 0};

  // Preset resolution first (file/flag preset wins over the argument).
  std::string preset_name = preset;
  if (auto it = entries.find("fiber.preset"); it != entries.end()) preset_name = it->second.value;
  ExperimentConfig cfg;
  try {
    cfg = experiment_preset(preset_name);
  } catch (const config_error& e) {
    errors.push_back(e.what());
    cfg = ExperimentConfig{};
  }

  for (const auto& [key, entry] : entries) {
    if (key == "fiber.preset") continue;
    detail::check_key_known(key, entry.line, errors);
    const auto num = detail::parse_number(key, entry, errors);
    if (!num) continue;
    const double v = *num;
    if (key == "fiber.length_m") cfg.fiber.length_m = v;
    else if (key == "fiber.lambda_zgvd_nm") cfg.fiber.lambda_zgvd_nm = v;
    else if (key == "fiber.slope_ps_nm2_km") cfg.fiber.slope_s0 = v;
    else if (key == "fiber.gamma_per_w_km") cfg.fiber.gamma = v;
    else if (key == "fiber.raman_coeff_per_w_m_ghz") cfg.fiber.raman_coeff = v;
    else if (key == "pump.lambda_p_nm") cfg.pump.lambda_p_nm = v;
    else if (key == "pump.peak_power_w") cfg.pump.peak_power_w = v;
    else if (key == "pump.pulse_duration_s") cfg.pump.pulse_duration_s = v;
    else if (key == "pump.rep_rate_hz") cfg.pump.rep_rate_hz = v;
    else if (key == "channels.detuning_ghz") {
      cfg.signal.detuning_ghz = std::abs(v);
      cfg.idler.detuning_ghz = -std::abs(v);
    } else if (key == "channels.bandwidth_ghz") {
      cfg.signal.bandwidth_ghz = v;
      cfg.idler.bandwidth_ghz = v;
    } else if (key == "channels.transmittance") {
      cfg.signal.transmittance = v;
      cfg.idler.transmittance = v;
    } else if (key == "detectors.efficiency") {
      cfg.det_s.efficiency = v;
      cfg.det_i.efficiency = v;
    } else if (key == "detectors.gate_width_s") {
      cfg.det_s.gate_width_s = v;
      cfg.det_i.gate_width_s = v;
    } else if (key == "detectors.dead_time_s") {
      cfg.det_s.dead_time_s = v;
      cfg.det_i.dead_time_s = v;
    } else if (key == "detectors.jitter_fwhm_s") {
      cfg.det_s.jitter_fwhm_s = v;
      cfg.det_i.jitter_fwhm_s = v;
    } else if (key == "detectors.dark_prob_per_gate") {
      cfg.det_s.dark_prob_per_gate = v;
      cfg.det_i.dark_prob_per_gate = v;
    } else if (key == "run.coincidence_window_s") cfg.coincidence_window_s = v;
    else if (key == "run.bin_width_s") cfg.bin_width_s = v;
    else if (key == "run.duration_s") cfg.duration_s = v;
    else if (key == "run.seed") cfg.seed = static_cast<std::uint64_t>(v);
  }

  try {
    cfg.validate();
  } catch (const model_error& e) {
    errors.push_back(e.what());
  }
  if (!errors.empty()) {
    std::string report = "configuration errors:";
    for (const auto& e : errors) report += "\n  - " + e;
    throw config_error(report);
  }
  return cfg;
}

/// Canonical serialization of the resolved config (also hashed into outputs).
inline std::string config_canonical(const ExperimentConfig& cfg) {
  std::ostringstream s;
  auto put = [&](const char* k, double v) { s << k << "=" << fmt_double(v, 17) << "\n"; };
  s << "preset=" << cfg.preset << "\n";
  put("fiber.length_m", cfg.fiber.length_m);
  put("fiber.lambda_zgvd_nm", cfg.fiber.lambda_zgvd_nm);
  put("fiber.slope_ps_nm2_km", cfg.fiber.slope_s0);
  put("fiber.gamma_per_w_km", cfg.fiber.gamma);
  put("fiber.raman_coeff_per_w_m_ghz", cfg.fiber.raman_coeff);
  put("pump.lambda_p_nm", cfg.pump.lambda_p_nm);
  put("pump.peak_power_w", cfg.pump.peak_power_w);
  put("pump.pulse_duration_s", cfg.pump.pulse_duration_s);
  put("pump.rep_rate_hz", cfg.pump.rep_rate_hz);
  put("channels.detuning_ghz", cfg.signal.detuning_ghz);
  put("channels.bandwidth_ghz", cfg.signal.bandwidth_ghz);
  put("channels.transmittance", cfg.signal.transmittance);
  put("detectors.efficiency", cfg.det_s.efficiency);
  put("detectors.gate_width_s", cfg.det_s.gate_width_s);
  put("detectors.dead_time_s", cfg.det_s.dead_time_s);
  put("detectors.jitter_fwhm_s", cfg.det_s.jitter_fwhm_s);
  put("detectors.dark_prob_per_gate", cfg.det_s.dark_prob_per_gate);
  put("run.coincidence_window_s", cfg.coincidence_window_s);
  put("run.bin_width_s", cfg.bin_width_s);
  put("run.duration_s", cfg.duration_s);
  s << "run.seed=" << cfg.seed << "\n";
  return s.str();
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  return hex64(fnv1a64(config_canonical(cfg)));
}

struct ExplainEntry {
  std::string key;
  std::string value;
  std::string provenance;
};

/// Every default with where it comes from: a section/figure of the source
/// experiment, a calibration, or "invented" for assumed values.
inline std::vector<ExplainEntry> explain_entries(const ExperimentConfig& cfg) {
  std::vector<ExplainEntry> out;
  auto add = [&](const char* k, double v, const char* why) {
    out.push_back({k, fmt_double(v, 10), why});
  };
  out.push_back({"fiber.preset", cfg.preset, "named preset table"});
  add("fiber.length_m", cfg.fiber.length_m,
      "Sec. 4.3 entanglement fiber length; invented as the general default");
  add("fiber.lambda_zgvd_nm", cfg.fiber.lambda_zgvd_nm,
      "Sec. 2: zero-dispersion wavelength of SMF-28, ~1310 nm");
  add("fiber.slope_ps_nm2_km", cfg.fiber.slope_s0,
      cfg.fiber.slope_s0 < 0.08 ? "Fig. 1 caption: dispersion slope 69.7 s/m^3"
                               : "vendor datasheet slope bound 0.092 ps/nm^2/km");
  add("fiber.gamma_per_w_km", cfg.fiber.gamma,
      "calibrated: phase-matched detuning at 3 W equals 77.4 GHz (Sec. 2)");
  add("fiber.raman_coeff_per_w_m_ghz", cfg.fiber.raman_coeff,
      "calibrated: least-squares fit to the 51 and 230 W*m singles anchors at 3000 cps "
      "(Sec. 4.2)");
  add("pump.lambda_p_nm", cfg.pump.lambda_p_nm, "Sec. 3: pump wavelength 1552.52 nm");
  add("pump.peak_power_w", cfg.pump.peak_power_w,
      "Sec. 4.2 / Fig. 5: length sweeps taken at ~3 W peak power");
  add("pump.pulse_duration_s", cfg.pump.pulse_duration_s, "Sec. 3: pulse width ~15 ps");
  add("pump.rep_rate_hz", cfg.pump.rep_rate_hz, "Sec. 3: repetition rate 18 MHz");
  add("channels.detuning_ghz", cfg.signal.detuning_ghz,
      "Sec. 3 / Fig. 3(b): 400-GHz separated DWDM channels");
  add("channels.bandwidth_ghz", cfg.signal.bandwidth_ghz,
      "Sec. 3: 100-GHz DWDM passband, FWHM ~0.6 nm (75 GHz)");
  add("channels.transmittance", cfg.signal.transmittance,
      "Sec. 4.2: per-photon transmission ~60%");
  add("detectors.efficiency", cfg.det_s.efficiency, "Sec. 3: InGaAs SPD efficiency 5%");
  add("detectors.gate_width_s", cfg.det_s.gate_width_s, "Sec. 3: gate width 3.1 ns");
  add("detectors.dead_time_s", cfg.det_s.dead_time_s, "Sec. 3: dead time 10 us");
  add("detectors.jitter_fwhm_s", cfg.det_s.jitter_fwhm_s,
      "invented: timing jitter spreading the zero-delay peak over a few bins");
  add("detectors.dark_prob_per_gate", cfg.det_s.dark_prob_per_gate,
      "invented: dark counts not quantified in the experiment, default 0");
  add("run.coincidence_window_s", cfg.coincidence_window_s,
      "Sec. 3: coincidence window ~3 ns");
  add("run.bin_width_s", cfg.bin_width_s, "Sec. 4.1: TCSPC time resolution 176 ps");
  add("run.duration_s", cfg.duration_s, "Sec. 4.2: accumulation time 600 s per point");
  out.push_back({"run.seed", std::to_string(cfg.seed), "invented: reproducibility seed"});
  return out;
}

}  // namespace sfwm
