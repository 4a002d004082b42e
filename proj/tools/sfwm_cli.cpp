// sfwm: spontaneous four-wave-mixing photon-pair source simulator and
// analysis front end. Verbs: spectrum, bandwidth, phase-match, simulate,
// sweep, mu-extract, bell, explain. Each run writes CSV data plus one JSON
// summary into the output directory; identical inputs produce byte-identical
// outputs, independent of --threads.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfwm/analysis.hpp"
#include "sfwm/coincidence.hpp"
#include "sfwm/config.hpp"
#include "sfwm/entanglement.hpp"
#include "sfwm/io.hpp"
#include "sfwm/pair_spectrum.hpp"
#include "sfwm/phase_matching.hpp"
#include "sfwm/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitModel = 4;
constexpr int kExitExtraction = 5;

struct CommonFlags {
  std::string config_path;
  std::string preset = "smf28-paper";
  std::string out_dir;
  std::map<std::string, std::string> overrides;
  int threads = 1;
};

std::string default_out_dir() {
  const char* env = std::getenv("SFWM_OUT_DIR");
  return env ? env : "out";
}

void add_common_flags(CLI::App* cmd, CommonFlags& cf) {
  cmd->add_option("--config", cf.config_path, "INI-style config file");
  cmd->add_option("--preset", cf.preset,
                  "experiment preset (smf28-paper, smf28-datasheet, smf28-nominal, "
                  "paper-fig4a..d)");
  cmd->add_option("--out-dir", cf.out_dir, "output directory (env SFWM_OUT_DIR)");
  cmd->add_option("--threads", cf.threads, "worker threads for simulation")
      ->check(CLI::PositiveNumber);
  auto override_opt = [cmd, &cf](const char* flag, const char* key, const char* help) {
    cmd->add_option_function<std::string>(
           flag, [&cf, key](const std::string& v) { cf.overrides[key] = v; }, help);
  };
  override_opt("--length-m", "fiber.length_m", "fiber length in m");
  override_opt("--power-w", "pump.peak_power_w", "pump peak power in W");
  override_opt("--detuning-ghz", "channels.detuning_ghz", "channel |detuning| in GHz");
  override_opt("--bandwidth-ghz", "channels.bandwidth_ghz", "channel bandwidth in GHz");
  override_opt("--duration-s", "run.duration_s", "simulated duration per point in s");
  override_opt("--seed", "run.seed", "master RNG seed");
}

sfwm::ExperimentConfig resolve_config(const CommonFlags& cf) {
  return sfwm::load_config(cf.config_path, cf.overrides, cf.preset);
}

fs::path prepare_out_dir(const CommonFlags& cf) {
  const fs::path dir = cf.out_dir.empty() ? default_out_dir() : cf.out_dir;
  fs::create_directories(dir);
  return dir;
}

json summary_envelope(const char* verb, const sfwm::ExperimentConfig& cfg) {
  json j;
  j["tool"] = "sfwm";
  j["version"] = sfwm::version;
  j["verb"] = verb;
  j["config_hash"] = sfwm::config_hash(cfg);
  j["seed"] = cfg.seed;
  j["preset"] = cfg.preset;
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sfwm::config_error("cannot open output file: " + path.string());
  out << j.dump(2) << "\n";
}

std::string f(double v) { return sfwm::fmt_double(v); }

// ---------------------------------------------------------------- spectrum
int run_spectrum(const CommonFlags& cf, const std::vector<double>& lengths,
                 const sfwm::DetuningGrid& grid) {
  const auto cfg = resolve_config(cf);
  const fs::path dir = prepare_out_dir(cf);
  grid.validate();

  std::vector<std::string> header = {"delta_nu_ghz"};
  std::vector<sfwm::PairSpectrum> spectra;
  for (double length : lengths) {
    sfwm::FiberSpec fiber = cfg.fiber;
    fiber.length_m = length;
    spectra.push_back(
        sfwm::spectrum_sweep(grid, cfg.pump, fiber, cfg.signal.bandwidth_ghz));
    header.push_back("mu_p_L" + f(length) + "m");
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<std::string> row = {f(grid.point(i))};
    for (const auto& s : spectra) row.push_back(f(s.mu_p[i]));
    rows.push_back(std::move(row));
  }
  sfwm::write_csv((dir / "spectrum.csv").string(), header, rows);

  json j = summary_envelope("spectrum", cfg);
  j["lengths_m"] = lengths;
  j["filter_bw_ghz"] = cfg.signal.bandwidth_ghz;
  j["grid"] = {{"start_ghz", grid.start_ghz}, {"stop_ghz", grid.stop_ghz},
               {"step_ghz", grid.step_ghz}};
  j["mu_p_peak"] = cfg.pump.pulse_duration_s * cfg.pump.rep_rate_hz *
                   sfwm::units::ghz_to_hz(cfg.signal.bandwidth_ghz) *
                   sfwm::units::gamma_per_w_km_to_si(cfg.fiber.gamma) *
                   sfwm::units::gamma_per_w_km_to_si(cfg.fiber.gamma);
  j["outputs"] = {"spectrum.csv"};
  write_json(dir / "spectrum.json", j);
  std::cout << "spectrum: " << grid.size() << " points x " << lengths.size()
            << " lengths -> " << (dir / "spectrum.csv").string() << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- bandwidth
int run_bandwidth(const CommonFlags& cf, double l_min, double l_max, int points,
                  bool from_peak) {
  const auto cfg = resolve_config(cf);
  const fs::path dir = prepare_out_dir(cf);
  if (!(l_min > 0 && l_max > l_min && points >= 2))
    throw sfwm::model_error("bandwidth: need 0 < l-min < l-max and >= 2 points");

  const double root = sfwm::phase_matched_detuning_ghz(cfg.pump, cfg.fiber);
  std::vector<std::vector<std::string>> rows;
  for (int k = 0; k < points; ++k) {
    const double length =
        l_min * std::pow(l_max / l_min, static_cast<double>(k) / (points - 1));
    sfwm::FiberSpec fiber = cfg.fiber;
    fiber.length_m = length;
    const double hwhm = sfwm::hwhm_bandwidth_ghz(
        cfg.pump, fiber,
        from_peak ? sfwm::HwhmReference::FromPeak : sfwm::HwhmReference::FromPump);
    rows.push_back({f(length), f(hwhm), f(root)});
  }
  sfwm::write_csv((dir / "bandwidth.csv").string(),
                  {"length_m", "hwhm_ghz", "phase_matched_detuning_ghz"}, rows);
  json j = summary_envelope("bandwidth", cfg);
  j["l_min_m"] = l_min;
  j["l_max_m"] = l_max;
  j["points"] = points;
  j["phase_matched_detuning_ghz"] = root;
  j["hwhm_reference"] = from_peak ? "from-peak" : "from-pump";
  j["outputs"] = {"bandwidth.csv"};
  write_json(dir / "bandwidth.json", j);
  std::cout << "bandwidth: " << points << " lengths -> "
            << (dir / "bandwidth.csv").string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------- phase-match
int run_phase_match(const CommonFlags& cf, const sfwm::DetuningGrid& grid, bool no_spm,
                    bool exact_k) {
  const auto cfg = resolve_config(cf);
  const fs::path dir = prepare_out_dir(cf);
  grid.validate();
  sfwm::DeltaKOptions opts;
  opts.include_spm = !no_spm;
  opts.mode = exact_k ? sfwm::KExpansion::Exact : sfwm::KExpansion::Truncated;

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double nu = grid.point(i);
    rows.push_back({f(nu), f(sfwm::delta_k(nu, cfg.pump, cfg.fiber, opts))});
  }
  sfwm::write_csv((dir / "phase_match.csv").string(), {"delta_nu_ghz", "delta_k_per_m"},
                  rows);
  json j = summary_envelope("phase-match", cfg);
  j["include_spm"] = opts.include_spm;
  j["k_mode"] = exact_k ? "exact" : "truncated";
  j["phase_matched_detuning_ghz"] =
      sfwm::phase_matched_detuning_ghz(cfg.pump, cfg.fiber, opts);
  j["beta2_ps2_km"] =
      sfwm::units::beta2_si_to_ps2_km(sfwm::beta_n(cfg.pump.lambda_p_nm, 2, cfg.fiber));
  j["outputs"] = {"phase_match.csv"};
  write_json(dir / "phase_match.json", j);
  std::cout << "phase-match: root at " << j["phase_matched_detuning_ghz"] << " GHz -> "
            << (dir / "phase_match.csv").string() << "\n";
  return kExitOk;
}

json result_to_json(const sfwm::CoincidenceResult& res) {
  json j;
  j["singles_s"] = res.singles_s;
  j["singles_i"] = res.singles_i;
  j["c_c"] = res.c_c;
  j["c_a"] = res.c_a;
  j["ca_windows"] = res.ca_windows;
  const auto truec = sfwm::true_coincidences(res);
  j["true_coincidences"] = truec.value;
  j["true_clamped"] = truec.clamped;
  if (res.c_a > 0) j["car"] = sfwm::car(res);
  else j["car"] = nullptr;
  j["duration_s"] = res.duration_s;
  j["n_pulses"] = res.n_pulses;
  j["warnings"] = res.warnings;
  return j;
}

json rates_to_json(const sfwm::RateReport& r) {
  json j;
  j["mu_p_channel"] = r.mu_p_channel;
  j["pair_rate_per_s"] = r.pair_rate;
  j["mu_pair_per_pulse"] = r.mu_pair_per_pulse;
  j["singles_s_cps"] = r.singles_s_cps;
  j["singles_i_cps"] = r.singles_i_cps;
  j["true_coincidence_cps"] = r.true_coincidence_cps;
  j["cc_cps"] = r.cc_cps;
  j["accidental_cps"] = r.accidental_cps;
  j["car"] = r.car;
  return j;
}

// ---------------------------------------------------------------- simulate
int run_simulate(const CommonFlags& cf) {
  const auto cfg = resolve_config(cf);
  const fs::path dir = prepare_out_dir(cf);
  const auto res =
      sfwm::simulate(cfg.pump, cfg.fiber, cfg.signal, cfg.idler, cfg.det_s, cfg.det_i,
                     cfg.duration_s, cfg.seed, cfg.sim_options(cf.threads));

  std::vector<std::vector<std::string>> rows;
  for (long b = 0; b < static_cast<long>(res.histogram.size()); ++b)
    rows.push_back({f(res.delay_for_bin(b) * 1e9),
                    std::to_string(res.histogram[static_cast<std::size_t>(b)])});
  sfwm::write_csv((dir / "histogram.csv").string(), {"delay_ns", "counts"}, rows);

  json j = summary_envelope("simulate", cfg);
  j["result"] = result_to_json(res);
  j["expected"] = rates_to_json(
      sfwm::expected_rates(cfg.pump, cfg.fiber, cfg.signal, cfg.idler, cfg.det_s, cfg.det_i));
  j["outputs"] = {"histogram.csv"};
  write_json(dir / "simulate.json", j);
  std::cout << "simulate: " << res.duration_s << " s, C_c=" << res.c_c << " C_a=" << res.c_a
            << " -> " << (dir / "simulate.json").string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- sweep
int run_sweep(const CommonFlags& cf, const std::vector<double>& powers,
              const std::vector<double>& lengths) {
  const auto cfg = resolve_config(cf);
  const fs::path dir = prepare_out_dir(cf);
  if (powers.empty() == lengths.empty())
    throw sfwm::model_error("sweep: give exactly one of --powers-w or --lengths-m");
  const bool over_power = !powers.empty();
  const auto& values = over_power ? powers : lengths;

  json points = json::array();
  std::vector<std::vector<std::string>> rows;
  std::uint64_t idx = 0;
  for (double v : values) {
    sfwm::PumpSpec pump = cfg.pump;
    sfwm::FiberSpec fiber = cfg.fiber;
    (over_power ? pump.peak_power_w : fiber.length_m) = v;
    const auto res =
        sfwm::simulate(pump, fiber, cfg.signal, cfg.idler, cfg.det_s, cfg.det_i,
                       cfg.duration_s, sfwm::substream_seed(cfg.seed, idx),
                       cfg.sim_options(cf.threads));
    const auto truec = sfwm::true_coincidences(res);
    json p;
    p["power_w"] = pump.peak_power_w;
    p["length_m"] = fiber.length_m;
    p["result"] = result_to_json(res);
    points.push_back(p);
    rows.push_back({f(pump.peak_power_w), f(fiber.length_m), std::to_string(res.c_c),
                    f(res.c_a), f(truec.value),
                    res.c_a > 0 ? f(sfwm::car(res)) : "nan",
                    std::to_string(res.singles_s), std::to_string(res.singles_i)});
    ++idx;
  }
  sfwm::write_csv((dir / "sweep.csv").string(),
                  {"power_w", "length_m", "c_c", "c_a", "true_coincidences", "car",
                   "singles_s", "singles_i"},
                  rows);
  json j = summary_envelope("sweep", cfg);
  j["sweep_parameter"] = over_power ? "power_w" : "length_m";
  j["duration_s"] = cfg.duration_s;
  j["detuning_ghz"] = cfg.signal.detuning_ghz;
  j["bandwidth_ghz"] = cfg.signal.bandwidth_ghz;
  j["eta_s"] = cfg.signal.transmittance * cfg.det_s.efficiency;
  j["eta_i"] = cfg.idler.transmittance * cfg.det_i.efficiency;
  j["length_m"] = cfg.fiber.length_m;
  j["rep_rate_hz"] = cfg.pump.rep_rate_hz;
  j["dead_time_s"] = cfg.det_s.dead_time_s;
  j["points"] = points;
  j["outputs"] = {"sweep.csv"};
  write_json(dir / "sweep.json", j);
  std::cout << "sweep: " << values.size() << " points -> " << (dir / "sweep.json").string()
            << "\n";
  return kExitOk;
}

// -------------------------------------------------------------- mu-extract
int run_mu_extract(const CommonFlags& cf, const std::vector<std::string>& inputs) {
  const auto cfg = resolve_config(cf);
  const fs::path dir = prepare_out_dir(cf);
  if (inputs.empty()) throw sfwm::model_error("mu-extract: need at least one sweep JSON");

  json table = json::array();
  std::vector<std::vector<std::string>> rows;
  int failures = 0;
  for (const auto& input : inputs) {
    std::ifstream in(input);
    if (!in) throw sfwm::config_error("cannot open sweep file: " + input);
    json sweep = json::parse(in);
    if (sweep.value("sweep_parameter", "") != "power_w")
      throw sfwm::model_error("mu-extract: '" + input + "' is not a power sweep");

    const double duration = sweep.at("duration_s").get<double>();
    const double length = sweep.at("length_m").get<double>();
    const double detuning = sweep.at("detuning_ghz").get<double>();
    const double bandwidth = sweep.at("bandwidth_ghz").get<double>();
    const double eta_s = sweep.at("eta_s").get<double>();
    const double eta_i = sweep.at("eta_i").get<double>();
    const double rep = sweep.at("rep_rate_hz").get<double>();
    const double dead = sweep.at("dead_time_s").get<double>();

    std::vector<sfwm::SweepPoint> pts;
    for (const auto& p : sweep.at("points")) {
      const auto& r = p.at("result");
      pts.push_back({p.at("power_w").get<double>(), r.at("c_c").get<double>(),
                     r.at("c_a").get<double>(), r.at("singles_s").get<double>(),
                     r.at("singles_i").get<double>()});
    }
    sfwm::DetectorSpec dts;
    dts.dead_time_s = dead;
    sfwm::DeadTimeInfo dti{dts.blocked_gates(rep), dts.blocked_gates(rep), rep};

    sfwm::FiberSpec fiber = cfg.fiber;
    fiber.length_m = length;
    const double mu_model =
        sfwm::mu_p_band_averaged(detuning, bandwidth, cfg.pump, fiber);
    const double mu_point = sfwm::mu_p(detuning, cfg.pump, fiber, bandwidth);

    json row;
    row["input"] = input;
    row["detuning_ghz"] = detuning;
    row["length_m"] = length;
    row["mu_model"] = mu_model;
    row["mu_model_pointwise"] = mu_point;
    std::string mu_ext = "", mu_se = "", gap = "";
    try {
      const auto ext = sfwm::extract_mu_p(pts, length, eta_s, eta_i, duration, dti);
      row["mu_extracted"] = ext.mu_p;
      row["mu_se"] = ext.se;
      row["significance"] = ext.significance;
      mu_ext = f(ext.mu_p);
      mu_se = f(ext.se);
    } catch (const sfwm::extraction_error& e) {
      row["gap_reason"] = e.what();
      gap = e.what();
      ++failures;
    }
    table.push_back(row);
    rows.push_back({f(detuning), f(length), f(mu_model), f(mu_point), mu_ext, mu_se, gap});
  }
  sfwm::write_csv((dir / "mu_table.csv").string(),
                  {"detuning_ghz", "length_m", "mu_model", "mu_model_pointwise",
                   "mu_extracted", "mu_se", "gap_reason"},
                  rows);
  json j = summary_envelope("mu-extract", cfg);
  j["table"] = table;
  j["outputs"] = {"mu_table.csv"};
  write_json(dir / "mu_table.json", j);
  std::cout << "mu-extract: " << inputs.size() << " sweeps, " << failures
            << " noise-dominated gaps -> " << (dir / "mu_table.csv").string() << "\n";
  // All inputs failing to fit is an extraction failure for the run.
  return failures == static_cast<int>(inputs.size()) ? kExitExtraction : kExitOk;
}

// -------------------------------------------------------------------- bell
int run_bell(const CommonFlags& cf, sfwm::EntangledSourceSpec source, bool from_sim,
             double theta2_step) {
  const auto cfg = resolve_config(cf);
  const fs::path dir = prepare_out_dir(cf);

  if (from_sim) {
    const auto res =
        sfwm::simulate(cfg.pump, cfg.fiber, cfg.signal, cfg.idler, cfg.det_s, cfg.det_i,
                       cfg.duration_s, cfg.seed, cfg.sim_options(cf.threads));
    const auto truec = sfwm::true_coincidences(res);
    if (!(truec.value > 0))
      throw sfwm::model_error("bell --from-sim: no true coincidences in the source run");
    source.rate_scale = truec.value;
    source.accidental_floor = res.c_a;
  }
  source.validate();

  std::vector<double> theta2;
  for (double t = -180.0; t <= 180.0 + 1e-9; t += theta2_step) theta2.push_back(t);

  const std::vector<double> theta1 = {-45.0, 0.0, 45.0, 90.0};
  json fringes = json::array();
  double v_sum = 0, v_var_sum = 0;
  std::vector<std::vector<std::string>> vis_rows;
  for (std::size_t k = 0; k < theta1.size(); ++k) {
    const auto scan = sfwm::generate_fringe(theta1[k], theta2, source,
                                            sfwm::substream_seed(cfg.seed, 100 + k));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < theta2.size(); ++i)
      rows.push_back({f(theta2[i]), f(scan.counts[i])});
    const std::string name = "fringe_theta1_" + f(theta1[k]) + ".csv";
    sfwm::write_csv((dir / name).string(), {"theta2_deg", "counts"}, rows);

    const auto fit = sfwm::fit_visibility(scan);
    v_sum += fit.visibility;
    v_var_sum += fit.visibility_se * fit.visibility_se;
    vis_rows.push_back({f(theta1[k]), f(fit.visibility), f(fit.phase_deg), f(fit.amplitude),
                        f(fit.visibility_se)});
    json jf;
    jf["theta1_deg"] = theta1[k];
    jf["file"] = name;
    jf["visibility"] = fit.visibility;
    jf["phase_deg"] = fit.phase_deg;
    jf["visibility_se"] = fit.visibility_se;
    jf["degenerate"] = fit.degenerate;
    fringes.push_back(jf);
  }
  sfwm::write_csv((dir / "visibility.csv").string(),
                  {"theta1_deg", "visibility", "phase_deg", "amplitude", "visibility_se"},
                  vis_rows);

  const double v_mean = v_sum / static_cast<double>(theta1.size());
  const auto counts = sfwm::chsh_sample_counts(source, sfwm::substream_seed(cfg.seed, 200));
  const auto chsh = sfwm::chsh_from_counts(counts);

  json j = summary_envelope("bell", cfg);
  j["source"] = {{"visibility", source.visibility},
                 {"phase_sign", source.phase_sign},
                 {"rate_scale", source.rate_scale},
                 {"accidental_floor", source.accidental_floor},
                 {"from_sim", from_sim}};
  j["fringes"] = fringes;
  j["mean_fitted_visibility"] = v_mean;
  j["s_from_visibility"] = {
      {"value", sfwm::s_from_visibility(std::clamp(v_mean, 0.0, 1.0))},
      {"error", 2.0 * std::sqrt(2.0) * std::sqrt(v_var_sum) / theta1.size()}};
  j["s_from_counts"] = {{"value", chsh.s_value},
                        {"error", chsh.s_error},
                        {"correlations", chsh.correlations}};
  j["outputs"] = {"visibility.csv", "chsh.json"};
  write_json(dir / "chsh.json", j);
  std::cout << "bell: S(counts)=" << chsh.s_value << " +- " << chsh.s_error << " -> "
            << (dir / "chsh.json").string() << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- explain
int run_explain(const CommonFlags& cf) {
  const auto cfg = resolve_config(cf);
  const fs::path dir = prepare_out_dir(cf);
  std::string text = "resolved configuration (preset " + cfg.preset + ", hash " +
                     sfwm::config_hash(cfg) + ")\n";
  for (const auto& e : sfwm::explain_entries(cfg)) {
    text += "  " + e.key + " = " + e.value;
    text.append(e.key.size() + e.value.size() < 40 ? 40 - e.key.size() - e.value.size() : 2,
                ' ');
    text += "# " + e.provenance + "\n";
  }
  sfwm::write_text((dir / "explain.txt").string(), text);
  std::cout << text;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sfwm: photon-pair source simulation and analysis toolkit"};
  app.require_subcommand(1);

  CommonFlags cf;

  // spectrum
  auto* spectrum = app.add_subcommand("spectrum", "pair-generation coefficient spectra");
  std::vector<double> sp_lengths = {3.8, 11.4, 31.5, 308.0};
  sfwm::DetuningGrid sp_grid{0.0, 1500.0, 2.0};
  spectrum->add_option("--lengths-m", sp_lengths, "fiber lengths");
  spectrum->add_option("--start-ghz", sp_grid.start_ghz, "grid start");
  spectrum->add_option("--stop-ghz", sp_grid.stop_ghz, "grid stop");
  spectrum->add_option("--step-ghz", sp_grid.step_ghz, "grid step");
  add_common_flags(spectrum, cf);

  // bandwidth
  auto* bandwidth = app.add_subcommand("bandwidth", "HWHM bandwidth versus fiber length");
  double bw_lmin = 2.0, bw_lmax = 500.0;
  int bw_points = 40;
  bool bw_from_peak = false;
  bandwidth->add_option("--l-min-m", bw_lmin, "shortest length");
  bandwidth->add_option("--l-max-m", bw_lmax, "longest length");
  bandwidth->add_option("--l-points", bw_points, "log-spaced length count");
  bandwidth->add_flag("--from-peak", bw_from_peak, "measure HWHM from the spectrum peak");
  add_common_flags(bandwidth, cf);

  // phase-match
  auto* pm = app.add_subcommand("phase-match", "wavevector mismatch and its root");
  sfwm::DetuningGrid pm_grid{0.0, 1500.0, 2.0};
  bool pm_no_spm = false, pm_exact = false;
  pm->add_option("--start-ghz", pm_grid.start_ghz, "grid start");
  pm->add_option("--stop-ghz", pm_grid.stop_ghz, "grid stop");
  pm->add_option("--step-ghz", pm_grid.step_ghz, "grid step");
  pm->add_flag("--no-spm", pm_no_spm, "drop the -2 gamma P term");
  pm->add_flag("--exact-k", pm_exact, "integrated k(omega) instead of the Taylor form");
  add_common_flags(pm, cf);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo coincidence run");
  add_common_flags(sim, cf);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "coincidence sweep over power or length");
  std::vector<double> sw_powers, sw_lengths;
  sweep->add_option("--powers-w", sw_powers, "pump powers to sweep");
  sweep->add_option("--lengths-m", sw_lengths, "fiber lengths to sweep");
  add_common_flags(sweep, cf);

  // mu-extract
  auto* mx = app.add_subcommand("mu-extract", "extract mu_p from sweep JSON outputs");
  std::vector<std::string> mx_inputs;
  mx->add_option("--inputs", mx_inputs, "sweep JSON files")->required();
  add_common_flags(mx, cf);

  // bell
  auto* bell = app.add_subcommand("bell", "polarization fringes, visibility, CHSH S");
  sfwm::EntangledSourceSpec bell_source;
  bool bell_from_sim = false;
  double bell_step = 2.5;
  bell->add_option("--visibility", bell_source.visibility, "source visibility");
  bell->add_option("--phase-sign", bell_source.phase_sign, "+1 or -1 state phase");
  bell->add_option("--rate-scale", bell_source.rate_scale, "max coincidences per period");
  bell->add_option("--floor", bell_source.accidental_floor, "accidentals per period");
  bell->add_flag("--from-sim", bell_from_sim,
                 "pull rate scale and floor from a coincidence run of the current config");
  bell->add_option("--theta2-step", bell_step, "idler polarizer step in degrees");
  add_common_flags(bell, cf);

  // explain
  auto* explain = app.add_subcommand("explain", "print every default and its provenance");
  add_common_flags(explain, cf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (spectrum->parsed()) return run_spectrum(cf, sp_lengths, sp_grid);
    if (bandwidth->parsed()) return run_bandwidth(cf, bw_lmin, bw_lmax, bw_points, bw_from_peak);
    if (pm->parsed()) return run_phase_match(cf, pm_grid, pm_no_spm, pm_exact);
    if (sim->parsed()) return run_simulate(cf);
    if (sweep->parsed()) return run_sweep(cf, sw_powers, sw_lengths);
    if (mx->parsed()) return run_mu_extract(cf, mx_inputs);
    if (bell->parsed()) return run_bell(cf, bell_source, bell_from_sim, bell_step);
    if (explain->parsed()) return run_explain(cf);
  } catch (const sfwm::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const sfwm::extraction_error& e) {
    std::cerr << "extraction error: " << e.what() << "\n";
    return kExitExtraction;
  } catch (const sfwm::model_error& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitModel;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
