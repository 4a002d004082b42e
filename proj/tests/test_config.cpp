#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sfwm/config.hpp"

using namespace sfwm;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << body;
  return path.string();
}

}  // namespace

TEST_CASE("empty file plus the default preset yields the bench defaults") {
  const std::string path = write_temp("sfwm_empty.ini", "");
  const ExperimentConfig cfg = load_config(path, {}, "smf28-paper");
  REQUIRE(cfg.pump.pulse_duration_s == 15e-12);
  REQUIRE(cfg.pump.rep_rate_hz == 18e6);
  REQUIRE(cfg.pump.lambda_p_nm == 1552.52);
  REQUIRE(cfg.det_s.efficiency == 0.05);
  REQUIRE(cfg.det_s.gate_width_s == 3.1e-9);
  REQUIRE(cfg.det_s.dead_time_s == 10e-6);
  REQUIRE(cfg.coincidence_window_s == 3e-9);
  REQUIRE(cfg.bin_width_s == 176e-12);
  REQUIRE(cfg.signal.detuning_ghz == 400.0);
  REQUIRE(cfg.idler.detuning_ghz == -400.0);
  REQUIRE(cfg.signal.bandwidth_ghz == 75.0);
  REQUIRE(cfg.signal.transmittance == 0.6);
  REQUIRE(cfg.duration_s == 600.0);
}

TEST_CASE("histogram presets select the four fiber lengths at 3 W") {
  const ExperimentConfig b = experiment_preset("paper-fig4b");
  REQUIRE(b.fiber.length_m == 11.4);
  REQUIRE(b.pump.peak_power_w == 3.0);
  REQUIRE(b.signal.detuning_ghz == 400.0);
  REQUIRE(b.duration_s == 600.0);
  REQUIRE(experiment_preset("paper-fig4a").fiber.length_m == 3.8);
  REQUIRE(experiment_preset("paper-fig4c").fiber.length_m == 31.5);
  REQUIRE(experiment_preset("paper-fig4d").fiber.length_m == 308.0);
  REQUIRE_THROWS_AS(experiment_preset("paper-fig9z"), config_error);
}

TEST_CASE("config errors are aggregated with line numbers") {
  const std::string path = write_temp("sfwm_bad.ini",
                                      "[fiber]\n"
                                      "length_km = 5\n"      // wrong unit suffix
                                      "bend_radius_m = 1\n"  // unknown key
                                      "length_m = -2\n"      // invariant violation
                                      "[pump]\n"
                                      "peak_power_w = chunky\n");  // not a number
  try {
    load_config(path);
    FAIL("expected config_error");
  } catch (const config_error& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("line 2") != std::string::npos);
    REQUIRE(msg.find("unit suffix mismatch") != std::string::npos);
    REQUIRE(msg.find("line 3") != std::string::npos);
    REQUIRE(msg.find("unknown key") != std::string::npos);
    REQUIRE(msg.find("length_m must be > 0") != std::string::npos);
    REQUIRE(msg.find("line 6") != std::string::npos);
  }
}

TEST_CASE("flag overrides beat file values which beat the preset") {
  const std::string path = write_temp("sfwm_prec.ini",
                                      "[fiber]\nlength_m = 5.5\n[pump]\npeak_power_w = 2\n");
  const ExperimentConfig file_only = load_config(path);
  REQUIRE(file_only.fiber.length_m == 5.5);
  REQUIRE(file_only.pump.peak_power_w == 2.0);
  const ExperimentConfig with_flags =
      load_config(path, {{"fiber.length_m", "7.25"}});
  REQUIRE(with_flags.fiber.length_m == 7.25);
  REQUIRE(with_flags.pump.peak_power_w == 2.0);
}

TEST_CASE("negative length override names the violated invariant") {
  REQUIRE_THROWS_WITH(load_config("", {{"fiber.length_m", "-1"}}),
                      Catch::Matchers::ContainsSubstring("length_m must be > 0"));
}

TEST_CASE("preset can be chosen from the file itself") {
  const std::string path = write_temp("sfwm_preset.ini", "[fiber]\npreset = smf28-datasheet\n");
  const ExperimentConfig cfg = load_config(path);
  REQUIRE(cfg.fiber.slope_s0 == 0.092);
}

TEST_CASE("every explain entry carries a provenance note") {
  const ExperimentConfig cfg = experiment_preset("smf28-paper");
  const auto entries = explain_entries(cfg);
  REQUIRE(entries.size() >= 20);
  int invented = 0, cited = 0;
  for (const auto& e : entries) {
    REQUIRE_FALSE(e.provenance.empty());
    if (e.provenance.find("invented") != std::string::npos) ++invented;
    if (e.provenance.find("Sec.") != std::string::npos ||
        e.provenance.find("Fig.") != std::string::npos)
      ++cited;
  }
  REQUIRE(invented >= 2);  // jitter and dark counts are assumptions
  REQUIRE(cited >= 10);
}

TEST_CASE("config hash is stable and sensitive") {
  const ExperimentConfig a = experiment_preset("smf28-paper");
  ExperimentConfig b = a;
  REQUIRE(config_hash(a) == config_hash(b));
  b.pump.peak_power_w = 4.0;
  REQUIRE(config_hash(a) != config_hash(b));
}

TEST_CASE("missing config file is reported") {
  REQUIRE_THROWS_AS(load_config("/nonexistent/sfwm.ini"), config_error);
}
