// Result tables, experiment specs, presets, JSON config parsing, and the
// command-line front end, exercised on deliberately small scenarios.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "nlj/config_io.hpp"
#include "nlj/experiment.hpp"
#include "nlj/parallel.hpp"
#include "nlj/presets.hpp"
#include "nlj/result_table.hpp"

#ifndef NLJ_CLI_PATH
#define NLJ_CLI_PATH ""
#endif

namespace {

// Small single-jammer setup that keeps Monte Carlo loops around a second.
nlj::ExperimentSpec tiny_spec(nlj::ExperimentKind kind) {
  nlj::ExperimentSpec spec;
  spec.kind = kind;
  spec.scenario.n_channels = 8;
  spec.scenario.n_snapshots = 16;
  spec.scenario.noise_power = 2.0;
  spec.scenario.jammers = {{9.0, 0.0}};
  spec.sector_start_deg = -21.0;
  spec.sector_stop_deg = 21.0;
  spec.spacings_deg = {3.0};
  spec.scenario.grid = nlj::AngleGrid::uniform(-21.0, 21.0, 3.0);
  spec.detectors = {nlj::DetectorKind::kScLrt};
  spec.jnr_sweep_db = {10.0};
  spec.n_trials_threshold = 200;
  spec.n_trials_metrics = 100;
  spec.n_trials_ghost = 100;
  spec.p_fjd = 0.05;
  spec.p_spurious = 0.05;
  spec.seed = 11;
  return spec;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

}  // namespace

TEST_CASE("format_double round-trips exactly", "[harness]") {
  const std::vector<double> values = {0.0,
                                      1.0,
                                      -1.0,
                                      0.1,
                                      1.0 / 3.0,
                                      -17.25,
                                      1e-12,
                                      6.02214076e23,
                                      5e-324,
                                      1.7976931348623157e308};
  for (double x : values) {
    const double back = nlj::parse_double(nlj::format_double(x));
    CHECK(back == x);
  }
  CHECK(std::signbit(nlj::parse_double(nlj::format_double(-0.0))));
  CHECK(nlj::format_double(0.0) == "0");
  CHECK(nlj::format_double(3.0) == "3");
  CHECK(nlj::format_double(0.5) == "0.5");

  CHECK_THROWS_AS(nlj::parse_double(""), nlj::config_error);
  CHECK_THROWS_AS(nlj::parse_double("abc"), nlj::config_error);
  CHECK_THROWS_AS(nlj::parse_double("1.2,"), nlj::config_error);
}

TEST_CASE("result table keeps rows keyed and sorted", "[harness]") {
  nlj::ResultTable t;
  t.add({"beta", 0.0, 1.0, "pjd", 0.25, 100});
  t.add({"alpha", 5.0, 1.0, "pjd", 0.5, 100});
  t.add({"alpha", -1.0, 1.0, "pjd", 0.75, 100});
  REQUIRE(t.size() == 3);
  CHECK(t.rows()[0].detector == "alpha");
  CHECK(t.rows()[0].jnr_db == -1.0);
  CHECK(t.rows()[1].jnr_db == 5.0);
  CHECK(t.rows()[2].detector == "beta");

  CHECK(t.at("alpha", 5.0, 1.0, "pjd").value == 0.5);
  CHECK_THROWS_AS(t.at("alpha", 5.0, 2.0, "pjd"), std::out_of_range);

  CHECK_THROWS_AS(t.add({"alpha", 5.0, 1.0, "pjd", 0.9, 10}),
                  std::invalid_argument);
  CHECK_THROWS_AS(t.add({"", 0.0, 1.0, "pjd", 0.1, 10}),
                  std::invalid_argument);
  CHECK_THROWS_AS(t.add({"a,b", 0.0, 1.0, "pjd", 0.1, 10}),
                  std::invalid_argument);
  CHECK_THROWS_AS(t.add({"ok", 0.0, 1.0, "m\netric", 0.1, 10}),
                  std::invalid_argument);
  CHECK_THROWS_AS(t.add({"ok", 0.0, 1.0, "nanv", std::nan(""), 10}),
                  std::invalid_argument);
  CHECK_THROWS_AS(t.add({"ok", 0.0, 1.0, "neg", 0.1, -1}),
                  std::invalid_argument);

  nlj::ResultTable extra;
  extra.add({"aaa", 0.0, 1.0, "pjd", 0.1, 10});
  extra.merge(t);
  CHECK(extra.size() == 4);
  CHECK(extra.rows()[0].detector == "aaa");

  nlj::ResultTable clash;
  clash.add({"alpha", 5.0, 1.0, "pjd", 0.0, 1});
  CHECK_THROWS_AS(clash.merge(t), std::invalid_argument);
}

TEST_CASE("result table CSV and JSON serialization", "[harness]") {
  nlj::ResultTable t;
  t.add({"alpha", -4.0, 1.0, "pjd", 0.5, 100});
  t.add({"alpha", 2.0, 1.0, "pjd", 1.0, 100});

  CHECK(std::string(nlj::ResultTable::kCsvHeader) ==
        "detector,jnr_db,grid_spacing_deg,metric,value,n_trials");

  const std::string csv = nlj::render_results(t, nlj::OutputFormat::kCsv);
  CHECK(csv ==
        "detector,jnr_db,grid_spacing_deg,metric,value,n_trials\n"
        "alpha,-4,1,pjd,0.5,100\n"
        "alpha,2,1,pjd,1,100\n");

  std::istringstream is(csv);
  const nlj::ResultTable back = nlj::ResultTable::from_csv(is);
  CHECK(back == t);

  nlj::ResultTable awkward;
  awkward.add({"sc_lrt", -6.25, 3.0, "hausdorff_rms", 1.0 / 3.0, 777});
  awkward.add({"sc_lrt", 6.02e-5, 3.0, "hausdorff_rms", 5e-324, 777});
  std::istringstream is2(nlj::render_results(awkward, nlj::OutputFormat::kCsv));
  CHECK(nlj::ResultTable::from_csv(is2) == awkward);

  const auto j = nlohmann::json::parse(
      nlj::render_results(t, nlj::OutputFormat::kJson));
  REQUIRE(j.at("rows").size() == 2);
  CHECK(j["rows"][0]["detector"] == "alpha");
  CHECK(j["rows"][0]["jnr_db"] == -4.0);
  CHECK(j["rows"][0]["n_trials"] == 100);
  CHECK(j["rows"][1]["value"] == 1.0);

  std::istringstream bad_header("nope\nalpha,0,1,pjd,0.5,10\n");
  CHECK_THROWS_AS(nlj::ResultTable::from_csv(bad_header), nlj::config_error);
  std::istringstream short_row(
      std::string(nlj::ResultTable::kCsvHeader) + "\nalpha,0,1,pjd,0.5\n");
  CHECK_THROWS_AS(nlj::ResultTable::from_csv(short_row), nlj::config_error);
  std::istringstream bad_value(
      std::string(nlj::ResultTable::kCsvHeader) + "\nalpha,0,1,pjd,zzz,10\n");
  CHECK_THROWS_AS(nlj::ResultTable::from_csv(bad_value), nlj::config_error);
}

TEST_CASE("experiment spec validation", "[harness]") {
  CHECK_NOTHROW(tiny_spec(nlj::ExperimentKind::kDetectionCurve).validate());

  auto broken = [](auto mutate) {
    nlj::ExperimentSpec spec = tiny_spec(nlj::ExperimentKind::kDetectionCurve);
    mutate(spec);
    return spec;
  };
  CHECK_THROWS_AS(
      broken([](auto& s) { s.spacings_deg.clear(); }).validate(),
      std::invalid_argument);
  CHECK_THROWS_AS(
      broken([](auto& s) { s.spacings_deg = {-1.0}; }).validate(),
      std::invalid_argument);
  CHECK_THROWS_AS(
      broken([](auto& s) { s.scenario.jammers.clear(); }).validate(),
      std::invalid_argument);
  CHECK_THROWS_AS(broken([](auto& s) { s.detectors.clear(); }).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      broken([](auto& s) { s.n_trials_metrics = 99; }).validate(),
      std::invalid_argument);
  CHECK_THROWS_AS(broken([](auto& s) { s.p_fjd = 0.6; }).validate(),
                  std::invalid_argument);
  // 200 threshold trials cannot pin a 1e-3 false-alarm point.
  CHECK_THROWS_AS(broken([](auto& s) { s.p_fjd = 1e-3; }).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS(broken([](auto& s) { s.p_spurious = 1e-3; }).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      broken([](auto& s) { s.subset_cardinality = 0; }).validate(),
      std::invalid_argument);
  CHECK_THROWS_AS(
      broken([](auto& s) { s.jnr_sweep_db.clear(); }).validate(),
      std::invalid_argument);
  // Nested scenario checks still run for non-demo kinds.
  CHECK_THROWS_AS(
      broken([](auto& s) { s.scenario.noise_power = 0.5; }).validate(),
      std::invalid_argument);

  nlj::ExperimentSpec metrics = tiny_spec(nlj::ExperimentKind::kEstimationMetrics);
  CHECK_NOTHROW(metrics.validate());
  metrics.scenario.offgrid_half_width_deg = 1.0;
  CHECK_THROWS_AS(metrics.validate(), std::invalid_argument);
  metrics.scenario.offgrid_half_width_deg = 0.0;
  metrics.offgrid_width_tracks_spacing = true;
  CHECK_THROWS_AS(metrics.validate(), std::invalid_argument);

  nlj::ExperimentSpec off = tiny_spec(nlj::ExperimentKind::kOffgridStudy);
  CHECK_THROWS_AS(off.validate(), std::invalid_argument);  // no jitter window
  off.offgrid_width_tracks_spacing = true;
  CHECK_NOTHROW(off.validate());
  off.families = {"bogus"};
  CHECK_THROWS_AS(off.validate(), std::invalid_argument);
  off.families.clear();
  CHECK_THROWS_AS(off.validate(), std::invalid_argument);
  // Classification-only studies need no JNR sweep.
  off.families = {"classification"};
  off.jnr_sweep_db.clear();
  CHECK_NOTHROW(off.validate());

  nlj::ExperimentSpec demo = tiny_spec(nlj::ExperimentKind::kSingleSnapshotDemo);
  demo.scenario.n_snapshots = 1;
  demo.scenario.jammers = {{-9.0, 30.0}, {6.0, 30.0}, {9.0, 30.0}};
  demo.detectors.clear();
  demo.jnr_sweep_db.clear();
  // More jammers than snapshots is allowed only for the demo kind.
  CHECK_NOTHROW(demo.validate());
  demo.scenario.noise_power = 0.5;
  CHECK_THROWS_AS(demo.validate(), std::invalid_argument);
  demo.scenario.noise_power = 2.0;
  demo.scenario.jammers[0].angle_deg = 95.0;
  CHECK_THROWS_AS(demo.validate(), std::invalid_argument);
}

TEST_CASE("scenario_for_spacing rebuilds the grid", "[harness]") {
  nlj::ExperimentSpec spec = tiny_spec(nlj::ExperimentKind::kDetectionCurve);
  const nlj::ScenarioConfig s3 = nlj::scenario_for_spacing(spec, 3.0);
  CHECK(s3.grid.size() == 15);
  CHECK(s3.grid.angles_deg.front() == -21.0);
  CHECK(s3.grid.angles_deg.back() == 21.0);
  CHECK(s3.offgrid_half_width_deg == 0.0);

  spec.offgrid_width_tracks_spacing = true;
  CHECK(nlj::scenario_for_spacing(spec, 3.0).offgrid_half_width_deg == 1.5);
  CHECK(nlj::scenario_for_spacing(spec, 1.0).offgrid_half_width_deg == 0.5);
}

TEST_CASE("scale_trials applies floors", "[harness]") {
  nlj::ExperimentSpec spec = nlj::preset("fig4");
  spec.scale_trials(0.02);
  CHECK(spec.n_trials_threshold == 200);   // ceil(10000 * 0.02)
  CHECK(spec.n_trials_metrics == 100);     // floor at 100
  CHECK(spec.n_trials_ghost == 1000);      // floor at 1 / p_spurious

  nlj::ExperimentSpec up = tiny_spec(nlj::ExperimentKind::kDetectionCurve);
  up.scale_trials(2.5);
  CHECK(up.n_trials_threshold == 500);
  CHECK(up.n_trials_metrics == 250);
  CHECK(up.n_trials_ghost == 250);

  CHECK_THROWS_AS(up.scale_trials(0.0), nlj::config_error);
  CHECK_THROWS_AS(up.scale_trials(-1.0), nlj::config_error);
}

TEST_CASE("presets validate and carry the documented shapes", "[harness]") {
  const std::vector<std::string> names = nlj::preset_names();
  REQUIRE(names.size() == 16);
  for (const std::string& name : names) {
    CAPTURE(name);
    CHECK(nlj::is_preset(name));
    CHECK(nlj::is_preset(name + "-desk"));
    CHECK_NOTHROW(nlj::preset(name));
    CHECK_NOTHROW(nlj::preset(name + "-desk"));
  }
  CHECK_FALSE(nlj::is_preset("fig1"));
  CHECK_FALSE(nlj::is_preset(""));
  CHECK_FALSE(nlj::is_preset("fig4-DESK"));
  CHECK_THROWS_AS(nlj::preset("fig99"), nlj::config_error);

  const nlj::ExperimentSpec fig4 = nlj::preset("fig4");
  CHECK(fig4.kind == nlj::ExperimentKind::kDetectionCurve);
  CHECK(fig4.scenario.n_channels == 32);
  CHECK(fig4.scenario.n_snapshots == 64);
  CHECK(fig4.scenario.noise_power == 2.0);
  REQUIRE(fig4.scenario.jammers.size() == 3);
  CHECK(fig4.scenario.jammers[0].angle_deg == -10.0);
  CHECK(fig4.scenario.jammers[1].angle_deg == -4.0);
  CHECK(fig4.scenario.jammers[2].angle_deg == 8.0);
  CHECK(fig4.spacings_deg == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(fig4.detectors.size() == 3);
  REQUIRE(fig4.jnr_sweep_db.size() == 8);
  CHECK(fig4.jnr_sweep_db.front() == -10.0);
  CHECK(fig4.jnr_sweep_db.back() == 4.0);
  CHECK(fig4.n_trials_threshold == 10000);
  CHECK(fig4.n_trials_metrics == 1000);
  CHECK(fig4.p_fjd == 0.01);

  const nlj::ExperimentSpec desk = nlj::preset("fig4-desk");
  CHECK(desk.n_trials_threshold == 2000);
  CHECK(desk.n_trials_metrics == 200);
  CHECK(desk.n_trials_ghost == 1000);

  const nlj::ExperimentSpec fig5 = nlj::preset("fig5");
  CHECK(fig5.kind == nlj::ExperimentKind::kEstimationMetrics);
  CHECK(fig5.detectors == std::vector<nlj::DetectorKind>{
                              nlj::DetectorKind::kSdcLrt,
                              nlj::DetectorKind::kSpiceLrt});
  CHECK(fig5.jnr_sweep_db.front() == -6.0);
  CHECK(fig5.jnr_sweep_db.back() == 10.0);

  CHECK(nlj::preset("fig6").kind == nlj::ExperimentKind::kClassification);
  REQUIRE(nlj::preset("fig7").scenario.ramp.has_value());
  CHECK(nlj::preset("fig7").scenario.ramp->start_offset_db == -5.0);
  CHECK(nlj::preset("fig7").scenario.ramp->step_db == 1.0);

  const nlj::ExperimentSpec fig8 = nlj::preset("fig8");
  CHECK(fig8.kind == nlj::ExperimentKind::kOffgridStudy);
  CHECK(fig8.scenario.offgrid_half_width_deg == 1.0);
  CHECK(fig8.families == std::vector<std::string>{"detection"});

  CHECK(nlj::preset("fig10").families == std::vector<std::string>{"aoa"});
  CHECK(nlj::preset("fig11").offgrid_width_tracks_spacing);

  const nlj::ExperimentSpec fig13a = nlj::preset("fig13a");
  CHECK(fig13a.kind == nlj::ExperimentKind::kSingleSnapshotDemo);
  CHECK(fig13a.scenario.n_snapshots == 1);
  REQUIRE(fig13a.scenario.jammers.size() == 3);
  CHECK(fig13a.scenario.jammers[0].angle_deg == -10.0);
  CHECK(fig13a.scenario.jammers[1].angle_deg == 6.0);
  CHECK(fig13a.scenario.jammers[2].jnr_db == 30.0);
  CHECK(fig13a.spacings_deg == std::vector<double>{1.0});
  CHECK(nlj::preset("fig13b").scenario.jammers[0].angle_deg == -9.5);

  const nlj::ExperimentSpec fig14 = nlj::preset("fig14");
  REQUIRE(fig14.scenario.jammers.size() == 4);
  CHECK(fig14.scenario.jammers[3].angle_deg == 14.0);

  CHECK(nlj::preset("fig17").estimator.nj_max == 8);
  CHECK(nlj::preset("fig17").families ==
        std::vector<std::string>{"classification"});
  CHECK(nlj::preset("fig18").families == std::vector<std::string>{"aoa"});
  CHECK(nlj::preset("fig18").scenario.jammers.size() == 4);
}

TEST_CASE("config JSON: preset base plus overrides", "[harness]") {
  const nlj::ExperimentSpec spec = nlj::parse_experiment_json(R"({
    "preset": "fig4-desk",
    "seed": 7,
    "format": "json",
    "spacings_deg": [2.0],
    "detectors": ["sdc_lrt"],
    "trials": {"metrics": 150}
  })");
  CHECK(spec.kind == nlj::ExperimentKind::kDetectionCurve);
  CHECK(spec.seed == 7);
  CHECK(spec.format == nlj::OutputFormat::kJson);
  CHECK(spec.spacings_deg == std::vector<double>{2.0});
  CHECK(spec.detectors ==
        std::vector<nlj::DetectorKind>{nlj::DetectorKind::kSdcLrt});
  CHECK(spec.n_trials_metrics == 150);
  CHECK(spec.n_trials_threshold == 2000);
  CHECK(spec.scenario.grid.spacing_deg == 2.0);

  // A null ramp clears the preset's ramp.
  const nlj::ExperimentSpec flat = nlj::parse_experiment_json(
      R"({"preset": "fig7", "scenario": {"ramp": null}})");
  CHECK_FALSE(flat.scenario.ramp.has_value());
  const nlj::ExperimentSpec ramped = nlj::parse_experiment_json(
      R"({"preset": "fig4", "scenario": {"ramp": {"start_offset_db": -3.0}}})");
  REQUIRE(ramped.scenario.ramp.has_value());
  CHECK(ramped.scenario.ramp->start_offset_db == -3.0);
  CHECK(ramped.scenario.ramp->step_db == 1.0);
}

TEST_CASE("config JSON: standalone specs and error paths", "[harness]") {
  const std::string standalone = R"({
    "kind": "detection_curve",
    "seed": 3,
    "sector": {"start_deg": -21.0, "stop_deg": 21.0},
    "spacings_deg": [3.0],
    "jnr_sweep_db": [10.0],
    "detectors": ["sc_lrt"],
    "trials": {"threshold": 200, "metrics": 100, "ghost": 100},
    "p_fjd": 0.05,
    "p_spurious": 0.05,
    "scenario": {
      "n_channels": 8,
      "n_snapshots": 16,
      "noise_power": 2.0,
      "jammers": [{"angle_deg": 9.0, "jnr_db": 0.0}]
    }
  })";
  const nlj::ExperimentSpec spec = nlj::parse_experiment_json(standalone);
  CHECK(spec.kind == nlj::ExperimentKind::kDetectionCurve);
  CHECK(spec.seed == 3);
  CHECK(spec.scenario.n_channels == 8);
  CHECK(spec.scenario.jammers.size() == 1);
  CHECK(spec.scenario.grid.size() == 15);
  CHECK(spec.n_trials_threshold == 200);

  CHECK_THROWS_AS(nlj::parse_experiment_json("not json"), nlj::config_error);
  CHECK_THROWS_AS(nlj::parse_experiment_json("[1, 2]"), nlj::config_error);
  CHECK_THROWS_AS(nlj::parse_experiment_json(R"({"seed": 1})"),
                  nlj::config_error);  // kind required without preset
  CHECK_THROWS_AS(
      nlj::parse_experiment_json(R"({"kind": "detection_curve", "seed": 1})"),
      nlj::config_error);  // scenario.jammers required without preset
  CHECK_THROWS_AS(nlj::parse_experiment_json(R"({"preset": "fig99"})"),
                  nlj::config_error);
  CHECK_THROWS_AS(
      nlj::parse_experiment_json(R"({"preset": "fig4", "bogus": 1})"),
      nlj::config_error);
  CHECK_THROWS_AS(nlj::parse_experiment_json(
                      R"({"preset": "fig4", "scenario": {"bogus": 1}})"),
                  nlj::config_error);
  CHECK_THROWS_AS(nlj::parse_experiment_json(
                      R"({"preset": "fig4", "estimator": {"bogus": 1}})"),
                  nlj::config_error);
  CHECK_THROWS_AS(
      nlj::parse_experiment_json(
          R"({"preset": "fig4", "scenario": {"jammers": [{"angle": 1.0}]}})"),
      nlj::config_error);
  CHECK_THROWS_AS(
      nlj::parse_experiment_json(R"({"preset": "fig4", "kind": "bogus"})"),
      nlj::config_error);
  CHECK_THROWS_AS(
      nlj::parse_experiment_json(R"({"preset": "fig4", "format": "xml"})"),
      nlj::config_error);
  CHECK_THROWS_AS(
      nlj::parse_experiment_json(R"({"preset": "fig4", "detectors": ["zz"]})"),
      nlj::config_error);
  CHECK_THROWS_AS(nlj::parse_experiment_json(
                      R"({"preset": "fig4", "trials": {"metrics": "many"}})"),
                  nlj::config_error);
  // Semantic failures surface as config errors too.
  CHECK_THROWS_AS(nlj::parse_experiment_json(
                      R"({"preset": "fig4", "trials": {"threshold": 50}})"),
                  nlj::config_error);
}

TEST_CASE("config files and spec resolution", "[harness]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "nlj_harness";
  fs::create_directories(dir);

  const fs::path good = dir / "good.json";
  std::ofstream(good) << R"({"preset": "fig6-desk", "seed": 21})";
  const nlj::ExperimentSpec from_file = nlj::load_experiment_file(good.string());
  CHECK(from_file.kind == nlj::ExperimentKind::kClassification);
  CHECK(from_file.seed == 21);

  const nlj::ExperimentSpec resolved = nlj::resolve_spec(good.string());
  CHECK(resolved.seed == 21);
  CHECK(nlj::resolve_spec("fig6-desk").seed == 1);

  CHECK_THROWS_AS(nlj::load_experiment_file((dir / "missing.json").string()),
                  nlj::config_error);
  CHECK_THROWS_AS(nlj::resolve_spec("fig99"), nlj::config_error);

  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{broken";
  CHECK_THROWS_AS(nlj::resolve_spec(bad.string()), nlj::config_error);
}

TEST_CASE("detection curve run: rows, values, determinism", "[harness]") {
  const nlj::ExperimentSpec spec = tiny_spec(nlj::ExperimentKind::kDetectionCurve);
  const nlj::ResultTable table = nlj::run_experiment(spec);

  REQUIRE(table.size() == 2);
  const nlj::ResultRow& eta = table.at("sc_lrt", 0.0, 3.0, "threshold");
  CHECK(eta.n_trials == 200);
  CHECK(eta.value > 0.0);
  const nlj::ResultRow& pjd = table.at("sc_lrt", 10.0, 3.0, "pjd");
  CHECK(pjd.n_trials == 100);
  CHECK(pjd.value >= 0.9);
  CHECK(pjd.value <= 1.0);

  // Same spec, same bytes.
  const nlj::ResultTable again = nlj::run_detection_curve(spec);
  CHECK(again == table);
  CHECK(nlj::render_results(again, nlj::OutputFormat::kCsv) ==
        nlj::render_results(table, nlj::OutputFormat::kCsv));

  // Worker count must not change any value.
  nlj::set_thread_count(4);
  const nlj::ResultTable threaded = nlj::run_detection_curve(spec);
  nlj::set_thread_count(0);
  CHECK(threaded == table);

  // A different seed must change at least the calibrated threshold.
  nlj::ExperimentSpec other = spec;
  other.seed = 12;
  const nlj::ResultTable shifted = nlj::run_detection_curve(other);
  CHECK(shifted.at("sc_lrt", 0.0, 3.0, "threshold").value != eta.value);
}

TEST_CASE("estimation metrics run: row inventory and sane values",
          "[harness]") {
  const nlj::ExperimentSpec spec =
      tiny_spec(nlj::ExperimentKind::kEstimationMetrics);
  const nlj::ResultTable table = nlj::run_experiment(spec);

  REQUIRE(table.size() == 4);
  CHECK(table.at("sc_lrt", 0.0, 3.0, "ghost_threshold").value >= 0.0);
  const double haus = table.at("sc_lrt", 10.0, 3.0, "hausdorff_rms").value;
  const double missed = table.at("sc_lrt", 10.0, 3.0, "missed_rms").value;
  const double ghosts = table.at("sc_lrt", 10.0, 3.0, "ghosts_rms").value;
  // On-grid single jammer at 10 dB: localization is near-exact, so the RMS
  // values sit far below the 42 deg empty-report penalty.
  CHECK(haus >= 0.0);
  CHECK(haus < 5.0);
  CHECK(missed < 0.35);
  CHECK(ghosts < 1.5);
}

TEST_CASE("classification run: histogram conserves trials", "[harness]") {
  const nlj::ExperimentSpec spec =
      tiny_spec(nlj::ExperimentKind::kClassification);
  const nlj::ResultTable table = nlj::run_experiment(spec);

  // ghost_threshold + order_1..order_6 + order_other
  REQUIRE(table.size() == 8);
  double total = 0.0;
  for (int order = 1; order <= spec.estimator.nj_max; ++order)
    total += table
                 .at("sc_lrt", 10.0, 3.0, "order_" + std::to_string(order))
                 .value;
  total += table.at("sc_lrt", 10.0, 3.0, "order_other").value;
  CHECK(total == 100.0);
  CHECK(table.at("sc_lrt", 10.0, 3.0, "order_1").value >= 85.0);
}

TEST_CASE("off-grid AOA run: jittered errors stay sub-spacing", "[harness]") {
  nlj::ExperimentSpec spec = tiny_spec(nlj::ExperimentKind::kOffgridStudy);
  spec.offgrid_width_tracks_spacing = true;
  spec.families = {"aoa"};
  const nlj::ResultTable table = nlj::run_experiment(spec);

  REQUIRE(table.size() == 3);
  CHECK(table.at("sc_lrt", 0.0, 3.0, "ghost_threshold").value >= 0.0);
  const double rms = table.at("sc_lrt", 10.0, 3.0, "aoa_rms_deg").value;
  CHECK(rms > 0.0);
  CHECK(rms < 1.6);  // jitter window is +-1.5 deg
  CHECK(table.at("sc_lrt", 10.0, 3.0, "aoa_excluded").value <= 15.0);
}

TEST_CASE("single-snapshot demo run emits the power profile", "[harness]") {
  const nlj::ExperimentSpec spec = nlj::preset("fig13a");
  const nlj::ResultTable table = nlj::run_experiment(spec);

  // 45 grid powers + noise_power + order
  REQUIRE(table.size() == 47);
  double max_power = 0.0;
  for (const nlj::ResultRow& row : table.rows()) {
    CHECK(row.detector == "sdc_lrt");
    CHECK(row.jnr_db == 30.0);
    CHECK(row.n_trials == 1);
    if (row.metric.rfind("power_at_", 0) == 0) {
      CHECK(row.value >= 0.0);
      max_power = std::max(max_power, row.value);
    }
  }
  CHECK(max_power > 50.0);
  CHECK(table.at("sdc_lrt", 30.0, 1.0, "noise_power").value >= 1.0);
  const double order = table.at("sdc_lrt", 30.0, 1.0, "order").value;
  CHECK(order >= 1.0);
  CHECK(order <= 6.0);
}

TEST_CASE("calibration runs emit thresholds only", "[harness]") {
  const nlj::ExperimentSpec det = tiny_spec(nlj::ExperimentKind::kDetectionCurve);
  const nlj::ResultTable cal = nlj::run_calibration(det);
  REQUIRE(cal.size() == 1);
  // Same seed derivation as the full run.
  CHECK(cal.at("sc_lrt", 0.0, 3.0, "threshold").value ==
        nlj::run_detection_curve(det).at("sc_lrt", 0.0, 3.0, "threshold").value);

  const nlj::ExperimentSpec cls = tiny_spec(nlj::ExperimentKind::kClassification);
  const nlj::ResultTable cal2 = nlj::run_calibration(cls);
  REQUIRE(cal2.size() == 2);
  CHECK_NOTHROW(cal2.at("sc_lrt", 0.0, 3.0, "threshold"));
  CHECK_NOTHROW(cal2.at("sc_lrt", 0.0, 3.0, "ghost_threshold"));

  CHECK_THROWS_AS(nlj::run_calibration(nlj::preset("fig13a")),
                  nlj::config_error);
}

TEST_CASE("command-line front end", "[harness][cli]") {
  const std::string cli = NLJ_CLI_PATH;
  if (cli.empty() || !std::filesystem::exists(cli))
    SKIP("nlj-detect binary not available");

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "nlj_harness_cli";
  fs::create_directories(dir);
  const fs::path cfg = dir / "tiny.json";
  const fs::path out_csv = dir / "out.csv";
  const fs::path out_json = dir / "out.json";
  std::ofstream(cfg) << R"({
    "kind": "detection_curve",
    "seed": 3,
    "sector": {"start_deg": -21.0, "stop_deg": 21.0},
    "spacings_deg": [3.0],
    "jnr_sweep_db": [10.0],
    "detectors": ["sc_lrt"],
    "trials": {"threshold": 200, "metrics": 100, "ghost": 100},
    "p_fjd": 0.05,
    "p_spurious": 0.05,
    "scenario": {
      "n_channels": 8,
      "n_snapshots": 16,
      "noise_power": 2.0,
      "jammers": [{"angle_deg": 9.0, "jnr_db": 0.0}]
    }
  })";

  REQUIRE(run_cli(cli, "run \"" + cfg.string() + "\" --out \"" +
                           out_csv.string() + "\"") == 0);
  REQUIRE(fs::exists(out_csv));
  // The CLI output must match an in-process run byte for byte.
  const nlj::ResultTable expect =
      nlj::run_experiment(nlj::load_experiment_file(cfg.string()));
  CHECK(read_file(out_csv) ==
        nlj::render_results(expect, nlj::OutputFormat::kCsv));
  {
    std::ifstream is(out_csv, std::ios::binary);
    CHECK(nlj::ResultTable::from_csv(is) == expect);
  }

  REQUIRE(run_cli(cli, "run \"" + cfg.string() + "\" --format json --out \"" +
                           out_json.string() + "\"") == 0);
  const auto parsed = nlohmann::json::parse(read_file(out_json));
  CHECK(parsed.at("rows").size() == 2);

  // calibrate honors --trials-scale (floored at 100 trials here).
  const fs::path out_cal = dir / "cal.csv";
  REQUIRE(run_cli(cli, "calibrate \"" + cfg.string() +
                           "\" --trials-scale 0.5 --out \"" +
                           out_cal.string() + "\"") == 0);
  std::ifstream cal_is(out_cal, std::ios::binary);
  const nlj::ResultTable cal = nlj::ResultTable::from_csv(cal_is);
  REQUIRE(cal.size() == 1);
  CHECK(cal.rows()[0].metric == "threshold");
  CHECK(cal.rows()[0].n_trials == 100);

  // Config errors exit with 2.
  CHECK(run_cli(cli, "run fig99") == 2);
  CHECK(run_cli(cli, "run fig4 --bogus-flag") == 2);
  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{broken";
  CHECK(run_cli(cli, "run \"" + bad.string() + "\"") == 2);
}
