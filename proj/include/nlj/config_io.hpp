#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlj/experiment.hpp"
#include "nlj/presets.hpp"

namespace nlj {
namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& j, const std::string& where,
                                const std::set<std::string>& allowed) {
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw config_error("config: unknown key '" + item.key() + "' in " +
                         where);
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void parse_scenario(const json& j, ScenarioConfig& scen) {
  reject_unknown_keys(j, "scenario",
                      {"n_channels", "n_snapshots", "noise_power",
                       "spacing_ratio", "jammers", "offgrid_half_width_deg",
                       "ramp"});
  maybe(j, "n_channels", scen.n_channels);
  maybe(j, "n_snapshots", scen.n_snapshots);
  maybe(j, "noise_power", scen.noise_power);
  maybe(j, "spacing_ratio", scen.spacing_ratio);
  maybe(j, "offgrid_half_width_deg", scen.offgrid_half_width_deg);
  if (j.contains("jammers")) {
    scen.jammers.clear();
    for (const auto& jj : j.at("jammers")) {
      reject_unknown_keys(jj, "jammer", {"angle_deg", "jnr_db"});
      JammerSpec spec;
      spec.angle_deg = jj.at("angle_deg").get<double>();
      maybe(jj, "jnr_db", spec.jnr_db);
      scen.jammers.push_back(spec);
    }
  }
  if (j.contains("ramp")) {
    if (j.at("ramp").is_null()) {
      scen.ramp.reset();
    } else {
      reject_unknown_keys(j.at("ramp"), "ramp", {"start_offset_db", "step_db"});
      PowerRamp ramp;
      maybe(j.at("ramp"), "start_offset_db", ramp.start_offset_db);
      maybe(j.at("ramp"), "step_db", ramp.step_db);
      scen.ramp = ramp;
    }
  }
}

inline void parse_estimator(const json& j, EstimatorConfig& cfg) {
  reject_unknown_keys(j, "estimator",
                      {"q_grid", "nj_max", "inner_max_iters",
                       "outer_max_iters", "refine_max_sweeps",
                       "rel_tol_inner", "rel_tol_outer", "init_floor"});
  maybe(j, "q_grid", cfg.q_grid);
  maybe(j, "nj_max", cfg.nj_max);
  maybe(j, "inner_max_iters", cfg.inner_max_iters);
  maybe(j, "outer_max_iters", cfg.outer_max_iters);
  maybe(j, "refine_max_sweeps", cfg.refine_max_sweeps);
  maybe(j, "rel_tol_inner", cfg.rel_tol_inner);
  maybe(j, "rel_tol_outer", cfg.rel_tol_outer);
  maybe(j, "init_floor", cfg.init_floor);
}

inline void parse_spice(const json& j, SpiceConfig& cfg) {
  reject_unknown_keys(j, "spice", {"max_iters", "rel_tol", "power_floor"});
  maybe(j, "max_iters", cfg.max_iters);
  maybe(j, "rel_tol", cfg.rel_tol);
  maybe(j, "power_floor", cfg.power_floor);
}

}  // namespace detail

// Parses a JSON experiment description. With a "preset" key the named preset
// supplies every default and the remaining keys override it; otherwise
// "kind" and "scenario" are required. Unknown keys are rejected.
inline ExperimentSpec parse_experiment_json(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config: JSON parse failed: ") + e.what());
  }
  if (!j.is_object()) throw config_error("config: top level must be an object");
  detail::reject_unknown_keys(
      j, "config",
      {"preset", "kind", "seed", "output", "format", "sector", "spacings_deg",
       "jnr_sweep_db", "detectors", "classification_jnr_db", "ghost_jnr_db",
       "trials", "p_fjd", "p_spurious", "subset_cardinality",
       "offgrid_width_tracks_spacing", "families", "scenario", "estimator",
       "spice"});

  ExperimentSpec spec;
  if (j.contains("preset")) {
    spec = preset(j.at("preset").get<std::string>());
  } else {
    if (!j.contains("kind"))
      throw config_error("config: 'kind' is required without a preset");
    if (!j.contains("scenario") || !j.at("scenario").contains("jammers"))
      throw config_error(
          "config: 'scenario.jammers' is required without a preset");
  }
  try {
    if (j.contains("kind"))
      spec.kind = experiment_from_string(j.at("kind").get<std::string>());
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output"))
      spec.output_path = j.at("output").get<std::string>();
    if (j.contains("format"))
      spec.format = format_from_string(j.at("format").get<std::string>());
    if (j.contains("sector")) {
      detail::reject_unknown_keys(j.at("sector"), "sector",
                                  {"start_deg", "stop_deg"});
      detail::maybe(j.at("sector"), "start_deg", spec.sector_start_deg);
      detail::maybe(j.at("sector"), "stop_deg", spec.sector_stop_deg);
    }
    detail::maybe(j, "spacings_deg", spec.spacings_deg);
    detail::maybe(j, "jnr_sweep_db", spec.jnr_sweep_db);
    if (j.contains("detectors")) {
      spec.detectors.clear();
      for (const auto& name : j.at("detectors"))
        spec.detectors.push_back(
            detector_from_string(name.get<std::string>()));
    }
    detail::maybe(j, "classification_jnr_db", spec.classification_jnr_db);
    detail::maybe(j, "ghost_jnr_db", spec.ghost_jnr_db);
    if (j.contains("trials")) {
      detail::reject_unknown_keys(j.at("trials"), "trials",
                                  {"threshold", "metrics", "ghost"});
      detail::maybe(j.at("trials"), "threshold", spec.n_trials_threshold);
      detail::maybe(j.at("trials"), "metrics", spec.n_trials_metrics);
      detail::maybe(j.at("trials"), "ghost", spec.n_trials_ghost);
    }
    detail::maybe(j, "p_fjd", spec.p_fjd);
    detail::maybe(j, "p_spurious", spec.p_spurious);
    detail::maybe(j, "subset_cardinality", spec.subset_cardinality);
    detail::maybe(j, "offgrid_width_tracks_spacing",
                  spec.offgrid_width_tracks_spacing);
    detail::maybe(j, "families", spec.families);
    if (j.contains("scenario"))
      detail::parse_scenario(j.at("scenario"), spec.scenario);
    if (j.contains("estimator"))
      detail::parse_estimator(j.at("estimator"), spec.estimator);
    if (j.contains("spice")) detail::parse_spice(j.at("spice"), spec.spice);
  } catch (const json::exception& e) {
    throw config_error(std::string("config: bad field: ") + e.what());
  }
  // Keep the placeholder grid consistent with the requested sector.
  spec.scenario.grid = AngleGrid::uniform(
      spec.sector_start_deg, spec.sector_stop_deg, spec.spacings_deg.front());
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  return spec;
}

inline ExperimentSpec load_experiment_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw config_error("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return parse_experiment_json(text);
}

// Resolves the CLI's <preset|config-path> argument.
inline ExperimentSpec resolve_spec(const std::string& name_or_path) {
  if (is_preset(name_or_path)) return preset(name_or_path);
  std::ifstream probe(name_or_path);
  if (!probe)
    throw config_error("not a preset and not a readable config file: " +
                       name_or_path);
  probe.close();
  return load_experiment_file(name_or_path);
}

}  // namespace nlj
