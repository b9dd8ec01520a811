#pragma once

#include <string>
#include <vector>

#include "nlj/experiment.hpp"

namespace nlj {

// Built-in experiment presets. The fig* names are the study identifiers used
// throughout the result tables; each <name>-desk variant trades trial count
// for turnaround (thresholds 2000 trials, metrics 200) with everything else
// unchanged.
inline std::vector<std::string> preset_names() {
  return {"fig4",  "fig5",  "fig6",   "fig7",   "fig8",  "fig9",
          "fig10", "fig11", "fig12",  "fig13a", "fig13b", "fig14",
          "fig15", "fig16", "fig17",  "fig18"};
}

namespace detail {

inline ExperimentSpec base_spec(int n_jammers) {
  ExperimentSpec spec;
  spec.scenario.n_channels = 32;
  spec.scenario.n_snapshots = 64;
  spec.scenario.noise_power = 2.0;
  spec.scenario.spacing_ratio = 0.5;
  std::vector<double> angles = {-10.0, -4.0, 8.0, 14.0};
  for (int j = 0; j < n_jammers; ++j)
    spec.scenario.jammers.push_back({angles[static_cast<std::size_t>(j)], 0.0});
  spec.sector_start_deg = -22.0;
  spec.sector_stop_deg = 22.0;
  spec.spacings_deg = {1.0, 2.0, 3.0};
  spec.scenario.grid = AngleGrid::uniform(-22.0, 22.0, 1.0);
  spec.detectors = {DetectorKind::kScLrt, DetectorKind::kSdcLrt,
                    DetectorKind::kSpiceLrt};
  spec.jnr_sweep_db = {-10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0};
  return spec;
}

inline ExperimentSpec demo_spec(bool on_grid) {
  ExperimentSpec spec = base_spec(0);
  spec.kind = ExperimentKind::kSingleSnapshotDemo;
  spec.scenario.n_snapshots = 1;
  const std::vector<double> angles =
      on_grid ? std::vector<double>{-10.0, 6.0, 8.0}
              : std::vector<double>{-9.5, -3.5, 8.5};
  for (double a : angles) spec.scenario.jammers.push_back({a, 30.0});
  spec.spacings_deg = {1.0};
  spec.jnr_sweep_db.clear();
  spec.detectors = {DetectorKind::kSdcLrt};
  return spec;
}

}  // namespace detail

inline ExperimentSpec preset(const std::string& name) {
  using detail::base_spec;
  const bool desk = name.size() > 5 && name.substr(name.size() - 5) == "-desk";
  const std::string id = desk ? name.substr(0, name.size() - 5) : name;

  ExperimentSpec spec;
  if (id == "fig4") {
    spec = base_spec(3);
    spec.kind = ExperimentKind::kDetectionCurve;
  } else if (id == "fig5") {
    spec = base_spec(3);
    spec.kind = ExperimentKind::kEstimationMetrics;
    spec.detectors = {DetectorKind::kSdcLrt, DetectorKind::kSpiceLrt};
    spec.jnr_sweep_db = {-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
  } else if (id == "fig6") {
    spec = base_spec(3);
    spec.kind = ExperimentKind::kClassification;
    spec.detectors = {DetectorKind::kSdcLrt, DetectorKind::kSpiceLrt};
    spec.jnr_sweep_db.clear();
  } else if (id == "fig7") {
    spec = base_spec(3);
    spec.kind = ExperimentKind::kDetectionCurve;
    spec.scenario.ramp = PowerRamp{-5.0, 1.0};
  } else if (id == "fig8") {
    spec = base_spec(3);
    spec.kind = ExperimentKind::kOffgridStudy;
    spec.scenario.offgrid_half_width_deg = 1.0;
    spec.families = {"detection"};
  } else if (id == "fig9") {
    spec = base_spec(3);
    spec.kind = ExperimentKind::kOffgridStudy;
    spec.scenario.offgrid_half_width_deg = 1.0;
    spec.detectors = {DetectorKind::kSdcLrt, DetectorKind::kSpiceLrt};
    spec.jnr_sweep_db.clear();
    spec.families = {"classification"};
  } else if (id == "fig10") {
    spec = base_spec(3);
    spec.kind = ExperimentKind::kOffgridStudy;
    spec.scenario.offgrid_half_width_deg = 1.0;
    spec.detectors = {DetectorKind::kSdcLrt, DetectorKind::kSpiceLrt};
    spec.jnr_sweep_db = {-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
    spec.families = {"aoa"};
  } else if (id == "fig11") {
    spec = base_spec(3);
    spec.kind = ExperimentKind::kOffgridStudy;
    spec.offgrid_width_tracks_spacing = true;
    spec.families = {"detection"};
  } else if (id == "fig12") {
    spec = base_spec(3);
    spec.kind = ExperimentKind::kOffgridStudy;
    spec.offgrid_width_tracks_spacing = true;
    spec.detectors = {DetectorKind::kSdcLrt, DetectorKind::kSpiceLrt};
    spec.jnr_sweep_db.clear();
    spec.families = {"classification"};
  } else if (id == "fig13a") {
    spec = detail::demo_spec(true);
  } else if (id == "fig13b") {
    spec = detail::demo_spec(false);
  } else if (id == "fig14") {
    spec = base_spec(4);
    spec.kind = ExperimentKind::kDetectionCurve;
  } else if (id == "fig15") {
    spec = base_spec(4);
    spec.kind = ExperimentKind::kEstimationMetrics;
    spec.detectors = {DetectorKind::kSdcLrt, DetectorKind::kSpiceLrt};
    spec.jnr_sweep_db = {-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
  } else if (id == "fig16") {
    spec = base_spec(4);
    spec.kind = ExperimentKind::kClassification;
    spec.detectors = {DetectorKind::kSdcLrt, DetectorKind::kSpiceLrt};
    spec.jnr_sweep_db.clear();
  } else if (id == "fig17") {
    spec = base_spec(4);
    spec.kind = ExperimentKind::kOffgridStudy;
    spec.scenario.offgrid_half_width_deg = 1.0;
    spec.detectors = {DetectorKind::kSdcLrt, DetectorKind::kSpiceLrt};
    spec.jnr_sweep_db.clear();
    spec.families = {"classification"};
    spec.estimator.nj_max = 8;
  } else if (id == "fig18") {
    spec = base_spec(4);
    spec.kind = ExperimentKind::kOffgridStudy;
    spec.scenario.offgrid_half_width_deg = 1.0;
    spec.detectors = {DetectorKind::kSdcLrt, DetectorKind::kSpiceLrt};
    spec.jnr_sweep_db = {-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
    spec.families = {"aoa"};
  } else {
    throw config_error("unknown preset: " + name);
  }

  if (desk) {
    spec.n_trials_threshold = 2000;
    spec.n_trials_metrics = 200;
  }
  spec.validate();
  return spec;
}

inline bool is_preset(const std::string& name) {
  try {
    preset(name);
    return true;
  } catch (const config_error&) {
    return false;
  }
}

}  // namespace nlj
