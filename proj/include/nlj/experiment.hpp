#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nlj/array_model.hpp"
#include "nlj/common.hpp"
#include "nlj/cyclic_estimator.hpp"
#include "nlj/detectors.hpp"
#include "nlj/parallel.hpp"
#include "nlj/postprocess.hpp"
#include "nlj/result_table.hpp"
#include "nlj/rng.hpp"

namespace nlj {

enum class ExperimentKind {
  kDetectionCurve,
  kEstimationMetrics,
  kClassification,
  kOffgridStudy,
  kSingleSnapshotDemo,
};

inline const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kDetectionCurve: return "detection_curve";
    case ExperimentKind::kEstimationMetrics: return "estimation_metrics";
    case ExperimentKind::kClassification: return "classification";
    case ExperimentKind::kOffgridStudy: return "offgrid_study";
    case ExperimentKind::kSingleSnapshotDemo: return "single_snapshot_demo";
  }
  throw std::invalid_argument("unknown experiment kind");
}

inline ExperimentKind experiment_from_string(const std::string& name) {
  if (name == "detection_curve") return ExperimentKind::kDetectionCurve;
  if (name == "estimation_metrics") return ExperimentKind::kEstimationMetrics;
  if (name == "classification") return ExperimentKind::kClassification;
  if (name == "offgrid_study") return ExperimentKind::kOffgridStudy;
  if (name == "single_snapshot_demo")
    return ExperimentKind::kSingleSnapshotDemo;
  throw config_error("unknown experiment kind: " + name);
}

// Full description of one run. The scenario's grid is a placeholder; runners
// rebuild it over [sector_start, sector_stop] for each requested spacing.
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kDetectionCurve;
  ScenarioConfig scenario;
  double sector_start_deg = -22.0;
  double sector_stop_deg = 22.0;
  std::vector<double> spacings_deg = {1.0, 2.0, 3.0};
  std::vector<DetectorKind> detectors;
  std::vector<double> jnr_sweep_db;
  double classification_jnr_db = 10.0;
  double ghost_jnr_db = 10.0;  // JNR of the ghost-threshold calibration runs
  int n_trials_threshold = 10000;
  int n_trials_metrics = 1000;
  int n_trials_ghost = 1000;
  double p_fjd = 0.01;
  double p_spurious = 1e-3;
  int subset_cardinality = 3;
  // When true, the off-grid jitter window tracks the grid: half width =
  // spacing / 2. Otherwise scenario.offgrid_half_width_deg applies as-is.
  bool offgrid_width_tracks_spacing = false;
  std::vector<std::string> families = {"detection", "classification", "aoa"};
  EstimatorConfig estimator;
  SpiceConfig spice;
  std::uint64_t seed = 1;
  std::string output_path = "results.csv";
  OutputFormat format = OutputFormat::kCsv;

  void validate() const;
  void scale_trials(double factor);
};

// Rebuilds the scenario for one grid spacing (grid, jitter width).
inline ScenarioConfig scenario_for_spacing(const ExperimentSpec& spec,
                                           double spacing_deg) {
  ScenarioConfig scen = spec.scenario;
  scen.grid = AngleGrid::uniform(spec.sector_start_deg, spec.sector_stop_deg,
                                 spacing_deg);
  if (spec.offgrid_width_tracks_spacing)
    scen.offgrid_half_width_deg = spacing_deg / 2.0;
  return scen;
}

inline void ExperimentSpec::validate() const {
  if (spacings_deg.empty())
    throw std::invalid_argument("ExperimentSpec: no grid spacings");
  for (double s : spacings_deg)
    if (!(s > 0.0))
      throw std::invalid_argument("ExperimentSpec: spacing must be positive");
  estimator.validate();
  spice.validate();
  if (scenario.jammers.empty())
    throw std::invalid_argument("ExperimentSpec: scenario needs jammers");

  if (kind == ExperimentKind::kSingleSnapshotDemo) {
    // Deliberate model-mismatch showcase (fewer snapshots than jammers,
    // possibly off-grid angles with no jitter window): only basic checks.
    if (scenario.n_channels < 2 || scenario.n_snapshots < 1)
      throw std::invalid_argument("ExperimentSpec: bad demo scenario");
    if (!(scenario.noise_power >= 1.0))
      throw std::invalid_argument("ExperimentSpec: noise power must be >= 1");
    for (const auto& j : scenario.jammers)
      if (!(std::abs(j.angle_deg) < 90.0))
        throw std::invalid_argument("ExperimentSpec: demo angle out of range");
    return;
  }

  if (detectors.empty())
    throw std::invalid_argument("ExperimentSpec: no detectors");
  if (n_trials_threshold < 100 || n_trials_metrics < 100 ||
      n_trials_ghost < 100)
    throw std::invalid_argument("ExperimentSpec: trial counts must be >= 100");
  if (!(p_fjd > 0.0 && p_fjd < 0.5) || n_trials_threshold * p_fjd < 1.0)
    throw std::invalid_argument("ExperimentSpec: bad false-alarm target");
  if (!(p_spurious > 0.0 && p_spurious < 0.5) ||
      n_trials_ghost * p_spurious < 1.0)
    throw std::invalid_argument("ExperimentSpec: bad spurious-peak target");
  if (subset_cardinality < 1)
    throw std::invalid_argument("ExperimentSpec: bad fusion cardinality");

  const bool needs_sweep =
      kind == ExperimentKind::kDetectionCurve ||
      kind == ExperimentKind::kEstimationMetrics ||
      (kind == ExperimentKind::kOffgridStudy &&
       (std::count(families.begin(), families.end(), "detection") > 0 ||
        std::count(families.begin(), families.end(), "aoa") > 0));
  if (needs_sweep && jnr_sweep_db.empty())
    throw std::invalid_argument("ExperimentSpec: empty JNR sweep");

  if (kind == ExperimentKind::kEstimationMetrics &&
      (scenario.offgrid_half_width_deg != 0.0 || offgrid_width_tracks_spacing))
    throw std::invalid_argument(
        "ExperimentSpec: estimation metrics require an on-grid scenario");
  if (kind == ExperimentKind::kOffgridStudy) {
    if (scenario.offgrid_half_width_deg <= 0.0 &&
        !offgrid_width_tracks_spacing)
      throw std::invalid_argument(
          "ExperimentSpec: off-grid study needs a jitter window");
    if (families.empty())
      throw std::invalid_argument("ExperimentSpec: no study families");
    for (const auto& f : families)
      if (f != "detection" && f != "classification" && f != "aoa")
        throw std::invalid_argument("ExperimentSpec: unknown family " + f);
  }

  for (double spacing : spacings_deg) scenario_for_spacing(*this, spacing).validate();
}

inline void ExperimentSpec::scale_trials(double factor) {
  if (!(factor > 0.0))
    throw config_error("trials scale must be positive");
  auto scaled = [&](int n, int floor_extra) {
    const double raw = std::ceil(n * factor);
    return std::max({100, floor_extra, static_cast<int>(raw)});
  };
  n_trials_threshold =
      scaled(n_trials_threshold, static_cast<int>(std::ceil(1.0 / p_fjd)));
  n_trials_metrics = scaled(n_trials_metrics, 100);
  n_trials_ghost =
      scaled(n_trials_ghost, static_cast<int>(std::ceil(1.0 / p_spurious)));
}

namespace detail {

// Applies one sweep point: every jammer's JNR is its per-jammer offset plus
// the sweep value.
inline ScenarioConfig with_jnr(const ScenarioConfig& scen, double sweep_db) {
  ScenarioConfig out = scen;
  for (auto& j : out.jammers) j.jnr_db += sweep_db;
  return out;
}

inline SparseEstimate run_estimator(DetectorKind kind, const SnapshotSet& z,
                                    double scenario_noise_power,
                                    const Dictionary& dict,
                                    const DetectorConfig& config) {
  switch (kind) {
    case DetectorKind::kScLrt:
      return estimate_known_sigma(z.sample_cov, scenario_noise_power, dict,
                                  z.n_snapshots(), config.estimator);
    case DetectorKind::kSdcLrt:
      return estimate_joint(z.sample_cov, dict, z.n_snapshots(),
                            config.estimator);
    case DetectorKind::kSpiceLrt:
      return spice_estimate(z.sample_cov, dict, z.n_snapshots(), config.spice);
  }
  throw std::invalid_argument("unknown detector kind");
}

// Ghost threshold for one (estimator, spacing) pair: on-grid nominal
// scenario at the configured calibration JNR.
inline double ghost_threshold_for(const ExperimentSpec& spec,
                                  const ScenarioConfig& scen,
                                  const Dictionary& dict, DetectorKind kind,
                                  std::size_t spacing_idx) {
  ScenarioConfig cal = with_jnr(scen, spec.ghost_jnr_db);
  cal.offgrid_half_width_deg = 0.0;
  cal.ramp.reset();
  DetectorConfig config{spec.estimator, spec.spice, 0.0};
  return calibrate_ghost_threshold(
      kind, cal, dict, spec.p_spurious, spec.n_trials_ghost,
      derive_seed(spec.seed, {kStreamGhost, spacing_idx, detector_id(kind)}),
      config, spec.subset_cardinality);
}

inline std::vector<double> true_angles(const ScenarioConfig& scen) {
  std::vector<double> out;
  out.reserve(scen.jammers.size());
  for (const auto& j : scen.jammers) out.push_back(j.angle_deg);
  return out;
}

}  // namespace detail

// Detection-probability curves: per (detector, spacing) calibrate the
// false-alarm threshold on H0, then per sweep JNR run H1 trials and report
// the empirical detection probability.
inline ResultTable run_detection_curve(const ExperimentSpec& spec) {
  spec.validate();
  ResultTable table;
  for (std::size_t si = 0; si < spec.spacings_deg.size(); ++si) {
    const double spacing = spec.spacings_deg[si];
    const ScenarioConfig scen = scenario_for_spacing(spec, spacing);
    const Dictionary dict =
        build_dictionary(scen.grid, scen.n_channels, scen.spacing_ratio);
    ScenarioConfig h0 = scen;
    h0.jammers.clear();
    h0.ramp.reset();
    h0.offgrid_half_width_deg = 0.0;
    for (DetectorKind det : spec.detectors) {
      DetectorConfig config{spec.estimator, spec.spice, 0.0};
      const double eta = calibrate_threshold(
          det, h0, dict, spec.p_fjd, spec.n_trials_threshold,
          derive_seed(spec.seed, {kStreamThreshold, si, detector_id(det)}),
          config);
      table.add({to_string(det), 0.0, spacing, "threshold", eta,
                 spec.n_trials_threshold});
      config.threshold = eta;
      for (std::size_t ji = 0; ji < spec.jnr_sweep_db.size(); ++ji) {
        const ScenarioConfig scen_j =
            detail::with_jnr(scen, spec.jnr_sweep_db[ji]);
        std::vector<char> hit(static_cast<std::size_t>(spec.n_trials_metrics),
                              0);
        parallel_for(hit.size(), [&](std::size_t t) {
          Rng rng(derive_seed(spec.seed,
                              {kStreamTrial, si, detector_id(det), ji, t}));
          const ScenarioConfig scen_t = apply_offgrid_jitter(scen_j, rng);
          const SnapshotSet z = draw_scenario(scen_t, rng.next_u64());
          hit[t] = run_detector(det, z, scen.noise_power, dict, config)
                       .decision
                       ? 1
                       : 0;
        });
        long hits = 0;
        for (char h : hit) hits += h;
        table.add({to_string(det), spec.jnr_sweep_db[ji], spacing, "pjd",
                   static_cast<double>(hits) / spec.n_trials_metrics,
                   spec.n_trials_metrics});
      }
    }
  }
  return table;
}

// Estimation quality on on-grid scenarios: RMS Hausdorff distance between
// true and fused angle sets plus RMS missed / ghost counts, after ghost
// thresholding at the calibrated tau.
inline ResultTable run_estimation_metrics(const ExperimentSpec& spec) {
  spec.validate();
  ResultTable table;
  for (std::size_t si = 0; si < spec.spacings_deg.size(); ++si) {
    const double spacing = spec.spacings_deg[si];
    const ScenarioConfig scen = scenario_for_spacing(spec, spacing);
    const Dictionary dict =
        build_dictionary(scen.grid, scen.n_channels, scen.spacing_ratio);
    const double match_tol = 1.5 * spacing;
    for (DetectorKind det : spec.detectors) {
      const double tau = detail::ghost_threshold_for(spec, scen, dict, det, si);
      table.add({to_string(det), 0.0, spacing, "ghost_threshold", tau,
                 spec.n_trials_ghost});
      const DetectorConfig config{spec.estimator, spec.spice, 0.0};
      for (std::size_t ji = 0; ji < spec.jnr_sweep_db.size(); ++ji) {
        const ScenarioConfig scen_j =
            detail::with_jnr(scen, spec.jnr_sweep_db[ji]);
        const std::size_t n = static_cast<std::size_t>(spec.n_trials_metrics);
        std::vector<double> haus_sq(n, 0.0);
        std::vector<double> missed_sq(n, 0.0);
        std::vector<double> ghost_sq(n, 0.0);
        parallel_for(n, [&](std::size_t t) {
          Rng rng(derive_seed(spec.seed,
                              {kStreamTrial, si, detector_id(det), ji, t}));
          const ScenarioConfig scen_t = apply_offgrid_jitter(scen_j, rng);
          const SnapshotSet z = draw_scenario(scen_t, rng.next_u64());
          const SparseEstimate est =
              detail::run_estimator(det, z, scen.noise_power, dict, config);
          const FusedReport fused =
              fuse_peaks(est.d, scen.grid, spec.subset_cardinality, tau);
          const std::vector<double> truth = detail::true_angles(scen_t);
          const double h = fused.size() == 0
                               ? scen.grid.span_deg()
                               : hausdorff(truth, fused.angles_deg);
          haus_sq[t] = h * h;
          const MissedGhostCount mg =
              count_missed_ghosts(truth, fused, match_tol);
          missed_sq[t] = static_cast<double>(mg.missed) * mg.missed;
          ghost_sq[t] = static_cast<double>(mg.ghosts) * mg.ghosts;
        });
        auto rms = [n](const std::vector<double>& sq) {
          double s = 0.0;
          for (double v : sq) s += v;
          return std::sqrt(s / static_cast<double>(n));
        };
        const double jnr = spec.jnr_sweep_db[ji];
        table.add({to_string(det), jnr, spacing, "hausdorff_rms", rms(haus_sq),
                   spec.n_trials_metrics});
        table.add({to_string(det), jnr, spacing, "missed_rms", rms(missed_sq),
                   spec.n_trials_metrics});
        table.add({to_string(det), jnr, spacing, "ghosts_rms", rms(ghost_sq),
                   spec.n_trials_metrics});
      }
    }
  }
  return table;
}

// Declared-order histogram at a fixed JNR: counts of fused detection counts
// 1..nj_max plus an out-of-range bucket (0 or > nj_max). Counts conserve the
// trial total.
inline ResultTable run_classification_histogram(const ExperimentSpec& spec) {
  spec.validate();
  ResultTable table;
  const double jnr = spec.classification_jnr_db;
  for (std::size_t si = 0; si < spec.spacings_deg.size(); ++si) {
    const double spacing = spec.spacings_deg[si];
    const ScenarioConfig scen = scenario_for_spacing(spec, spacing);
    const Dictionary dict =
        build_dictionary(scen.grid, scen.n_channels, scen.spacing_ratio);
    for (DetectorKind det : spec.detectors) {
      const double tau = detail::ghost_threshold_for(spec, scen, dict, det, si);
      table.add({to_string(det), 0.0, spacing, "ghost_threshold", tau,
                 spec.n_trials_ghost});
      const DetectorConfig config{spec.estimator, spec.spice, 0.0};
      const ScenarioConfig scen_j = detail::with_jnr(scen, jnr);
      const std::size_t n = static_cast<std::size_t>(spec.n_trials_metrics);
      std::vector<int> declared(n, 0);
      parallel_for(n, [&](std::size_t t) {
        Rng rng(derive_seed(spec.seed,
                            {kStreamTrial, si, detector_id(det), 2000, t}));
        const ScenarioConfig scen_t = apply_offgrid_jitter(scen_j, rng);
        const SnapshotSet z = draw_scenario(scen_t, rng.next_u64());
        const SparseEstimate est =
            detail::run_estimator(det, z, scen.noise_power, dict, config);
        declared[t] = static_cast<int>(
            fuse_peaks(est.d, scen.grid, spec.subset_cardinality, tau).size());
      });
      std::vector<long> counts(static_cast<std::size_t>(spec.estimator.nj_max) + 1,
                               0);
      long other = 0;
      for (int dcl : declared) {
        if (dcl >= 1 && dcl <= spec.estimator.nj_max)
          ++counts[static_cast<std::size_t>(dcl)];
        else
          ++other;
      }
      for (int order = 1; order <= spec.estimator.nj_max; ++order)
        table.add({to_string(det), jnr, spacing,
                   "order_" + std::to_string(order),
                   static_cast<double>(counts[static_cast<std::size_t>(order)]),
                   spec.n_trials_metrics});
      table.add({to_string(det), jnr, spacing, "order_other",
                 static_cast<double>(other), spec.n_trials_metrics});
    }
  }
  return table;
}

// Off-grid study: per-trial jitter plus the selected metric families.
// Detection and classification reuse their runners (which honor the jitter
// window); the AOA family reports RMS angular error of matched detections,
// with empty-detection trials excluded and counted.
inline ResultTable run_offgrid_study(const ExperimentSpec& spec) {
  spec.validate();
  ResultTable table;
  auto has_family = [&](const char* f) {
    return std::count(spec.families.begin(), spec.families.end(), f) > 0;
  };
  if (has_family("detection")) table.merge(run_detection_curve(spec));
  if (has_family("classification"))
    table.merge(run_classification_histogram(spec));
  if (!has_family("aoa")) return table;

  for (std::size_t si = 0; si < spec.spacings_deg.size(); ++si) {
    const double spacing = spec.spacings_deg[si];
    const ScenarioConfig scen = scenario_for_spacing(spec, spacing);
    const Dictionary dict =
        build_dictionary(scen.grid, scen.n_channels, scen.spacing_ratio);
    for (DetectorKind det : spec.detectors) {
      const double tau = detail::ghost_threshold_for(spec, scen, dict, det, si);
      if (!has_family("detection") && !has_family("classification"))
        table.add({to_string(det), 0.0, spacing, "ghost_threshold", tau,
                   spec.n_trials_ghost});
      const DetectorConfig config{spec.estimator, spec.spice, 0.0};
      for (std::size_t ji = 0; ji < spec.jnr_sweep_db.size(); ++ji) {
        const ScenarioConfig scen_j =
            detail::with_jnr(scen, spec.jnr_sweep_db[ji]);
        const std::size_t n = static_cast<std::size_t>(spec.n_trials_metrics);
        std::vector<double> err_sum(n, 0.0);
        std::vector<int> err_count(n, 0);
        std::vector<char> empty(n, 0);
        parallel_for(n, [&](std::size_t t) {
          Rng rng(derive_seed(spec.seed, {kStreamTrial, si, detector_id(det),
                                          ji + 1000, t}));
          const ScenarioConfig scen_t = apply_offgrid_jitter(scen_j, rng);
          const SnapshotSet z = draw_scenario(scen_t, rng.next_u64());
          const SparseEstimate est =
              detail::run_estimator(det, z, scen.noise_power, dict, config);
          const FusedReport fused =
              fuse_peaks(est.d, scen.grid, spec.subset_cardinality, tau);
          const std::vector<double> errs =
              aoa_sq_errors(detail::true_angles(scen_t), fused);
          if (errs.empty()) {
            empty[t] = 1;
            return;
          }
          for (double e : errs) err_sum[t] += e;
          err_count[t] = static_cast<int>(errs.size());
        });
        double total = 0.0;
        long count = 0, excluded = 0;
        for (std::size_t t = 0; t < n; ++t) {
          total += err_sum[t];
          count += err_count[t];
          excluded += empty[t];
        }
        const double jnr = spec.jnr_sweep_db[ji];
        const double rms = count > 0 ? std::sqrt(total / count)
                                     : scen.grid.span_deg();
        table.add({to_string(det), jnr, spacing, "aoa_rms_deg", rms,
                   spec.n_trials_metrics});
        table.add({to_string(det), jnr, spacing, "aoa_excluded",
                   static_cast<double>(excluded), spec.n_trials_metrics});
      }
    }
  }
  return table;
}

// Single-draw showcase (typically K = 1): runs the joint estimator once and
// emits the full power profile over the grid.
inline ResultTable run_single_snapshot_demo(const ExperimentSpec& spec) {
  spec.validate();
  ResultTable table;
  const double spacing = spec.spacings_deg.front();
  ScenarioConfig scen = spec.scenario;
  scen.grid = AngleGrid::uniform(spec.sector_start_deg, spec.sector_stop_deg,
                                 spacing);
  const Dictionary dict =
      build_dictionary(scen.grid, scen.n_channels, scen.spacing_ratio);
  const CMat cov = scenario_covariance(scen);
  const SnapshotSet z = draw_snapshots(
      cov, scen.n_snapshots, derive_seed(spec.seed, {kStreamDemo}));
  const SparseEstimate est =
      estimate_joint(z.sample_cov, dict, z.n_snapshots(), spec.estimator);
  const double jnr = scen.jammers.front().jnr_db;
  const char* det = to_string(DetectorKind::kSdcLrt);
  for (std::size_t l = 0; l < scen.grid.size(); ++l)
    table.add({det, jnr, spacing,
               "power_at_" + format_double(scen.grid.angles_deg[l]),
               est.d(static_cast<Eigen::Index>(l)), 1});
  table.add({det, jnr, spacing, "noise_power", est.noise_power, 1});
  table.add({det, jnr, spacing, "order", static_cast<double>(est.order), 1});
  return table;
}

inline ResultTable run_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::kDetectionCurve: return run_detection_curve(spec);
    case ExperimentKind::kEstimationMetrics:
      return run_estimation_metrics(spec);
    case ExperimentKind::kClassification:
      return run_classification_histogram(spec);
    case ExperimentKind::kOffgridStudy: return run_offgrid_study(spec);
    case ExperimentKind::kSingleSnapshotDemo:
      return run_single_snapshot_demo(spec);
  }
  throw std::invalid_argument("unknown experiment kind");
}

// Threshold-only run used by the calibrate subcommand: detection thresholds
// for every (detector, spacing), plus ghost thresholds for the estimators
// when the experiment kind uses them.
inline ResultTable run_calibration(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.kind == ExperimentKind::kSingleSnapshotDemo)
    throw config_error("calibrate: not applicable to the demo preset");
  ResultTable table;
  const bool wants_ghost = spec.kind != ExperimentKind::kDetectionCurve;
  for (std::size_t si = 0; si < spec.spacings_deg.size(); ++si) {
    const double spacing = spec.spacings_deg[si];
    const ScenarioConfig scen = scenario_for_spacing(spec, spacing);
    const Dictionary dict =
        build_dictionary(scen.grid, scen.n_channels, scen.spacing_ratio);
    ScenarioConfig h0 = scen;
    h0.jammers.clear();
    h0.ramp.reset();
    h0.offgrid_half_width_deg = 0.0;
    for (DetectorKind det : spec.detectors) {
      DetectorConfig config{spec.estimator, spec.spice, 0.0};
      const double eta = calibrate_threshold(
          det, h0, dict, spec.p_fjd, spec.n_trials_threshold,
          derive_seed(spec.seed, {kStreamThreshold, si, detector_id(det)}),
          config);
      table.add({to_string(det), 0.0, spacing, "threshold", eta,
                 spec.n_trials_threshold});
      if (wants_ghost)
        table.add({to_string(det), 0.0, spacing, "ghost_threshold",
                   detail::ghost_threshold_for(spec, scen, dict, det, si),
                   spec.n_trials_ghost});
    }
  }
  return table;
}

}  // namespace nlj
