#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "nlj/common.hpp"
#include "nlj/rng.hpp"

namespace nlj {

// Uniform angular grid in degrees. Invariants: at least 2 points, strictly
// increasing, uniform step (within 1e-12 deg of spacing_deg).
struct AngleGrid {
  std::vector<double> angles_deg;
  double spacing_deg = 0.0;

  // Points start, start + spacing, ... up to the largest value <= stop
  // (with a 1e-9 deg slack so exact endpoints are kept).
  static AngleGrid uniform(double start_deg, double stop_deg,
                           double spacing_deg) {
    if (!(spacing_deg > 0.0))
      throw std::invalid_argument("AngleGrid: spacing must be positive");
    if (!(stop_deg > start_deg))
      throw std::invalid_argument("AngleGrid: stop must exceed start");
    AngleGrid g;
    g.spacing_deg = spacing_deg;
    for (int k = 0;; ++k) {
      const double a = start_deg + k * spacing_deg;
      if (a > stop_deg + 1e-9) break;
      g.angles_deg.push_back(a);
    }
    g.validate();
    return g;
  }

  std::size_t size() const { return angles_deg.size(); }

  double span_deg() const { return angles_deg.back() - angles_deg.front(); }

  void validate() const {
    if (angles_deg.size() < 2)
      throw std::invalid_argument("AngleGrid: need at least 2 points");
    for (std::size_t i = 1; i < angles_deg.size(); ++i) {
      const double step = angles_deg[i] - angles_deg[i - 1];
      if (!(step > 0.0))
        throw std::invalid_argument("AngleGrid: angles must increase");
      if (std::abs(step - spacing_deg) > 1e-12)
        throw std::invalid_argument("AngleGrid: non-uniform spacing");
    }
  }

  std::size_t closest_index(double angle_deg) const {
    std::size_t best = 0;
    double best_dist = std::abs(angles_deg[0] - angle_deg);
    for (std::size_t i = 1; i < angles_deg.size(); ++i) {
      const double dist = std::abs(angles_deg[i] - angle_deg);
      if (dist < best_dist) {
        best_dist = dist;
        best = i;
      }
    }
    return best;
  }

  bool contains(double angle_deg, double tol_deg = 1e-9) const {
    return std::abs(angles_deg[closest_index(angle_deg)] - angle_deg) <=
           tol_deg;
  }
};

// Unit-norm steering vector of an N-element uniform linear array:
// v_m = exp(j 2 pi (d/lambda) m sin theta) / sqrt(N), m = 0..N-1.
inline CVec steering_vector(double theta_deg, int n_channels,
                            double spacing_ratio = 0.5) {
  if (n_channels < 2)
    throw std::invalid_argument("steering_vector: need at least 2 channels");
  if (!(std::abs(theta_deg) < 90.0))
    throw std::invalid_argument("steering_vector: |theta| must be < 90 deg");
  if (!(spacing_ratio > 0.0))
    throw std::invalid_argument("steering_vector: spacing ratio must be > 0");
  const double phase_step =
      2.0 * kPi * spacing_ratio * std::sin(deg_to_rad(theta_deg));
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_channels));
  CVec v(n_channels);
  for (int m = 0; m < n_channels; ++m)
    v(m) = std::polar(scale, phase_step * m);
  return v;
}

// Steering dictionary: columns are unit-norm steering vectors at the grid
// angles. N x L with L = grid.size().
struct Dictionary {
  CMat matrix;
  AngleGrid grid;
  int n_channels = 0;
  double spacing_ratio = 0.5;

  std::size_t size() const { return grid.size(); }
  CVec column(std::size_t l) const { return matrix.col(l); }
};

inline Dictionary build_dictionary(const AngleGrid& grid, int n_channels,
                                   double spacing_ratio = 0.5) {
  grid.validate();
  Dictionary dict;
  dict.grid = grid;
  dict.n_channels = n_channels;
  dict.spacing_ratio = spacing_ratio;
  dict.matrix.resize(n_channels, static_cast<Eigen::Index>(grid.size()));
  for (std::size_t l = 0; l < grid.size(); ++l)
    dict.matrix.col(static_cast<Eigen::Index>(l)) =
        steering_vector(grid.angles_deg[l], n_channels, spacing_ratio);
  return dict;
}

// M = noise_power * I + V diag(d) V-dagger. d >= 0 elementwise.
inline CMat interference_covariance(double noise_power, const RVec& d,
                                    const Dictionary& dict) {
  if (!(noise_power > 0.0))
    throw std::invalid_argument(
        "interference_covariance: noise power must be positive");
  if (d.size() != static_cast<Eigen::Index>(dict.size()))
    throw std::invalid_argument(
        "interference_covariance: d length must match dictionary");
  const int n = dict.n_channels;
  CMat m = CMat::Zero(n, n);
  for (Eigen::Index l = 0; l < d.size(); ++l) {
    if (d(l) < 0.0)
      throw std::invalid_argument(
          "interference_covariance: d must be nonnegative");
    if (d(l) > 0.0)
      m.noalias() += d(l) * (dict.matrix.col(l) * dict.matrix.col(l).adjoint());
  }
  m += noise_power * CMat::Identity(n, n);
  return m;
}

struct JammerSpec {
  double angle_deg = 0.0;
  double jnr_db = 0.0;
};

// Per-snapshot power ramp: column i (0-based) gets a JNR offset of
// min(0, start_offset_db + i * step_db) dB, i.e. the ramp ends once it
// reaches the nominal power.
struct PowerRamp {
  double start_offset_db = -5.0;
  double step_db = 1.0;

  double offset_db(int column) const {
    return std::min(0.0, start_offset_db + column * step_db);
  }
};

// Scenario under test. Jammer powers are relative to the noise floor:
// d_j = noise_power * 10^(jnr_db / 10).
struct ScenarioConfig {
  int n_channels = 32;
  int n_snapshots = 64;
  double noise_power = 2.0;
  std::vector<JammerSpec> jammers;
  AngleGrid grid;
  double spacing_ratio = 0.5;
  // 0 = jammers sit exactly on their nominal angles; w > 0 = each trial
  // jitters each angle uniformly in [nominal - w, nominal + w].
  double offgrid_half_width_deg = 0.0;
  std::optional<PowerRamp> ramp;

  void validate() const {
    grid.validate();
    if (n_channels < 2)
      throw std::invalid_argument("ScenarioConfig: need at least 2 channels");
    if (n_snapshots < 1)
      throw std::invalid_argument("ScenarioConfig: need at least 1 snapshot");
    if (!(noise_power >= 1.0))
      throw std::invalid_argument("ScenarioConfig: noise power must be >= 1");
    if (n_snapshots < static_cast<int>(jammers.size()))
      throw std::invalid_argument(
          "ScenarioConfig: snapshots must be >= jammer count");
    if (offgrid_half_width_deg < 0.0)
      throw std::invalid_argument("ScenarioConfig: negative jitter width");
    for (const auto& j : jammers) {
      if (!(std::abs(j.angle_deg) < 90.0))
        throw std::invalid_argument("ScenarioConfig: jammer angle out of range");
      if (offgrid_half_width_deg == 0.0 && !grid.contains(j.angle_deg))
        throw std::invalid_argument(
            "ScenarioConfig: on-grid scenario has an off-grid jammer angle");
    }
  }

  double jammer_power(std::size_t j, double extra_db = 0.0) const {
    return noise_power * db_to_linear(jammers[j].jnr_db + extra_db);
  }
};

// True covariance of one snapshot; jammer angles are taken as final (any
// jitter has been applied by the caller). extra_db shifts every jammer's
// JNR, which is how the ramp builds per-column covariances.
inline CMat scenario_covariance(const ScenarioConfig& cfg,
                                double extra_db = 0.0) {
  const int n = cfg.n_channels;
  CMat m = cfg.noise_power * CMat::Identity(n, n);
  for (std::size_t j = 0; j < cfg.jammers.size(); ++j) {
    const CVec v =
        steering_vector(cfg.jammers[j].angle_deg, n, cfg.spacing_ratio);
    m.noalias() += cfg.jammer_power(j, extra_db) * (v * v.adjoint());
  }
  return m;
}

// Returns a copy of cfg with each jammer angle jittered uniformly within the
// configured window. The draws happen in jammer order, so a fixed rng state
// yields a fixed scenario.
inline ScenarioConfig apply_offgrid_jitter(const ScenarioConfig& cfg,
                                           Rng& rng) {
  ScenarioConfig out = cfg;
  if (cfg.offgrid_half_width_deg > 0.0) {
    for (auto& j : out.jammers)
      j.angle_deg += rng.next_uniform(-cfg.offgrid_half_width_deg,
                                      cfg.offgrid_half_width_deg);
  }
  return out;
}

// K complex-Gaussian array snapshots plus their scatter matrix S = Z Z-dagger
// (Hermitian PSD by construction).
struct SnapshotSet {
  CMat data;        // N x K
  CMat sample_cov;  // N x N

  int n_channels() const { return static_cast<int>(data.rows()); }
  int n_snapshots() const { return static_cast<int>(data.cols()); }
};

namespace detail {

// Cholesky factor for coloring i.i.d. CN(0,1) draws. Throws numeric_error if
// cov is not positive definite.
inline Eigen::LLT<CMat> snapshot_chol(const CMat& cov) {
  Eigen::LLT<CMat> llt(cov);
  if (llt.info() != Eigen::Success)
    throw numeric_error("draw_snapshots: covariance is not positive definite");
  return llt;
}

inline CVec white_snapshot(int n, Rng& rng) {
  CVec u(n);
  for (int i = 0; i < n; ++i) u(i) = rng.next_cgaussian();
  return u;
}

}  // namespace detail

// z_k ~ CN(0, cov) i.i.d., k = 1..k_snapshots.
inline SnapshotSet draw_snapshots(const CMat& cov, int k_snapshots,
                                  std::uint64_t seed) {
  if (cov.rows() != cov.cols() || cov.rows() < 1)
    throw std::invalid_argument("draw_snapshots: covariance must be square");
  if (k_snapshots < 1)
    throw std::invalid_argument("draw_snapshots: need at least 1 snapshot");
  const int n = static_cast<int>(cov.rows());
  const auto llt = detail::snapshot_chol(cov);
  Rng rng(seed);
  SnapshotSet z;
  z.data.resize(n, k_snapshots);
  for (int k = 0; k < k_snapshots; ++k)
    z.data.col(k) = llt.matrixL() * detail::white_snapshot(n, rng);
  z.sample_cov = z.data * z.data.adjoint();
  return z;
}

// Ramped variant: column i is drawn from the scenario covariance with every
// jammer offset by ramp.offset_db(i). Requires cfg.ramp.
inline SnapshotSet draw_ramped_snapshots(const ScenarioConfig& cfg,
                                         std::uint64_t seed) {
  if (!cfg.ramp)
    throw std::invalid_argument("draw_ramped_snapshots: scenario has no ramp");
  const int n = cfg.n_channels;
  const int k_snapshots = cfg.n_snapshots;
  Rng rng(seed);
  SnapshotSet z;
  z.data.resize(n, k_snapshots);
  double current_offset = std::nan("");
  Eigen::LLT<CMat> llt;
  for (int k = 0; k < k_snapshots; ++k) {
    const double offset = cfg.ramp->offset_db(k);
    if (offset != current_offset) {
      llt = detail::snapshot_chol(scenario_covariance(cfg, offset));
      current_offset = offset;
    }
    z.data.col(k) = llt.matrixL() * detail::white_snapshot(n, rng);
  }
  z.sample_cov = z.data * z.data.adjoint();
  return z;
}

// Draws one trial's snapshots for a scenario (ramped or not).
inline SnapshotSet draw_scenario(const ScenarioConfig& cfg,
                                 std::uint64_t seed) {
  if (cfg.ramp) return draw_ramped_snapshots(cfg, seed);
  return draw_snapshots(scenario_covariance(cfg), cfg.n_snapshots, seed);
}

}  // namespace nlj
